#pragma once

// Emotion model: the seven-mood vocabulary, intensity scaling, the
// mood -> facial channel table and the hold/cosine decay back to neutral.
// Everything here is a pure function over immutable values.

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <numbers>
#include <optional>
#include <string>
#include <string_view>

#include "e3va/error.hpp"

namespace e3va {

/// Milliseconds on whatever clock the caller drives (wall or virtual).
using TimestampMs = std::int64_t;

enum class Mood { Neutral, Happy, Sad, Angry, Fearful, Surprised, Disgust };

inline constexpr std::array<Mood, 7> kAllMoods = {
    Mood::Neutral, Mood::Happy,     Mood::Sad,    Mood::Angry,
    Mood::Fearful, Mood::Surprised, Mood::Disgust};

inline constexpr std::string_view to_string(Mood mood) noexcept {
  switch (mood) {
    case Mood::Neutral: return "neutral";
    case Mood::Happy: return "happy";
    case Mood::Sad: return "sad";
    case Mood::Angry: return "angry";
    case Mood::Fearful: return "fearful";
    case Mood::Surprised: return "surprised";
    case Mood::Disgust: return "disgust";
  }
  return "neutral";
}

/// Exact (case-sensitive) canonical name lookup.
inline std::optional<Mood> mood_from_string(std::string_view name) noexcept {
  for (Mood m : kAllMoods) {
    if (to_string(m) == name) return m;
  }
  return std::nullopt;
}

/// Strength of a mood: 1 = slight, 2 = moderate, 3 = very.
class Intensity {
 public:
  static constexpr int kMin = 1;
  static constexpr int kMax = 3;

  constexpr Intensity() = default;

  /// Throws InvalidArgument outside {1,2,3}.
  explicit Intensity(int value) : value_(value) {
    if (value < kMin || value > kMax) {
      throw Error(ErrorKind::InvalidArgument,
                  "intensity must be 1, 2 or 3, got " + std::to_string(value));
    }
  }

  static constexpr Intensity clamped(long long value) noexcept {
    Intensity i;
    i.value_ = static_cast<int>(std::clamp<long long>(value, kMin, kMax));
    return i;
  }

  constexpr int value() const noexcept { return value_; }

  /// Channel multiplier for this intensity.
  constexpr double scale() const noexcept {
    switch (value_) {
      case 1: return 0.4;
      case 2: return 0.7;
      default: return 1.0;
    }
  }

  friend constexpr bool operator==(Intensity, Intensity) = default;

 private:
  int value_ = 1;
};

inline constexpr std::array<Intensity, 3> kAllIntensities = {
    Intensity::clamped(1), Intensity::clamped(2), Intensity::clamped(3)};

enum class Channel {
  BrowInnerUp,
  BrowDown,
  BrowOuterUp,
  EyeWide,
  EyeSquint,
  NoseSneer,
  UpperLipRaise,
  MouthSmile,
  MouthFrown,
  JawOpen,
};

inline constexpr std::size_t kChannelCount = 10;

inline constexpr std::array<Channel, kChannelCount> kAllChannels = {
    Channel::BrowInnerUp, Channel::BrowDown,      Channel::BrowOuterUp,
    Channel::EyeWide,     Channel::EyeSquint,     Channel::NoseSneer,
    Channel::UpperLipRaise, Channel::MouthSmile,  Channel::MouthFrown,
    Channel::JawOpen};

inline constexpr std::string_view to_string(Channel c) noexcept {
  switch (c) {
    case Channel::BrowInnerUp: return "browInnerUp";
    case Channel::BrowDown: return "browDown";
    case Channel::BrowOuterUp: return "browOuterUp";
    case Channel::EyeWide: return "eyeWide";
    case Channel::EyeSquint: return "eyeSquint";
    case Channel::NoseSneer: return "noseSneer";
    case Channel::UpperLipRaise: return "upperLipRaise";
    case Channel::MouthSmile: return "mouthSmile";
    case Channel::MouthFrown: return "mouthFrown";
    case Channel::JawOpen: return "jawOpen";
  }
  return "";
}

inline std::optional<Channel> channel_from_string(std::string_view name) noexcept {
  for (Channel c : kAllChannels) {
    if (to_string(c) == name) return c;
  }
  return std::nullopt;
}

/// Facial channel weights, each held in [0,1]. A default-constructed value is
/// the neutral rest pose.
class BlendWeights {
 public:
  constexpr BlendWeights() = default;

  constexpr double operator[](Channel c) const noexcept {
    return values_[static_cast<std::size_t>(c)];
  }

  /// Stores `w` clamped into [0,1]; NaN is stored as 0.
  constexpr void set(Channel c, double w) noexcept {
    values_[static_cast<std::size_t>(c)] = (w >= 0.0) ? std::min(w, 1.0) : 0.0;
  }

  constexpr BlendWeights scaled(double k) const noexcept {
    BlendWeights out;
    for (Channel c : kAllChannels) out.set(c, (*this)[c] * k);
    return out;
  }

  constexpr bool is_zero() const noexcept {
    return std::all_of(values_.begin(), values_.end(),
                       [](double v) { return v == 0.0; });
  }

  double max_abs_diff(const BlendWeights& other) const noexcept {
    double d = 0.0;
    for (std::size_t i = 0; i < kChannelCount; ++i) {
      d = std::max(d, std::abs(values_[i] - other.values_[i]));
    }
    return d;
  }

  friend constexpr bool operator==(const BlendWeights&,
                                   const BlendWeights&) = default;

 private:
  std::array<double, kChannelCount> values_{};
};

/// Parsed output of the sentiment prompt. `degraded` marks readings produced
/// by the fallback or clamping rules; `raw` keeps the model's reply verbatim.
struct SentimentReading {
  Mood mood = Mood::Neutral;
  Intensity intensity;
  bool degraded = false;
  std::string raw;

  friend bool operator==(const SentimentReading&,
                         const SentimentReading&) = default;
};

/// Envelope timing. Construct through make() to get the invariants checked.
struct DecayParams {
  double hold_ms = 4000.0;
  double decay_ms = 2000.0;

  static DecayParams make(double hold_ms, double decay_ms) {
    if (!(hold_ms >= 0.0) || !std::isfinite(hold_ms)) {
      throw Error(ErrorKind::InvalidArgument, "hold_ms must be >= 0");
    }
    if (!(decay_ms > 0.0) || !std::isfinite(decay_ms)) {
      throw Error(ErrorKind::InvalidArgument, "decay_ms must be > 0");
    }
    return DecayParams{hold_ms, decay_ms};
  }

  friend bool operator==(const DecayParams&, const DecayParams&) = default;
};

struct ExpressionState {
  SentimentReading reading;
  TimestampMs onset = 0;
  DecayParams params;
};

namespace detail {

struct TableEntry {
  Channel channel;
  double weight;
};

// Full-intensity rows; unlisted channels are 0.
inline constexpr std::array<TableEntry, 3> kHappy = {
    {{Channel::MouthSmile, 1.0},
     {Channel::EyeSquint, 0.4},
     {Channel::BrowOuterUp, 0.3}}};
inline constexpr std::array<TableEntry, 3> kSad = {
    {{Channel::BrowInnerUp, 0.9},
     {Channel::MouthFrown, 0.8},
     {Channel::EyeSquint, 0.2}}};
inline constexpr std::array<TableEntry, 4> kAngry = {
    {{Channel::BrowDown, 1.0},
     {Channel::EyeSquint, 0.6},
     {Channel::MouthFrown, 0.7},
     {Channel::NoseSneer, 0.4}}};
inline constexpr std::array<TableEntry, 4> kFearful = {
    {{Channel::BrowInnerUp, 0.8},
     {Channel::EyeWide, 0.9},
     {Channel::JawOpen, 0.4},
     {Channel::MouthFrown, 0.3}}};
inline constexpr std::array<TableEntry, 4> kSurprised = {
    {{Channel::BrowOuterUp, 0.9},
     {Channel::BrowInnerUp, 0.5},
     {Channel::EyeWide, 1.0},
     {Channel::JawOpen, 0.6}}};
inline constexpr std::array<TableEntry, 4> kDisgust = {
    {{Channel::NoseSneer, 1.0},
     {Channel::UpperLipRaise, 0.8},
     {Channel::BrowDown, 0.5},
     {Channel::EyeSquint, 0.5}}};

template <std::size_t N>
constexpr BlendWeights row(const std::array<TableEntry, N>& entries, double scale) {
  BlendWeights w;
  for (const auto& e : entries) w.set(e.channel, e.weight * scale);
  return w;
}

}  // namespace detail

/// Table row for `mood`, scaled by the intensity multiplier. Neutral is the
/// zero pose at every intensity.
constexpr BlendWeights weights_for(Mood mood, Intensity intensity) noexcept {
  const double s = intensity.scale();
  switch (mood) {
    case Mood::Neutral: return BlendWeights{};
    case Mood::Happy: return detail::row(detail::kHappy, s);
    case Mood::Sad: return detail::row(detail::kSad, s);
    case Mood::Angry: return detail::row(detail::kAngry, s);
    case Mood::Fearful: return detail::row(detail::kFearful, s);
    case Mood::Surprised: return detail::row(detail::kSurprised, s);
    case Mood::Disgust: return detail::row(detail::kDisgust, s);
  }
  return BlendWeights{};
}

/// 1 while holding, cosine ease to 0 over decay_ms, 0 afterwards.
inline double decay_envelope(double elapsed_ms, const DecayParams& params) noexcept {
  if (elapsed_ms <= params.hold_ms) return 1.0;
  const double end = params.hold_ms + params.decay_ms;
  if (elapsed_ms >= end) return 0.0;
  const double u = (elapsed_ms - params.hold_ms) / params.decay_ms;
  return 0.5 * (1.0 + std::cos(std::numbers::pi * u));
}

inline BlendWeights expression_at(const ExpressionState& state, TimestampMs now) {
  if (now < state.onset) {
    throw Error(ErrorKind::ClockRegression,
                "expression evaluated at " + std::to_string(now) +
                    " before onset " + std::to_string(state.onset));
  }
  const double envelope =
      decay_envelope(static_cast<double>(now - state.onset), state.params);
  return weights_for(state.reading.mood, state.reading.intensity).scaled(envelope);
}

/// A new reading always restarts the hold at `now`.
inline ExpressionState apply_reading(const ExpressionState& state,
                                     SentimentReading reading, TimestampMs now) {
  if (now < state.onset) {
    throw Error(ErrorKind::ClockRegression, "reading applied before current onset");
  }
  return ExpressionState{std::move(reading), now, state.params};
}

}  // namespace e3va
