#pragma once

// Sentiment request construction and tolerant parsing of the model's reply.

#include <charconv>
#include <cmath>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "e3va/affect.hpp"
#include "e3va/error.hpp"
#include "e3va/prompts.hpp"
#include "e3va/text.hpp"
#include "json.hpp"

namespace e3va {

struct SentimentRequest {
  std::string system_prompt;
  std::string user_text;

  std::vector<Message> messages() const {
    return {Message{MessageRole::System, system_prompt},
            Message{MessageRole::User, user_text}};
  }
};

/// Each request stands alone: no history is attached.
inline SentimentRequest build_sentiment_request(std::string_view user_text,
                                                std::string system_prompt =
                                                    prompts::sentiment_prompt()) {
  if (trim_view(user_text).empty()) {
    throw Error(ErrorKind::EmptyUtterance, "utterance is blank");
  }
  return SentimentRequest{std::move(system_prompt), std::string(user_text)};
}

/// The canonical reply schema, e.g. {"mood":"happy","intensity":2}.
inline std::string canonical_sentiment_json(Mood mood, Intensity intensity) {
  nlohmann::json j;
  j["mood"] = std::string(to_string(mood));
  j["intensity"] = intensity.value();
  return j.dump();
}

namespace detail {

// Index one past the brace closing the object opened at `open`, honouring
// JSON string literals. nullopt when the object never closes.
inline std::optional<std::size_t> matching_brace(std::string_view s,
                                                 std::size_t open) noexcept {
  int depth = 0;
  bool in_string = false;
  bool escaped = false;
  for (std::size_t i = open; i < s.size(); ++i) {
    const char c = s[i];
    if (in_string) {
      if (escaped) {
        escaped = false;
      } else if (c == '\\') {
        escaped = true;
      } else if (c == '"') {
        in_string = false;
      }
      continue;
    }
    if (c == '"') {
      in_string = true;
    } else if (c == '{') {
      ++depth;
    } else if (c == '}') {
      if (--depth == 0) return i + 1;
    }
  }
  return std::nullopt;
}

// Bounds the work on pathological inputs such as megabytes of '{'.
inline constexpr int kMaxObjectCandidates = 32;

inline std::optional<nlohmann::json> first_json_object(std::string_view raw) {
  int attempts = 0;
  for (std::size_t pos = raw.find('{'); pos != std::string_view::npos;
       pos = raw.find('{', pos + 1)) {
    if (++attempts > kMaxObjectCandidates) break;
    auto end = matching_brace(raw, pos);
    if (!end) continue;
    auto parsed = nlohmann::json::parse(raw.substr(pos, *end - pos), nullptr,
                                        /*allow_exceptions=*/false);
    if (!parsed.is_discarded() && parsed.is_object()) return parsed;
  }
  return std::nullopt;
}

inline std::optional<Mood> parse_mood(const nlohmann::json& v) {
  if (!v.is_string()) return std::nullopt;
  const std::string name = ascii_lower(trim_view(v.get_ref<const std::string&>()));
  if (name == "fear") return Mood::Fearful;
  if (name == "disgusted") return Mood::Disgust;
  return mood_from_string(name);
}

struct ParsedIntensity {
  Intensity value;
  bool exact;  // false when rounding or clamping changed the number
};

inline std::optional<ParsedIntensity> from_real(double d) {
  if (!std::isfinite(d)) return std::nullopt;
  const double bounded = std::clamp(d, -1e9, 1e9);
  const long long rounded = std::llround(bounded);
  const Intensity i = Intensity::clamped(rounded);
  return ParsedIntensity{i, static_cast<double>(i.value()) == d};
}

inline std::optional<ParsedIntensity> parse_intensity(const nlohmann::json& v) {
  if (v.is_number_integer()) {
    // Signed and unsigned both fit in a long double comparison; keep it exact.
    if (v.is_number_unsigned()) {
      const auto u = v.get<std::uint64_t>();
      const Intensity i = Intensity::clamped(u > 3 ? 4 : static_cast<long long>(u));
      return ParsedIntensity{i, static_cast<std::uint64_t>(i.value()) == u};
    }
    const auto n = v.get<std::int64_t>();
    const Intensity i = Intensity::clamped(n);
    return ParsedIntensity{i, i.value() == n};
  }
  if (v.is_number_float()) return from_real(v.get<double>());
  if (v.is_string()) {
    const std::string_view s = trim_view(v.get_ref<const std::string&>());
    if (s.empty()) return std::nullopt;
    double d = 0.0;
    const char* first = s.data();
    if (*first == '+') ++first;
    auto [ptr, ec] = std::from_chars(first, s.data() + s.size(), d);
    if (ec != std::errc{} || ptr != s.data() + s.size()) return std::nullopt;
    return from_real(d);
  }
  return std::nullopt;
}

}  // namespace detail

/// Total: never throws on any input. Malformed replies degrade to
/// (neutral, 1, degraded); an out-of-range intensity keeps the mood but is
/// clamped and marked degraded.
inline SentimentReading parse_sentiment(std::string_view raw) noexcept {
  SentimentReading fallback{Mood::Neutral, Intensity::clamped(1), true, {}};
  try {
    fallback.raw = std::string(raw);
    auto obj = detail::first_json_object(raw);
    if (!obj) return fallback;
    auto mood_it = obj->find("mood");
    auto intensity_it = obj->find("intensity");
    if (mood_it == obj->end() || intensity_it == obj->end()) return fallback;
    auto mood = detail::parse_mood(*mood_it);
    auto intensity = detail::parse_intensity(*intensity_it);
    if (!mood || !intensity) return fallback;
    return SentimentReading{*mood, intensity->value, !intensity->exact,
                            std::string(raw)};
  } catch (...) {
    // Only allocation failure can land here.
    return fallback;
  }
}

}  // namespace e3va
