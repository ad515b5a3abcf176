#pragma once

// Speech providers and the amplitude-driven lip-sync track.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <memory>
#include <span>
#include <sstream>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "e3va/error.hpp"
#include "e3va/text.hpp"

namespace e3va {

/// Internal rate for every clip the engine handles.
inline constexpr int kEngineSampleRate = 16000;

/// Mono audio, samples in [-1,1].
class AudioClip {
 public:
  AudioClip() = default;

  AudioClip(std::vector<float> samples, int sample_rate_hz)
      : samples_(std::move(samples)), sample_rate_hz_(sample_rate_hz) {
    if (sample_rate_hz_ <= 0) {
      throw Error(ErrorKind::InvalidArgument, "sample rate must be positive");
    }
    for (float s : samples_) {
      if (!(s >= -1.0f && s <= 1.0f)) {
        throw Error(ErrorKind::InvalidArgument, "sample outside [-1,1]");
      }
    }
  }

  std::span<const float> samples() const noexcept { return samples_; }
  int sample_rate_hz() const noexcept { return sample_rate_hz_; }
  bool empty() const noexcept { return samples_.empty(); }
  std::size_t size() const noexcept { return samples_.size(); }

  double duration_ms() const noexcept {
    return static_cast<double>(samples_.size()) * 1000.0 / sample_rate_hz_;
  }

 private:
  std::vector<float> samples_;
  int sample_rate_hz_ = kEngineSampleRate;
};

struct EnvelopePoint {
  double t_ms;
  double rms;
};

namespace detail {

inline std::size_t ms_to_samples(double ms, int rate) {
  return static_cast<std::size_t>(
      std::max<long long>(1, std::llround(ms * rate / 1000.0)));
}

}  // namespace detail

/// Windowed RMS at every hop; the final partial windows average over the
/// samples they actually cover.
inline std::vector<EnvelopePoint> rms_envelope(const AudioClip& clip, double window_ms,
                                               double hop_ms) {
  if (clip.empty()) throw Error(ErrorKind::EmptyClip, "clip has no samples");
  if (!(hop_ms > 0.0) || !(window_ms >= hop_ms)) {
    throw Error(ErrorKind::InvalidArgument, "need window_ms >= hop_ms > 0");
  }
  const int rate = clip.sample_rate_hz();
  const std::size_t window = detail::ms_to_samples(window_ms, rate);
  const std::size_t hop = detail::ms_to_samples(hop_ms, rate);
  const auto x = clip.samples();
  const std::size_t frames = (x.size() + hop - 1) / hop;

  std::vector<EnvelopePoint> out;
  out.reserve(frames);
  for (std::size_t i = 0; i < frames; ++i) {
    const std::size_t start = i * hop;
    const std::size_t end = std::min(start + window, x.size());
    double sum = 0.0;
    for (std::size_t k = start; k < end; ++k) {
      sum += static_cast<double>(x[k]) * x[k];
    }
    out.push_back({static_cast<double>(start) * 1000.0 / rate,
                   std::sqrt(sum / static_cast<double>(end - start))});
  }
  return out;
}

struct LipSyncFrame {
  double t_ms;
  double mouth_open;

  friend bool operator==(const LipSyncFrame&, const LipSyncFrame&) = default;
};

struct LipSyncTrack {
  std::vector<LipSyncFrame> frames;
  double duration_ms = 0.0;

  friend bool operator==(const LipSyncTrack&, const LipSyncTrack&) = default;
};

struct LipSyncParams {
  double window_ms = 50.0;
  double hop_ms = 25.0;
  double gain = 2.0;
  double smooth = 0.5;
};

/// mouth_open = one-pole smoothing of clamp(gain * rms, 0, 1), starting at 0.
inline LipSyncTrack lipsync_track(const AudioClip& clip, const LipSyncParams& p = {}) {
  if (!(p.smooth >= 0.0 && p.smooth < 1.0) || !(p.gain >= 0.0)) {
    throw Error(ErrorKind::InvalidArgument, "need gain >= 0 and smooth in [0,1)");
  }
  const auto env = rms_envelope(clip, p.window_ms, p.hop_ms);
  LipSyncTrack track;
  track.duration_ms = clip.duration_ms();
  track.frames.reserve(env.size());
  double y = 0.0;
  for (const auto& point : env) {
    const double x = std::clamp(p.gain * point.rms, 0.0, 1.0);
    y = p.smooth * y + (1.0 - p.smooth) * x;
    track.frames.push_back({point.t_ms, std::clamp(y, 0.0, 1.0)});
  }
  return track;
}

class TtsProvider {
 public:
  virtual ~TtsProvider() = default;
  virtual AudioClip synthesize(const std::string& text) = 0;
};

class AsrProvider {
 public:
  virtual ~AsrProvider() = default;
  virtual std::string transcribe(const AudioClip& clip) = 0;
};

inline std::size_t word_count(std::string_view text) {
  std::istringstream in{std::string(text)};
  std::size_t n = 0;
  for (std::string w; in >> w;) ++n;
  return n;
}

/// Stub TTS: 60 ms of silence per whitespace-separated word at 16 kHz.
class SilenceTts : public TtsProvider {
 public:
  static constexpr std::size_t kSamplesPerWord = 60 * kEngineSampleRate / 1000;

  AudioClip synthesize(const std::string& text) override {
    return AudioClip(std::vector<float>(word_count(text) * kSamplesPerWord, 0.0f),
                     kEngineSampleRate);
  }
};

/// Stub ASR returning a fixed transcript for any clip.
class EchoAsr : public AsrProvider {
 public:
  explicit EchoAsr(std::string transcript) : transcript_(std::move(transcript)) {}
  std::string transcribe(const AudioClip&) override { return transcript_; }

 private:
  std::string transcript_;
};

inline AudioClip synthesize(TtsProvider& provider, const std::string& text) {
  if (trim_view(text).empty()) {
    throw Error(ErrorKind::EmptyUtterance, "nothing to synthesize");
  }
  try {
    return provider.synthesize(text);
  } catch (const Error&) {
    throw;
  } catch (const std::exception& e) {
    throw Error(ErrorKind::ProviderError, e.what());
  }
}

inline std::string transcribe(AsrProvider& provider, const AudioClip& clip) {
  if (clip.empty()) throw Error(ErrorKind::EmptyClip, "clip has no samples");
  std::string text;
  try {
    text = trim(provider.transcribe(clip));
  } catch (const Error&) {
    throw;
  } catch (const std::exception& e) {
    throw Error(ErrorKind::ProviderError, e.what());
  }
  if (text.empty()) throw Error(ErrorKind::NoSpeechDetected, "empty transcript");
  return text;
}

}  // namespace e3va
