#pragma once

// RIFF/WAVE interchange. Clips leave the engine as 16-bit PCM mono; incoming
// files may use any common PCM layout and are brought to 16 kHz mono.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <cstring>
#include <string>
#include <string_view>
#include <vector>

#include "e3va/error.hpp"
#include "e3va/speech.hpp"

namespace e3va {

namespace detail {

inline void put_u32(std::string& out, std::uint32_t v) {
  for (int i = 0; i < 4; ++i) out += static_cast<char>((v >> (8 * i)) & 0xFF);
}
inline void put_u16(std::string& out, std::uint16_t v) {
  out += static_cast<char>(v & 0xFF);
  out += static_cast<char>((v >> 8) & 0xFF);
}
inline std::uint32_t get_u32(std::string_view s, std::size_t at) {
  std::uint32_t v = 0;
  for (int i = 3; i >= 0; --i) v = (v << 8) | static_cast<unsigned char>(s[at + i]);
  return v;
}
inline std::uint16_t get_u16(std::string_view s, std::size_t at) {
  return static_cast<std::uint16_t>(static_cast<unsigned char>(s[at]) |
                                    (static_cast<unsigned char>(s[at + 1]) << 8));
}

}  // namespace detail

inline std::string encode_wav(const AudioClip& clip) {
  const auto samples = clip.samples();
  const auto data_bytes = static_cast<std::uint32_t>(samples.size() * 2);
  const auto rate = static_cast<std::uint32_t>(clip.sample_rate_hz());
  std::string out;
  out.reserve(44 + data_bytes);
  out += "RIFF";
  detail::put_u32(out, 36 + data_bytes);
  out += "WAVEfmt ";
  detail::put_u32(out, 16);
  detail::put_u16(out, 1);  // PCM
  detail::put_u16(out, 1);  // mono
  detail::put_u32(out, rate);
  detail::put_u32(out, rate * 2);
  detail::put_u16(out, 2);
  detail::put_u16(out, 16);
  out += "data";
  detail::put_u32(out, data_bytes);
  for (float s : samples) {
    const long v = std::lround(std::clamp(s, -1.0f, 1.0f) * 32767.0f);
    detail::put_u16(out, static_cast<std::uint16_t>(static_cast<std::int16_t>(v)));
  }
  return out;
}

/// Averages interleaved channels and resamples by nearest sample.
inline AudioClip to_engine_format(const std::vector<float>& interleaved, int channels,
                                  int rate) {
  if (channels <= 0 || rate <= 0) {
    throw Error(ErrorKind::InvalidArgument, "bad channel count or rate");
  }
  const std::size_t frames = interleaved.size() / static_cast<std::size_t>(channels);
  std::vector<float> mono(frames);
  for (std::size_t f = 0; f < frames; ++f) {
    double acc = 0.0;
    for (int c = 0; c < channels; ++c) acc += interleaved[f * channels + c];
    mono[f] = static_cast<float>(std::clamp(acc / channels, -1.0, 1.0));
  }
  if (rate == kEngineSampleRate) return AudioClip(std::move(mono), rate);

  const auto out_len = static_cast<std::size_t>(
      std::llround(static_cast<double>(frames) * kEngineSampleRate / rate));
  std::vector<float> resampled(out_len);
  for (std::size_t i = 0; i < out_len; ++i) {
    auto src = static_cast<std::size_t>(
        std::llround(static_cast<double>(i) * rate / kEngineSampleRate));
    resampled[i] = mono[std::min(src, frames - 1)];
  }
  return AudioClip(std::move(resampled), kEngineSampleRate);
}

inline AudioClip decode_wav(std::string_view bytes) {
  auto fail = [](const std::string& why) {
    return Error(ErrorKind::ProviderError, "invalid WAV: " + why);
  };
  if (bytes.size() < 12 || bytes.substr(0, 4) != "RIFF" || bytes.substr(8, 4) != "WAVE") {
    throw fail("missing RIFF/WAVE header");
  }
  std::uint16_t format = 0, channels = 0, bits = 0;
  std::uint32_t rate = 0;
  bool have_fmt = false;
  std::string_view data;
  std::size_t pos = 12;
  while (pos + 8 <= bytes.size()) {
    const auto id = bytes.substr(pos, 4);
    const std::uint32_t len = detail::get_u32(bytes, pos + 4);
    const std::size_t body = pos + 8;
    const std::size_t avail = std::min<std::size_t>(len, bytes.size() - body);
    if (id == "fmt ") {
      if (avail < 16) throw fail("short fmt chunk");
      format = detail::get_u16(bytes, body);
      channels = detail::get_u16(bytes, body + 2);
      rate = detail::get_u32(bytes, body + 4);
      bits = detail::get_u16(bytes, body + 14);
      if (format == 0xFFFE && avail >= 26) format = detail::get_u16(bytes, body + 24);
      have_fmt = true;
    } else if (id == "data") {
      data = bytes.substr(body, avail);
    }
    pos = body + len + (len & 1);
  }
  if (!have_fmt) throw fail("no fmt chunk");
  if (channels == 0 || rate == 0) throw fail("zero channels or rate");

  std::vector<float> samples;
  if (format == 1 && (bits == 8 || bits == 16 || bits == 24 || bits == 32)) {
    const std::size_t width = bits / 8;
    samples.reserve(data.size() / width);
    for (std::size_t i = 0; i + width <= data.size(); i += width) {
      double v = 0.0;
      if (bits == 8) {
        v = (static_cast<unsigned char>(data[i]) - 128) / 128.0;
      } else {
        std::uint32_t acc = 0;
        for (std::size_t b = 0; b < width; ++b) {
          acc |= static_cast<std::uint32_t>(static_cast<unsigned char>(data[i + b]))
                 << (8 * (b + 4 - width));
        }
        v = static_cast<std::int32_t>(acc) / 2147483648.0;
      }
      samples.push_back(static_cast<float>(std::clamp(v, -1.0, 1.0)));
    }
  } else if (format == 3 && bits == 32) {
    samples.reserve(data.size() / 4);
    for (std::size_t i = 0; i + 4 <= data.size(); i += 4) {
      const std::uint32_t raw = detail::get_u32(data, i);
      float f;
      std::memcpy(&f, &raw, sizeof f);
      samples.push_back(std::isfinite(f) ? std::clamp(f, -1.0f, 1.0f) : 0.0f);
    }
  } else {
    throw fail("unsupported sample format " + std::to_string(format) + "/" +
               std::to_string(bits) + " bit");
  }
  return to_engine_format(samples, channels, static_cast<int>(rate));
}

}  // namespace e3va
