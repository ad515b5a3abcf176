#include <gtest/gtest.h>

#include <cmath>
#include <random>

#include "e3va/speech.hpp"
#include "e3va/wav.hpp"
#include "oracles.hpp"

namespace {

using namespace e3va;
using namespace e3va::oracle;

TEST(RmsEnvelope, SilenceIsZero) {
  AudioClip clip(std::vector<float>(16000, 0.0f), 16000);
  for (const auto& p : rms_envelope(clip, 50, 25)) EXPECT_EQ(p.rms, 0.0);
}

TEST(RmsEnvelope, FullScaleSquareIsOne) {
  std::vector<float> x(8000);
  for (std::size_t n = 0; n < x.size(); ++n) x[n] = (n / 40) % 2 ? 1.0f : -1.0f;
  for (const auto& p : rms_envelope(AudioClip(x, 16000), 50, 25)) EXPECT_DOUBLE_EQ(p.rms, 1.0);
}

TEST(RmsEnvelope, SineMatchesAnalyticAndBruteForce) {
  const auto clip = sine(0.5, 440, 16000, 2.0);
  const auto env = rms_envelope(clip, 50, 25);
  const double analytic = 0.5 / std::sqrt(2.0);
  const auto x = clip.samples();
  for (const auto& p : env) {
    const auto start = static_cast<std::size_t>(p.t_ms * 16);
    if (start + 800 > x.size()) continue;  // partial windows
    double acc = 0.0;
    for (std::size_t n = start; n < start + 800; ++n) acc += double(x[n]) * x[n];
    EXPECT_NEAR(p.rms, std::sqrt(acc / 800), 1e-12);
    EXPECT_LT(std::abs(p.rms - analytic) / analytic, 0.01);
  }
}

TEST(RmsEnvelope, FrameCountIsCeilOfHops) {
  for (std::size_t n : {1u, 399u, 400u, 401u, 32000u}) {
    AudioClip clip(std::vector<float>(n, 0.1f), 16000);
    EXPECT_EQ(rms_envelope(clip, 50, 25).size(), (n + 399) / 400) << n;
  }
}

TEST(RmsEnvelope, PartialFinalWindowAveragesActualLength) {
  std::vector<float> x(1000, 0.0f);
  for (std::size_t n = 800; n < 1000; ++n) x[n] = 0.5f;
  const auto env = rms_envelope(AudioClip(x, 16000), 50, 25);
  ASSERT_EQ(env.size(), 3u);
  EXPECT_DOUBLE_EQ(env[2].rms, 0.5);  // samples 800..999 only
}

TEST(RmsEnvelope, Errors) {
  EXPECT_THROW(rms_envelope(AudioClip({}, 16000), 50, 25), Error);
  AudioClip clip(std::vector<float>(10, 0.f), 16000);
  EXPECT_THROW(rms_envelope(clip, 20, 25), Error);
  EXPECT_THROW(rms_envelope(clip, 20, 0), Error);
}

TEST(RmsEnvelope, SignInvariantAndAmplitudeLinear) {
  std::mt19937 rng(3);
  std::uniform_real_distribution<float> u(-1.0f, 1.0f);
  std::vector<float> x(5000);
  for (auto& s : x) s = u(rng);
  std::vector<float> neg(x), half(x);
  for (auto& s : neg) s = -s;
  for (auto& s : half) s *= 0.5f;  // exact in binary floating point
  const auto a = rms_envelope(AudioClip(x, 16000), 50, 25);
  const auto b = rms_envelope(AudioClip(neg, 16000), 50, 25);
  const auto c = rms_envelope(AudioClip(half, 16000), 50, 25);
  for (std::size_t i = 0; i < a.size(); ++i) {
    EXPECT_EQ(a[i].rms, b[i].rms);
    EXPECT_NEAR(c[i].rms, 0.5 * a[i].rms, 1e-15);
  }
}

TEST(LipSync, SilenceIsClosedMouth) {
  for (int rate : {8000, 16000, 44100}) {
    const auto t = lipsync_track(AudioClip(std::vector<float>(rate / 3, 0.f), rate));
    for (const auto& f : t.frames) EXPECT_EQ(f.mouth_open, 0.0);
  }
}

TEST(LipSync, ConstantLoudRmsApproachesOneGeometrically) {
  // A +-0.6 square has rms 0.6 everywhere; gain 2 saturates to 1.
  std::vector<float> x(16000);
  for (std::size_t n = 0; n < x.size(); ++n) x[n] = n % 2 ? 0.6f : -0.6f;
  const auto t = lipsync_track(AudioClip(x, 16000));
  ASSERT_GT(t.frames.size(), 5u);
  for (std::size_t i = 0; i < t.frames.size(); ++i) {
    EXPECT_NEAR(t.frames[i].mouth_open, 1.0 - std::pow(0.5, double(i + 1)), 1e-12);
  }
}

TEST(LipSync, MatchesReferenceOnSineFixture) {
  const auto clip = sine(0.5, 440, 16000, 2.0);
  const auto track = lipsync_track(clip);
  const auto ref = reference_lipsync(clip, 50, 25, 2.0, 0.5);
  ASSERT_EQ(track.frames.size(), ref.size());
  for (std::size_t i = 0; i < ref.size(); ++i) {
    EXPECT_NEAR(track.frames[i].t_ms, ref[i].first, 1e-9);
    EXPECT_NEAR(track.frames[i].mouth_open, ref[i].second, 1e-6);
  }
}

TEST(LipSync, TrackInvariants) {
  std::mt19937 rng(11);
  std::uniform_real_distribution<float> u(-1.0f, 1.0f);
  std::uniform_int_distribution<int> len(1, 20000);
  for (int trial = 0; trial < 20; ++trial) {
    std::vector<float> x(static_cast<std::size_t>(len(rng)));
    for (auto& s : x) s = u(rng);
    const AudioClip clip(x, 16000);
    const auto t = lipsync_track(clip);
    ASSERT_EQ(t.frames.size(), rms_envelope(clip, 50, 25).size());
    EXPECT_EQ(t.frames.front().t_ms, 0.0);
    EXPECT_LT(t.frames.back().t_ms, t.duration_ms);
    for (std::size_t i = 0; i < t.frames.size(); ++i) {
      EXPECT_GE(t.frames[i].mouth_open, 0.0);
      EXPECT_LE(t.frames[i].mouth_open, 1.0);
      if (i) {
        EXPECT_LT(t.frames[i - 1].t_ms, t.frames[i].t_ms);
      }
    }
  }
}

TEST(AudioClip, RejectsInvalid) {
  EXPECT_THROW(AudioClip({0.f}, 0), Error);
  EXPECT_THROW(AudioClip({1.5f}, 16000), Error);
  EXPECT_THROW(AudioClip({std::nanf("")}, 16000), Error);
}

TEST(SilenceTts, SixtyMsPerWord) {
  SilenceTts tts;
  const auto clip = synthesize(tts, "hello there friend");
  EXPECT_EQ(clip.size(), 2880u);
  EXPECT_EQ(clip.sample_rate_hz(), 16000);
  EXPECT_DOUBLE_EQ(clip.duration_ms(), 180.0);
  EXPECT_EQ(synthesize(tts, "hi").size(), 960u);
  EXPECT_THROW(synthesize(tts, "  "), Error);
}

class BrokenTts : public TtsProvider {
 public:
  AudioClip synthesize(const std::string&) override { throw std::runtime_error("503"); }
};

TEST(Synthesize, ProviderFailureIsProviderError) {
  BrokenTts tts;
  try {
    synthesize(tts, "hello");
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.kind(), ErrorKind::ProviderError);
    EXPECT_NE(std::string(e.what()).find("503"), std::string::npos);
  }
}

TEST(Transcribe, EchoAndEmpty) {
  const AudioClip clip(std::vector<float>(160, 0.f), 16000);
  EchoAsr echo("tell me about your day");
  EXPECT_EQ(transcribe(echo, clip), "tell me about your day");
  EchoAsr blank("  ");
  try {
    transcribe(blank, clip);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.kind(), ErrorKind::NoSpeechDetected);
  }
  EXPECT_THROW(transcribe(echo, AudioClip({}, 16000)), Error);
}

class BrokenAsr : public AsrProvider {
 public:
  std::string transcribe(const AudioClip&) override { throw std::runtime_error("reset"); }
};

TEST(Transcribe, TransportFailureIsProviderError) {
  BrokenAsr asr;
  try {
    transcribe(asr, AudioClip(std::vector<float>(16, 0.f), 16000));
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.kind(), ErrorKind::ProviderError);
  }
}

TEST(Wav, EncodeHeaderAndDecodeBack) {
  const auto clip = sine(0.5, 440, 16000, 0.1);
  const auto bytes = encode_wav(clip);
  ASSERT_EQ(bytes.size(), 44 + clip.size() * 2);
  EXPECT_EQ(bytes.substr(0, 4), "RIFF");
  EXPECT_EQ(bytes.substr(8, 8), "WAVEfmt ");
  const auto back = decode_wav(bytes);
  ASSERT_EQ(back.size(), clip.size());
  for (std::size_t i = 0; i < clip.size(); ++i) {
    EXPECT_NEAR(back.samples()[i], clip.samples()[i], 1.0 / 32767);
  }
}

TEST(Wav, StereoAndOtherRatesAreDownmixedAndResampled) {
  // 8 kHz stereo PCM16, left = 0.5, right = -0.5 -> mono 0.
  std::string wav = "RIFF";
  auto u32 = [&](std::uint32_t v) { for (int i = 0; i < 4; ++i) wav += char((v >> 8 * i) & 0xFF); };
  auto u16 = [&](std::uint16_t v) { wav += char(v & 0xFF); wav += char(v >> 8); };
  const std::uint32_t frames = 800;
  u32(36 + frames * 4);
  wav += "WAVEfmt ";
  u32(16); u16(1); u16(2); u32(8000); u32(8000 * 4); u16(4); u16(16);
  wav += "data";
  u32(frames * 4);
  for (std::uint32_t i = 0; i < frames; ++i) {
    u16(static_cast<std::uint16_t>(16384));
    u16(static_cast<std::uint16_t>(-16384));
  }
  const auto clip = decode_wav(wav);
  EXPECT_EQ(clip.sample_rate_hz(), 16000);
  EXPECT_EQ(clip.size(), 1600u);
  for (float s : clip.samples()) EXPECT_EQ(s, 0.0f);
}

TEST(Wav, RejectsGarbage) {
  EXPECT_THROW(decode_wav("not a wav file at all"), Error);
  EXPECT_THROW(decode_wav(std::string("RIFF\0\0\0\0WAVE", 12)), Error);
}

}  // namespace
