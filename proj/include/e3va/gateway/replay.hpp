#pragma once

// Rebuilds the blend-weight timeline of a recorded conversation from its
// sentiment records, sampled on a virtual 30 Hz clock.

#include <filesystem>
#include <fstream>
#include <string>
#include <vector>

#include "e3va/affect.hpp"
#include "e3va/gateway/transcript.hpp"
#include "e3va/gateway/wire.hpp"
#include "e3va/orchestrator.hpp"

namespace e3va {

struct ReplayFrame {
  TimestampMs t_ms;
  BlendWeights weights;
};

struct ReplayTrack {
  int fps = kTickHz;
  std::vector<ReplayFrame> frames;
};

/// Frames start at the first reading and run until the last reading has
/// decayed to the rest pose (that zero frame included). Records without a
/// decay block use `defaults`; with `force_defaults` every record does.
inline ReplayTrack replay_track(const std::vector<TranscriptEntry>& entries,
                                const DecayParams& defaults = {},
                                bool force_defaults = false) {
  struct Onset {
    TimestampMs at;
    SentimentReading reading;
    DecayParams decay;
  };
  std::vector<Onset> onsets;
  std::string session;
  for (const auto& e : entries) {
    if (e.kind != "sentiment_updated") continue;
    auto fail = [&](const std::string& why) {
      return Error(ErrorKind::ParseError, "line " + std::to_string(e.line) + ": " + why);
    };
    if (session.empty()) session = e.session;
    if (e.session != session) throw fail("transcript mixes sessions");
    if (!onsets.empty() && e.at < onsets.back().at) throw fail("timestamps go backwards");
    try {
      DecayParams decay = e.payload.contains("decay") && !force_defaults
                              ? wire::decay_from_json(e.payload.at("decay"))
                              : defaults;
      onsets.push_back({e.at, wire::reading_from_json(wire::require(e.payload, "reading")),
                        decay});
    } catch (const Error& err) {
      throw fail(err.what());
    }
  }

  ReplayTrack track;
  if (onsets.empty()) return track;

  const TimestampMs t0 = onsets.front().at;
  ExpressionState state{onsets.front().reading, t0, onsets.front().decay};
  std::size_t next = 1;
  for (std::int64_t k = 0;; ++k) {
    const TimestampMs t = t0 + k * 1000 / track.fps;
    while (next < onsets.size() && onsets[next].at <= t) {
      state = ExpressionState{onsets[next].reading, onsets[next].at, onsets[next].decay};
      ++next;
    }
    const BlendWeights w = expression_at(state, t);
    track.frames.push_back({t, w});
    if (next == onsets.size() && w.is_zero()) break;
  }
  return track;
}

inline nlohmann::json track_to_json(const ReplayTrack& track) {
  nlohmann::json frames = nlohmann::json::array();
  for (const auto& f : track.frames) {
    frames.push_back({{"t_ms", f.t_ms}, {"weights", wire::weights_to_json(f.weights)}});
  }
  return {{"fps", track.fps}, {"frames", std::move(frames)}};
}

inline void replay_file(const std::filesystem::path& transcript,
                        const std::filesystem::path& out_file,
                        const DecayParams& defaults = {}, bool force_defaults = false) {
  const auto track = replay_track(read_transcript(transcript), defaults, force_defaults);
  if (out_file.has_parent_path()) std::filesystem::create_directories(out_file.parent_path());
  std::ofstream out(out_file, std::ios::binary | std::ios::trunc);
  if (!out) throw Error(ErrorKind::InvalidConfig, "cannot write " + out_file.string());
  out << wire::dump(track_to_json(track)) << '\n';
}

}  // namespace e3va
