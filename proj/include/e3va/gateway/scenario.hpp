#pragma once

// Headless simulation: a JSONL scenario of scripted fixtures and user
// utterances is run through the full turn pipeline on a virtual clock.
//
// Scenario lines (blank lines and lines starting with '#' are ignored):
//   {"kind":"reply","match":"day","text":"...","delay_ms":0,"failure":"hang"}
//   {"kind":"sentiment","match":"day","text":"{\"mood\":\"happy\",\"intensity\":3}"}
//   {"kind":"utterance","text":"I had a great day","at_ms":0}
//   {"kind":"config","decay_hold_ms":4000,"decay_decay_ms":2000,
//    "reply_timeout_ms":15000,"sentiment_timeout_ms":15000}

#include <filesystem>
#include <fstream>
#include <istream>
#include <optional>
#include <string>
#include <vector>

#include "e3va/dialogue.hpp"
#include "e3va/error.hpp"
#include "e3va/gateway/transcript.hpp"
#include "e3va/gateway/wire.hpp"
#include "e3va/orchestrator.hpp"
#include "e3va/speech.hpp"
#include "e3va/virtual_runtime.hpp"

namespace e3va {

struct ScenarioUtterance {
  std::string text;
  TimestampMs at_ms = 0;
};

struct Scenario {
  std::vector<ScriptedReply> replies;
  std::vector<ScriptedReply> sentiments;
  std::vector<ScenarioUtterance> utterances;
  SessionConfig config;
};

inline constexpr std::string_view kSimulatedSession = "simulated";

namespace detail {

inline ScriptedFailure parse_failure(const std::string& name) {
  if (name == "none") return ScriptedFailure::None;
  if (name == "hang") return ScriptedFailure::Hang;
  if (name == "error") return ScriptedFailure::Error;
  if (name == "empty") return ScriptedFailure::Empty;
  throw wire::parse_error("unknown failure \"" + name + "\" (none|hang|error|empty)");
}

inline void only_fields(const nlohmann::json& j,
                        std::initializer_list<std::string_view> allowed) {
  for (const auto& [key, _] : j.items()) {
    if (key == "kind") continue;
    if (std::find(allowed.begin(), allowed.end(), key) == allowed.end()) {
      throw wire::parse_error("unknown field \"" + key + "\"");
    }
  }
}

inline ScriptedReply parse_fixture(const nlohmann::json& j) {
  only_fields(j, {"match", "text", "delay_ms", "failure"});
  ScriptedReply r;
  r.match = j.contains("match") ? wire::require_as<std::string>(j, "match") : "";
  r.reply = j.contains("text") ? wire::require_as<std::string>(j, "text") : "";
  if (j.contains("delay_ms")) {
    r.delay_ms = wire::require_as<std::int64_t>(j, "delay_ms");
    if (r.delay_ms < 0) throw wire::parse_error("delay_ms must be >= 0");
  }
  if (j.contains("failure")) r.failure = parse_failure(wire::require_as<std::string>(j, "failure"));
  if (r.failure == ScriptedFailure::None && !j.contains("text")) {
    throw wire::parse_error("missing field \"text\"");
  }
  return r;
}

}  // namespace detail

inline Scenario parse_scenario(std::istream& in, const std::string& name = "scenario") {
  Scenario sc;
  std::string text;
  double hold = sc.config.decay.hold_ms;
  double decay = sc.config.decay.decay_ms;
  for (std::size_t line = 1; std::getline(in, text); ++line) {
    const auto body = trim_view(text);
    if (body.empty() || body.front() == '#') continue;
    try {
      const auto j = nlohmann::json::parse(body, nullptr, false);
      if (j.is_discarded() || !j.is_object()) throw wire::parse_error("not a JSON object");
      const auto kind = wire::require_as<std::string>(j, "kind");
      if (kind == "reply") {
        sc.replies.push_back(detail::parse_fixture(j));
      } else if (kind == "sentiment") {
        sc.sentiments.push_back(detail::parse_fixture(j));
      } else if (kind == "utterance") {
        detail::only_fields(j, {"text", "at_ms"});
        ScenarioUtterance u{wire::require_as<std::string>(j, "text"), 0};
        if (trim_view(u.text).empty()) throw wire::parse_error("utterance text is blank");
        if (j.contains("at_ms")) u.at_ms = wire::require_as<TimestampMs>(j, "at_ms");
        if (u.at_ms < 0) throw wire::parse_error("at_ms must be >= 0");
        sc.utterances.push_back(std::move(u));
      } else if (kind == "config") {
        detail::only_fields(j, {"decay_hold_ms", "decay_decay_ms", "reply_timeout_ms",
                                "sentiment_timeout_ms"});
        if (j.contains("decay_hold_ms")) hold = wire::require_as<double>(j, "decay_hold_ms");
        if (j.contains("decay_decay_ms")) decay = wire::require_as<double>(j, "decay_decay_ms");
        sc.config.decay = DecayParams::make(hold, decay);
        for (auto [key, slot] : {std::pair{"reply_timeout_ms", &sc.config.reply_timeout},
                                 std::pair{"sentiment_timeout_ms", &sc.config.sentiment_timeout}}) {
          if (!j.contains(key)) continue;
          const auto ms = wire::require_as<std::int64_t>(j, key);
          if (ms <= 0) throw wire::parse_error(std::string(key) + " must be > 0");
          *slot = std::chrono::milliseconds(ms);
        }
      } else {
        throw wire::parse_error("unknown kind \"" + kind + "\"");
      }
    } catch (const Error& e) {
      throw Error(ErrorKind::ParseError, name + ":" + std::to_string(line) + ": " + e.what());
    }
  }
  return sc;
}

inline Scenario read_scenario(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(ErrorKind::InvalidConfig, "cannot read " + path.string());
  return parse_scenario(in, path.filename().string());
}

struct SimulationResult {
  std::vector<TurnEvent> events;
  std::filesystem::path transcript;
  std::filesystem::path event_log;
};

/// Runs every utterance (each submitted at its at_ms, or as soon as the
/// session is idle again) with SilenceTts, then lets the face settle.
/// Writes transcript.jsonl and events.jsonl into `out_dir`.
inline SimulationResult simulate(const Scenario& sc, const std::filesystem::path& out_dir) {
  std::filesystem::create_directories(out_dir);
  SimulationResult result;
  result.transcript = out_dir / "transcript.jsonl";
  result.event_log = out_dir / "events.jsonl";
  TranscriptWriter transcript(result.transcript, TranscriptWriter::Mode::Truncate);
  TranscriptWriter events(result.event_log, TranscriptWriter::Mode::Truncate);

  VirtualDriver driver(
      SessionMachine(std::string(kSimulatedSession), sc.config, 0),
      std::make_shared<ScriptedProvider>(sc.replies),
      std::make_shared<ScriptedProvider>(sc.sentiments), std::make_shared<SilenceTts>(),
      [&](const TurnEvent& ev) {
        events.write_line(wire::event_to_json(ev));
        transcript.record(ev);
        result.events.push_back(ev);
      });
  for (const auto& u : sc.utterances) driver.submit_when_idle(u.text, u.at_ms);
  driver.run_until_quiescent();
  return result;
}

}  // namespace e3va
