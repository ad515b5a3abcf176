#pragma once

// JSON wire formats: TurnEvents, client commands, transcript records.
// All keys are snake_case except blendshape channel names, which use the
// channel identifiers verbatim.

#include <optional>
#include <string>
#include <variant>

#include "e3va/affect.hpp"
#include "e3va/error.hpp"
#include "e3va/orchestrator.hpp"
#include "e3va/speech.hpp"
#include "json.hpp"

namespace e3va::wire {

using nlohmann::json;

inline Error parse_error(const std::string& what) {
  return Error(ErrorKind::ParseError, what);
}

inline const json& require(const json& obj, const char* key) {
  auto it = obj.find(key);
  if (it == obj.end()) throw parse_error(std::string("missing field \"") + key + "\"");
  return *it;
}

/// Compact serialization; invalid UTF-8 from a provider becomes U+FFFD
/// instead of an exception.
inline std::string dump(const json& j) {
  return j.dump(-1, ' ', false, json::error_handler_t::replace);
}

template <class T>
T require_as(const json& obj, const char* key) {
  const json& v = require(obj, key);
  try {
    return v.get<T>();
  } catch (const json::exception&) {
    throw parse_error(std::string("field \"") + key + "\" has the wrong type");
  }
}

// --- blend weights -------------------------------------------------------

inline json weights_to_json(const BlendWeights& w) {
  json j = json::object();
  for (Channel c : kAllChannels) j[std::string(to_string(c))] = w[c];
  return j;
}

/// Absent channels are 0; unknown channel names and values outside [0,1]
/// are rejected.
inline BlendWeights weights_from_json(const json& j) {
  if (!j.is_object()) throw parse_error("weights must be an object");
  BlendWeights w;
  for (const auto& [key, value] : j.items()) {
    auto c = channel_from_string(key);
    if (!c) throw parse_error("unknown channel \"" + key + "\"");
    if (!value.is_number()) throw parse_error("channel \"" + key + "\" is not a number");
    const double v = value.get<double>();
    if (!(v >= 0.0 && v <= 1.0)) throw parse_error("channel \"" + key + "\" outside [0,1]");
    w.set(*c, v);
  }
  return w;
}

// --- sentiment ------------------------------------------------------------

inline json reading_to_json(const SentimentReading& r) {
  return json{{"mood", std::string(to_string(r.mood))},
              {"intensity", r.intensity.value()},
              {"degraded", r.degraded},
              {"raw", r.raw}};
}

inline SentimentReading reading_from_json(const json& j) {
  if (!j.is_object()) throw parse_error("reading must be an object");
  auto mood = mood_from_string(require_as<std::string>(j, "mood"));
  if (!mood) throw parse_error("unknown mood");
  const int intensity = require_as<int>(j, "intensity");
  if (intensity < Intensity::kMin || intensity > Intensity::kMax) {
    throw parse_error("intensity outside 1..3");
  }
  SentimentReading r{*mood, Intensity(intensity), false, {}};
  if (j.contains("degraded")) r.degraded = require_as<bool>(j, "degraded");
  if (j.contains("raw")) r.raw = require_as<std::string>(j, "raw");
  return r;
}

inline json decay_to_json(const DecayParams& p) {
  return json{{"hold_ms", p.hold_ms}, {"decay_ms", p.decay_ms}};
}

inline DecayParams decay_from_json(const json& j) {
  if (!j.is_object()) throw parse_error("decay must be an object");
  try {
    return DecayParams::make(require_as<double>(j, "hold_ms"),
                             require_as<double>(j, "decay_ms"));
  } catch (const Error& e) {
    if (e.kind() == ErrorKind::ParseError) throw;
    throw parse_error(e.what());
  }
}

// --- lip-sync -------------------------------------------------------------

inline json lipsync_to_json(const LipSyncTrack& track) {
  json frames = json::array();
  for (const auto& f : track.frames) {
    frames.push_back(json{{"t_ms", f.t_ms}, {"mouth_open", f.mouth_open}});
  }
  return frames;
}

inline std::vector<LipSyncFrame> lipsync_frames_from_json(const json& j) {
  if (!j.is_array()) throw parse_error("lipsync must be an array");
  std::vector<LipSyncFrame> out;
  out.reserve(j.size());
  for (const auto& f : j) {
    if (!f.is_object()) throw parse_error("lipsync frame must be an object");
    out.push_back({require_as<double>(f, "t_ms"), require_as<double>(f, "mouth_open")});
  }
  return out;
}

// --- turn events ------------------------------------------------------------

inline json event_to_json(const TurnEvent& ev) {
  json j{{"type", std::string(event_type_name(ev.payload))},
         {"session", ev.session},
         {"at_ms", ev.at},
         {"turn", ev.turn}};
  struct Fill {
    json& j;
    void operator()(const UserUtterance& p) const { j["text"] = p.text; }
    void operator()(const ThinkingStarted&) const {}
    void operator()(const AgentReply& p) const { j["text"] = p.text; }
    void operator()(const SentimentUpdated& p) const {
      j["reading"] = reading_to_json(p.reading);
      j["weights"] = weights_to_json(p.weights);
      j["decay"] = decay_to_json(p.decay);
    }
    void operator()(const SpeechStarted& p) const {
      j["audio_ref"] = p.audio_ref;
      j["duration_ms"] = p.lipsync.duration_ms;
      j["lipsync"] = lipsync_to_json(p.lipsync);
    }
    void operator()(const SpeechFinished&) const {}
    void operator()(const ExpressionTick& p) const { j["weights"] = weights_to_json(p.weights); }
    void operator()(const TurnError& p) const {
      j["kind"] = std::string(to_string(p.kind));
      j["message"] = p.message;
    }
  };
  std::visit(Fill{j}, ev.payload);
  return j;
}

inline TurnEvent event_from_json(const json& j) {
  if (!j.is_object()) throw parse_error("event must be an object");
  TurnEvent ev;
  ev.session = require_as<std::string>(j, "session");
  ev.at = require_as<TimestampMs>(j, "at_ms");
  ev.turn = require_as<std::uint64_t>(j, "turn");
  const auto type = require_as<std::string>(j, "type");
  if (type == "user_utterance") {
    ev.payload = UserUtterance{require_as<std::string>(j, "text")};
  } else if (type == "thinking_started") {
    ev.payload = ThinkingStarted{};
  } else if (type == "agent_reply") {
    ev.payload = AgentReply{require_as<std::string>(j, "text")};
  } else if (type == "sentiment_updated") {
    ev.payload = SentimentUpdated{reading_from_json(require(j, "reading")),
                                  weights_from_json(require(j, "weights")),
                                  decay_from_json(require(j, "decay"))};
  } else if (type == "speech_started") {
    LipSyncTrack track{lipsync_frames_from_json(require(j, "lipsync")),
                       require_as<double>(j, "duration_ms")};
    ev.payload = SpeechStarted{require_as<std::string>(j, "audio_ref"), std::move(track)};
  } else if (type == "speech_finished") {
    ev.payload = SpeechFinished{};
  } else if (type == "expression_tick") {
    ev.payload = ExpressionTick{weights_from_json(require(j, "weights"))};
  } else if (type == "turn_error") {
    ErrorKind kind{};
    if (!error_kind_from_string(require_as<std::string>(j, "kind"), kind)) {
      throw parse_error("unknown error kind");
    }
    ev.payload = TurnError{kind, require_as<std::string>(j, "message")};
  } else {
    throw parse_error("unknown event type \"" + type + "\"");
  }
  return ev;
}

// --- client commands --------------------------------------------------------

struct UtteranceCommand {
  std::string text;
};
struct SetConfigCommand {
  std::optional<double> decay_hold_ms;
  std::optional<double> decay_decay_ms;
};
struct PingCommand {};

using ClientCommand = std::variant<UtteranceCommand, SetConfigCommand, PingCommand>;

/// Schema-checked: unknown types and unknown fields are ParseErrors.
inline ClientCommand parse_command(const std::string& text) {
  const json j = json::parse(text, nullptr, false);
  if (j.is_discarded()) throw parse_error("command is not valid JSON");
  if (!j.is_object()) throw parse_error("command must be a JSON object");
  const auto type = require_as<std::string>(j, "type");
  auto only = [&](std::initializer_list<std::string_view> allowed) {
    for (const auto& [key, _] : j.items()) {
      if (key == "type") continue;
      if (std::find(allowed.begin(), allowed.end(), key) == allowed.end()) {
        throw parse_error("unknown field \"" + key + "\" in " + type + " command");
      }
    }
  };
  if (type == "utterance") {
    only({"text"});
    return UtteranceCommand{require_as<std::string>(j, "text")};
  }
  if (type == "set_config") {
    only({"decay_hold_ms", "decay_decay_ms"});
    SetConfigCommand cmd;
    if (j.contains("decay_hold_ms")) cmd.decay_hold_ms = require_as<double>(j, "decay_hold_ms");
    if (j.contains("decay_decay_ms")) cmd.decay_decay_ms = require_as<double>(j, "decay_decay_ms");
    return cmd;
  }
  if (type == "ping") {
    only({});
    return PingCommand{};
  }
  throw parse_error("unknown command type \"" + type + "\"");
}

/// Out-of-band replies sent only to the connection that issued a command.
inline json command_error_json(ErrorKind kind, const std::string& message) {
  return json{{"type", "command_error"},
              {"kind", std::string(to_string(kind))},
              {"message", message}};
}

// --- transcript records -----------------------------------------------------

/// Transcript line for the events that are persisted (chat turns and
/// sentiment updates); nullopt for everything else.
inline std::optional<json> transcript_record(const TurnEvent& ev) {
  json payload;
  std::string kind;
  if (ev.is<UserUtterance>() || ev.is<AgentReply>()) {
    kind = "chat_turn";
    const bool user = ev.is<UserUtterance>();
    payload = json{{"role", user ? "user" : "agent"},
                   {"text", user ? ev.as<UserUtterance>().text : ev.as<AgentReply>().text},
                   {"turn", ev.turn}};
  } else if (ev.is<SentimentUpdated>()) {
    kind = "sentiment_updated";
    const auto& s = ev.as<SentimentUpdated>();
    payload = json{{"reading", reading_to_json(s.reading)},
                   {"weights", weights_to_json(s.weights)},
                   {"decay", decay_to_json(s.decay)},
                   {"turn", ev.turn}};
  } else {
    return std::nullopt;
  }
  return json{{"session", ev.session}, {"at_ms", ev.at}, {"kind", kind}, {"payload", payload}};
}

}  // namespace e3va::wire
