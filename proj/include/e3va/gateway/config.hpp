#pragma once

// Service configuration: built-in defaults, then an optional JSON file, then
// environment variables (highest precedence).
//
//   env               file key            default
//   BIND_ADDR         bind_addr           127.0.0.1:8080
//   LLM_PROVIDER      llm_provider        openai      (openai | scripted)
//   LLM_BASE_URL      llm_base_url        https://api.openai.com/v1
//   LLM_MODEL         llm_model           gpt-4o-mini
//   LLM_API_KEY       llm_api_key         (required unless scripted)
//   LLM_TIMEOUT_MS    llm_timeout_ms      15000
//   TTS_PROVIDER      tts_provider        openai      (openai | scripted)
//   TTS_MODEL         tts_model           tts-1
//   TTS_VOICE         tts_voice           alloy
//   ASR_PROVIDER      asr_provider        none        (openai | scripted | none)
//   ASR_MODEL         asr_model           whisper-1
//   DECAY_HOLD_MS     decay_hold_ms       4000
//   DECAY_DECAY_MS    decay_decay_ms      2000
//   TRANSCRIPT_DIR    transcript_dir      transcripts
//   PROMPTS_DIR       prompts_dir         (built-in prompts)
//   SCRIPTED_FIXTURE  scripted_fixture    (built-in demo fixtures)

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <functional>
#include <map>
#include <optional>
#include <string>

#include "e3va/dialogue.hpp"
#include "e3va/error.hpp"
#include "e3va/gateway/scenario.hpp"
#include "e3va/live_engine.hpp"
#include "e3va/prompts.hpp"
#include "e3va/remote.hpp"
#include "e3va/speech.hpp"
#include "json.hpp"

namespace e3va {

struct ServiceConfig {
  std::string bind_host = "127.0.0.1";
  unsigned short bind_port = 8080;
  std::string llm_provider = "openai";
  std::string llm_base_url = "https://api.openai.com/v1";
  std::string llm_model = "gpt-4o-mini";
  std::string llm_api_key;
  std::chrono::milliseconds llm_timeout{15000};
  std::string tts_provider = "openai";
  std::string tts_model = "tts-1";
  std::string tts_voice = "alloy";
  std::string asr_provider = "none";
  std::string asr_model = "whisper-1";
  DecayParams decay;
  std::filesystem::path transcript_dir = "transcripts";
  std::filesystem::path prompts_dir;
  std::filesystem::path scripted_fixture;

  /// Switches every provider to its offline stub.
  void make_scripted() {
    llm_provider = "scripted";
    tts_provider = "scripted";
    if (asr_provider != "none") asr_provider = "scripted";
  }
};

using EnvLookup = std::function<std::optional<std::string>(const std::string&)>;

inline std::optional<std::string> process_env(const std::string& name) {
  const char* v = std::getenv(name.c_str());
  if (!v) return std::nullopt;
  return std::string(v);
}

namespace detail {

inline void parse_bind(const std::string& addr, ServiceConfig& cfg) {
  const auto colon = addr.rfind(':');
  if (colon == std::string::npos || colon == 0) {
    throw Error(ErrorKind::InvalidConfig, "BIND_ADDR must be host:port, got \"" + addr + "\"");
  }
  const auto port_text = addr.substr(colon + 1);
  long port = -1;
  try {
    std::size_t used = 0;
    port = std::stol(port_text, &used);
    if (used != port_text.size()) port = -1;
  } catch (const std::exception&) {
  }
  if (port < 0 || port > 65535) {
    throw Error(ErrorKind::InvalidConfig, "bad port in BIND_ADDR \"" + addr + "\"");
  }
  cfg.bind_host = addr.substr(0, colon);
  cfg.bind_port = static_cast<unsigned short>(port);
}

inline double parse_number(const std::string& name, const std::string& text) {
  try {
    std::size_t used = 0;
    const double v = std::stod(text, &used);
    if (used == text.size()) return v;
  } catch (const std::exception&) {
  }
  throw Error(ErrorKind::InvalidConfig, name + " is not a number: \"" + text + "\"");
}

inline void check_choice(const std::string& name, const std::string& value,
                         std::initializer_list<const char*> allowed) {
  for (const char* a : allowed) {
    if (value == a) return;
  }
  throw Error(ErrorKind::InvalidConfig, name + " has unsupported value \"" + value + "\"");
}

}  // namespace detail

/// `file` may be empty. Unknown keys in the file are rejected.
inline ServiceConfig load_config(const std::filesystem::path& file = {},
                                 const EnvLookup& env = process_env) {
  std::map<std::string, std::string> values;
  static const char* keys[] = {"bind_addr",      "llm_provider",   "llm_base_url",
                               "llm_model",      "llm_api_key",    "llm_timeout_ms",
                               "tts_provider",   "tts_model",      "tts_voice",
                               "asr_provider",   "asr_model",      "decay_hold_ms",
                               "decay_decay_ms", "transcript_dir", "prompts_dir",
                               "scripted_fixture"};
  if (!file.empty()) {
    std::ifstream in(file, std::ios::binary);
    if (!in) throw Error(ErrorKind::InvalidConfig, "cannot read config " + file.string());
    const auto j = nlohmann::json::parse(in, nullptr, false);
    if (j.is_discarded() || !j.is_object()) {
      throw Error(ErrorKind::InvalidConfig, file.string() + " is not a JSON object");
    }
    for (const auto& [key, value] : j.items()) {
      if (std::find_if(std::begin(keys), std::end(keys),
                       [&](const char* k) { return key == k; }) == std::end(keys)) {
        throw Error(ErrorKind::InvalidConfig, "unknown config key \"" + key + "\"");
      }
      values[key] = value.is_string() ? value.get<std::string>() : value.dump();
    }
  }
  for (const char* key : keys) {
    std::string upper(key);
    for (auto& c : upper) c = static_cast<char>(std::toupper(static_cast<unsigned char>(c)));
    if (auto v = env(upper)) values[key] = *v;
  }

  ServiceConfig cfg;
  auto take = [&](const char* key, auto&& apply) {
    if (auto it = values.find(key); it != values.end()) apply(it->second);
  };
  take("bind_addr", [&](const std::string& v) { detail::parse_bind(v, cfg); });
  take("llm_provider", [&](const std::string& v) { cfg.llm_provider = v; });
  take("llm_base_url", [&](const std::string& v) { cfg.llm_base_url = v; });
  take("llm_model", [&](const std::string& v) { cfg.llm_model = v; });
  take("llm_api_key", [&](const std::string& v) { cfg.llm_api_key = v; });
  take("llm_timeout_ms", [&](const std::string& v) {
    const double ms = detail::parse_number("LLM_TIMEOUT_MS", v);
    if (!(ms > 0)) throw Error(ErrorKind::InvalidConfig, "LLM_TIMEOUT_MS must be > 0");
    cfg.llm_timeout = std::chrono::milliseconds(static_cast<std::int64_t>(ms));
  });
  take("tts_provider", [&](const std::string& v) { cfg.tts_provider = v; });
  take("tts_model", [&](const std::string& v) { cfg.tts_model = v; });
  take("tts_voice", [&](const std::string& v) { cfg.tts_voice = v; });
  take("asr_provider", [&](const std::string& v) { cfg.asr_provider = v; });
  take("asr_model", [&](const std::string& v) { cfg.asr_model = v; });
  double hold = cfg.decay.hold_ms, decay = cfg.decay.decay_ms;
  take("decay_hold_ms", [&](const std::string& v) { hold = detail::parse_number("DECAY_HOLD_MS", v); });
  take("decay_decay_ms",
       [&](const std::string& v) { decay = detail::parse_number("DECAY_DECAY_MS", v); });
  try {
    cfg.decay = DecayParams::make(hold, decay);
  } catch (const Error& e) {
    throw Error(ErrorKind::InvalidConfig, e.what());
  }
  take("transcript_dir", [&](const std::string& v) { cfg.transcript_dir = v; });
  take("prompts_dir", [&](const std::string& v) { cfg.prompts_dir = v; });
  take("scripted_fixture", [&](const std::string& v) { cfg.scripted_fixture = v; });

  detail::check_choice("LLM_PROVIDER", cfg.llm_provider, {"openai", "scripted"});
  detail::check_choice("TTS_PROVIDER", cfg.tts_provider, {"openai", "scripted"});
  detail::check_choice("ASR_PROVIDER", cfg.asr_provider, {"openai", "scripted", "none"});
  return cfg;
}

/// Credentials are only needed for remote providers; call after any
/// command-line overrides.
inline void validate_config(const ServiceConfig& cfg) {
  const bool remote = cfg.llm_provider == "openai" || cfg.tts_provider == "openai" ||
                      cfg.asr_provider == "openai";
  if (remote) {
    if (cfg.llm_api_key.empty()) {
      throw Error(ErrorKind::InvalidConfig,
                  "LLM_API_KEY is required unless every provider is scripted");
    }
    detail::split_base_url(cfg.llm_base_url);
  }
}

/// Demo fixtures used by scripted mode when no fixture file is given. Replies
/// are long enough that a session stays busy for a moment after each turn.
inline Scenario builtin_demo_fixtures() {
  Scenario sc;
  auto mood = [](const char* m, int k) {
    return R"({"mood":")" + std::string(m) + R"(","intensity":)" + std::to_string(k) + "}";
  };
  sc.replies = {
      {"day", "That sounds wonderful! What was the best part of it for you?"},
      {"sad", "I'm sorry you're feeling down. Do you want to talk about what happened?"},
      {"angry", "That sounds really frustrating. It makes sense that you feel this way."},
      {"", "I'm here and listening. Tell me a little more about that, please."},
  };
  sc.sentiments = {
      {"great", mood("happy", 3)}, {"good", mood("happy", 2)},  {"sad", mood("sad", 2)},
      {"angry", mood("angry", 3)}, {"scared", mood("fearful", 2)},
      {"wow", mood("surprised", 3)}, {"gross", mood("disgust", 2)}, {"", mood("neutral", 1)},
  };
  return sc;
}

inline Providers make_providers(const ServiceConfig& cfg) {
  Providers p;
  if (cfg.llm_provider == "scripted") {
    // Built-in fixtures are keyword tables; a fixture file replays in order.
    const bool demo = cfg.scripted_fixture.empty();
    const Scenario sc = demo ? builtin_demo_fixtures() : read_scenario(cfg.scripted_fixture);
    const auto pick = demo ? ScriptedProvider::Pick::FirstMatch : ScriptedProvider::Pick::Once;
    p.reply = std::make_shared<ScriptedProvider>(sc.replies, pick);
    p.sentiment = std::make_shared<ScriptedProvider>(sc.sentiments, pick);
  } else {
    RemoteEndpoint ep{cfg.llm_base_url, cfg.llm_api_key, cfg.llm_model, cfg.llm_timeout};
    p.reply = std::make_shared<RemoteProvider>(ep);
    p.sentiment = p.reply;
  }
  if (cfg.tts_provider == "scripted") {
    p.tts = std::make_shared<SilenceTts>();
  } else {
    p.tts = std::make_shared<RemoteTts>(
        RemoteEndpoint{cfg.llm_base_url, cfg.llm_api_key, cfg.tts_model, cfg.llm_timeout},
        cfg.tts_voice);
  }
  if (cfg.asr_provider == "scripted") {
    p.asr = std::make_shared<EchoAsr>("hello there");
  } else if (cfg.asr_provider == "openai") {
    p.asr = std::make_shared<RemoteAsr>(
        RemoteEndpoint{cfg.llm_base_url, cfg.llm_api_key, cfg.asr_model, cfg.llm_timeout});
  }
  return p;
}

inline EngineOptions make_engine_options(const ServiceConfig& cfg) {
  EngineOptions o;
  o.session.decay = cfg.decay;
  o.session.reply_timeout = cfg.llm_timeout;
  o.session.sentiment_timeout = cfg.llm_timeout;
  o.session.prompts =
      cfg.prompts_dir.empty() ? prompts::builtin_prompts() : prompts::load_prompt_assets(cfg.prompts_dir);
  o.transcript_dir = cfg.transcript_dir;
  return o;
}

}  // namespace e3va
