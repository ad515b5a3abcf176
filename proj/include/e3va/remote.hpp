#pragma once

// Providers backed by an OpenAI-compatible HTTP API:
//   POST {base}/chat/completions      language model
//   POST {base}/audio/speech          text to speech (WAV response)
//   POST {base}/audio/transcriptions  speech to text (multipart upload)
//
// Needs CPPHTTPLIB_OPENSSL_SUPPORT for https base URLs.

#include <chrono>
#include <string>
#include <utility>

#include "e3va/dialogue.hpp"
#include "e3va/error.hpp"
#include "e3va/speech.hpp"
#include "e3va/wav.hpp"
#include "httplib.h"
#include "json.hpp"

namespace e3va {

struct RemoteEndpoint {
  std::string base_url;  // e.g. https://api.openai.com/v1
  std::string api_key;
  std::string model;
  std::chrono::milliseconds timeout{15000};
};

namespace detail {

struct SplitUrl {
  std::string origin;  // scheme://host[:port]
  std::string path;    // "" or "/v1"
};

inline SplitUrl split_base_url(const std::string& url) {
  const auto scheme_end = url.find("://");
  if (scheme_end == std::string::npos) {
    throw Error(ErrorKind::InvalidConfig, "base URL needs a scheme: " + url);
  }
  const std::string scheme = url.substr(0, scheme_end);
  if (scheme != "http" && scheme != "https") {
    throw Error(ErrorKind::InvalidConfig, "unsupported scheme in " + url);
  }
  const auto slash = url.find('/', scheme_end + 3);
  SplitUrl out;
  out.origin = url.substr(0, slash);
  if (out.origin.size() == scheme_end + 3) {
    throw Error(ErrorKind::InvalidConfig, "base URL has no host: " + url);
  }
  if (slash != std::string::npos) {
    out.path = url.substr(slash);
    while (!out.path.empty() && out.path.back() == '/') out.path.pop_back();
  }
  return out;
}

inline std::string_view role_name(MessageRole r) {
  switch (r) {
    case MessageRole::System: return "system";
    case MessageRole::User: return "user";
    case MessageRole::Assistant: return "assistant";
  }
  return "user";
}

class HttpCall {
 public:
  HttpCall(const RemoteEndpoint& ep, std::chrono::milliseconds timeout)
      : url_(split_base_url(ep.base_url)), client_(url_.origin), timeout_(timeout) {
    const auto secs = timeout.count() / 1000;
    const auto usecs = (timeout.count() % 1000) * 1000;
    client_.set_connection_timeout(secs, usecs);
    client_.set_read_timeout(secs, usecs);
    client_.set_write_timeout(secs, usecs);
    if (!ep.api_key.empty()) client_.set_bearer_token_auth(ep.api_key);
  }

  std::string path(std::string_view suffix) const { return url_.path + std::string(suffix); }
  httplib::Client& client() { return client_; }

  /// Maps transport failures and non-2xx answers onto provider errors.
  std::string check(const httplib::Result& res, std::chrono::steady_clock::time_point start) {
    if (!res) {
      const auto elapsed = std::chrono::steady_clock::now() - start;
      const auto err = res.error();
      if (err == httplib::Error::ConnectionTimeout || elapsed >= timeout_) {
        throw Error(ErrorKind::ProviderTimeout,
                    "no answer from " + url_.origin + " within " +
                        std::to_string(timeout_.count()) + " ms");
      }
      throw Error(ErrorKind::ProviderError, url_.origin + ": " + httplib::to_string(err));
    }
    if (res->status < 200 || res->status >= 300) {
      std::string body = res->body.substr(0, 300);
      throw Error(ErrorKind::ProviderError,
                  "HTTP " + std::to_string(res->status) + " from " + url_.origin + ": " + body,
                  res->status);
    }
    return res->body;
  }

 private:
  SplitUrl url_;
  httplib::Client client_;
  std::chrono::milliseconds timeout_;
};

inline nlohmann::json parse_body(const std::string& body, const char* what) {
  auto j = nlohmann::json::parse(body, nullptr, false);
  if (j.is_discarded()) {
    throw Error(ErrorKind::ProviderError, std::string(what) + " response is not JSON");
  }
  return j;
}

}  // namespace detail

class RemoteProvider : public LlmProvider {
 public:
  explicit RemoteProvider(RemoteEndpoint ep) : ep_(std::move(ep)) {
    detail::split_base_url(ep_.base_url);
  }

  std::string complete(const std::vector<Message>& messages,
                       std::chrono::milliseconds timeout) override {
    nlohmann::json msgs = nlohmann::json::array();
    for (const auto& m : messages) {
      msgs.push_back({{"role", detail::role_name(m.role)}, {"content", m.content}});
    }
    const nlohmann::json body{{"model", ep_.model}, {"messages", std::move(msgs)}};
    detail::HttpCall call(ep_, timeout);
    const auto start = std::chrono::steady_clock::now();
    const auto text = call.check(
        call.client().Post(call.path("/chat/completions"), body.dump(), "application/json"),
        start);
    const auto j = detail::parse_body(text, "chat completion");
    try {
      const auto& content = j.at("choices").at(0).at("message").at("content");
      return content.is_null() ? std::string() : content.get<std::string>();
    } catch (const nlohmann::json::exception&) {
      throw Error(ErrorKind::ProviderError, "chat completion has no choices[0].message.content");
    }
  }

 private:
  RemoteEndpoint ep_;
};

class RemoteTts : public TtsProvider {
 public:
  explicit RemoteTts(RemoteEndpoint ep, std::string voice = "alloy")
      : ep_(std::move(ep)), voice_(std::move(voice)) {
    detail::split_base_url(ep_.base_url);
  }

  AudioClip synthesize(const std::string& text) override {
    const nlohmann::json body{{"model", ep_.model},
                              {"input", text},
                              {"voice", voice_},
                              {"response_format", "wav"}};
    detail::HttpCall call(ep_, ep_.timeout);
    const auto start = std::chrono::steady_clock::now();
    const auto wav = call.check(
        call.client().Post(call.path("/audio/speech"), body.dump(), "application/json"), start);
    return decode_wav(wav);
  }

 private:
  RemoteEndpoint ep_;
  std::string voice_;
};

class RemoteAsr : public AsrProvider {
 public:
  explicit RemoteAsr(RemoteEndpoint ep) : ep_(std::move(ep)) {
    detail::split_base_url(ep_.base_url);
  }

  std::string transcribe(const AudioClip& clip) override {
    const httplib::MultipartFormDataItems items = {
        {"file", encode_wav(clip), "speech.wav", "audio/wav"},
        {"model", ep_.model, "", ""},
    };
    detail::HttpCall call(ep_, ep_.timeout);
    const auto start = std::chrono::steady_clock::now();
    const auto text =
        call.check(call.client().Post(call.path("/audio/transcriptions"), items), start);
    const auto j = detail::parse_body(text, "transcription");
    if (!j.is_object() || !j.contains("text") || !j["text"].is_string()) {
      throw Error(ErrorKind::ProviderError, "transcription has no text field");
    }
    return j["text"].get<std::string>();
  }

 private:
  RemoteEndpoint ep_;
};

}  // namespace e3va
