#pragma once

// Conversation history, companion request construction and the language
// model provider abstraction.

#include <algorithm>
#include <chrono>
#include <cstdint>
#include <future>
#include <memory>
#include <mutex>
#include <optional>
#include <string>
#include <string_view>
#include <thread>
#include <vector>

#include "e3va/affect.hpp"
#include "e3va/error.hpp"
#include "e3va/prompts.hpp"
#include "e3va/text.hpp"

namespace e3va {

enum class ChatRole { User, Agent };

inline constexpr std::string_view to_string(ChatRole r) noexcept {
  return r == ChatRole::User ? "user" : "agent";
}

struct ChatTurn {
  ChatRole role;
  std::string text;
  TimestampMs at;

  friend bool operator==(const ChatTurn&, const ChatTurn&) = default;
};

/// Ordered, immutable list of turns. append() returns a new history.
class ConversationHistory {
 public:
  ConversationHistory() = default;

  const std::vector<ChatTurn>& turns() const noexcept { return turns_; }
  std::size_t size() const noexcept { return turns_.size(); }
  bool empty() const noexcept { return turns_.empty(); }

  ConversationHistory append(ChatRole role, std::string text, TimestampMs at) const {
    if (trim_view(text).empty()) {
      throw Error(ErrorKind::EmptyUtterance, "chat turn text is blank");
    }
    if (!turns_.empty()) {
      const ChatTurn& tail = turns_.back();
      if (at < tail.at) {
        throw Error(ErrorKind::ClockRegression,
                    "turn at " + std::to_string(at) + " precedes tail at " +
                        std::to_string(tail.at));
      }
      if (tail.role == role && tail.at == at && tail.text == text) {
        throw Error(ErrorKind::InvalidArgument, "duplicate consecutive turn");
      }
    }
    ConversationHistory next = *this;
    next.turns_.push_back(ChatTurn{role, std::move(text), at});
    return next;
  }

  friend bool operator==(const ConversationHistory&,
                         const ConversationHistory&) = default;

 private:
  std::vector<ChatTurn> turns_;
};

inline ConversationHistory append_turn(const ConversationHistory& history,
                                       ChatRole role, std::string text,
                                       TimestampMs at) {
  return history.append(role, std::move(text), at);
}

/// Most recent turns included in a companion request.
inline constexpr std::size_t kHistoryWindow = 20;

/// [system: companion prompt] ++ last kHistoryWindow turns ++ [user: text].
inline std::vector<Message> build_companion_messages(
    const ConversationHistory& history, std::string_view user_text,
    std::string_view system_prompt = prompts::kCompanion,
    std::size_t window = kHistoryWindow) {
  if (trim_view(user_text).empty()) {
    throw Error(ErrorKind::EmptyUtterance, "utterance is blank");
  }
  const auto& turns = history.turns();
  const std::size_t first = turns.size() > window ? turns.size() - window : 0;
  std::vector<Message> out;
  out.reserve(turns.size() - first + 2);
  out.push_back(Message{MessageRole::System, std::string(system_prompt)});
  for (std::size_t i = first; i < turns.size(); ++i) {
    out.push_back(Message{turns[i].role == ChatRole::User ? MessageRole::User
                                                          : MessageRole::Assistant,
                          turns[i].text});
  }
  out.push_back(Message{MessageRole::User, std::string(user_text)});
  return out;
}

/// A chat-completions backend. Implementations must tolerate concurrent calls.
class LlmProvider {
 public:
  virtual ~LlmProvider() = default;
  virtual std::string complete(const std::vector<Message>& messages,
                               std::chrono::milliseconds timeout) = 0;
};

enum class ScriptedFailure { None, Hang, Error, Empty };

struct ScriptedReply {
  std::string match;  // substring of the last user message; "" matches all
  std::string reply;
  std::int64_t delay_ms = 0;
  ScriptedFailure failure = ScriptedFailure::None;
};

/// What a scripted call resolves to, before any real-time waiting.
struct ScriptedOutcome {
  std::string reply;
  std::int64_t delay_ms = 0;
  ScriptedFailure failure = ScriptedFailure::None;
  bool matched = false;
};

inline std::string last_user_content(const std::vector<Message>& messages) {
  for (auto it = messages.rbegin(); it != messages.rend(); ++it) {
    if (it->role == MessageRole::User) return it->content;
  }
  return {};
}

/// Deterministic stand-in for a language model. Each call picks the first
/// not-yet-used fixture whose `match` occurs in the last user message; once
/// every match is used the last matching fixture repeats.
class ScriptedProvider : public LlmProvider {
 public:
  /// Once: the first unused matching fixture, falling back to the last
  /// match once all are used. FirstMatch: always the first matching fixture.
  enum class Pick { Once, FirstMatch };

  explicit ScriptedProvider(std::vector<ScriptedReply> fixtures, Pick pick = Pick::Once)
      : fixtures_(std::move(fixtures)), used_(fixtures_.size(), false), pick_(pick) {}

  ScriptedOutcome next(const std::vector<Message>& messages) {
    const std::string needle = last_user_content(messages);
    std::lock_guard lock(mu_);
    std::optional<std::size_t> fresh;
    std::optional<std::size_t> last;
    for (std::size_t i = 0; i < fixtures_.size(); ++i) {
      if (needle.find(fixtures_[i].match) == std::string::npos) continue;
      last = i;
      if ((pick_ == Pick::FirstMatch || !used_[i]) && !fresh) fresh = i;
    }
    const auto pick = fresh ? fresh : last;
    if (!pick) return ScriptedOutcome{};
    used_[*pick] = true;
    const auto& f = fixtures_[*pick];
    return ScriptedOutcome{f.reply, f.delay_ms, f.failure, true};
  }

  std::string complete(const std::vector<Message>& messages,
                       std::chrono::milliseconds timeout) override {
    const ScriptedOutcome out = next(messages);
    if (!out.matched) {
      throw Error(ErrorKind::ProviderError,
                  "no scripted reply matches \"" + last_user_content(messages) + "\"",
                  404);
    }
    if (out.failure == ScriptedFailure::Hang ||
        std::chrono::milliseconds(out.delay_ms) > timeout) {
      std::this_thread::sleep_for(timeout);
      throw Error(ErrorKind::ProviderTimeout, "scripted provider timed out");
    }
    std::this_thread::sleep_for(std::chrono::milliseconds(out.delay_ms));
    switch (out.failure) {
      case ScriptedFailure::Error:
        throw Error(ErrorKind::ProviderError, "scripted provider failure", 500);
      case ScriptedFailure::Empty:
        return "   ";
      default:
        return out.reply;
    }
  }

  void reset() {
    std::lock_guard lock(mu_);
    std::fill(used_.begin(), used_.end(), false);
  }

 private:
  std::vector<ScriptedReply> fixtures_;
  std::vector<bool> used_;
  Pick pick_;
  std::mutex mu_;
};

/// Runs the provider with a hard deadline and normalises the reply.
/// The call runs on its own thread so that a provider ignoring `timeout`
/// still cannot hold the caller past the deadline.
inline std::string complete(std::shared_ptr<LlmProvider> provider,
                            std::vector<Message> messages,
                            std::chrono::milliseconds timeout) {
  if (!provider) throw Error(ErrorKind::InvalidArgument, "no provider");
  if (messages.empty()) throw Error(ErrorKind::InvalidArgument, "no messages");
  if (timeout.count() <= 0) throw Error(ErrorKind::InvalidArgument, "timeout must be > 0");

  auto promise = std::make_shared<std::promise<std::string>>();
  auto result = promise->get_future();
  std::thread([provider = std::move(provider), messages = std::move(messages),
               timeout, promise] {
    try {
      promise->set_value(provider->complete(messages, timeout));
    } catch (...) {
      promise->set_exception(std::current_exception());
    }
  }).detach();

  if (result.wait_for(timeout) != std::future_status::ready) {
    throw Error(ErrorKind::ProviderTimeout,
                "no reply within " + std::to_string(timeout.count()) + " ms");
  }
  std::string text;
  try {
    text = result.get();
  } catch (const Error&) {
    throw;
  } catch (const std::exception& e) {
    throw Error(ErrorKind::ProviderError, e.what());
  }
  text = trim(text);
  if (text.empty()) throw Error(ErrorKind::EmptyReply, "provider returned a blank reply");
  return text;
}

}  // namespace e3va
