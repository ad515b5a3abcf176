#pragma once

// Per-session turn state machine.
//
// SessionMachine is the serialized core of a session: it never blocks and
// never calls a provider. Every input (user text, provider completion, speech
// clock) arrives as a method call carrying `now`; every output is a Step of
// TurnEvents to publish plus Effects for the driver to perform. Drivers run
// the effects (on real threads or on a virtual clock) and feed completions
// back in, tagged with the turn they belong to; stale completions are dropped.

#include <chrono>
#include <cmath>
#include <cstdint>
#include <optional>
#include <string>
#include <string_view>
#include <variant>
#include <vector>

#include "e3va/affect.hpp"
#include "e3va/dialogue.hpp"
#include "e3va/error.hpp"
#include "e3va/prompts.hpp"
#include "e3va/sentiment.hpp"
#include "e3va/speech.hpp"

namespace e3va {

enum class SessionState { Idle, Thinking, Speaking };

inline constexpr std::string_view to_string(SessionState s) noexcept {
  switch (s) {
    case SessionState::Idle: return "idle";
    case SessionState::Thinking: return "thinking";
    case SessionState::Speaking: return "speaking";
  }
  return "idle";
}

inline constexpr bool is_legal_transition(SessionState from, SessionState to) noexcept {
  using S = SessionState;
  return (from == S::Idle && to == S::Thinking) ||
         (from == S::Thinking && to == S::Speaking) ||
         (from == S::Thinking && to == S::Idle) ||
         (from == S::Speaking && to == S::Idle);
}

// Event payloads.
struct UserUtterance {
  std::string text;
  friend bool operator==(const UserUtterance&, const UserUtterance&) = default;
};
struct ThinkingStarted {
  friend bool operator==(const ThinkingStarted&, const ThinkingStarted&) = default;
};
struct AgentReply {
  std::string text;
  friend bool operator==(const AgentReply&, const AgentReply&) = default;
};
struct SentimentUpdated {
  SentimentReading reading;
  BlendWeights weights;
  DecayParams decay;
  friend bool operator==(const SentimentUpdated&, const SentimentUpdated&) = default;
};
struct SpeechStarted {
  std::string audio_ref;
  LipSyncTrack lipsync;
  friend bool operator==(const SpeechStarted&, const SpeechStarted&) = default;
};
struct SpeechFinished {
  friend bool operator==(const SpeechFinished&, const SpeechFinished&) = default;
};
struct ExpressionTick {
  BlendWeights weights;
  friend bool operator==(const ExpressionTick&, const ExpressionTick&) = default;
};
struct TurnError {
  ErrorKind kind;
  std::string message;
  friend bool operator==(const TurnError&, const TurnError&) = default;
};

using EventPayload =
    std::variant<UserUtterance, ThinkingStarted, AgentReply, SentimentUpdated,
                 SpeechStarted, SpeechFinished, ExpressionTick, TurnError>;

struct TurnEvent {
  std::string session;
  TimestampMs at = 0;
  std::uint64_t turn = 0;
  EventPayload payload;

  template <class T>
  bool is() const noexcept {
    return std::holds_alternative<T>(payload);
  }
  template <class T>
  const T& as() const {
    return std::get<T>(payload);
  }

  friend bool operator==(const TurnEvent&, const TurnEvent&) = default;
};

inline std::string_view event_type_name(const EventPayload& p) noexcept {
  struct Namer {
    std::string_view operator()(const UserUtterance&) const { return "user_utterance"; }
    std::string_view operator()(const ThinkingStarted&) const { return "thinking_started"; }
    std::string_view operator()(const AgentReply&) const { return "agent_reply"; }
    std::string_view operator()(const SentimentUpdated&) const { return "sentiment_updated"; }
    std::string_view operator()(const SpeechStarted&) const { return "speech_started"; }
    std::string_view operator()(const SpeechFinished&) const { return "speech_finished"; }
    std::string_view operator()(const ExpressionTick&) const { return "expression_tick"; }
    std::string_view operator()(const TurnError&) const { return "turn_error"; }
  };
  return std::visit(Namer{}, p);
}

/// A failed provider call, as delivered back into the machine.
struct Failure {
  ErrorKind kind;
  std::string message;
};

using Completion = std::variant<std::string, Failure>;
using SpeechResult = std::variant<AudioClip, Failure>;

// Effects the driver must carry out.
struct RequestReply {
  std::uint64_t turn;
  std::vector<Message> messages;
  std::chrono::milliseconds timeout;
};
struct RequestSentiment {
  std::uint64_t turn;
  SentimentRequest request;
  std::chrono::milliseconds timeout;
};
struct Synthesize {
  std::uint64_t turn;
  std::string text;
};
struct ScheduleSpeechEnd {
  std::uint64_t turn;
  TimestampMs at;
};

using Effect = std::variant<RequestReply, RequestSentiment, Synthesize, ScheduleSpeechEnd>;

struct Step {
  std::vector<TurnEvent> events;
  std::vector<Effect> effects;
};

struct SessionConfig {
  DecayParams decay;
  std::chrono::milliseconds reply_timeout{15000};
  std::chrono::milliseconds sentiment_timeout{15000};
  LipSyncParams lipsync;
  prompts::PromptSet prompts = prompts::builtin_prompts();
};

/// Minimum per-channel change that makes a tick worth emitting.
inline constexpr double kTickDelta = 0.005;

/// Nominal tick rate drivers should use.
inline constexpr int kTickHz = 30;

inline std::string audio_ref_for(std::string_view session, std::uint64_t turn) {
  return "/sessions/" + std::string(session) + "/audio/" + std::to_string(turn);
}

class SessionMachine {
 public:
  SessionMachine(std::string id, SessionConfig config, TimestampMs now)
      : id_(std::move(id)), config_(std::move(config)), last_now_(now) {
    expression_.onset = now;
    expression_.params = config_.decay;
  }

  const std::string& id() const noexcept { return id_; }
  SessionState state() const noexcept { return state_; }
  const ConversationHistory& history() const noexcept { return history_; }
  const ExpressionState& expression() const noexcept { return expression_; }
  const SessionConfig& config() const noexcept { return config_; }
  std::uint64_t turn() const noexcept { return turn_; }

  /// Applies to readings that arrive after the call.
  void set_decay(const DecayParams& params) { config_.decay = params; }
  void set_timeouts(std::chrono::milliseconds reply, std::chrono::milliseconds sentiment) {
    config_.reply_timeout = reply;
    config_.sentiment_timeout = sentiment;
  }

  Step submit_utterance(std::string_view text, TimestampMs now) {
    advance_clock(now);
    if (trim_view(text).empty()) {
      throw Error(ErrorKind::EmptyUtterance, "utterance is blank");
    }
    if (state_ != SessionState::Idle) {
      throw Error(ErrorKind::SessionBusy,
                  "session is " + std::string(to_string(state_)));
    }
    Step step;
    const auto messages = build_companion_messages(history_, text, config_.prompts.companion);
    auto sentiment = build_sentiment_request(text, config_.prompts.sentiment);

    ++turn_;
    reply_done_ = false;
    sentiment_done_ = false;
    reply_text_.clear();
    history_ = history_.append(ChatRole::User, std::string(text), now);
    emit(step, now, UserUtterance{std::string(text)});
    transition(SessionState::Thinking);
    emit(step, now, ThinkingStarted{});
    step.effects.emplace_back(RequestReply{turn_, messages, config_.reply_timeout});
    step.effects.emplace_back(
        RequestSentiment{turn_, std::move(sentiment), config_.sentiment_timeout});
    return step;
  }

  Step on_reply(std::uint64_t turn, Completion result, TimestampMs now) {
    advance_clock(now);
    Step step;
    if (!awaiting(turn) || reply_done_) return step;
    if (auto* failure = std::get_if<Failure>(&result)) {
      fail_turn(step, now, failure->kind, failure->message);
      return step;
    }
    std::string text = trim(std::get<std::string>(result));
    if (text.empty()) {
      fail_turn(step, now, ErrorKind::EmptyReply, "provider returned a blank reply");
      return step;
    }
    reply_done_ = true;
    reply_text_ = text;
    history_ = history_.append(ChatRole::Agent, text, now);
    emit(step, now, AgentReply{std::move(text)});
    maybe_synthesize(step);
    return step;
  }

  /// A failed or timed-out sentiment call degrades to (neutral, 1); it never
  /// fails the turn.
  Step on_sentiment(std::uint64_t turn, Completion result, TimestampMs now) {
    advance_clock(now);
    Step step;
    if (!awaiting(turn) || sentiment_done_) return step;
    SentimentReading reading;
    if (auto* raw = std::get_if<std::string>(&result)) {
      reading = parse_sentiment(*raw);
    } else {
      reading = SentimentReading{Mood::Neutral, Intensity::clamped(1), true, {}};
    }
    sentiment_done_ = true;
    ExpressionState base = expression_;
    base.params = config_.decay;
    expression_ = apply_reading(base, std::move(reading), now);
    emit(step, now,
         SentimentUpdated{expression_.reading, expression_at(expression_, now),
                          expression_.params});
    maybe_synthesize(step);
    return step;
  }

  Step on_speech(std::uint64_t turn, SpeechResult result, TimestampMs now) {
    advance_clock(now);
    Step step;
    if (!awaiting(turn) || !reply_done_ || !sentiment_done_) return step;
    if (auto* failure = std::get_if<Failure>(&result)) {
      fail_turn(step, now, failure->kind, failure->message);
      return step;
    }
    const auto& clip = std::get<AudioClip>(result);
    if (clip.empty()) {
      fail_turn(step, now, ErrorKind::EmptyClip, "synthesized clip is empty");
      return step;
    }
    LipSyncTrack track;
    try {
      track = lipsync_track(clip, config_.lipsync);
    } catch (const Error& e) {
      fail_turn(step, now, e.kind(), e.what());
      return step;
    }
    const auto end = now + static_cast<TimestampMs>(std::ceil(track.duration_ms));
    transition(SessionState::Speaking);
    emit(step, now, SpeechStarted{audio_ref_for(id_, turn_), std::move(track)});
    step.effects.emplace_back(ScheduleSpeechEnd{turn_, end});
    return step;
  }

  Step on_speech_end(std::uint64_t turn, TimestampMs now) {
    advance_clock(now);
    Step step;
    if (turn != turn_ || state_ != SessionState::Speaking) return step;
    transition(SessionState::Idle);
    emit(step, now, SpeechFinished{});
    return step;
  }

  /// Emits when some channel moved by at least kTickDelta since the last
  /// emitted tick, plus exactly one all-zero tick when the face settles.
  std::optional<TurnEvent> tick(TimestampMs now) {
    advance_clock(now);
    const BlendWeights w = expression_at(expression_, now);
    const bool emit_tick = w.is_zero() ? !last_tick_.is_zero()
                                       : w.max_abs_diff(last_tick_) >= kTickDelta;
    if (!emit_tick) return std::nullopt;
    last_tick_ = w;
    return TurnEvent{id_, now, turn_, ExpressionTick{w}};
  }

  /// True once the face is at rest and the rest pose has been published.
  bool expression_settled(TimestampMs now) const {
    return expression_at(expression_, now).is_zero() && last_tick_.is_zero();
  }

 private:
  bool awaiting(std::uint64_t turn) const noexcept {
    return turn == turn_ && state_ == SessionState::Thinking;
  }

  void advance_clock(TimestampMs now) {
    if (now < last_now_) {
      throw Error(ErrorKind::ClockRegression,
                  "clock moved back from " + std::to_string(last_now_) + " to " +
                      std::to_string(now));
    }
    last_now_ = now;
  }

  void transition(SessionState next) {
    if (!is_legal_transition(state_, next)) {
      throw Error(ErrorKind::InvalidArgument,
                  "illegal transition " + std::string(to_string(state_)) + " -> " +
                      std::string(to_string(next)));
    }
    state_ = next;
  }

  void emit(Step& step, TimestampMs now, EventPayload payload) {
    step.events.push_back(TurnEvent{id_, now, turn_, std::move(payload)});
  }

  void fail_turn(Step& step, TimestampMs now, ErrorKind kind, std::string message) {
    transition(SessionState::Idle);
    emit(step, now, TurnError{kind, std::move(message)});
  }

  // Speech starts once both the reply and the sentiment are in, so the
  // face already carries the new expression when the agent starts talking.
  void maybe_synthesize(Step& step) {
    if (reply_done_ && sentiment_done_) {
      step.effects.emplace_back(Synthesize{turn_, reply_text_});
    }
  }

  std::string id_;
  SessionConfig config_;
  TimestampMs last_now_;
  SessionState state_ = SessionState::Idle;
  ConversationHistory history_;
  ExpressionState expression_;
  BlendWeights last_tick_;
  std::uint64_t turn_ = 0;
  bool reply_done_ = false;
  bool sentiment_done_ = false;
  std::string reply_text_;
};

}  // namespace e3va
