#pragma once

// Deterministic driver for one SessionMachine on a virtual millisecond clock.
// Provider calls resolve instantly against ScriptedProvider fixtures and are
// delivered after their (virtual) delay; expression ticks run on a 30 Hz grid.

#include <cstdint>
#include <functional>
#include <map>
#include <memory>
#include <optional>
#include <queue>
#include <string>
#include <utility>
#include <vector>

#include "e3va/dialogue.hpp"
#include "e3va/orchestrator.hpp"
#include "e3va/speech.hpp"

namespace e3va {

enum class ProviderLeg { Reply, Sentiment, Speech };

struct ScriptedResolution {
  Completion completion;
  std::int64_t delay_ms;
};

/// What a scripted call delivers on a virtual clock, and when.
inline ScriptedResolution resolve_scripted(const ScriptedOutcome& out, std::int64_t delay_ms,
                                           std::chrono::milliseconds timeout,
                                           const std::string& prompt_text) {
  if (!out.matched) {
    return {Failure{ErrorKind::ProviderError,
                    "no scripted reply matches \"" + prompt_text + "\""},
            delay_ms};
  }
  if (out.failure == ScriptedFailure::Hang || delay_ms > timeout.count()) {
    return {Failure{ErrorKind::ProviderTimeout,
                    "no reply within " + std::to_string(timeout.count()) + " ms"},
            timeout.count()};
  }
  switch (out.failure) {
    case ScriptedFailure::Error:
      return {Failure{ErrorKind::ProviderError, "scripted provider failure"}, delay_ms};
    case ScriptedFailure::Empty:
      return {Failure{ErrorKind::EmptyReply, "provider returned a blank reply"}, delay_ms};
    default:
      break;
  }
  std::string text = trim(out.reply);
  if (text.empty()) {
    return {Failure{ErrorKind::EmptyReply, "provider returned a blank reply"}, delay_ms};
  }
  return {std::move(text), delay_ms};
}

class VirtualDriver {
 public:
  using Sink = std::function<void(const TurnEvent&)>;
  /// Returns a replacement delay for a provider leg, or nullopt to keep the
  /// fixture's own delay.
  using DelayPolicy = std::function<std::optional<std::int64_t>(ProviderLeg, std::uint64_t)>;

  VirtualDriver(SessionMachine machine, std::shared_ptr<ScriptedProvider> reply,
                std::shared_ptr<ScriptedProvider> sentiment,
                std::shared_ptr<TtsProvider> tts, Sink sink)
      : machine_(std::move(machine)),
        reply_(std::move(reply)),
        sentiment_(std::move(sentiment)),
        tts_(std::move(tts)),
        sink_(std::move(sink)),
        start_(machine_.expression().onset),
        now_(start_) {}

  void set_delay_policy(DelayPolicy policy) { policy_ = std::move(policy); }

  TimestampMs now() const noexcept { return now_; }
  const SessionMachine& machine() const noexcept { return machine_; }
  SessionMachine& machine() noexcept { return machine_; }
  const std::map<std::uint64_t, AudioClip>& audio() const noexcept { return audio_; }

  /// Submits at the first instant >= `at` at which the session is Idle.
  /// Returns the submission time.
  TimestampMs submit_when_idle(const std::string& text, TimestampMs at) {
    run_until(at);
    while (machine_.state() != SessionState::Idle) {
      if (queue_.empty()) {
        throw Error(ErrorKind::InvalidArgument, "session stuck outside Idle");
      }
      step_once();
    }
    apply(machine_.submit_utterance(text, now_));
    return now_;
  }

  /// Runs until nothing is pending, the session is Idle and the face has
  /// returned to (and published) the rest pose.
  void run_until_quiescent() {
    while (!queue_.empty() || machine_.state() != SessionState::Idle ||
           !machine_.expression_settled(now_)) {
      if (queue_.empty() && machine_.state() != SessionState::Idle) {
        throw Error(ErrorKind::InvalidArgument, "session stuck outside Idle");
      }
      step_once();
    }
  }

  /// Processes every queued item and tick due at or before `t`, then sets
  /// the clock to `t`.
  void run_until(TimestampMs t) {
    while (next_due() <= t) step_once();
    if (t > now_) now_ = t;
  }

 private:
  struct Pending {
    TimestampMs at;
    std::uint64_t seq;
    std::function<void()> action;
  };
  struct Later {
    bool operator()(const Pending& a, const Pending& b) const {
      return a.at != b.at ? a.at > b.at : a.seq > b.seq;
    }
  };

  TimestampMs tick_time(std::uint64_t k) const {
    return start_ + static_cast<TimestampMs>(k * 1000 / kTickHz);
  }

  TimestampMs next_due() const {
    const TimestampMs tick = tick_time(next_tick_);
    return queue_.empty() ? tick : std::min(queue_.top().at, tick);
  }

  // Queued work due at the same instant runs before the tick.
  void step_once() {
    const TimestampMs tick = tick_time(next_tick_);
    if (!queue_.empty() && queue_.top().at <= tick) {
      Pending p = queue_.top();
      queue_.pop();
      now_ = std::max(now_, p.at);
      p.action();
      return;
    }
    now_ = std::max(now_, tick);
    ++next_tick_;
    if (auto ev = machine_.tick(now_)) sink_(*ev);
  }

  void schedule(TimestampMs at, std::function<void()> action) {
    queue_.push(Pending{at, seq_++, std::move(action)});
  }

  std::int64_t delay_for(ProviderLeg leg, std::uint64_t turn, std::int64_t fixture_delay) const {
    if (policy_) {
      if (auto d = policy_(leg, turn)) return std::max<std::int64_t>(0, *d);
    }
    return std::max<std::int64_t>(0, fixture_delay);
  }

  void apply(Step step) {
    for (const auto& ev : step.events) sink_(ev);
    for (auto& effect : step.effects) {
      std::visit([this](auto& e) { perform(e); }, effect);
    }
  }

  void perform(RequestReply& e) {
    const auto out = reply_->next(e.messages);
    const auto delay = delay_for(ProviderLeg::Reply, e.turn, out.delay_ms);
    auto res = resolve_scripted(out, delay, e.timeout, last_user_content(e.messages));
    schedule(now_ + res.delay_ms, [this, turn = e.turn, c = std::move(res.completion)]() mutable {
      apply(machine_.on_reply(turn, std::move(c), now_));
    });
  }

  void perform(RequestSentiment& e) {
    const auto messages = e.request.messages();
    const auto out = sentiment_->next(messages);
    const auto delay = delay_for(ProviderLeg::Sentiment, e.turn, out.delay_ms);
    auto res = resolve_scripted(out, delay, e.timeout, e.request.user_text);
    schedule(now_ + res.delay_ms, [this, turn = e.turn, c = std::move(res.completion)]() mutable {
      apply(machine_.on_sentiment(turn, std::move(c), now_));
    });
  }

  void perform(Synthesize& e) {
    SpeechResult result = Failure{ErrorKind::ProviderError, "no TTS provider"};
    if (tts_) {
      try {
        AudioClip clip = synthesize(*tts_, e.text);
        audio_[e.turn] = clip;
        result = std::move(clip);
      } catch (const Error& err) {
        result = Failure{err.kind(), err.what()};
      }
    }
    const auto delay = delay_for(ProviderLeg::Speech, e.turn, 0);
    schedule(now_ + delay, [this, turn = e.turn, r = std::move(result)]() mutable {
      apply(machine_.on_speech(turn, std::move(r), now_));
    });
  }

  void perform(ScheduleSpeechEnd& e) {
    schedule(e.at, [this, turn = e.turn] { apply(machine_.on_speech_end(turn, now_)); });
  }

  SessionMachine machine_;
  std::shared_ptr<ScriptedProvider> reply_;
  std::shared_ptr<ScriptedProvider> sentiment_;
  std::shared_ptr<TtsProvider> tts_;
  Sink sink_;
  DelayPolicy policy_;
  std::priority_queue<Pending, std::vector<Pending>, Later> queue_;
  std::map<std::uint64_t, AudioClip> audio_;
  TimestampMs start_;
  TimestampMs now_;
  std::uint64_t next_tick_ = 0;
  std::uint64_t seq_ = 0;
};

}  // namespace e3va
