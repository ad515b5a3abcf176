#pragma once

// Real-time runtime for many sessions.
//
// Each session is a serialized actor: every SessionMachine call happens under
// the session's mutex, and events are published to subscribers under that
// same lock, so subscribers see one session's events in emission order.
// Provider calls run on a worker pool; their completions are fed back into
// the session. Ticks and speech-end timers run on the caller's io_context.
//
// The io_context must stop running handlers before the engine is destroyed.

#include <atomic>
#include <boost/asio/io_context.hpp>
#include <boost/asio/post.hpp>
#include <boost/asio/steady_timer.hpp>
#include <boost/asio/thread_pool.hpp>
#include <boost/uuid/random_generator.hpp>
#include <boost/uuid/uuid_io.hpp>
#include <chrono>
#include <filesystem>
#include <functional>
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <string>
#include <vector>

#include "e3va/dialogue.hpp"
#include "e3va/gateway/transcript.hpp"
#include "e3va/orchestrator.hpp"
#include "e3va/speech.hpp"
#include "e3va/wav.hpp"

namespace e3va {

struct Providers {
  std::shared_ptr<LlmProvider> reply;
  std::shared_ptr<LlmProvider> sentiment;
  std::shared_ptr<TtsProvider> tts;
  std::shared_ptr<AsrProvider> asr;  // optional
};

struct EngineOptions {
  SessionConfig session;
  std::filesystem::path transcript_dir = "transcripts";
  std::size_t workers = 8;
  std::size_t audio_kept = 16;  // clips retained per session for GET .../audio/{turn}
};

struct EndedSession {
  std::filesystem::path transcript;
  std::size_t chat_turns = 0;
};

class LiveEngine {
 public:
  using Subscriber = std::function<void(const TurnEvent&)>;
  using SubscriptionId = std::uint64_t;

  LiveEngine(boost::asio::io_context& io, Providers providers, EngineOptions options)
      : io_(io),
        providers_(std::move(providers)),
        options_(std::move(options)),
        pool_(options_.workers),
        tick_timer_(io),
        epoch_steady_(std::chrono::steady_clock::now()),
        epoch_wall_ms_(std::chrono::duration_cast<std::chrono::milliseconds>(
                           std::chrono::system_clock::now().time_since_epoch())
                           .count()) {
    if (!providers_.reply || !providers_.sentiment || !providers_.tts) {
      throw Error(ErrorKind::InvalidConfig, "reply, sentiment and tts providers are required");
    }
    schedule_tick(0);
  }

  ~LiveEngine() {
    stopped_ = true;
    tick_timer_.cancel();
    pool_.join();
  }

  LiveEngine(const LiveEngine&) = delete;
  LiveEngine& operator=(const LiveEngine&) = delete;

  /// Monotone milliseconds, anchored to wall-clock time at engine start.
  TimestampMs now() const {
    return epoch_wall_ms_ + std::chrono::duration_cast<std::chrono::milliseconds>(
                                std::chrono::steady_clock::now() - epoch_steady_)
                                .count();
  }

  std::string create_session() {
    std::string id;
    {
      std::lock_guard lock(mu_);
      id = boost::uuids::to_string(uuid_gen_());
    }
    auto s = std::make_shared<Session>(id, options_.session, now());
    s->transcript = std::make_unique<TranscriptWriter>(options_.transcript_dir / (id + ".jsonl"));
    std::lock_guard lock(mu_);
    sessions_.emplace(id, std::move(s));
    return id;
  }

  bool has_session(const std::string& id) const {
    std::lock_guard lock(mu_);
    return sessions_.count(id) != 0;
  }

  std::size_t session_count() const {
    std::lock_guard lock(mu_);
    return sessions_.size();
  }

  /// Removes the session; in-flight provider calls for it are discarded.
  EndedSession end_session(const std::string& id) {
    std::shared_ptr<Session> s;
    {
      std::lock_guard lock(mu_);
      auto it = sessions_.find(id);
      if (it == sessions_.end()) throw unknown(id);
      s = std::move(it->second);
      sessions_.erase(it);
    }
    std::lock_guard lock(s->mu);
    s->closed = true;
    s->subscribers.clear();
    s->transcript->close();
    std::size_t turns = s->machine.history().size();
    return {s->transcript->path(), turns};
  }

  /// Validates and starts a turn. Throws SessionBusy, EmptyUtterance or
  /// UnknownSession without touching the session.
  void submit(const std::string& id, const std::string& text) {
    auto s = get(id);
    std::lock_guard lock(s->mu);
    if (s->closed) throw unknown(id);
    apply(s, s->machine.submit_utterance(text, now_for(*s)));
  }

  /// Transcribes on a worker, then submits. `done` receives the transcript
  /// or the error; it runs on a worker thread.
  void submit_audio(const std::string& id, AudioClip clip,
                    std::function<void(std::optional<Error>, std::string)> done) {
    auto s = get(id);
    if (!providers_.asr) throw Error(ErrorKind::InvalidConfig, "no speech recognizer configured");
    {
      std::lock_guard lock(s->mu);
      if (s->machine.state() != SessionState::Idle) {
        throw Error(ErrorKind::SessionBusy,
                    "session is " + std::string(to_string(s->machine.state())));
      }
    }
    boost::asio::post(pool_, [this, id, clip = std::move(clip), done = std::move(done)] {
      try {
        auto text = transcribe(*providers_.asr, clip);
        submit(id, text);
        done(std::nullopt, text);
      } catch (const Error& e) {
        done(e, {});
      }
    });
  }

  /// Applies to readings that arrive after the call; returns the new params.
  DecayParams set_config(const std::string& id, std::optional<double> hold_ms,
                         std::optional<double> decay_ms) {
    auto s = get(id);
    std::lock_guard lock(s->mu);
    const auto& cur = s->machine.config().decay;
    const auto next = DecayParams::make(hold_ms.value_or(cur.hold_ms),
                                        decay_ms.value_or(cur.decay_ms));
    s->machine.set_decay(next);
    return next;
  }

  SubscriptionId subscribe(const std::string& id, Subscriber fn) {
    auto s = get(id);
    std::lock_guard lock(s->mu);
    const auto sub = next_sub_++;
    s->subscribers.emplace(sub, std::move(fn));
    return sub;
  }

  void unsubscribe(const std::string& id, SubscriptionId sub) {
    std::shared_ptr<Session> s;
    {
      std::lock_guard lock(mu_);
      auto it = sessions_.find(id);
      if (it == sessions_.end()) return;
      s = it->second;
    }
    std::lock_guard lock(s->mu);
    s->subscribers.erase(sub);
  }

  /// WAV bytes of a turn's reply, if still retained.
  std::optional<std::string> audio(const std::string& id, std::uint64_t turn) const {
    auto s = get(id);
    std::lock_guard lock(s->mu);
    auto it = s->audio.find(turn);
    if (it == s->audio.end()) return std::nullopt;
    return it->second;
  }

  SessionState state(const std::string& id) const {
    auto s = get(id);
    std::lock_guard lock(s->mu);
    return s->machine.state();
  }

  std::vector<ChatTurn> history(const std::string& id) const {
    auto s = get(id);
    std::lock_guard lock(s->mu);
    return s->machine.history().turns();
  }

 private:
  struct Session {
    Session(std::string id, SessionConfig cfg, TimestampMs now)
        : machine(std::move(id), std::move(cfg), now), last_now(now) {}
    std::mutex mu;
    SessionMachine machine;
    TimestampMs last_now;
    bool closed = false;
    std::unique_ptr<TranscriptWriter> transcript;
    std::map<SubscriptionId, Subscriber> subscribers;
    std::map<std::uint64_t, std::string> audio;
  };

  static Error unknown(const std::string& id) {
    return Error(ErrorKind::UnknownSession, "no session " + id, 404);
  }

  std::shared_ptr<Session> get(const std::string& id) const {
    std::lock_guard lock(mu_);
    auto it = sessions_.find(id);
    if (it == sessions_.end()) throw unknown(id);
    return it->second;
  }

  // Clamps against the last value handed to this session so that a caller
  // racing between now() and taking the lock can never go backwards.
  TimestampMs now_for(Session& s) {
    s.last_now = std::max(s.last_now, now());
    return s.last_now;
  }

  // Caller holds s->mu.
  void publish(Session& s, const TurnEvent& ev) {
    s.transcript->record(ev);
    for (auto& [_, fn] : s.subscribers) fn(ev);
  }

  // Caller holds s->mu.
  void apply(const std::shared_ptr<Session>& s, Step step) {
    for (const auto& ev : step.events) publish(*s, ev);
    for (auto& effect : step.effects) {
      std::visit([&](auto& e) { perform(s, e); }, effect);
    }
  }

  template <class Fn>
  void with_session(const std::weak_ptr<Session>& weak, Fn&& fn) {
    auto s = weak.lock();
    if (!s || stopped_) return;
    std::lock_guard lock(s->mu);
    if (s->closed) return;
    try {
      fn(s);
    } catch (const Error&) {
      // A completion that no longer fits the session (clock, stale turn) is dropped.
    }
  }

  void perform(const std::shared_ptr<Session>& s, RequestReply& e) {
    std::weak_ptr<Session> weak = s;
    boost::asio::post(pool_, [this, weak, e] {
      Completion result = call(providers_.reply, e.messages, e.timeout);
      with_session(weak, [&](const std::shared_ptr<Session>& s) {
        apply(s, s->machine.on_reply(e.turn, std::move(result), now_for(*s)));
      });
    });
  }

  void perform(const std::shared_ptr<Session>& s, RequestSentiment& e) {
    std::weak_ptr<Session> weak = s;
    boost::asio::post(pool_, [this, weak, e] {
      Completion result = call(providers_.sentiment, e.request.messages(), e.timeout);
      with_session(weak, [&](const std::shared_ptr<Session>& s) {
        apply(s, s->machine.on_sentiment(e.turn, std::move(result), now_for(*s)));
      });
    });
  }

  void perform(const std::shared_ptr<Session>& s, Synthesize& e) {
    std::weak_ptr<Session> weak = s;
    boost::asio::post(pool_, [this, weak, e] {
      SpeechResult result = Failure{ErrorKind::ProviderError, "no tts"};
      std::string wav;
      try {
        AudioClip clip = synthesize(*providers_.tts, e.text);
        wav = encode_wav(clip);
        result = std::move(clip);
      } catch (const Error& err) {
        result = Failure{err.kind(), err.what()};
      }
      with_session(weak, [&](const std::shared_ptr<Session>& s) {
        if (!wav.empty()) {
          s->audio[e.turn] = std::move(wav);
          while (s->audio.size() > options_.audio_kept) s->audio.erase(s->audio.begin());
        }
        apply(s, s->machine.on_speech(e.turn, std::move(result), now_for(*s)));
      });
    });
  }

  void perform(const std::shared_ptr<Session>& s, ScheduleSpeechEnd& e) {
    std::weak_ptr<Session> weak = s;
    auto timer = std::make_shared<boost::asio::steady_timer>(io_);
    timer->expires_after(std::chrono::milliseconds(std::max<TimestampMs>(0, e.at - now())));
    timer->async_wait([this, weak, timer, e](const boost::system::error_code& ec) {
      if (ec) return;
      with_session(weak, [&](const std::shared_ptr<Session>& s) {
        apply(s, s->machine.on_speech_end(e.turn, std::max(now_for(*s), e.at)));
      });
    });
  }

  static Completion call(const std::shared_ptr<LlmProvider>& provider,
                         const std::vector<Message>& messages,
                         std::chrono::milliseconds timeout) {
    try {
      return complete(provider, messages, timeout);
    } catch (const Error& e) {
      return Failure{e.kind(), e.what()};
    }
  }

  void schedule_tick(std::uint64_t k) {
    tick_timer_.expires_at(epoch_steady_ + std::chrono::milliseconds(k * 1000 / kTickHz));
    tick_timer_.async_wait([this, k](const boost::system::error_code& ec) {
      if (ec || stopped_) return;
      std::vector<std::shared_ptr<Session>> all;
      {
        std::lock_guard lock(mu_);
        for (auto& [_, s] : sessions_) all.push_back(s);
      }
      for (auto& s : all) {
        std::lock_guard lock(s->mu);
        if (s->closed) continue;
        try {
          if (auto ev = s->machine.tick(now_for(*s))) publish(*s, *ev);
        } catch (const Error&) {
        }
      }
      // Skip grid points already missed rather than bursting to catch up.
      auto next = k + 1;
      const auto elapsed = std::chrono::duration_cast<std::chrono::milliseconds>(
                               std::chrono::steady_clock::now() - epoch_steady_)
                               .count();
      while (static_cast<std::int64_t>(next * 1000 / kTickHz) < elapsed) ++next;
      schedule_tick(next);
    });
  }

  boost::asio::io_context& io_;
  Providers providers_;
  EngineOptions options_;
  mutable std::mutex mu_;
  std::map<std::string, std::shared_ptr<Session>> sessions_;
  boost::uuids::random_generator uuid_gen_;
  std::atomic<SubscriptionId> next_sub_{1};
  std::atomic<bool> stopped_{false};
  boost::asio::thread_pool pool_;
  boost::asio::steady_timer tick_timer_;
  std::chrono::steady_clock::time_point epoch_steady_;
  TimestampMs epoch_wall_ms_;
};

}  // namespace e3va
