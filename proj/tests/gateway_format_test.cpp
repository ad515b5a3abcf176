#include <gtest/gtest.h>

#include <filesystem>
#include <fstream>
#include <random>
#include <sstream>

#include "e3va/gateway/replay.hpp"
#include "e3va/gateway/scenario.hpp"
#include "e3va/gateway/transcript.hpp"
#include "e3va/gateway/wire.hpp"
#include "oracles.hpp"

namespace {

using namespace e3va;
using e3va::oracle::EventGen;
namespace fs = std::filesystem;
using nlohmann::json;

fs::path scratch(const std::string& name) {
  auto dir = fs::temp_directory_path() / ("e3va_fmt_" + name);
  fs::remove_all(dir);
  fs::create_directories(dir);
  return dir;
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::ostringstream s;
  s << in.rdbuf();
  return s.str();
}

TEST(Wire, EventRoundTripProperty) {
  EventGen gen(2024);
  for (int i = 0; i < 3000; ++i) {
    const auto ev = gen.event();
    const auto text = wire::event_to_json(ev).dump();
    const auto back = wire::event_from_json(json::parse(text));
    ASSERT_EQ(back, ev) << text;
  }
}

TEST(Wire, DumpReplacesInvalidUtf8) {
  const TurnEvent ev{"s", 0, 1, AgentReply{"ok \xff\xfe bytes"}};
  const auto text = wire::dump(wire::event_to_json(ev));
  EXPECT_EQ(wire::event_from_json(json::parse(text)).as<AgentReply>().text,
            "ok \xef\xbf\xbd\xef\xbf\xbd bytes");
}

TEST(Wire, EventShape) {
  const TurnEvent ev{"abc", 42, 3, ExpressionTick{weights_for(Mood::Happy, Intensity(3))}};
  const auto j = wire::event_to_json(ev);
  EXPECT_EQ(j["type"], "expression_tick");
  EXPECT_EQ(j["session"], "abc");
  EXPECT_EQ(j["at_ms"], 42);
  EXPECT_EQ(j["turn"], 3);
  EXPECT_EQ(j["weights"].size(), 10u);
  EXPECT_EQ(j["weights"]["mouthSmile"], 1.0);
}

TEST(Wire, RejectsMalformedEvents) {
  const json good = wire::event_to_json({"s", 1, 1, AgentReply{"hi"}});
  for (const char* key : {"type", "session", "at_ms", "turn", "text"}) {
    auto j = good;
    j.erase(key);
    EXPECT_THROW(wire::event_from_json(j), Error) << key;
  }
  auto bad_type = good;
  bad_type["type"] = "agent_sneeze";
  EXPECT_THROW(wire::event_from_json(bad_type), Error);
  json tick = wire::event_to_json({"s", 1, 1, ExpressionTick{}});
  tick["weights"]["mouthOpen"] = 0.1;
  EXPECT_THROW(wire::event_from_json(tick), Error);
  tick["weights"].erase("mouthOpen");
  tick["weights"]["jawOpen"] = 1.5;
  EXPECT_THROW(wire::event_from_json(tick), Error);
}

TEST(Commands, ParseEachType) {
  auto u = wire::parse_command(R"({"type":"utterance","text":"hi"})");
  EXPECT_EQ(std::get<wire::UtteranceCommand>(u).text, "hi");
  auto c = wire::parse_command(R"({"type":"set_config","decay_hold_ms":100})");
  EXPECT_EQ(std::get<wire::SetConfigCommand>(c).decay_hold_ms, 100.0);
  EXPECT_FALSE(std::get<wire::SetConfigCommand>(c).decay_decay_ms);
  EXPECT_TRUE(std::holds_alternative<wire::PingCommand>(wire::parse_command(R"({"type":"ping"})")));
}

TEST(Commands, SchemaViolationsAreParseErrors) {
  for (const char* bad :
       {R"({"type":"utterance","text":"hi","extra":1})", R"({"type":"utterance"})",
        R"({"type":"utterance","text":7})", R"({"type":"ping","x":null})",
        R"({"type":"dance"})", R"({"text":"hi"})", R"([1,2])", "not json",
        R"({"type":"set_config","decay_hold_ms":"soon"})"}) {
    try {
      wire::parse_command(bad);
      ADD_FAILURE() << bad;
    } catch (const Error& e) {
      EXPECT_EQ(e.kind(), ErrorKind::ParseError) << bad;
    }
  }
}

TEST(Transcript, RecordsOnlyChatAndSentiment) {
  EXPECT_TRUE(wire::transcript_record({"s", 0, 1, UserUtterance{"a"}}));
  EXPECT_TRUE(wire::transcript_record({"s", 0, 1, AgentReply{"b"}}));
  EXPECT_TRUE(wire::transcript_record({"s", 0, 1, SentimentUpdated{}}));
  EXPECT_FALSE(wire::transcript_record({"s", 0, 1, ThinkingStarted{}}));
  EXPECT_FALSE(wire::transcript_record({"s", 0, 1, ExpressionTick{}}));
  EXPECT_FALSE(wire::transcript_record({"s", 0, 1, TurnError{}}));
  const auto rec = *wire::transcript_record({"s", 7, 2, UserUtterance{"a"}});
  EXPECT_EQ(rec, json::parse(R"({"session":"s","at_ms":7,"kind":"chat_turn",
      "payload":{"role":"user","text":"a","turn":2}})"));
}

TEST(Transcript, WriterAppendsAndReaderParses) {
  const auto dir = scratch("writer");
  {
    TranscriptWriter w(dir / "t.jsonl");
    w.record({"s", 1, 1, UserUtterance{"hello"}});
    w.record({"s", 2, 1, ExpressionTick{}});
  }
  {
    TranscriptWriter w(dir / "t.jsonl");
    w.record({"s", 3, 1, AgentReply{"hi!"}});
  }
  const auto entries = read_transcript(dir / "t.jsonl");
  ASSERT_EQ(entries.size(), 2u);
  const auto turns = chat_turns(entries);
  EXPECT_EQ(turns[0], (ChatTurn{ChatRole::User, "hello", 1}));
  EXPECT_EQ(turns[1], (ChatTurn{ChatRole::Agent, "hi!", 3}));
}

TEST(Transcript, MalformedLineIsNamed) {
  std::istringstream in(
      R"({"session":"s","at_ms":0,"kind":"chat_turn","payload":{}})"
      "\n\n{oops\n");
  try {
    parse_transcript(in, "t.jsonl");
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.kind(), ErrorKind::ParseError);
    EXPECT_NE(std::string(e.what()).find("t.jsonl:3:"), std::string::npos) << e.what();
  }
}

// --- replay ---------------------------------------------------------------

std::vector<TranscriptEntry> readings(
    std::initializer_list<std::tuple<TimestampMs, Mood, int>> items) {
  std::vector<TranscriptEntry> out;
  for (auto [at, mood, k] : items) {
    SentimentUpdated s{{mood, Intensity(k), false, ""}, weights_for(mood, Intensity(k)), {}};
    auto rec = *wire::transcript_record({"s", at, 1, s});
    rec["payload"].erase("decay");
    out.push_back({"s", at, "sentiment_updated", rec["payload"], out.size() + 1});
  }
  return out;
}

TEST(Replay, SingleHappyReadingFollowsEnvelope) {
  const auto track = replay_track(readings({{0, Mood::Happy, 3}}));
  ASSERT_FALSE(track.frames.empty());
  EXPECT_EQ(track.fps, 30);
  bool saw_5000 = false;
  for (const auto& f : track.frames) {
    const double smile = f.weights[Channel::MouthSmile];
    if (f.t_ms <= 4000) {
      EXPECT_EQ(smile, 1.0) << f.t_ms;
    }
    if (f.t_ms >= 6000) {
      EXPECT_EQ(smile, 0.0) << f.t_ms;
    }
    if (f.t_ms == 5000) {
      saw_5000 = true;
      EXPECT_NEAR(smile, 0.5, 1e-6);
    }
  }
  EXPECT_TRUE(saw_5000);
  EXPECT_TRUE(track.frames.back().weights.is_zero());
  EXPECT_GE(track.frames.back().t_ms, 6000);
  EXPECT_LT(track.frames.back().t_ms, 6034);
}

TEST(Replay, EmptyTranscriptGivesEmptyTrack) {
  EXPECT_TRUE(replay_track({}).frames.empty());
  EXPECT_EQ(track_to_json(replay_track({})), json::parse(R"({"fps":30,"frames":[]})"));
}

TEST(Replay, SecondReadingResetsOnset) {
  const auto track = replay_track(readings({{0, Mood::Happy, 3}, {1000, Mood::Sad, 3}}));
  for (const auto& f : track.frames) {
    if (f.t_ms >= 1000 && f.t_ms <= 5000) {
      EXPECT_EQ(f.weights, weights_for(Mood::Sad, Intensity(3))) << f.t_ms;
    }
  }
  EXPECT_GE(track.frames.back().t_ms, 7000);
}

TEST(Replay, RecordedDecayAndOverride) {
  auto entries = readings({{0, Mood::Happy, 3}});
  entries[0].payload["decay"] = wire::decay_to_json(DecayParams::make(100, 100));
  EXPECT_LT(replay_track(entries).frames.back().t_ms, 250);
  EXPECT_GE(replay_track(entries, {}, true).frames.back().t_ms, 6000);
}

TEST(Replay, MixedSessionsRejected) {
  auto entries = readings({{0, Mood::Happy, 3}, {10, Mood::Sad, 1}});
  entries[1].session = "other";
  EXPECT_THROW(replay_track(entries), Error);
}

// --- scenarios and simulate -----------------------------------------------

TEST(Scenario, ParsesAllKinds) {
  std::istringstream in(R"(# comment

{"kind":"config","decay_hold_ms":1000,"decay_decay_ms":500,"reply_timeout_ms":300}
{"kind":"reply","match":"x","text":"y","delay_ms":5}
{"kind":"sentiment","failure":"hang"}
{"kind":"utterance","text":"x","at_ms":10}
)");
  const auto sc = parse_scenario(in);
  EXPECT_EQ(sc.config.decay, DecayParams::make(1000, 500));
  EXPECT_EQ(sc.config.reply_timeout.count(), 300);
  ASSERT_EQ(sc.replies.size(), 1u);
  EXPECT_EQ(sc.replies[0].delay_ms, 5);
  EXPECT_EQ(sc.sentiments[0].failure, ScriptedFailure::Hang);
  EXPECT_EQ(sc.utterances[0].at_ms, 10);
}

TEST(Scenario, ErrorsNameTheLine) {
  for (auto [text, line] : {std::pair{"\n\n{\"kind\":\"reply\"}", 3},
                            {"{\"kind\":\"utterance\",\"text\":\"a\"}\nnope", 2},
                            {"{\"kind\":\"wat\"}", 1},
                            {"\n{\"kind\":\"utterance\",\"text\":\"a\",\"at\":1}", 2},
                            {"{\"kind\":\"config\",\"decay_decay_ms\":0}", 1},
                            {"{\"kind\":\"sentiment\",\"text\":\"x\",\"failure\":\"boom\"}", 1}}) {
    std::istringstream in(text);
    try {
      parse_scenario(in, "sc.jsonl");
      ADD_FAILURE() << text;
    } catch (const Error& e) {
      EXPECT_EQ(e.kind(), ErrorKind::ParseError);
      EXPECT_EQ(std::string(e.what()).rfind("sc.jsonl:" + std::to_string(line) + ":", 0), 0u)
          << e.what();
    }
  }
}

// Expected non-tick events of one spoken turn with instant providers.
std::vector<json> expected_turn(std::uint64_t turn, TimestampMs at, const std::string& said,
                                const std::string& reply, Mood mood, int k) {
  const double words = static_cast<double>(word_count(reply));
  const double dur = words * 60.0;
  auto base = [&](const char* type, TimestampMs t) {
    return json{{"type", type}, {"session", "simulated"}, {"at_ms", t}, {"turn", turn}};
  };
  auto user = base("user_utterance", at);
  user["text"] = said;
  auto agent = base("agent_reply", at);
  agent["text"] = reply;
  auto sentiment = base("sentiment_updated", at);
  sentiment["mood"] = std::string(to_string(mood));
  sentiment["intensity"] = k;
  auto speech = base("speech_started", at);
  speech["audio_ref"] = "/sessions/simulated/audio/" + std::to_string(turn);
  speech["duration_ms"] = dur;
  return {user, base("thinking_started", at), agent, sentiment, speech,
          base("speech_finished", at + static_cast<TimestampMs>(dur))};
}

json summarize(const TurnEvent& ev) {
  auto j = wire::event_to_json(ev);
  if (ev.is<SentimentUpdated>()) {
    const auto& r = ev.as<SentimentUpdated>().reading;
    EXPECT_EQ(ev.as<SentimentUpdated>().weights, weights_for(r.mood, r.intensity));
    j = json{{"type", j["type"]}, {"session", j["session"]}, {"at_ms", j["at_ms"]},
             {"turn", j["turn"]}, {"mood", std::string(to_string(r.mood))},
             {"intensity", r.intensity.value()}};
  }
  if (ev.is<SpeechStarted>()) j.erase("lipsync");
  return j;
}

TEST(Simulate, ThreeTurnScenarioProducesThreeCompleteTurns) {
  const auto out = scratch("sim3");
  const auto res = simulate(read_scenario(fs::path(E3VA_SCENARIOS_DIR) / "three_turns.jsonl"), out);
  std::vector<json> want;
  for (auto part :
       {expected_turn(1, 0, "I had a great day", "I'm SO glad to hear that! What made it so good?",
                      Mood::Happy, 3),
        expected_turn(2, 10000, "My dog passed away last week",
                      "I'm so sorry about your dog. That is a real loss.", Mood::Sad, 2),
        expected_turn(3, 20000, "Some idiot cut me off on the highway",
                      "That would make anyone furious. Are you okay?", Mood::Angry, 3)}) {
    want.insert(want.end(), part.begin(), part.end());
  }
  std::vector<json> got;
  for (const auto& ev : res.events) {
    if (!ev.is<ExpressionTick>()) got.push_back(summarize(ev));
  }
  ASSERT_EQ(got.size(), want.size());
  for (std::size_t i = 0; i < want.size(); ++i) EXPECT_EQ(got[i], want[i]) << i;

  // The event log is the same stream, ticks included.
  std::istringstream log(slurp(res.event_log));
  std::size_t n = 0;
  for (std::string line; std::getline(log, line); ++n) {
    ASSERT_LT(n, res.events.size());
    EXPECT_EQ(wire::event_from_json(json::parse(line)), res.events[n]);
  }
  EXPECT_EQ(n, res.events.size());
  EXPECT_EQ(chat_turns(read_transcript(res.transcript)).size(), 6u);
}

TEST(Simulate, ReplayOfOwnTranscriptIsAnalyticAndByteStable) {
  const auto sc = read_scenario(fs::path(E3VA_SCENARIOS_DIR) / "three_turns.jsonl");
  const auto a = scratch("stable_a"), b = scratch("stable_b");
  simulate(sc, a);
  simulate(sc, b);
  EXPECT_EQ(slurp(a / "transcript.jsonl"), slurp(b / "transcript.jsonl"));
  EXPECT_EQ(slurp(a / "events.jsonl"), slurp(b / "events.jsonl"));
  replay_file(a / "transcript.jsonl", a / "track.json");
  replay_file(b / "transcript.jsonl", b / "track.json");
  EXPECT_EQ(slurp(a / "track.json"), slurp(b / "track.json"));

  const auto track = json::parse(slurp(a / "track.json"));
  for (const auto& f : track["frames"]) {
    const double t = f["t_ms"];
    const double smile = f["weights"]["mouthSmile"];
    if (t <= 4000) {
      EXPECT_NEAR(smile, 1.0, 1e-6) << t;
    }
    if (t == 5000) {
      EXPECT_NEAR(smile, 0.5, 1e-6);
    }
    if (t >= 6000) {
      EXPECT_NEAR(smile, 0.0, 1e-6) << t;
    }
  }
}

TEST(Simulate, EmptyScenarioGivesEmptyTranscript) {
  const auto out = scratch("empty");
  std::istringstream in("");
  const auto res = simulate(parse_scenario(in), out);
  EXPECT_TRUE(res.events.empty());
  EXPECT_EQ(slurp(res.transcript), "");
}

TEST(Simulate, MissingFixtureRecordsErrorAndContinues) {
  const auto out = scratch("missing");
  const auto res =
      simulate(read_scenario(fs::path(E3VA_SCENARIOS_DIR) / "provider_failures.jsonl"), out);
  std::vector<std::string> terminal;
  for (const auto& ev : res.events) {
    if (ev.is<SpeechFinished>()) terminal.push_back("finished");
    if (ev.is<TurnError>()) terminal.emplace_back(to_string(ev.as<TurnError>().kind));
  }
  EXPECT_EQ(terminal, (std::vector<std::string>{"finished", "ProviderTimeout", "ProviderError"}));
}

}  // namespace
