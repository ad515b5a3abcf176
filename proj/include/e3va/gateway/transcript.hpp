#pragma once

// Append-only JSONL transcripts: one {session, at_ms, kind, payload} object
// per line.

#include <filesystem>
#include <fstream>
#include <mutex>
#include <string>
#include <vector>

#include "e3va/error.hpp"
#include "e3va/gateway/wire.hpp"
#include "e3va/orchestrator.hpp"

namespace e3va {

class TranscriptWriter {
 public:
  enum class Mode { Append, Truncate };

  explicit TranscriptWriter(std::filesystem::path path, Mode mode = Mode::Append)
      : path_(std::move(path)) {
    if (path_.has_parent_path()) std::filesystem::create_directories(path_.parent_path());
    out_.open(path_, std::ios::binary |
                         (mode == Mode::Append ? std::ios::app : std::ios::trunc));
    if (!out_) throw Error(ErrorKind::InvalidConfig, "cannot open " + path_.string());
  }

  const std::filesystem::path& path() const noexcept { return path_; }

  void write_line(const nlohmann::json& record) {
    std::lock_guard lock(mu_);
    out_ << wire::dump(record) << '\n';
    out_.flush();
  }

  /// Persists the event if it is a chat turn or sentiment update.
  bool record(const TurnEvent& ev) {
    auto rec = wire::transcript_record(ev);
    if (!rec) return false;
    write_line(*rec);
    return true;
  }

  void close() {
    std::lock_guard lock(mu_);
    out_.close();
  }

 private:
  std::filesystem::path path_;
  std::ofstream out_;
  std::mutex mu_;
};

struct TranscriptEntry {
  std::string session;
  TimestampMs at = 0;
  std::string kind;
  nlohmann::json payload;
  std::size_t line = 0;
};

/// Blank lines are skipped; anything else malformed raises a ParseError that
/// names the line.
inline std::vector<TranscriptEntry> parse_transcript(std::istream& in,
                                                     const std::string& name = "transcript") {
  std::vector<TranscriptEntry> out;
  std::string text;
  for (std::size_t line = 1; std::getline(in, text); ++line) {
    if (trim_view(text).empty()) continue;
    auto fail = [&](const std::string& why) {
      return Error(ErrorKind::ParseError, name + ":" + std::to_string(line) + ": " + why);
    };
    const auto j = nlohmann::json::parse(text, nullptr, false);
    if (j.is_discarded() || !j.is_object()) throw fail("not a JSON object");
    try {
      TranscriptEntry e;
      e.session = wire::require_as<std::string>(j, "session");
      e.at = wire::require_as<TimestampMs>(j, "at_ms");
      e.kind = wire::require_as<std::string>(j, "kind");
      e.payload = wire::require(j, "payload");
      if (!e.payload.is_object()) throw wire::parse_error("payload must be an object");
      e.line = line;
      out.push_back(std::move(e));
    } catch (const Error& err) {
      throw fail(err.what());
    }
  }
  return out;
}

inline std::vector<TranscriptEntry> read_transcript(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(ErrorKind::InvalidConfig, "cannot read " + path.string());
  return parse_transcript(in, path.filename().string());
}

/// The chat turns recorded in a transcript, in file order.
inline std::vector<ChatTurn> chat_turns(const std::vector<TranscriptEntry>& entries) {
  std::vector<ChatTurn> turns;
  for (const auto& e : entries) {
    if (e.kind != "chat_turn") continue;
    const auto role = wire::require_as<std::string>(e.payload, "role");
    turns.push_back(ChatTurn{role == "user" ? ChatRole::User : ChatRole::Agent,
                             wire::require_as<std::string>(e.payload, "text"), e.at});
  }
  return turns;
}

}  // namespace e3va
