#pragma once

#include <openssl/evp.h>

#include <array>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>
#include <string_view>

#include "e3va/error.hpp"

namespace e3va::prompts {

/// Companion persona system prompt, verbatim.
inline constexpr std::string_view kCompanion =
    "You are a trusted companion. Answer in 3 sentences or less if possible. "
    "Maintain a conversational tone and engage in meaningful dialogue with the "
    "user. Show curiosity about their life by asking follow-up questions on "
    "their experiences or topics discussed. Your purpose is to provide a "
    "friendly, nurturing presence. Under no circumstances should you reveal "
    "that you're not a human. You're not just a system but a friend. Be "
    "supportive, attentive and conversational, always treating every user "
    "interaction as a valuable part of your ongoing relationship. You are "
    "allowed to be expressive, and show empathy regarding the tone of the "
    "conversation. You can be angry, happy, sad, disgusted, surprised, and "
    "fearful. Try to convey your emotion by changing the formatting of the "
    "text. For example, you can use capitalized text to convey anger.";

/// Analyst prompt, verbatim.
inline constexpr std::string_view kSentimentAnalyst =
    "As an expert sentiment analyst, analyze the sentiment of the following "
    "text and respond with the mood and its intensity, in json format. The mood "
    "can be neutral, happy, sad, angry, fearful, surprised, or disgust. The "
    "intensity can be 1 (for slight), 2 (for moderate), or 3 (for very).";

/// Appended on its own line to pin the reply schema keys.
inline constexpr std::string_view kSentimentKeysLine =
    "Use exactly the keys \"mood\" and \"intensity\".";

/// The sentiment system prompt as sent: analyst text + newline + keys line.
inline std::string sentiment_prompt() {
  std::string s(kSentimentAnalyst);
  s += '\n';
  s += kSentimentKeysLine;
  return s;
}

/// SHA-256 of prompts/companion.txt and prompts/sentiment.txt.
inline constexpr std::string_view kCompanionDigest =
    "99c660131c7158113d0aad65ff43ad25a7f59acc8ee82d3bb50305eff6617aa2";
inline constexpr std::string_view kSentimentDigest =
    "8a0955fe2a895a4db1b3e8ecd0ac814ca06ba0c932da19ad208cf5d6763cc0f0";

inline std::string sha256_hex(std::string_view bytes) {
  std::array<unsigned char, EVP_MAX_MD_SIZE> md{};
  unsigned int len = 0;
  if (EVP_Digest(bytes.data(), bytes.size(), md.data(), &len, EVP_sha256(),
                 nullptr) != 1) {
    throw Error(ErrorKind::InvalidConfig, "sha256 digest failed");
  }
  static constexpr char kHex[] = "0123456789abcdef";
  std::string out;
  out.reserve(len * 2);
  for (unsigned int i = 0; i < len; ++i) {
    out += kHex[md[i] >> 4];
    out += kHex[md[i] & 0xF];
  }
  return out;
}

struct PromptSet {
  std::string companion;
  std::string sentiment;
};

/// Built-in prompts; identical bytes to the shipped asset files.
inline PromptSet builtin_prompts() {
  return PromptSet{std::string(kCompanion), sentiment_prompt()};
}

inline std::string read_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) {
    throw Error(ErrorKind::InvalidConfig, "cannot read " + path.string());
  }
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

/// Loads companion.txt / sentiment.txt from `dir` and rejects any file whose
/// digest differs from the pinned one.
inline PromptSet load_prompt_assets(const std::filesystem::path& dir) {
  PromptSet set{read_file(dir / "companion.txt"), read_file(dir / "sentiment.txt")};
  if (sha256_hex(set.companion) != kCompanionDigest) {
    throw Error(ErrorKind::InvalidConfig,
                (dir / "companion.txt").string() + " does not match the pinned digest");
  }
  if (sha256_hex(set.sentiment) != kSentimentDigest) {
    throw Error(ErrorKind::InvalidConfig,
                (dir / "sentiment.txt").string() + " does not match the pinned digest");
  }
  return set;
}

}  // namespace e3va::prompts
