#pragma once

#include <string>
#include <string_view>

namespace e3va {

inline constexpr bool is_space(char c) noexcept {
  return c == ' ' || c == '\t' || c == '\n' || c == '\r' || c == '\f' || c == '\v';
}

inline std::string_view trim_view(std::string_view s) noexcept {
  while (!s.empty() && is_space(s.front())) s.remove_prefix(1);
  while (!s.empty() && is_space(s.back())) s.remove_suffix(1);
  return s;
}

inline std::string trim(std::string_view s) { return std::string(trim_view(s)); }

inline std::string ascii_lower(std::string_view s) {
  std::string out(s);
  for (char& c : out) {
    if (c >= 'A' && c <= 'Z') c = static_cast<char>(c - 'A' + 'a');
  }
  return out;
}

/// Role of one message in a chat-completions request.
enum class MessageRole { System, User, Assistant };

inline constexpr std::string_view to_string(MessageRole r) noexcept {
  switch (r) {
    case MessageRole::System: return "system";
    case MessageRole::User: return "user";
    case MessageRole::Assistant: return "assistant";
  }
  return "user";
}

struct Message {
  MessageRole role;
  std::string content;

  friend bool operator==(const Message&, const Message&) = default;
};

}  // namespace e3va
