#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace e3va {

enum class ErrorKind {
  EmptyUtterance,
  ClockRegression,
  ProviderTimeout,
  ProviderError,
  EmptyReply,
  EmptyClip,
  NoSpeechDetected,
  SessionBusy,
  UnknownSession,
  InvalidArgument,
  InvalidConfig,
  ParseError,
};

inline constexpr std::string_view to_string(ErrorKind kind) noexcept {
  switch (kind) {
    case ErrorKind::EmptyUtterance: return "EmptyUtterance";
    case ErrorKind::ClockRegression: return "ClockRegression";
    case ErrorKind::ProviderTimeout: return "ProviderTimeout";
    case ErrorKind::ProviderError: return "ProviderError";
    case ErrorKind::EmptyReply: return "EmptyReply";
    case ErrorKind::EmptyClip: return "EmptyClip";
    case ErrorKind::NoSpeechDetected: return "NoSpeechDetected";
    case ErrorKind::SessionBusy: return "SessionBusy";
    case ErrorKind::UnknownSession: return "UnknownSession";
    case ErrorKind::InvalidArgument: return "InvalidArgument";
    case ErrorKind::InvalidConfig: return "InvalidConfig";
    case ErrorKind::ParseError: return "ParseError";
  }
  return "Unknown";
}

inline bool error_kind_from_string(std::string_view name, ErrorKind& out) noexcept {
  for (int i = 0; i <= static_cast<int>(ErrorKind::ParseError); ++i) {
    auto kind = static_cast<ErrorKind>(i);
    if (to_string(kind) == name) {
      out = kind;
      return true;
    }
  }
  return false;
}

/// Every failure the engine surfaces carries one of the ErrorKind tags.
/// ProviderError additionally carries the transport/API status (0 when the
/// failure happened before a status was available).
class Error : public std::runtime_error {
 public:
  Error(ErrorKind kind, const std::string& message, int status = 0)
      : std::runtime_error(message), kind_(kind), status_(status) {}

  ErrorKind kind() const noexcept { return kind_; }
  int status() const noexcept { return status_; }

 private:
  ErrorKind kind_;
  int status_;
};

}  // namespace e3va
