#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace gaitwave {

enum class ErrorKind {
  MalformedFile,
  NonFiniteCoordinate,
  FrameGap,
  DegenerateSequence,
  InvalidConfig,
  InvalidRange,
  ShapeMismatch,
  NotScalar,
  GraphCycle,
  OutOfRange,
  ZeroEmbedding,
  DegenerateBatch,
  InsufficientIdentities,
  EmptyCandidateSet,
  NonFiniteLoss,
  Io,
};

std::string_view to_string(ErrorKind kind);

// Every failure raised by the library carries a kind so callers (the CLI in
// particular) can map it onto an exit code without parsing messages.
class Error : public std::runtime_error {
 public:
  Error(ErrorKind kind, const std::string& message)
      : std::runtime_error(std::string(to_string(kind)) + ": " + message), kind_(kind), message_(message) {}

  ErrorKind kind() const noexcept { return kind_; }
  /// The message without the kind prefix.
  const std::string& message() const noexcept { return message_; }

 private:
  ErrorKind kind_;
  std::string message_;
};

[[noreturn]] inline void fail(ErrorKind kind, const std::string& message) { throw Error(kind, message); }

}  // namespace gaitwave
