#pragma once

#include <stdexcept>
#include <string>

namespace cosim {

/// Machine-readable failure categories. The CLI maps these to exit codes:
/// model/validation/IO problems -> 1, protocol and co-simulation failures -> 2,
/// follower-side model errors -> 3.
enum class ErrorCode {
  // model construction / engine
  InvalidModel,
  DanglingPort,
  DuplicateDrive,
  AlgebraicLoop,
  NonFiniteSignal,
  ShapeMismatch,
  // shared-memory bridge
  NameInUse,
  CapacityExceeded,
  OsFailure,
  Timeout,
  VersionMismatch,
  BadMagic,
  ProtocolViolation,
  AbortReceived,
  HandlerFailure,
  // orchestrator / testbed
  NotABipartition,
  BoundaryShapeMismatch,
  SpawnFailure,
  CosimFailed,
  BadScenario,
  IoError,
  InvalidArgument,
};

const char* error_code_name(ErrorCode code);

class Error : public std::runtime_error {
public:
  Error(ErrorCode code, const std::string& message)
      : std::runtime_error(std::string(error_code_name(code)) + ": " + message), code_(code),
        message_(message) {}

  ErrorCode code() const { return code_; }

  /// Message without the code prefix.
  const std::string& message() const { return message_; }

private:
  ErrorCode code_;
  std::string message_;
};

} // namespace cosim
