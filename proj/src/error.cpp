#include "cosim/error.hpp"

namespace cosim {

const char* error_code_name(ErrorCode code) {
  switch (code) {
  case ErrorCode::InvalidModel: return "InvalidModel";
  case ErrorCode::DanglingPort: return "DanglingPort";
  case ErrorCode::DuplicateDrive: return "DuplicateDrive";
  case ErrorCode::AlgebraicLoop: return "AlgebraicLoop";
  case ErrorCode::NonFiniteSignal: return "NonFiniteSignal";
  case ErrorCode::ShapeMismatch: return "ShapeMismatch";
  case ErrorCode::NameInUse: return "NameInUse";
  case ErrorCode::CapacityExceeded: return "CapacityExceeded";
  case ErrorCode::OsFailure: return "OsFailure";
  case ErrorCode::Timeout: return "Timeout";
  case ErrorCode::VersionMismatch: return "VersionMismatch";
  case ErrorCode::BadMagic: return "BadMagic";
  case ErrorCode::ProtocolViolation: return "ProtocolViolation";
  case ErrorCode::AbortReceived: return "AbortReceived";
  case ErrorCode::HandlerFailure: return "HandlerFailure";
  case ErrorCode::NotABipartition: return "NotABipartition";
  case ErrorCode::BoundaryShapeMismatch: return "BoundaryShapeMismatch";
  case ErrorCode::SpawnFailure: return "SpawnFailure";
  case ErrorCode::CosimFailed: return "CosimFailed";
  case ErrorCode::BadScenario: return "BadScenario";
  case ErrorCode::IoError: return "IoError";
  case ErrorCode::InvalidArgument: return "InvalidArgument";
  }
  return "UnknownError";
}

} // namespace cosim
