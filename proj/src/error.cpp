#include "mmkd/error.hpp"

namespace mmkd {

std::string_view error_kind_name(ErrorKind kind) {
  switch (kind) {
    case ErrorKind::kMissingField: return "MissingField";
    case ErrorKind::kUnknownLabel: return "UnknownLabel";
    case ErrorKind::kEmptyDataset: return "EmptyDataset";
    case ErrorKind::kInfeasibleStratification: return "InfeasibleStratification";
    case ErrorKind::kEmptyVocabulary: return "EmptyVocabulary";
    case ErrorKind::kBackendFailure: return "BackendFailure";
    case ErrorKind::kNonFiniteLoss: return "NonFiniteLoss";
    case ErrorKind::kIncompatibleHead: return "IncompatibleHead";
    case ErrorKind::kRangeError: return "RangeError";
    case ErrorKind::kEmptyText: return "EmptyText";
    case ErrorKind::kClipTooLong: return "ClipTooLong";
    case ErrorKind::kInvalidPatchGrid: return "InvalidPatchGrid";
    case ErrorKind::kClassMismatch: return "ClassMismatch";
    case ErrorKind::kMissingTeacherOutput: return "MissingTeacherOutput";
    case ErrorKind::kMissingModality: return "MissingModality";
    case ErrorKind::kLengthMismatch: return "LengthMismatch";
    case ErrorKind::kInsufficientSamples: return "InsufficientSamples";
    case ErrorKind::kInvalidConfig: return "InvalidConfig";
    case ErrorKind::kIoError: return "IoError";
    case ErrorKind::kStageFailure: return "StageFailure";
  }
  return "Unknown";
}

}  // namespace mmkd
