#pragma once

#include <stdexcept>
#include <string>
#include <string_view>
#include <utility>

namespace mmkd {

enum class ErrorKind {
  kMissingField,
  kUnknownLabel,
  kEmptyDataset,
  kInfeasibleStratification,
  kEmptyVocabulary,
  kBackendFailure,
  kNonFiniteLoss,
  kIncompatibleHead,
  kRangeError,
  kEmptyText,
  kClipTooLong,
  kInvalidPatchGrid,
  kClassMismatch,
  kMissingTeacherOutput,
  kMissingModality,
  kLengthMismatch,
  kInsufficientSamples,
  kInvalidConfig,
  kIoError,
  kStageFailure,
};

std::string_view error_kind_name(ErrorKind kind);

// All library failures surface as this type; `kind()` is the stable code
// tests and the CLI dispatch on.
class Error : public std::runtime_error {
 public:
  Error(ErrorKind kind, const std::string& message)
      : std::runtime_error(std::string(error_kind_name(kind)) + ": " + message),
        kind_(kind) {}

  ErrorKind kind() const noexcept { return kind_; }

 protected:
  struct Preformatted {};
  Error(ErrorKind kind, const std::string& full_message, Preformatted)
      : std::runtime_error(full_message), kind_(kind) {}

 private:
  ErrorKind kind_;
};

// Wraps a failure from a pipeline stage, keeping the original kind.
class StageError : public Error {
 public:
  StageError(std::string stage, const Error& cause)
      : Error(cause.kind(), "[" + stage + "] " + cause.what(), Preformatted{}),
        stage_(std::move(stage)) {}

  const std::string& stage() const noexcept { return stage_; }

 private:
  std::string stage_;
};

}  // namespace mmkd
