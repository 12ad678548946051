#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>

namespace unimc {

// Machine-readable codes carried by DataError / NumericError. The CLI maps
// DataError to exit code 2 and NumericError to exit code 3.
enum class ErrorCode {
  kMalformedLine,
  kMissingField,
  kLabelRange,
  kTemplateMismatch,
  kEmptySubstitution,
  kTooFewOptions,
  kDuplicateOption,
  kAnswerRange,
  kAnswerAmbiguous,
  kAnswerUnresolved,
  kEmptyPassage,
  kVocabTooSmall,
  kIdRange,
  kOptionsTooLong,
  kOverlappingSpans,
  kMissingTargets,
  kShapeMismatch,
  kFullyMaskedRow,
  kNonScalarLoss,
  kCorrupt,
  kShape,
  kEmptyPool,
  kEmptyDataset,
  kTrainEvalOverlap,
  kBadConfig,
  kIoError,
  kNonFiniteLoss,
  kLabelMasked,
};

const char* error_code_name(ErrorCode code);

// Input-data and contract violations (bad records, bad files, bad configs).
class DataError : public std::runtime_error {
 public:
  DataError(ErrorCode code, const std::string& message, std::size_t line = 0)
      : std::runtime_error(std::string(error_code_name(code)) + ": " + message +
                           (line ? " (line " + std::to_string(line) + ")" : "")),
        code_(code),
        line_(line) {}

  ErrorCode code() const { return code_; }
  std::size_t line() const { return line_; }

 private:
  ErrorCode code_;
  std::size_t line_;
};

// Numeric failures (shape mismatches, non-finite losses, masked-softmax abuse).
class NumericError : public std::runtime_error {
 public:
  NumericError(ErrorCode code, const std::string& message)
      : std::runtime_error(std::string(error_code_name(code)) + ": " + message),
        code_(code) {}

  ErrorCode code() const { return code_; }

 private:
  ErrorCode code_;
};

}  // namespace unimc
