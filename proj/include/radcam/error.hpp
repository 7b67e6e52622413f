#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace radcam {

enum class ErrorCode {
  kEmptyInput,
  kInsufficientPoints,
  kInsufficientData,
  kBehindCamera,
  kInversionFailure,
  kInvalidStart,
  kNumericalFailure,
  kDegenerateConfiguration,
  kRansacFailure,
  kOrdering,
  kCalibrationFailure,
  kInfeasibleScenario,
  kParse,
  kSchema,
  kValidation,
  kIo,
};

std::string_view to_string(ErrorCode code);

// Single exception type for the library; callers branch on code().
class Error : public std::runtime_error {
 public:
  Error(ErrorCode code, const std::string& what)
      : std::runtime_error(what), code_(code) {}

  ErrorCode code() const noexcept { return code_; }

  // Parse/schema/validation/I-O failures map to exit code 2 in the CLI.
  bool is_input_error() const noexcept {
    return code_ == ErrorCode::kParse || code_ == ErrorCode::kSchema ||
           code_ == ErrorCode::kValidation || code_ == ErrorCode::kIo;
  }

 private:
  ErrorCode code_;
};

}  // namespace radcam
