#include "radcam/error.hpp"

namespace radcam {

std::string_view to_string(ErrorCode code) {
  switch (code) {
    case ErrorCode::kEmptyInput: return "empty-input";
    case ErrorCode::kInsufficientPoints: return "insufficient-points";
    case ErrorCode::kInsufficientData: return "insufficient-data";
    case ErrorCode::kBehindCamera: return "behind-camera";
    case ErrorCode::kInversionFailure: return "inversion-failure";
    case ErrorCode::kInvalidStart: return "invalid-start";
    case ErrorCode::kNumericalFailure: return "numerical-failure";
    case ErrorCode::kDegenerateConfiguration: return "degenerate-configuration";
    case ErrorCode::kRansacFailure: return "ransac-failure";
    case ErrorCode::kOrdering: return "ordering";
    case ErrorCode::kCalibrationFailure: return "calibration-failure";
    case ErrorCode::kInfeasibleScenario: return "infeasible-scenario";
    case ErrorCode::kParse: return "parse";
    case ErrorCode::kSchema: return "schema";
    case ErrorCode::kValidation: return "validation";
    case ErrorCode::kIo: return "io";
  }
  return "unknown";
}

}  // namespace radcam
