#include "coiner/error.hpp"

namespace coiner {

std::string_view to_string(ErrorCode code) {
  switch (code) {
    case ErrorCode::Argument: return "argument";
    case ErrorCode::Parse: return "parse";
    case ErrorCode::Integrity: return "integrity";
    case ErrorCode::Label: return "label";
    case ErrorCode::Io: return "io";
    case ErrorCode::Fetch: return "fetch";
    case ErrorCode::Config: return "config";
    case ErrorCode::DegenerateTraining: return "degenerate_training";
    case ErrorCode::TrainingDiverged: return "training_diverged";
    case ErrorCode::TrainingIncomplete: return "training_incomplete";
    case ErrorCode::Validation: return "validation";
    case ErrorCode::Persistence: return "persistence";
    case ErrorCode::ServiceUnavailable: return "service_unavailable";
    case ErrorCode::SearchFailed: return "search_failed";
  }
  return "unknown";
}

}  // namespace coiner
