#include "polylab/error.hpp"

namespace polylab {

const char* error_code_name(ErrorCode code) {
  switch (code) {
    case ErrorCode::InvalidArgument: return "invalid-argument";
    case ErrorCode::OutsideHalfPlane: return "input-outside-half-plane";
    case ErrorCode::EmptySet: return "empty-set";
    case ErrorCode::BrokenChain: return "broken-chain";
    case ErrorCode::DuplicateEdge: return "duplicate-edge";
    case ErrorCode::SwRuleViolation: return "sw-rule-violation";
    case ErrorCode::DivergentTail: return "divergent-tail";
    case ErrorCode::DecayViolation: return "decay-violation";
    case ErrorCode::BudgetExceeded: return "budget-exceeded";
    case ErrorCode::InsufficientRange: return "insufficient-range";
    case ErrorCode::NoConvergence: return "no-convergence";
    case ErrorCode::CapTooSmall: return "cap-too-small";
    case ErrorCode::WindowOverflow: return "window-overflow";
    case ErrorCode::ConfigError: return "config-error";
    case ErrorCode::IoError: return "io-error";
  }
  return "unknown";
}

}  // namespace polylab
