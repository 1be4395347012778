#ifndef BPMF_ERROR_HPP
#define BPMF_ERROR_HPP

#include <stdexcept>
#include <string>
#include <string_view>

namespace bpmf {

enum class ErrorCode {
  InvalidArgument,
  InvalidHorizon,
  CrossCompetitionUnsupported,
  NegativeDensity,
  DegenerateCompetition,
  NoCompetition,
  NotStable,
  Extinction,
  NoSelfCompetition,
  BallTooLarge,
  InvalidParameters,
  TruncationTooTight,
  BudgetExceeded,
  SingularSystem,
};

std::string_view to_string(ErrorCode code);

/// Failure of an analysis operation. Validation problems with a parameter
/// set are reported separately through ValidationIssue lists.
class Error : public std::runtime_error {
 public:
  Error(ErrorCode code, const std::string& what)
      : std::runtime_error(std::string(to_string(code)) + ": " + what), code_(code) {}

  ErrorCode code() const noexcept { return code_; }

 private:
  ErrorCode code_;
};

}  // namespace bpmf

#endif  // BPMF_ERROR_HPP
