#include "bpmf/model.hpp"

#include <cmath>
#include <sstream>

namespace bpmf {

std::string_view to_string(ErrorCode code) {
  switch (code) {
    case ErrorCode::InvalidArgument: return "InvalidArgument";
    case ErrorCode::InvalidHorizon: return "InvalidHorizon";
    case ErrorCode::CrossCompetitionUnsupported: return "CrossCompetitionUnsupported";
    case ErrorCode::NegativeDensity: return "NegativeDensity";
    case ErrorCode::DegenerateCompetition: return "DegenerateCompetition";
    case ErrorCode::NoCompetition: return "NoCompetition";
    case ErrorCode::NotStable: return "NotStable";
    case ErrorCode::Extinction: return "Extinction";
    case ErrorCode::NoSelfCompetition: return "NoSelfCompetition";
    case ErrorCode::BallTooLarge: return "BallTooLarge";
    case ErrorCode::InvalidParameters: return "InvalidParameters";
    case ErrorCode::TruncationTooTight: return "TruncationTooTight";
    case ErrorCode::BudgetExceeded: return "BudgetExceeded";
    case ErrorCode::SingularSystem: return "SingularSystem";
  }
  return "Unknown";
}

std::string_view to_string(IssueKind kind) {
  switch (kind) {
    case IssueKind::NegativeRate: return "NegativeRate";
    case IssueKind::NonzeroMigrationDiagonal: return "NonzeroMigrationDiagonal";
    case IssueKind::NonFinite: return "NonFinite";
    case IssueKind::ShapeMismatch: return "ShapeMismatch";
    case IssueKind::NonPositiveCount: return "NonPositiveCount";
    case IssueKind::BirthNotAboveDeath: return "BirthNotAboveDeath";
  }
  return "Unknown";
}

std::string ValidationIssue::describe() const {
  std::ostringstream out;
  out << to_string(kind) << "(" << field;
  if (index >= 0) out << ", " << index;
  out << ")";
  return out.str();
}

double ModelParams::migration_out(int i) const {
  double total = 0.0;
  for (int j = 0; j < n_boxes; ++j) {
    if (j != i) total += migration(i, j);
  }
  return total;
}

bool ModelParams::has_cross_competition() const {
  for (int i = 0; i < n_boxes; ++i) {
    for (int j = 0; j < n_boxes; ++j) {
      if (i != j && competition(i, j) != 0.0) return true;
    }
  }
  return false;
}

namespace {

// Row-major flat index, matching how matrices are listed in configs.
template <typename Derived>
void check_rates(const Eigen::DenseBase<Derived>& values, const std::string& field,
                 std::vector<ValidationIssue>& issues) {
  for (Eigen::Index r = 0; r < values.rows(); ++r) {
    for (Eigen::Index c = 0; c < values.cols(); ++c) {
      const double v = values(r, c);
      const int flat = static_cast<int>(r * values.cols() + c);
      if (!std::isfinite(v)) {
        issues.push_back({IssueKind::NonFinite, field, flat});
      } else if (v < 0.0) {
        issues.push_back({IssueKind::NegativeRate, field, flat});
      }
    }
  }
}

}  // namespace

std::variant<ValidatedModel, std::vector<ValidationIssue>> validate(const ModelParams& params) {
  std::vector<ValidationIssue> issues;
  const int n = params.n_boxes;
  if (n < 1) issues.push_back({IssueKind::NonPositiveCount, "n_boxes", -1});
  if (params.scale < 1) issues.push_back({IssueKind::NonPositiveCount, "scale", -1});
  if (n < 1) return issues;

  const bool birth_ok = params.birth.size() == n;
  const bool death_ok = params.death.size() == n;
  const bool mig_ok = params.migration.rows() == n && params.migration.cols() == n;
  const bool comp_ok = params.competition.rows() == n && params.competition.cols() == n;
  if (!birth_ok) issues.push_back({IssueKind::ShapeMismatch, "birth", -1});
  if (!death_ok) issues.push_back({IssueKind::ShapeMismatch, "death", -1});
  if (!mig_ok) issues.push_back({IssueKind::ShapeMismatch, "migration", -1});
  if (!comp_ok) issues.push_back({IssueKind::ShapeMismatch, "competition", -1});

  if (birth_ok) check_rates(params.birth, "birth", issues);
  if (death_ok) check_rates(params.death, "death", issues);
  if (mig_ok) {
    check_rates(params.migration, "migration", issues);
    for (int i = 0; i < n; ++i) {
      const double d = params.migration(i, i);
      if (std::isfinite(d) && d != 0.0) {
        issues.push_back({IssueKind::NonzeroMigrationDiagonal, "migration", i});
      }
    }
  }
  if (comp_ok) check_rates(params.competition, "competition", issues);

  if (!issues.empty()) return issues;
  return ValidatedModel(params);
}

ValidatedModel validated(const ModelParams& params) {
  auto result = validate(params);
  if (auto* issues = std::get_if<std::vector<ValidationIssue>>(&result)) {
    throw ValidationError(std::move(*issues));
  }
  return std::get<ValidatedModel>(std::move(result));
}

ValidatedModel ValidatedModel::with_scale(int scale) const {
  ModelParams p = params_;
  p.scale = scale;
  return validated(p);
}

std::vector<ValidationIssue> check(const SymmetricParams& sym) {
  std::vector<ValidationIssue> issues;
  const std::pair<const char*, double> rates[] = {
      {"beta", sym.beta}, {"mu", sym.mu}, {"inner", sym.inner}, {"outer", sym.outer}, {"mig", sym.mig}};
  for (const auto& [name, value] : rates) {
    if (!std::isfinite(value)) {
      issues.push_back({IssueKind::NonFinite, name, -1});
    } else if (value < 0.0) {
      issues.push_back({IssueKind::NegativeRate, name, -1});
    }
  }
  if (std::isfinite(sym.beta) && std::isfinite(sym.mu) && !(sym.beta > sym.mu)) {
    issues.push_back({IssueKind::BirthNotAboveDeath, "beta", -1});
  }
  if (sym.n_boxes < 1) issues.push_back({IssueKind::NonPositiveCount, "n_boxes", -1});
  if (sym.scale < 1) issues.push_back({IssueKind::NonPositiveCount, "scale", -1});
  return issues;
}

ModelParams expand(const SymmetricParams& sym) {
  const int n = sym.n_boxes;
  ModelParams p;
  p.n_boxes = n;
  p.scale = sym.scale;
  p.birth = Eigen::VectorXd::Constant(n, sym.beta);
  p.death = Eigen::VectorXd::Constant(n, sym.mu);
  p.migration = Eigen::MatrixXd::Constant(n, n, sym.mig);
  p.competition = Eigen::MatrixXd::Constant(n, n, sym.outer);
  for (int i = 0; i < n; ++i) {
    p.migration(i, i) = 0.0;
    p.competition(i, i) = sym.inner;
  }
  return p;
}

ValidatedModel validated(const SymmetricParams& sym) {
  auto issues = check(sym);
  if (!issues.empty()) throw ValidationError(std::move(issues));
  return validated(expand(sym));
}

namespace {

std::string join_issues(const std::vector<ValidationIssue>& issues) {
  std::string out = "invalid parameters:";
  for (const auto& issue : issues) out += " " + issue.describe();
  return out;
}

}  // namespace

ValidationError::ValidationError(std::vector<ValidationIssue> issues)
    : std::runtime_error(join_issues(issues)), issues_(std::move(issues)) {}

}  // namespace bpmf
