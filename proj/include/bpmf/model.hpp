#ifndef BPMF_MODEL_HPP
#define BPMF_MODEL_HPP

#include <string>
#include <variant>
#include <vector>

#include <Eigen/Dense>

#include "bpmf/error.hpp"

namespace bpmf {

/// Full parameterization of the N-box mean-field model.
///
/// All rates are per particle and per unit time. The 1/L and 1/L^2 lattice
/// scalings are applied where the rates are used, so one parameter set can
/// drive runs at several box sizes.
struct ModelParams {
  int n_boxes = 1;
  int scale = 1;                // L, lattice sites per box
  Eigen::VectorXd birth;        // beta_i
  Eigen::VectorXd death;        // mu_i
  Eigen::MatrixXd migration;    // a+_ij, rate of moving i -> j; zero diagonal
  Eigen::MatrixXd competition;  // a-_ij, suppression of box i by box j

  /// A+_i, total migration rate out of box i (row sum).
  double total_migration(int i) const { return migration.row(i).sum(); }
  /// A-_i, total competition pressure coefficient on box i.
  double total_competition(int i) const { return competition.row(i).sum(); }
  /// M+_i, off-diagonal migration out of box i. Equals A+_i for valid params.
  double migration_out(int i) const;

  bool has_cross_competition() const;
};

/// Identical conditions in every box.
struct SymmetricParams {
  double beta = 0.0;
  double mu = 0.0;
  double inner = 0.0;  // a-_I, competition within a box
  double outer = 0.0;  // a-_O, competition between distinct boxes
  double mig = 0.0;    // a+, migration rate between any ordered pair of boxes
  int n_boxes = 1;
  int scale = 1;
};

enum class IssueKind {
  NegativeRate,
  NonzeroMigrationDiagonal,
  NonFinite,
  ShapeMismatch,
  NonPositiveCount,
  BirthNotAboveDeath,
};

struct ValidationIssue {
  IssueKind kind;
  std::string field;
  int index = -1;  // flat 0-based index into the field, -1 when not applicable

  std::string describe() const;
  bool operator==(const ValidationIssue&) const = default;
};

std::string_view to_string(IssueKind kind);

/// Parameters certified to satisfy every ModelParams invariant. Only
/// obtainable through validate(), so holders can skip re-checking.
class ValidatedModel {
 public:
  const ModelParams& params() const { return params_; }
  int n_boxes() const { return params_.n_boxes; }
  int scale() const { return params_.scale; }

  /// Same rates at a different box size L.
  ValidatedModel with_scale(int scale) const;

 private:
  explicit ValidatedModel(ModelParams p) : params_(std::move(p)) {}
  friend std::variant<ValidatedModel, std::vector<ValidationIssue>> validate(const ModelParams&);

  ModelParams params_;
};

/// Checks every invariant and collects all violations.
std::variant<ValidatedModel, std::vector<ValidationIssue>> validate(const ModelParams& params);

/// Throwing variant of validate() for callers that already trust their input.
ValidatedModel validated(const ModelParams& params);

std::vector<ValidationIssue> check(const SymmetricParams& sym);

/// N x N expansion of a symmetric parameter set.
ModelParams expand(const SymmetricParams& sym);

/// validate(expand(sym)) after checking the symmetric-only invariants.
ValidatedModel validated(const SymmetricParams& sym);

class ValidationError : public std::runtime_error {
 public:
  explicit ValidationError(std::vector<ValidationIssue> issues);
  const std::vector<ValidationIssue>& issues() const { return issues_; }

 private:
  std::vector<ValidationIssue> issues_;
};

}  // namespace bpmf

#endif  // BPMF_MODEL_HPP
