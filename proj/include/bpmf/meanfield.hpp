#ifndef BPMF_MEANFIELD_HPP
#define BPMF_MEANFIELD_HPP

#include <string_view>
#include <vector>

#include <Eigen/Dense>

#include "bpmf/model.hpp"

namespace bpmf {

/// Particles per lattice site, z_i = n_i / L.
using DensityState = Eigen::VectorXd;

/// Mean-field vector field
///   F_i(z) = p_i z_i - a-_ii z_i^2 - sum_{j!=i} a-_ij z_i z_j + sum_{j!=i} a+_ji z_j
/// with p_i = beta_i - mu_i - M+_i.
Eigen::VectorXd rhs(const ModelParams& params, const DensityState& z);

/// Analytic Jacobian of rhs().
Eigen::MatrixXd jacobian(const ModelParams& params, const DensityState& z);

struct OdePath {
  std::vector<double> times;
  std::vector<DensityState> states;
};

/// Integrates dz/dt = F(z) with an adaptive Dormand-Prince 5(4) pair and
/// reports the solution every `output_every` (and at the horizon).
/// `tolerance` bounds both absolute and relative local error. Components
/// dipping below zero by no more than `tolerance` are clipped; anything
/// lower throws NegativeDensity.
OdePath integrate(const ModelParams& params, const DensityState& z0, double horizon, double tolerance,
                  double output_every);

enum class Stability { Stable, Unstable, Saddle, Marginal };

enum class Provenance { ClosedFormTrivial, ClosedFormSymmetric, ClosedFormN2Third, ClosedFormN2Fourth, Numerical };

std::string_view to_string(Stability s);
std::string_view to_string(Provenance p);

struct EquilibriumReport {
  DensityState point;
  double residual = 0.0;  // ||F(point)||_inf
  Eigen::VectorXcd eigenvalues;
  Stability classification = Stability::Marginal;
  Provenance provenance = Provenance::Numerical;
};

inline constexpr double kMarginalBand = 1e-9;

/// Marginal when any |Re lambda| < band; otherwise Stable / Unstable / Saddle
/// by the signs of the real parts.
Stability classify(const Eigen::VectorXcd& eigenvalues, double band = kMarginalBand);
Stability classify(const EquilibriumReport& report, double band = kMarginalBand);

/// Level of the symmetric interior equilibrium, (beta - mu) / (a-_I + (N-1) a-_O).
double symmetric_level(const SymmetricParams& sym);

/// Distinct Jacobian eigenvalues at the symmetric point: transverse mode
/// (multiplicity N-1) and the uniform mode mu - beta.
struct SymmetricEigenvalues {
  double transverse;
  double uniform;
};
SymmetricEigenvalues symmetric_eigenvalues(const SymmetricParams& sym);

/// (beta - mu)(a-_O - a-_I) < N a+ (a-_I + (N-1) a-_O): the symmetric point is stable.
bool symmetric_point_stable(const SymmetricParams& sym);

/// For N = 2: a-_O > a-_I and beta - mu > 2 a+ (a-_O + a-_I) / (a-_O - a-_I),
/// the condition for the two asymmetric equilibria.
bool asymmetric_pair_exists(const SymmetricParams& sym);

/// Closed-form equilibria of the symmetric system: the origin, the symmetric
/// point and, for N = 2, the asymmetric pair whenever its discriminant is
/// positive and both components are non-negative.
/// Throws DegenerateCompetition when a-_I + (N-1) a-_O = 0.
std::vector<EquilibriumReport> equilibria_symmetric(const SymmetricParams& sym);

struct NumericEquilibriumOptions {
  int grid_density = 8;             // starts per axis
  double tolerance = 1e-10;         // acceptance bound on ||F||_inf
  std::size_t max_starts = 1u << 20;
  int max_iterations = 100;
};

/// Damped Newton from a multistart grid over [0, z_max]^N with
/// z_max = max_i beta_i / min{a-_jj > 0} + 1. Roots closer than
/// 10 * tolerance are merged; roots outside the non-negative orthant are
/// dropped. Output is sorted lexicographically. Throws NoCompetition when
/// every a-_ii is zero.
std::vector<EquilibriumReport> equilibria_numeric(const ValidatedModel& model,
                                                  const NumericEquilibriumOptions& options = {});

/// Fills residual, eigenvalues (from jacobian()) and classification.
EquilibriumReport make_report(const ModelParams& params, DensityState point, Provenance provenance);

}  // namespace bpmf

#endif  // BPMF_MEANFIELD_HPP
