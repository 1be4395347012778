#include "bpmf/meanfield.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <string>

#include <boost/numeric/odeint.hpp>

#include "bpmf/error.hpp"

namespace bpmf {

std::string_view to_string(Stability s) {
  switch (s) {
    case Stability::Stable: return "Stable";
    case Stability::Unstable: return "Unstable";
    case Stability::Saddle: return "Saddle";
    case Stability::Marginal: return "Marginal";
  }
  return "Unknown";
}

std::string_view to_string(Provenance p) {
  switch (p) {
    case Provenance::ClosedFormTrivial: return "ClosedFormTrivial";
    case Provenance::ClosedFormSymmetric: return "ClosedFormSymmetric";
    case Provenance::ClosedFormN2Third: return "ClosedFormN2Third";
    case Provenance::ClosedFormN2Fourth: return "ClosedFormN2Fourth";
    case Provenance::Numerical: return "Numerical";
  }
  return "Unknown";
}

Eigen::VectorXd rhs(const ModelParams& params, const DensityState& z) {
  const int n = params.n_boxes;
  Eigen::VectorXd f(n);
  for (int i = 0; i < n; ++i) {
    const double growth = params.birth[i] - params.death[i] - params.migration_out(i);
    double value = growth * z[i] - params.competition(i, i) * z[i] * z[i];
    for (int j = 0; j < n; ++j) {
      if (j == i) continue;
      value += -params.competition(i, j) * z[i] * z[j] + params.migration(j, i) * z[j];
    }
    f[i] = value;
  }
  return f;
}

Eigen::MatrixXd jacobian(const ModelParams& params, const DensityState& z) {
  const int n = params.n_boxes;
  Eigen::MatrixXd jac(n, n);
  for (int i = 0; i < n; ++i) {
    double diag = params.birth[i] - params.death[i] - params.migration_out(i) - 2.0 * params.competition(i, i) * z[i];
    for (int j = 0; j < n; ++j) {
      if (j == i) continue;
      diag -= params.competition(i, j) * z[j];
      jac(i, j) = -params.competition(i, j) * z[i] + params.migration(j, i);
    }
    jac(i, i) = diag;
  }
  return jac;
}

OdePath integrate(const ModelParams& params, const DensityState& z0, double horizon, double tolerance,
                  double output_every) {
  namespace odeint = boost::numeric::odeint;
  using State = std::vector<double>;

  if (!(horizon > 0.0) || !std::isfinite(horizon)) {
    throw Error(ErrorCode::InvalidHorizon, "ODE horizon must be positive and finite");
  }
  if (!(tolerance > 0.0)) throw Error(ErrorCode::InvalidArgument, "tolerance must be positive");
  if (!(output_every > 0.0)) throw Error(ErrorCode::InvalidArgument, "output_every must be positive");
  if (z0.size() != params.n_boxes || (z0.array() < 0.0).any()) {
    throw Error(ErrorCode::InvalidArgument, "initial density must be non-negative with n_boxes entries");
  }

  const auto n = static_cast<Eigen::Index>(params.n_boxes);
  auto system = [&](const State& x, State& dxdt, double) {
    const Eigen::VectorXd f = rhs(params, Eigen::Map<const Eigen::VectorXd>(x.data(), n));
    std::copy(f.data(), f.data() + n, dxdt.begin());
  };

  std::vector<double> times;
  const auto steps = static_cast<std::size_t>(std::floor(horizon / output_every + 1e-9));
  for (std::size_t k = 0; k <= steps; ++k) times.push_back(static_cast<double>(k) * output_every);
  if (horizon - times.back() > 1e-12 * horizon) times.push_back(horizon);

  OdePath path;
  path.times.reserve(times.size());
  path.states.reserve(times.size());
  auto observer = [&](const State& x, double t) {
    Eigen::VectorXd z = Eigen::Map<const Eigen::VectorXd>(x.data(), n);
    for (Eigen::Index i = 0; i < n; ++i) {
      if (z[i] < -tolerance) {
        throw Error(ErrorCode::NegativeDensity,
                    "component " + std::to_string(i) + " reached " + std::to_string(z[i]) + " at t=" +
                        std::to_string(t));
      }
      if (z[i] < 0.0) z[i] = 0.0;
    }
    path.times.push_back(t);
    path.states.push_back(std::move(z));
  };

  State x(z0.data(), z0.data() + n);
  auto stepper = odeint::make_dense_output(tolerance, tolerance, odeint::runge_kutta_dopri5<State>());
  const double first_step = std::min(output_every, horizon) * 1e-3;
  odeint::integrate_times(stepper, system, x, times.begin(), times.end(), first_step, observer);
  return path;
}

Stability classify(const Eigen::VectorXcd& eigenvalues, double band) {
  bool negative = false;
  bool positive = false;
  for (const auto& lambda : eigenvalues) {
    const double re = lambda.real();
    if (std::abs(re) < band) return Stability::Marginal;
    (re < 0.0 ? negative : positive) = true;
  }
  if (negative && positive) return Stability::Saddle;
  return positive ? Stability::Unstable : Stability::Stable;
}

Stability classify(const EquilibriumReport& report, double band) { return classify(report.eigenvalues, band); }

EquilibriumReport make_report(const ModelParams& params, DensityState point, Provenance provenance) {
  EquilibriumReport r;
  r.residual = rhs(params, point).lpNorm<Eigen::Infinity>();
  r.eigenvalues = jacobian(params, point).eigenvalues();
  r.classification = classify(r.eigenvalues);
  r.provenance = provenance;
  r.point = std::move(point);
  return r;
}

namespace {

double symmetric_denominator(const SymmetricParams& sym) { return sym.inner + (sym.n_boxes - 1) * sym.outer; }

void require_symmetric(const SymmetricParams& sym) {
  auto issues = check(sym);
  if (!issues.empty()) throw ValidationError(std::move(issues));
  if (!(symmetric_denominator(sym) > 0.0)) {
    throw Error(ErrorCode::DegenerateCompetition, "a-_I + (N-1) a-_O = 0: symmetric equilibrium undefined");
  }
}

}  // namespace

double symmetric_level(const SymmetricParams& sym) {
  require_symmetric(sym);
  return (sym.beta - sym.mu) / symmetric_denominator(sym);
}

SymmetricEigenvalues symmetric_eigenvalues(const SymmetricParams& sym) {
  require_symmetric(sym);
  const double d = symmetric_denominator(sym);
  const double n = sym.n_boxes;
  return {((sym.beta - sym.mu) * (sym.outer - sym.inner) - n * sym.mig * d) / d, sym.mu - sym.beta};
}

bool symmetric_point_stable(const SymmetricParams& sym) {
  const double n = sym.n_boxes;
  return (sym.beta - sym.mu) * (sym.outer - sym.inner) < n * sym.mig * symmetric_denominator(sym);
}

bool asymmetric_pair_exists(const SymmetricParams& sym) {
  if (sym.n_boxes != 2 || !(sym.outer > sym.inner)) return false;
  return sym.beta - sym.mu > 2.0 * sym.mig * (sym.outer + sym.inner) / (sym.outer - sym.inner);
}

std::vector<EquilibriumReport> equilibria_symmetric(const SymmetricParams& sym) {
  require_symmetric(sym);
  const ModelParams params = expand(sym);
  const int n = sym.n_boxes;

  std::vector<EquilibriumReport> out;
  out.push_back(make_report(params, DensityState::Zero(n), Provenance::ClosedFormTrivial));

  EquilibriumReport symmetric = make_report(params, DensityState::Constant(n, symmetric_level(sym)),
                                            Provenance::ClosedFormSymmetric);
  const auto eig = symmetric_eigenvalues(sym);
  symmetric.eigenvalues = Eigen::VectorXcd::Constant(n, eig.transverse);
  symmetric.eigenvalues[n - 1] = eig.uniform;
  symmetric.classification = classify(symmetric.eigenvalues);
  out.push_back(std::move(symmetric));

  // The asymmetric pair, kept only when the discriminant is non-negative and
  // both components are; this is checked directly rather than through
  // asymmetric_pair_exists(), which implies it.
  const double gap = sym.outer - sym.inner;
  if (n == 2 && sym.inner > 0.0 && gap != 0.0) {
    const double excess = sym.beta - sym.mu - 2.0 * sym.mig;
    const double disc = excess * excess * gap * gap - 4.0 * sym.inner * sym.mig * gap * excess;
    if (disc > 0.0) {
      const double centre = excess / (2.0 * sym.inner);
      const double spread = std::abs(std::sqrt(disc) / (2.0 * sym.inner * gap));
      DensityState third(2), fourth(2);
      third << centre + spread, centre - spread;
      fourth << centre - spread, centre + spread;
      if (third.minCoeff() >= 0.0) {
        out.push_back(make_report(params, third, Provenance::ClosedFormN2Third));
        out.push_back(make_report(params, fourth, Provenance::ClosedFormN2Fourth));
      }
    }
  }
  return out;
}

namespace {

bool lexicographic_less(const DensityState& a, const DensityState& b) {
  return std::lexicographical_compare(a.data(), a.data() + a.size(), b.data(), b.data() + b.size());
}

// Damped Newton with Armijo backtracking on ||F||^2, then undamped polishing.
// Returns false when the iteration stalls or the Jacobian is singular.
bool newton_solve(const ModelParams& params, DensityState& z, const NumericEquilibriumOptions& options) {
  Eigen::VectorXd f = rhs(params, z);
  double merit = f.squaredNorm();
  for (int it = 0; it < options.max_iterations; ++it) {
    if (f.lpNorm<Eigen::Infinity>() <= 1e-14 * (1.0 + z.lpNorm<Eigen::Infinity>())) return true;
    const Eigen::FullPivLU<Eigen::MatrixXd> lu(jacobian(params, z));
    if (!lu.isInvertible()) return false;
    const Eigen::VectorXd delta = lu.solve(-f);
    double t = 1.0;
    Eigen::VectorXd trial = z + delta;
    Eigen::VectorXd trial_f = rhs(params, trial);
    while (trial_f.squaredNorm() > (1.0 - 1e-4 * t) * merit && t > 1e-10) {
      t *= 0.5;
      trial = z + t * delta;
      trial_f = rhs(params, trial);
    }
    if (t <= 1e-10) return false;
    const double step = (trial - z).lpNorm<Eigen::Infinity>();
    z = std::move(trial);
    f = std::move(trial_f);
    merit = f.squaredNorm();
    if (!std::isfinite(merit)) return false;
    if (step <= 1e-15 * (1.0 + z.lpNorm<Eigen::Infinity>())) break;
  }
  return f.lpNorm<Eigen::Infinity>() <= options.tolerance;
}

}  // namespace

std::vector<EquilibriumReport> equilibria_numeric(const ValidatedModel& model, const NumericEquilibriumOptions& options) {
  const auto& params = model.params();
  const int n = params.n_boxes;
  if (options.grid_density < 1) throw Error(ErrorCode::InvalidArgument, "grid_density must be >= 1");

  double min_self = std::numeric_limits<double>::infinity();
  for (int j = 0; j < n; ++j) {
    if (params.competition(j, j) > 0.0) min_self = std::min(min_self, params.competition(j, j));
  }
  if (!std::isfinite(min_self)) {
    throw Error(ErrorCode::NoCompetition, "every a-_ii is zero; no bounded search region");
  }
  const double z_max = params.birth.maxCoeff() / min_self + 1.0;

  const int density = options.grid_density;
  double total_starts = std::pow(static_cast<double>(density), n);
  if (total_starts > static_cast<double>(options.max_starts)) {
    throw Error(ErrorCode::InvalidArgument, "multistart grid exceeds max_starts");
  }
  const double spacing = density > 1 ? z_max / (density - 1) : 0.0;
  const double merge_radius = 10.0 * options.tolerance;

  std::vector<DensityState> roots;
  std::vector<int> digits(static_cast<std::size_t>(n), 0);
  for (std::size_t s = 0; s < static_cast<std::size_t>(total_starts); ++s) {
    DensityState z(n);
    for (int i = 0; i < n; ++i) z[i] = digits[static_cast<std::size_t>(i)] * spacing;
    for (int i = 0; i < n; ++i) {
      if (++digits[static_cast<std::size_t>(i)] < density) break;
      digits[static_cast<std::size_t>(i)] = 0;
    }

    if (!newton_solve(params, z, options)) continue;
    if ((z.array() < -merge_radius).any()) continue;
    z = z.cwiseMax(0.0);
    const bool seen = std::any_of(roots.begin(), roots.end(), [&](const DensityState& r) {
      return (r - z).lpNorm<Eigen::Infinity>() <= merge_radius;
    });
    if (!seen) roots.push_back(std::move(z));
  }

  std::sort(roots.begin(), roots.end(), lexicographic_less);
  std::vector<EquilibriumReport> out;
  out.reserve(roots.size());
  for (auto& r : roots) out.push_back(make_report(params, std::move(r), Provenance::Numerical));
  return out;
}

}  // namespace bpmf
