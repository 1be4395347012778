#include "bpmf/fluctuations.hpp"

#include <cmath>
#include <string>

#include <unsupported/Eigen/MatrixFunctions>

#include "bpmf/ctmc.hpp"
#include "bpmf/error.hpp"

namespace bpmf {

Eigen::MatrixXd diffusion(const ModelParams& params, const DensityState& z) {
  const int n = params.n_boxes;
  Eigen::MatrixXd g = Eigen::MatrixXd::Zero(n, n);
  for (int i = 0; i < n; ++i) {
    double gii = (params.birth[i] + params.death[i]) * z[i] + params.competition(i, i) * z[i] * z[i];
    for (int j = 0; j < n; ++j) {
      if (j == i) continue;
      gii += params.competition(i, j) * z[i] * z[j] + params.migration(i, j) * z[i] + params.migration(j, i) * z[j];
      g(i, j) = -params.migration(i, j) * z[i] - params.migration(j, i) * z[j];
    }
    g(i, i) = gii;
  }
  return g;
}

Eigen::MatrixXd solve_lyapunov(const Eigen::MatrixXd& drift, const Eigen::MatrixXd& diffusion) {
  const auto n = drift.rows();
  // Column-major vec: (I (x) A + A (x) I) vec(S) = -vec(G).
  const Eigen::MatrixXd id = Eigen::MatrixXd::Identity(n, n);
  Eigen::MatrixXd kron(n * n, n * n);
  for (Eigen::Index i = 0; i < n; ++i) {
    for (Eigen::Index j = 0; j < n; ++j) {
      kron.block(i * n, j * n, n, n) = id(i, j) * drift + drift(i, j) * id;
    }
  }
  const Eigen::FullPivLU<Eigen::MatrixXd> lu(kron);
  if (!lu.isInvertible()) {
    throw Error(ErrorCode::SingularSystem, "Lyapunov operator is singular (drift eigenvalues sum to zero)");
  }
  const Eigen::VectorXd vec_g = Eigen::Map<const Eigen::VectorXd>(diffusion.data(), n * n);
  const Eigen::VectorXd vec_s = lu.solve(-vec_g);
  Eigen::MatrixXd s = Eigen::Map<const Eigen::MatrixXd>(vec_s.data(), n, n);
  return 0.5 * (s + s.transpose());
}

OUParams ou_params(const ModelParams& params, const EquilibriumReport& equilibrium, DriftVariant variant) {
  OUParams ou;
  ou.drift = jacobian(params, equilibrium.point);
  if (variant == DriftVariant::DiagonalOnly) {
    ou.drift = Eigen::MatrixXd(ou.drift.diagonal().asDiagonal());
  }
  const Eigen::VectorXcd eig = ou.drift.eigenvalues();
  for (const auto& lambda : eig) {
    if (lambda.real() >= 0.0) {
      throw Error(ErrorCode::NotStable, "drift has eigenvalue with real part " + std::to_string(lambda.real()));
    }
  }
  ou.diffusion = diffusion(params, equilibrium.point);
  ou.stationary_cov = solve_lyapunov(ou.drift, ou.diffusion);
  return ou;
}

double relative_frobenius(const Eigen::MatrixXd& a, const Eigen::MatrixXd& b) { return (a - b).norm() / b.norm(); }

namespace {

Counts rounded_counts(const DensityState& z, int scale) {
  Counts counts(static_cast<std::size_t>(z.size()));
  for (Eigen::Index i = 0; i < z.size(); ++i) counts[static_cast<std::size_t>(i)] = std::llround(scale * z[i]);
  return counts;
}

double fitted_slope(const std::vector<double>& x, const std::vector<double>& y) {
  const auto n = static_cast<double>(x.size());
  double mx = 0.0, my = 0.0;
  for (std::size_t k = 0; k < x.size(); ++k) {
    mx += x[k];
    my += y[k];
  }
  mx /= n;
  my /= n;
  double sxy = 0.0, sxx = 0.0;
  for (std::size_t k = 0; k < x.size(); ++k) {
    sxy += (x[k] - mx) * (y[k] - my);
    sxx += (x[k] - mx) * (x[k] - mx);
  }
  return sxy / sxx;
}

}  // namespace

LlnReport lln_check(const ValidatedModel& model, const LlnOptions& options) {
  if (options.scales.empty()) throw Error(ErrorCode::InvalidArgument, "L list is empty");
  for (std::size_t k = 1; k < options.scales.size(); ++k) {
    if (options.scales[k] <= options.scales[k - 1]) throw Error(ErrorCode::InvalidArgument, "L list must increase");
  }

  LlnReport report;
  const OdePath ode = integrate(model.params(), options.z0, options.horizon, options.ode_tolerance, options.sample_every);
  report.times = ode.times;
  report.ode_path = ode.states;

  std::vector<double> log_scale, log_error;
  for (const int scale : options.scales) {
    const ValidatedModel scaled = model.with_scale(scale);
    SimulationOptions sim;
    sim.horizon = options.horizon;
    sim.sample_every = options.sample_every;
    sim.seed = derive_seed(options.seed, static_cast<std::uint64_t>(scale));
    sim.record_events = false;
    const PopulationState initial{rounded_counts(options.z0, scale), 0.0};
    const auto runs = ensemble(scaled, initial, sim, options.replicas, options.workers);

    LlnLevel level;
    level.scale = scale;
    const std::size_t grid = std::min(runs.front().sample_count(), ode.times.size());
    const int n = model.n_boxes();
    for (std::size_t k = 0; k < grid; ++k) {
      DensityState mean = DensityState::Zero(n);
      for (const auto& run : runs) {
        const auto row = run.sample(k);
        for (int i = 0; i < n; ++i) mean[i] += static_cast<double>(row[static_cast<std::size_t>(i)]);
      }
      mean /= static_cast<double>(runs.size()) * scale;
      level.sup_error = std::max(level.sup_error, (mean - ode.states[k]).lpNorm<Eigen::Infinity>());
      level.mean_path.push_back(std::move(mean));
    }
    log_scale.push_back(std::log(static_cast<double>(scale)));
    log_error.push_back(std::log(level.sup_error));
    report.levels.push_back(std::move(level));
  }
  report.fitted_slope = options.scales.size() > 1 ? fitted_slope(log_scale, log_error) : 0.0;
  return report;
}

Eigen::MatrixXd lag_covariance(const Eigen::MatrixXd& samples, std::size_t lag_steps) {
  const auto rows = static_cast<std::size_t>(samples.rows());
  if (lag_steps >= rows) throw Error(ErrorCode::InvalidArgument, "lag exceeds sample count");
  const Eigen::RowVectorXd mean = samples.colwise().mean();
  const Eigen::MatrixXd centred = samples.rowwise() - mean;
  const auto count = static_cast<Eigen::Index>(rows - lag_steps);
  const auto lag = static_cast<Eigen::Index>(lag_steps);
  return centred.topRows(count).transpose() * centred.middleRows(lag, count) / static_cast<double>(count);
}

CltReport clt_check(const ValidatedModel& model, const EquilibriumReport& equilibrium, const CltOptions& options) {
  const auto& params = model.params();
  const int n = params.n_boxes;
  const int scale = options.scale;
  if (!(options.horizon > 0.0)) throw Error(ErrorCode::InvalidHorizon, "CLT window must be positive");

  CltReport report;
  report.tolerance = options.tolerance;
  report.theory = ou_params(params, equilibrium, options.variant);

  double slowest = 0.0;
  for (const auto& lambda : jacobian(params, equilibrium.point).eigenvalues()) {
    slowest = std::max(slowest, 1.0 / std::abs(lambda.real()));
  }
  report.burn_in = options.burn_in >= 0.0 ? options.burn_in : 10.0 * slowest;
  const double raw_lag = options.lag >= 0.0 ? options.lag : slowest;
  const auto lag_steps = static_cast<std::size_t>(std::llround(raw_lag / options.sample_every));
  report.lag = static_cast<double>(lag_steps) * options.sample_every;

  const Counts start = rounded_counts(equilibrium.point, scale);
  for (auto c : start) {
    if (c < 1) throw Error(ErrorCode::InvalidArgument, "L too small: round(L z*) has an empty box");
  }

  SimulationOptions sim;
  sim.horizon = report.burn_in + options.horizon;
  sim.sample_every = options.sample_every;
  sim.seed = options.seed;
  sim.record_events = false;
  const Trajectory traj = simulate(model.with_scale(scale), {start, 0.0}, sim);
  if (traj.terminated_by == Termination::Absorbed) {
    throw Error(ErrorCode::Extinction, "trajectory absorbed at 0 at t=" + std::to_string(traj.final_state.time));
  }

  const auto first = static_cast<std::size_t>(std::ceil(report.burn_in / options.sample_every - 1e-9));
  if (first + lag_steps + 2 >= traj.sample_count()) throw Error(ErrorCode::InvalidArgument, "window too short");
  const std::size_t count = traj.sample_count() - first;
  Eigen::MatrixXd zeta(static_cast<Eigen::Index>(count), n);
  const double root_scale = std::sqrt(static_cast<double>(scale));
  for (std::size_t k = 0; k < count; ++k) {
    const auto row = traj.sample(first + k);
    for (int i = 0; i < n; ++i) {
      zeta(static_cast<Eigen::Index>(k), i) =
          root_scale * (static_cast<double>(row[static_cast<std::size_t>(i)]) / scale - equilibrium.point[i]);
    }
  }
  report.samples = count;

  report.empirical_cov = lag_covariance(zeta, 0);
  report.relative_error = relative_frobenius(report.empirical_cov, report.theory.stationary_cov);
  report.empirical_lag_cov = lag_covariance(zeta, lag_steps);
  report.predicted_lag_cov = report.theory.stationary_cov * (report.theory.drift.transpose() * report.lag).exp();
  report.lag_relative_error = relative_frobenius(report.empirical_lag_cov, report.predicted_lag_cov);

  // AR(1) effective sample size per component from the one-step autocorrelation.
  const Eigen::MatrixXd one_step = lag_covariance(zeta, 1);
  report.mean = zeta.colwise().mean().transpose();
  report.mean_stderr.resize(n);
  report.effective_sample_size = static_cast<double>(count);
  report.mean_centered = true;
  for (int i = 0; i < n; ++i) {
    const double var = report.empirical_cov(i, i);
    const double rho = std::clamp(one_step(i, i) / var, -0.999999, 0.999999);
    const double ess = static_cast<double>(count) * (1.0 - rho) / (1.0 + rho);
    report.effective_sample_size = std::min(report.effective_sample_size, ess);
    report.mean_stderr[i] = std::sqrt(var / ess);
    if (std::abs(report.mean[i]) > 3.0 * report.mean_stderr[i]) report.mean_centered = false;
  }
  report.passed = report.relative_error <= options.tolerance;
  return report;
}

}  // namespace bpmf
