#ifndef BPMF_FLUCTUATIONS_HPP
#define BPMF_FLUCTUATIONS_HPP

#include <cstdint>
#include <vector>

#include <Eigen/Dense>

#include "bpmf/meanfield.hpp"
#include "bpmf/model.hpp"

namespace bpmf {

/// Infinitesimal covariance G(z) of the density process:
///   g_ii = beta_i z_i + mu_i z_i + a-_ii z_i^2 + sum_{j!=i} (a-_ij z_i z_j + a+_ij z_i + a+_ji z_j)
///   g_ij = -a+_ij z_i - a+_ji z_j                      (i != j)
Eigen::MatrixXd diffusion(const ModelParams& params, const DensityState& z);

/// Solves A S + S A^T + G = 0 for S. Throws SingularSystem when A has a pair
/// of eigenvalues summing to zero.
Eigen::MatrixXd solve_lyapunov(const Eigen::MatrixXd& drift, const Eigen::MatrixXd& diffusion);

/// FullJacobian linearizes F at z*; DiagonalOnly keeps only dF_i/dz_i.
enum class DriftVariant { FullJacobian, DiagonalOnly };

struct OUParams {
  Eigen::MatrixXd drift;
  Eigen::MatrixXd diffusion;
  Eigen::MatrixXd stationary_cov;
};

/// OU limit of sqrt(L)(Z_L - z*) at a stable equilibrium. Throws NotStable
/// when the drift has an eigenvalue with Re >= 0.
OUParams ou_params(const ModelParams& params, const EquilibriumReport& equilibrium,
                   DriftVariant variant = DriftVariant::FullJacobian);

/// ||a - b||_F / ||b||_F.
double relative_frobenius(const Eigen::MatrixXd& a, const Eigen::MatrixXd& b);

struct LlnOptions {
  DensityState z0;           // ODE start; simulations start at round(L z0)
  std::vector<int> scales;   // increasing L values
  double horizon = 10.0;
  int replicas = 100;
  std::uint64_t seed = 0;
  double sample_every = 0.1;
  double ode_tolerance = 1e-10;
  int workers = 0;
};

struct LlnLevel {
  int scale = 0;
  double sup_error = 0.0;  // sup_t ||mean_r Z_L(t) - z(t)||_inf
  std::vector<DensityState> mean_path;
};

struct LlnReport {
  std::vector<double> times;
  std::vector<DensityState> ode_path;
  std::vector<LlnLevel> levels;
  double fitted_slope = 0.0;  // least squares slope of log error vs log L
};

LlnReport lln_check(const ValidatedModel& model, const LlnOptions& options);

struct CltOptions {
  int scale = 10000;
  double burn_in = -1.0;  // negative: 10 relaxation times
  double horizon = 500.0; // length of the analysed window after burn-in
  double sample_every = 0.05;
  double lag = -1.0;      // negative: one relaxation time, rounded to the grid
  std::uint64_t seed = 0;
  double tolerance = 0.10;
  DriftVariant variant = DriftVariant::FullJacobian;
};

struct CltReport {
  OUParams theory;
  double burn_in = 0.0;
  double lag = 0.0;
  std::size_t samples = 0;
  Eigen::VectorXd mean;
  Eigen::VectorXd mean_stderr;
  bool mean_centered = false;  // |mean_i| <= 3 stderr_i for every i
  Eigen::MatrixXd empirical_cov;
  double relative_error = 0.0;
  Eigen::MatrixXd empirical_lag_cov;  // E[(zeta(t) - m)(zeta(t + lag) - m)^T]
  Eigen::MatrixXd predicted_lag_cov;  // Sigma exp(drift^T lag)
  double lag_relative_error = 0.0;
  double effective_sample_size = 0.0;
  double tolerance = 0.0;
  bool passed = false;
};

/// Lag-m sample cross-covariance (1/(n-m)) sum_k (x_k - m)(x_{k+m} - m)^T of
/// the rows of `samples`, centred at their mean.
Eigen::MatrixXd lag_covariance(const Eigen::MatrixXd& samples, std::size_t lag_steps);

/// Simulates one long path from round(L z*), drops the burn-in and compares
/// the time-averaged statistics of zeta_L = sqrt(L)(Z_L - z*) with the OU
/// prediction. Throws Extinction if the path is absorbed at 0.
CltReport clt_check(const ValidatedModel& model, const EquilibriumReport& equilibrium, const CltOptions& options);

}  // namespace bpmf

#endif  // BPMF_FLUCTUATIONS_HPP
