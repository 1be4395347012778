#ifndef BPMF_ORACLE_HPP
#define BPMF_ORACLE_HPP

#include <cstddef>
#include <span>
#include <vector>

#include <Eigen/Dense>
#include <Eigen/Sparse>

#include "bpmf/ctmc.hpp"
#include "bpmf/model.hpp"

namespace bpmf {

using SparseRowMatrix = Eigen::SparseMatrix<double, Eigen::RowMajor>;

/// The chain restricted to {0..K}^N. Transitions that would leave the box
/// are dropped (reflecting truncation). The origin is made non-absorbing:
/// the jump chain moves to each e_i with probability 1/N and the
/// continuous-time chain leaves it at total rate 1.
struct TruncatedChain {
  int n_boxes = 0;
  int cap = 0;
  std::size_t size = 0;
  SparseRowMatrix generator;  // Q, rows sum to 0
  SparseRowMatrix jump;       // P, row-stochastic
  Eigen::VectorXd exit_rate;  // retained total rate per state (-Q_xx)
  Eigen::VectorXd leak;       // dropped probability per state under the untruncated jump law

  /// Mixed-radix index, box 0 least significant.
  std::size_t index_of(std::span<const std::int64_t> counts) const;
  Counts state(std::size_t index) const;
};

inline constexpr std::size_t kDefaultOracleBudget = 50'000;

/// Throws BudgetExceeded when (K+1)^N > budget.
TruncatedChain build_truncated(const ValidatedModel& model, int cap, std::size_t budget = kDefaultOracleBudget);

enum class ChainKind { Ctmc, Embedded };

/// Stationary law by a direct sparse solve with one balance equation replaced
/// by normalization. Throws SingularSystem if the solve fails or the
/// residual exceeds 1e-12.
Eigen::VectorXd stationary(const TruncatedChain& chain, ChainKind which);

/// Law of the jump chain after k steps from a point mass at x0.
Eigen::VectorXd kstep(const TruncatedChain& chain, std::span<const std::int64_t> x0, int k);

/// One step of the jump chain applied to a distribution (row vector times P).
Eigen::VectorXd advance(const TruncatedChain& chain, const Eigen::VectorXd& distribution);

double total_variation(const Eigen::VectorXd& a, const Eigen::VectorXd& b);

/// Probability mass that the untruncated jump chain would push out of the
/// box in one step from `distribution`.
double leaked_mass(const TruncatedChain& chain, const Eigen::VectorXd& distribution);

}  // namespace bpmf

#endif  // BPMF_ORACLE_HPP
