#include "bpmf/oracle.hpp"

#include <cmath>
#include <string>

#include <Eigen/SparseLU>

#include "bpmf/error.hpp"

namespace bpmf {

std::size_t TruncatedChain::index_of(std::span<const std::int64_t> counts) const {
  std::size_t index = 0;
  for (int i = n_boxes - 1; i >= 0; --i) {
    const auto c = counts[static_cast<std::size_t>(i)];
    if (c < 0 || c > cap) throw Error(ErrorCode::InvalidArgument, "state outside the truncation");
    index = index * static_cast<std::size_t>(cap + 1) + static_cast<std::size_t>(c);
  }
  return index;
}

Counts TruncatedChain::state(std::size_t index) const {
  Counts counts(static_cast<std::size_t>(n_boxes));
  for (int i = 0; i < n_boxes; ++i) {
    counts[static_cast<std::size_t>(i)] = static_cast<std::int64_t>(index % static_cast<std::size_t>(cap + 1));
    index /= static_cast<std::size_t>(cap + 1);
  }
  return counts;
}

TruncatedChain build_truncated(const ValidatedModel& model, int cap, std::size_t budget) {
  if (cap < 1) throw Error(ErrorCode::InvalidArgument, "cap must be >= 1");
  const int n = model.n_boxes();
  double states = std::pow(static_cast<double>(cap + 1), n);
  if (states > static_cast<double>(budget)) {
    throw Error(ErrorCode::BudgetExceeded, std::to_string(static_cast<long long>(states)) +
                                               " states exceed the budget of " + std::to_string(budget));
  }

  TruncatedChain chain;
  chain.n_boxes = n;
  chain.cap = cap;
  chain.size = static_cast<std::size_t>(states);
  const auto size = static_cast<Eigen::Index>(chain.size);
  chain.exit_rate = Eigen::VectorXd::Zero(size);
  chain.leak = Eigen::VectorXd::Zero(size);

  std::vector<Eigen::Triplet<double>> q_entries, p_entries;
  for (std::size_t s = 0; s < chain.size; ++s) {
    const Counts x = chain.state(s);
    const auto row = static_cast<Eigen::Index>(s);
    const bool origin = std::all_of(x.begin(), x.end(), [](auto c) { return c == 0; });
    std::vector<std::pair<std::size_t, double>> out;
    double kept = 0.0;
    double dropped = 0.0;
    if (origin) {
      for (int i = 0; i < n; ++i) {
        Counts y = x;
        EventType::birth(i).apply(y);
        out.emplace_back(chain.index_of(y), 1.0 / n);
      }
      kept = 1.0;
    } else {
      for (const auto& entry : rates(model, x)) {
        Counts y = x;
        entry.type.apply(y);
        if (std::any_of(y.begin(), y.end(), [&](auto c) { return c > cap; })) {
          dropped += entry.rate;
          continue;
        }
        out.emplace_back(chain.index_of(y), entry.rate);
        kept += entry.rate;
      }
    }
    chain.exit_rate[row] = kept;
    chain.leak[row] = (kept + dropped) > 0.0 ? dropped / (kept + dropped) : 0.0;
    for (const auto& [target, rate] : out) {
      q_entries.emplace_back(row, static_cast<Eigen::Index>(target), rate);
      if (kept > 0.0) p_entries.emplace_back(row, static_cast<Eigen::Index>(target), rate / kept);
    }
    q_entries.emplace_back(row, row, -kept);
    if (kept <= 0.0) p_entries.emplace_back(row, row, 1.0);
  }
  chain.generator.resize(size, size);
  chain.generator.setFromTriplets(q_entries.begin(), q_entries.end());
  chain.jump.resize(size, size);
  chain.jump.setFromTriplets(p_entries.begin(), p_entries.end());
  return chain;
}

Eigen::VectorXd stationary(const TruncatedChain& chain, ChainKind which) {
  const auto size = static_cast<Eigen::Index>(chain.size);
  // Balance equations A^T pi = 0 with A = Q or P - I.
  Eigen::SparseMatrix<double> balance;
  if (which == ChainKind::Ctmc) {
    balance = Eigen::SparseMatrix<double>(chain.generator.transpose());
  } else {
    Eigen::SparseMatrix<double> id(size, size);
    id.setIdentity();
    balance = Eigen::SparseMatrix<double>(chain.jump.transpose()) - id;
  }

  // Replace the last balance equation by sum(pi) = 1.
  std::vector<Eigen::Triplet<double>> entries;
  entries.reserve(static_cast<std::size_t>(balance.nonZeros() + size));
  for (Eigen::Index col = 0; col < balance.outerSize(); ++col) {
    for (Eigen::SparseMatrix<double>::InnerIterator it(balance, col); it; ++it) {
      if (it.row() != size - 1) entries.emplace_back(it.row(), it.col(), it.value());
    }
  }
  for (Eigen::Index col = 0; col < size; ++col) entries.emplace_back(size - 1, col, 1.0);
  Eigen::SparseMatrix<double> system(size, size);
  system.setFromTriplets(entries.begin(), entries.end());
  system.makeCompressed();

  Eigen::VectorXd rhs = Eigen::VectorXd::Zero(size);
  rhs[size - 1] = 1.0;
  Eigen::SparseLU<Eigen::SparseMatrix<double>, Eigen::COLAMDOrdering<int>> solver;
  solver.compute(system);
  if (solver.info() != Eigen::Success) throw Error(ErrorCode::SingularSystem, "stationary system is singular");
  Eigen::VectorXd pi = solver.solve(rhs);
  if (solver.info() != Eigen::Success) throw Error(ErrorCode::SingularSystem, "stationary solve failed");
  // One step of iterative refinement.
  pi += solver.solve(rhs - system * pi);

  const double scale = std::max(1.0, Eigen::VectorXd(balance.cwiseAbs() * pi.cwiseAbs()).lpNorm<Eigen::Infinity>());
  const double residual = (balance * pi).lpNorm<Eigen::Infinity>() / scale;
  if (!(residual <= 1e-12) || (pi.array() < -1e-12).any()) {
    throw Error(ErrorCode::SingularSystem, "stationary residual " + std::to_string(residual) + " (chain reducible?)");
  }
  pi = pi.cwiseMax(0.0);
  return pi / pi.sum();
}

Eigen::VectorXd advance(const TruncatedChain& chain, const Eigen::VectorXd& distribution) {
  return chain.jump.transpose() * distribution;
}

Eigen::VectorXd kstep(const TruncatedChain& chain, std::span<const std::int64_t> x0, int k) {
  if (k < 0) throw Error(ErrorCode::InvalidArgument, "k must be >= 0");
  Eigen::VectorXd dist = Eigen::VectorXd::Zero(static_cast<Eigen::Index>(chain.size));
  dist[static_cast<Eigen::Index>(chain.index_of(x0))] = 1.0;
  for (int step = 0; step < k; ++step) dist = advance(chain, dist);
  return dist;
}

double total_variation(const Eigen::VectorXd& a, const Eigen::VectorXd& b) { return 0.5 * (a - b).lpNorm<1>(); }

double leaked_mass(const TruncatedChain& chain, const Eigen::VectorXd& distribution) {
  return distribution.dot(chain.leak);
}

}  // namespace bpmf
