#include "bpmf/ergodicity.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>
#include <sstream>

#include "bpmf/error.hpp"

namespace bpmf {

RateConstants constants(const ValidatedModel& model) {
  require_embedded_assumptions(model);
  const auto& p = model.params();
  RateConstants k;
  k.c1 = p.birth.maxCoeff();
  k.c3 = std::numeric_limits<double>::infinity();
  for (int i = 0; i < p.n_boxes; ++i) {
    k.c2 = std::max(k.c2, p.total_migration(i));
    const double self = p.competition(i, i);
    if (self > 0.0) k.c3 = std::min(k.c3, self / p.scale);
  }
  return k;
}

double certificate_radius(int n_boxes, const RateConstants& k, double alpha, double lambda) {
  return std::sqrt(static_cast<double>(n_boxes)) * (alpha * k.c1 + k.c2) / (k.c3 * (lambda - 1.0 / alpha));
}

double drift_ratio(const ValidatedModel& model, std::span<const std::int64_t> x, double alpha) {
  double ratio = 0.0;
  for (const auto& move : embedded_transitions(model, x)) {
    switch (move.type.kind) {
      case EventKind::Birth: ratio += move.probability * alpha; break;
      case EventKind::Death: ratio += move.probability / alpha; break;
      case EventKind::Migration: ratio += move.probability; break;
    }
  }
  return ratio;
}

namespace {

// Lattice points of the positive orthant within radius r, bounded above by
// the orthant volume of the ball of radius r + sqrt(N).
double orthant_point_estimate(int n, double r) {
  const double radius = r + std::sqrt(static_cast<double>(n));
  const double half_n = 0.5 * n;
  const double log_volume = half_n * std::log(std::numbers::pi) - std::lgamma(half_n + 1.0) + n * std::log(radius);
  return std::exp(log_volume - n * std::numbers::ln2);
}

// Calls visit(x, |x|_2^2) for every x in Z_+^N with |x|_2^2 <= limit.
template <typename Visit>
void enumerate_ball(int n, double limit, Visit&& visit) {
  Counts x(static_cast<std::size_t>(n), 0);
  auto recurse = [&](auto&& self, int i, double used) -> void {
    if (i == n) {
      visit(x, used);
      return;
    }
    for (std::int64_t v = 0;; ++v) {
      const double sq = used + static_cast<double>(v) * static_cast<double>(v);
      if (sq > limit) break;
      x[static_cast<std::size_t>(i)] = v;
      self(self, i + 1, sq);
    }
    x[static_cast<std::size_t>(i)] = 0;
  };
  recurse(recurse, 0, 0.0);
}

// PV(x)/V(x) grouped by displacement: births raise |x|_1, deaths lower it,
// migrations keep it.
class RatioEvaluator {
 public:
  RatioEvaluator(const ModelParams& p, double alpha) : p_(p), alpha_(alpha) {
    out_.resize(p.n_boxes);
    for (int i = 0; i < p.n_boxes; ++i) out_[i] = p.migration_out(i);
  }

  double operator()(std::span<const std::int64_t> x) const {
    double up = 0.0, down = 0.0, sideways = 0.0;
    const double inv_scale = 1.0 / p_.scale;
    for (int i = 0; i < p_.n_boxes; ++i) {
      const double xi = static_cast<double>(x[static_cast<std::size_t>(i)]);
      up += p_.birth[i] * xi;
      down += (p_.death[i] + p_.competition(i, i) * inv_scale * xi) * xi;
      sideways += out_[i] * xi;
    }
    const double c = up + down + sideways;
    if (c <= 0.0) return alpha_;  // origin reflects to some e_i
    return (alpha_ * up + down / alpha_ + sideways) / c;
  }

 private:
  const ModelParams& p_;
  double alpha_;
  Eigen::VectorXd out_;
};

}  // namespace

CertifyResult certify(const ValidatedModel& model, double alpha, double lambda, const CertifyOptions& options) {
  if (!(alpha > 1.0) || !(lambda < 1.0) || !(lambda * alpha > 1.0)) {
    throw Error(ErrorCode::InvalidParameters, "need alpha > 1 and 1/alpha < lambda < 1");
  }
  const RateConstants k = constants(model);
  const auto& p = model.params();
  const int n = p.n_boxes;
  const double radius = certificate_radius(n, k, alpha, lambda);
  const double outer = 2.0 * radius;
  const double estimate = orthant_point_estimate(n, outer);
  if (estimate > static_cast<double>(options.state_budget)) {
    throw Error(ErrorCode::BallTooLarge, "about " + std::to_string(static_cast<long long>(estimate)) +
                                             " states within radius " + std::to_string(outer));
  }

  Refutation refutation{alpha, lambda, radius, {}, {}};
  for (int i = 0; i < n; ++i) {
    if (!(p.competition(i, i) > 0.0)) {
      refutation.reason = "box " + std::to_string(i + 1) +
                          " has no self-competition, so the drift bound outside the ball does not follow";
      break;
    }
  }

  LyapunovCertificate cert;
  cert.alpha = alpha;
  cert.lambda = lambda;
  cert.radius = radius;
  cert.rate_constants = k;
  cert.log_b = -std::numeric_limits<double>::infinity();

  const RatioEvaluator ratio_of(p, alpha);
  const double log_alpha = std::log(alpha);
  const double ball_limit = radius * radius;
  std::uint64_t violations = 0;
  auto report = [&](const Counts& x, double ratio) {
    ++violations;
    if (refutation.violations.size() < options.max_reported) refutation.violations.push_back({x, ratio});
  };

  enumerate_ball(n, outer * outer, [&](const Counts& x, double norm_sq) {
    const double ratio = ratio_of(x);
    if (!std::isfinite(ratio)) {
      report(x, ratio);
      return;
    }
    if (norm_sq <= ball_limit) {
      ++cert.ball_states;
      double l1 = 0.0;
      for (auto v : x) l1 += static_cast<double>(v);
      const double gap = std::abs(ratio - lambda);
      if (gap > 0.0) cert.log_b = std::max(cert.log_b, l1 * log_alpha + std::log(gap));
    } else {
      ++cert.shell_states;
      cert.max_shell_ratio = std::max(cert.max_shell_ratio, ratio);
      if (ratio > lambda * (1.0 + 1e-12)) report(x, ratio);
    }
  });

  // Inside the ball, PV <= lambda V + b holds by the choice of b; recheck in
  // the log domain to catch evaluation slips.
  enumerate_ball(n, ball_limit, [&](const Counts& x, double) {
    const double ratio = ratio_of(x);
    if (ratio <= lambda) return;
    double l1 = 0.0;
    for (auto v : x) l1 += static_cast<double>(v);
    if (l1 * log_alpha + std::log(ratio - lambda) > cert.log_b + 1e-12) report(x, ratio);
  });

  if (violations > 0 && refutation.reason.empty()) {
    refutation.reason = std::to_string(violations) + " states violate the drift inequality";
  }
  if (!refutation.reason.empty()) return refutation;
  cert.b = std::exp(cert.log_b);
  return cert;
}

CertificateSearch certify_search(const ValidatedModel& model, const std::vector<double>& alphas,
                                 const std::vector<double>& lambdas, const CertifyOptions& options) {
  CertificateSearch search;
  double best_score = std::numeric_limits<double>::infinity();
  for (const double alpha : alphas) {
    for (const double lambda : lambdas) {
      if (!(alpha > 1.0) || !(lambda < 1.0) || !(lambda * alpha > 1.0)) {
        search.skipped.emplace_back(alpha, lambda);
        continue;
      }
      try {
        search.attempts.push_back(certify(model, alpha, lambda, options));
      } catch (const Error& e) {
        if (e.code() != ErrorCode::BallTooLarge) throw;
        search.skipped.emplace_back(alpha, lambda);
        continue;
      }
      if (const auto* cert = std::get_if<LyapunovCertificate>(&search.attempts.back())) {
        const double score = cert->log_b + std::log(static_cast<double>(cert->ball_states));
        if (score < best_score) {
          best_score = score;
          search.best = static_cast<int>(search.attempts.size()) - 1;
        }
      }
    }
  }
  return search;
}

Eigen::VectorXd drift_vector(const ValidatedModel& model, std::span<const std::int64_t> x) {
  Eigen::VectorXd drift = Eigen::VectorXd::Zero(model.n_boxes());
  for (const auto& move : embedded_transitions(model, x)) {
    switch (move.type.kind) {
      case EventKind::Birth: drift[move.type.from] += move.probability; break;
      case EventKind::Death: drift[move.type.from] -= move.probability; break;
      case EventKind::Migration:
        drift[move.type.from] -= move.probability;
        drift[move.type.to] += move.probability;
        break;
    }
  }
  return drift;
}

Eigen::VectorXd symmetric_drift(const SymmetricParams& sym, std::span<const std::int64_t> x) {
  const int n = sym.n_boxes;
  double total = 0.0;
  double c = 0.0;
  for (int i = 0; i < n; ++i) {
    const double xi = static_cast<double>(x[static_cast<std::size_t>(i)]);
    total += xi;
    c += (sym.beta + sym.mu + sym.inner / sym.scale * xi) * xi + sym.mig * (n - 1) * xi;
  }
  Eigen::VectorXd drift(n);
  for (int i = 0; i < n; ++i) {
    const double xi = static_cast<double>(x[static_cast<std::size_t>(i)]);
    drift[i] = ((sym.beta - sym.mu) * xi - sym.inner / sym.scale * xi * xi + sym.mig * ((total - xi) - (n - 1) * xi)) / c;
  }
  return drift;
}

DriftZero drift_zero(const SymmetricParams& sym) {
  const ValidatedModel model = validated(sym);
  require_embedded_assumptions(model);
  DriftZero zero;
  zero.exact = sym.scale * (sym.beta - sym.mu) / sym.inner;
  zero.floor_count = static_cast<std::int64_t>(std::floor(zero.exact));
  zero.ceil_count = static_cast<std::int64_t>(std::ceil(zero.exact));
  const auto residual = [&](std::int64_t level) {
    const Counts x(static_cast<std::size_t>(sym.n_boxes), level);
    return drift_vector(model, x).lpNorm<Eigen::Infinity>();
  };
  zero.floor_residual = residual(zero.floor_count);
  zero.ceil_residual = residual(zero.ceil_count);
  return zero;
}

namespace {

void fit_decay(TvDecayReport& report, double floor) {
  int last = 0;
  for (int k = 1; k <= static_cast<int>(report.tv.size()); ++k) {
    if (report.tv[static_cast<std::size_t>(k - 1)] >= floor) last = k;
  }
  report.fit_last = last;
  report.fit_first = std::max(1, last / 2);
  const int count = report.fit_last - report.fit_first + 1;
  if (count < 3) return;

  double mx = 0.0, my = 0.0;
  for (int k = report.fit_first; k <= report.fit_last; ++k) {
    mx += k;
    my += std::log(report.tv[static_cast<std::size_t>(k - 1)]);
  }
  mx /= count;
  my /= count;
  double sxx = 0.0, sxy = 0.0, syy = 0.0;
  for (int k = report.fit_first; k <= report.fit_last; ++k) {
    const double dx = k - mx;
    const double dy = std::log(report.tv[static_cast<std::size_t>(k - 1)]) - my;
    sxx += dx * dx;
    sxy += dx * dy;
    syy += dy * dy;
  }
  const double slope = sxy / sxx;
  report.rate = std::exp(slope);
  report.log_prefactor = my - slope * mx;
  report.r_squared = syy > 0.0 ? (sxy * sxy) / (sxx * syy) : 1.0;
}

}  // namespace

TvDecayReport tv_decay(const TruncatedChain& chain, const Eigen::VectorXd& initial, int steps,
                       const TvDecayOptions& options) {
  if (steps < 1) throw Error(ErrorCode::InvalidArgument, "steps must be >= 1");
  const Eigen::VectorXd pi = stationary(chain, ChainKind::Embedded);
  TvDecayReport report;
  report.leakage = leaked_mass(chain, pi);
  Eigen::VectorXd dist = initial;
  report.tv.reserve(static_cast<std::size_t>(steps));
  for (int k = 1; k <= steps; ++k) {
    report.leakage = std::max(report.leakage, leaked_mass(chain, dist));
    dist = advance(chain, dist);
    report.tv.push_back(total_variation(dist, pi));
  }
  if (report.leakage > options.leakage_tolerance) {
    std::ostringstream msg;
    msg << "boundary leakage " << report.leakage << " exceeds " << options.leakage_tolerance;
    throw Error(ErrorCode::TruncationTooTight, msg.str());
  }
  fit_decay(report, options.floor);
  return report;
}

TvDecayReport tv_decay(const TruncatedChain& chain, std::span<const std::int64_t> x0, int steps,
                       const TvDecayOptions& options) {
  Eigen::VectorXd initial = Eigen::VectorXd::Zero(static_cast<Eigen::Index>(chain.size));
  initial[static_cast<Eigen::Index>(chain.index_of(x0))] = 1.0;
  return tv_decay(chain, initial, steps, options);
}

}  // namespace bpmf
