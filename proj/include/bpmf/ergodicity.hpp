#ifndef BPMF_ERGODICITY_HPP
#define BPMF_ERGODICITY_HPP

#include <cstdint>
#include <span>
#include <string>
#include <variant>
#include <vector>

#include <Eigen/Dense>

#include "bpmf/ctmc.hpp"
#include "bpmf/model.hpp"
#include "bpmf/oracle.hpp"

namespace bpmf {

/// C1 = max beta_i, C2 = max A+_i, C3 = min{a-_ii / L : a-_ii > 0}.
struct RateConstants {
  double c1 = 0.0;
  double c2 = 0.0;
  double c3 = 0.0;
};

/// Requires zero cross competition (CrossCompetitionUnsupported) and some
/// a-_ii > 0 (NoSelfCompetition).
RateConstants constants(const ValidatedModel& model);

/// Witness of sum_y P(x,y) V(y) <= lambda V(x) + b 1_B(x) with
/// V(x) = alpha^{|x|_1} and B = {|x|_2 <= radius}.
struct LyapunovCertificate {
  double alpha = 0.0;
  double lambda = 0.0;
  double radius = 0.0;  // M
  double b = 0.0;       // may overflow to inf for large balls; log_b stays finite
  double log_b = 0.0;
  RateConstants rate_constants;
  std::uint64_t ball_states = 0;
  std::uint64_t shell_states = 0;
  double max_shell_ratio = 0.0;  // max over the shell of PV(x) / V(x)
};

struct DriftViolation {
  Counts state;
  double ratio = 0.0;  // PV(x) / V(x), which must not exceed lambda outside B
};

struct Refutation {
  double alpha = 0.0;
  double lambda = 0.0;
  double radius = 0.0;
  std::string reason;
  std::vector<DriftViolation> violations;  // at most CertifyOptions::max_reported
};

using CertifyResult = std::variant<LyapunovCertificate, Refutation>;

struct CertifyOptions {
  std::uint64_t state_budget = 20'000'000;  // ball plus shell
  std::size_t max_reported = 32;
};

/// Radius M = sqrt(N) (alpha C1 + C2) / (C3 (lambda - 1/alpha)).
double certificate_radius(int n_boxes, const RateConstants& k, double alpha, double lambda);

/// PV(x) / V(x) for V = alpha^{|x|_1}, by summation over the jump law.
double drift_ratio(const ValidatedModel& model, std::span<const std::int64_t> x, double alpha);

/// Computes b over the ball |x|_2 <= M and checks the drift inequality by
/// direct summation on the ball and on the shell M < |x|_2 <= 2M. Outside
/// the ball the inequality follows analytically once every box has
/// self-competition; when some box lacks it the result is a Refutation.
/// Throws InvalidParameters unless alpha > 1 and 1/alpha < lambda < 1, and
/// BallTooLarge when ball plus shell would exceed the state budget.
CertifyResult certify(const ValidatedModel& model, double alpha, double lambda, const CertifyOptions& options = {});

struct CertificateSearch {
  std::vector<CertifyResult> attempts;  // one per admissible (alpha, lambda)
  std::vector<std::pair<double, double>> skipped;  // inadmissible or over budget
  int best = -1;  // index into attempts of the certificate with least b |B|
};

inline const std::vector<double> kDefaultAlphaGrid{1.01, 1.02, 1.05, 1.1};
inline const std::vector<double> kDefaultLambdaGrid{0.9, 0.95, 0.99};

CertificateSearch certify_search(const ValidatedModel& model, const std::vector<double>& alphas = kDefaultAlphaGrid,
                                 const std::vector<double>& lambdas = kDefaultLambdaGrid,
                                 const CertifyOptions& options = {});

/// Mean displacement of the jump chain, sum_y P(x,y) y - x.
Eigen::VectorXd drift_vector(const ValidatedModel& model, std::span<const std::int64_t> x);

/// Closed form of drift_vector() under symmetric conditions:
/// (1/c(x)) [(beta - mu) x_i - (a-_I / L) x_i^2 + a+ (sum_{j!=i} x_j - (N-1) x_i)].
Eigen::VectorXd symmetric_drift(const SymmetricParams& sym, std::span<const std::int64_t> x);

/// Non-trivial zero x_i = L (beta - mu) / a-_I and its integer neighbours.
struct DriftZero {
  double exact = 0.0;
  std::int64_t floor_count = 0;
  std::int64_t ceil_count = 0;
  double floor_residual = 0.0;  // ||drift||_inf at the uniform floor state
  double ceil_residual = 0.0;
};
DriftZero drift_zero(const SymmetricParams& sym);

struct TvDecayReport {
  std::vector<double> tv;  // tv[k-1] = TV(k), k = 1..steps
  double leakage = 0.0;    // max leaked mass over pi and the k-step laws
  int fit_first = 0;       // inclusive k range used for the fit
  int fit_last = 0;
  double rate = 0.0;       // fitted r in TV(k) ~ C r^k
  double log_prefactor = 0.0;
  double r_squared = 0.0;
};

struct TvDecayOptions {
  double leakage_tolerance = 1e-8;
  double floor = 1e-12;  // TV values below this are excluded from the fit
};

/// TV distance between the k-step jump-chain law from x0 and the stationary
/// law of the truncated chain, with a least-squares fit of log TV(k) over
/// the geometric regime (second half of the steps above the floor).
/// Throws TruncationTooTight when leakage exceeds the tolerance.
TvDecayReport tv_decay(const TruncatedChain& chain, std::span<const std::int64_t> x0, int steps,
                       const TvDecayOptions& options = {});

/// Same, starting from an arbitrary initial distribution.
TvDecayReport tv_decay(const TruncatedChain& chain, const Eigen::VectorXd& initial, int steps,
                       const TvDecayOptions& options = {});

}  // namespace bpmf

#endif  // BPMF_ERGODICITY_HPP
