#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <random>

#include "bpmf/ergodicity.hpp"

using namespace bpmf;

namespace {

const SymmetricParams kOne{.beta = 3, .mu = 1, .inner = 1, .outer = 0, .mig = 0, .n_boxes = 1, .scale = 10};
const SymmetricParams kTwo{.beta = 3, .mu = 1, .inner = 1, .outer = 0, .mig = 0.5, .n_boxes = 2, .scale = 10};

// PV(x) for the one-box chain by hand: up with beta n / c, down otherwise,
// and a forced step to 1 from the origin.
double one_box_pv(const SymmetricParams& s, std::int64_t n, double alpha) {
  if (n == 0) return alpha;
  const double x = static_cast<double>(n);
  const double up = s.beta * x;
  const double down = s.mu * x + s.inner * x * x / s.scale;
  return (up * std::pow(alpha, x + 1) + down * std::pow(alpha, x - 1)) / (up + down);
}

}  // namespace

TEST_CASE("rate constants") {
  ModelParams p;
  p.n_boxes = 2;
  p.scale = 10;
  p.birth = Eigen::Vector2d(3, 2);
  p.death = Eigen::Vector2d(1, 1);
  p.migration = Eigen::Matrix2d{{0, 0.5}, {0.25, 0}};
  p.competition = Eigen::Vector2d(1, 0).asDiagonal();
  const auto k = constants(validated(p));
  CHECK(k.c1 == doctest::Approx(3));
  CHECK(k.c2 == doctest::Approx(0.5));
  CHECK(k.c3 == doctest::Approx(0.1));

  const auto sym = constants(validated(SymmetricParams{.beta = 4, .mu = 1, .inner = 2, .outer = 0, .mig = 0.3, .n_boxes = 3, .scale = 20}));
  CHECK(sym.c1 == doctest::Approx(4));
  CHECK(sym.c2 == doctest::Approx(0.6));
  CHECK(sym.c3 == doctest::Approx(0.1));

  p.competition.setZero();
  CHECK_THROWS_AS(constants(validated(p)), Error);
}

TEST_CASE("drift ratio at the origin is alpha") {
  CHECK(drift_ratio(validated(kTwo), Counts{0, 0}, 1.07) == doctest::Approx(1.07));
}

TEST_CASE("drift ratio agrees with the one-box hand formula") {
  const auto m = validated(kOne);
  for (std::int64_t n : {0, 1, 5, 20, 33, 100}) {
    const Counts x{n};
    const double v = std::pow(1.05, static_cast<double>(n));
    CHECK(drift_ratio(m, x, 1.05) == doctest::Approx(one_box_pv(kOne, n, 1.05) / v).epsilon(1e-13));
  }
}

TEST_CASE("one-box certificate holds on every state up to twice the radius") {
  const auto m = validated(kOne);
  const auto result = certify(m, 1.05, 0.99);
  REQUIRE(std::holds_alternative<LyapunovCertificate>(result));
  const auto& c = std::get<LyapunovCertificate>(result);
  CHECK(std::isfinite(c.radius));
  CHECK(std::isfinite(c.b));
  CHECK(c.radius == doctest::Approx(certificate_radius(1, constants(m), 1.05, 0.99)));
  const auto top = static_cast<std::int64_t>(std::ceil(2 * c.radius));
  for (std::int64_t n = 0; n <= top; ++n) {
    const double v = std::pow(1.05, static_cast<double>(n));
    const double bound = 0.99 * v + (n <= c.radius ? c.b : 0.0);
    CHECK(one_box_pv(kOne, n, 1.05) <= bound * (1 + 1e-12));
  }
}

TEST_CASE("certificate parameters are checked") {
  const auto m = validated(kOne);
  CHECK_THROWS_AS(certify(m, 1.05, 1.0 / 1.05), Error);
  CHECK_THROWS_AS(certify(m, 1.0, 0.99), Error);
  CHECK_THROWS_AS(certify(m, 1.05, 1.0), Error);
  try {
    certify(m, 1.05, 1.0 / 1.05);
  } catch (const Error& e) {
    CHECK(e.code() == ErrorCode::InvalidParameters);
  }
  CertifyOptions tight;
  tight.state_budget = 10;
  CHECK_THROWS_AS(certify(validated(kTwo), 1.05, 0.99, tight), Error);
}

TEST_CASE("a box without self-competition is refuted") {
  ModelParams p = expand(kTwo);
  p.competition(1, 1) = 0.0;
  const auto result = certify(validated(p), 1.1, 0.99);
  CHECK(std::holds_alternative<Refutation>(result));
}

TEST_CASE("radius is unimodal in alpha") {
  // M blows up as alpha -> 1/lambda, so it only grows past the minimiser
  // alpha* = (C1 + sqrt(C1^2 + lambda C1 C2)) / (lambda C1).
  const auto k = constants(validated(kTwo));
  const double lambda = 0.99;
  const double star = (k.c1 + std::sqrt(k.c1 * k.c1 + lambda * k.c1 * k.c2)) / (lambda * k.c1);
  double prev = certificate_radius(2, k, 1.0 / lambda + 1e-3, lambda);
  for (double alpha = 1.0 / lambda + 2e-3; alpha < 4.0; alpha += 1e-3) {
    const double m = certificate_radius(2, k, alpha, lambda);
    if (alpha < star - 1e-3) CHECK(m < prev);
    if (alpha > star + 1e-3) CHECK(m >= prev);
    prev = m;
  }
  for (double alpha : {1.02, 1.05, 1.1}) {
    CHECK(certificate_radius(2, k, alpha, lambda) > certificate_radius(2, k, star, lambda));
  }
}

TEST_CASE("grid search returns a certificate") {
  const auto search = certify_search(validated(kOne));
  REQUIRE(search.best >= 0);
  const auto& c = std::get<LyapunovCertificate>(search.attempts[static_cast<std::size_t>(search.best)]);
  CHECK(c.alpha * c.lambda > 1.0);
}

TEST_CASE("drift vanishes at the symmetric zero") {
  const auto m = validated(kTwo);
  const Counts x{20, 20};
  CHECK(drift_vector(m, x).lpNorm<Eigen::Infinity>() <= 1e-12);
  const auto z = drift_zero(kTwo);
  CHECK(z.exact == doctest::Approx(20));
  CHECK(z.floor_count == 20);
  CHECK(z.ceil_count == 20);
  CHECK(z.floor_residual <= 1e-12);
}

TEST_CASE("drift zero brackets a non-integer level") {
  const SymmetricParams s{.beta = 3, .mu = 1, .inner = 3, .outer = 0, .mig = 0.5, .n_boxes = 2, .scale = 10};
  const auto z = drift_zero(s);
  CHECK(z.exact == doctest::Approx(20.0 / 3.0));
  CHECK(z.floor_count == 6);
  CHECK(z.ceil_count == 7);
  // Rounding bound (a-_I / L + a+ N) / c(x) from the integer offset.
  const double c = (s.beta + s.mu + s.inner * 6 / s.scale) * 6 * 2 + 2 * s.mig * 6;
  CHECK(z.floor_residual <= (s.inner / s.scale + s.mig * 2) / c * 6);
}

TEST_CASE("below the zero every component drifts up") {
  const auto m = validated(kTwo);
  for (std::int64_t n = 1; n < 20; ++n) {
    const Counts x{n, n};
    CHECK(drift_vector(m, x).minCoeff() > 0.0);
  }
}

TEST_CASE("brute-force drift matches the closed form") {
  const SymmetricParams s{.beta = 4, .mu = 1.5, .inner = 2, .outer = 0, .mig = 0.7, .n_boxes = 3, .scale = 10};
  const auto m = validated(s);
  std::mt19937_64 rng(10);
  for (int trial = 0; trial < 100; ++trial) {
    Counts x{static_cast<std::int64_t>(rng() % 50), static_cast<std::int64_t>(rng() % 50),
             static_cast<std::int64_t>(rng() % 50)};
    if (x[0] + x[1] + x[2] == 0) x[0] = 1;
    CHECK((drift_vector(m, x) - symmetric_drift(s, x)).lpNorm<Eigen::Infinity>() <= 1e-12);
  }
}

TEST_CASE("TV decays geometrically on a generous truncation") {
  const auto chain = build_truncated(validated(kTwo), 56);
  const auto r = tv_decay(chain, Counts{0, 0}, 400);
  CHECK(r.tv.size() == 400);
  CHECK(r.rate < 1.0);
  CHECK(r.r_squared > 0.99);
  CHECK(r.leakage < 1e-8);
  for (std::size_t k = 1; k < r.tv.size(); ++k) CHECK(r.tv[k] <= r.tv[k - 1] + 1e-15);
}

TEST_CASE("the one-box jump chain has period two") {
  // Every jump changes n by one, so the k-step law alternates parity and
  // TV settles near 1/2 instead of decaying.
  const auto chain = build_truncated(validated(kOne), 100);
  const auto r = tv_decay(chain, Counts{0}, 400);
  CHECK(r.tv.back() > 0.49);
}

TEST_CASE("starting from the stationary law TV stays at its floor") {
  const auto chain = build_truncated(validated(kOne), 100);
  const Eigen::VectorXd pi = stationary(chain, ChainKind::Embedded);
  const auto r = tv_decay(chain, pi, 20);
  for (double v : r.tv) CHECK(v < 1e-12);
}

TEST_CASE("a tight truncation is reported") {
  const auto chain = build_truncated(validated(kOne), 15);
  CHECK_THROWS_AS(tv_decay(chain, Counts{0}, 10), Error);
}
