#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <random>

#include "bpmf/fluctuations.hpp"

using namespace bpmf;

namespace {

const SymmetricParams kDesk{.beta = 3, .mu = 1, .inner = 1, .outer = 0, .mig = 0.5, .n_boxes = 2, .scale = 10};

EquilibriumReport desk_point() { return make_report(expand(kDesk), Eigen::Vector2d(2, 2), Provenance::ClosedFormSymmetric); }

// Vectorized 2x2 Lyapunov equation in the unknowns (s11, s12, s22).
Eigen::Matrix2d lyapunov_2x2(const Eigen::Matrix2d& A, const Eigen::Matrix2d& G) {
  Eigen::Matrix3d K;
  K << 2 * A(0, 0), 2 * A(0, 1), 0,
       A(1, 0), A(0, 0) + A(1, 1), A(0, 1),
       0, 2 * A(1, 0), 2 * A(1, 1);
  const Eigen::Vector3d rhs(-G(0, 0), -G(0, 1), -G(1, 1));
  const Eigen::Vector3d s = K.fullPivLu().solve(rhs);
  Eigen::Matrix2d S;
  S << s[0], s[1], s[1], s[2];
  return S;
}

}  // namespace

TEST_CASE("diffusion at the desk equilibrium") {
  const auto G = diffusion(expand(kDesk), Eigen::Vector2d(2, 2));
  CHECK(G(0, 0) == doctest::Approx(14));
  CHECK(G(1, 1) == doctest::Approx(14));
  CHECK(G(0, 1) == doctest::Approx(-2));
  CHECK(G(1, 0) == doctest::Approx(-2));
  CHECK(diffusion(expand(kDesk), Eigen::Vector2d::Zero()).isZero());
  SymmetricParams still = kDesk;
  still.mig = 0;
  const auto D = diffusion(expand(still), Eigen::Vector2d(2, 2));
  CHECK(D(0, 1) == 0.0);
}

TEST_CASE("stationary covariance of the desk model") {
  const auto ou = ou_params(expand(kDesk), desk_point());
  CHECK(ou.drift(0, 0) == doctest::Approx(-2.5));
  CHECK(ou.drift(0, 1) == doctest::Approx(0.5));
  const Eigen::Matrix2d expected{{17.0 / 6, 1.0 / 6}, {1.0 / 6, 17.0 / 6}};
  CHECK((ou.stationary_cov - expected).norm() < 1e-12);
  const Eigen::Matrix2d oracle = lyapunov_2x2(ou.drift, ou.diffusion);
  CHECK((ou.stationary_cov - oracle).norm() < 1e-12);
  const Eigen::MatrixXd residual = ou.drift * ou.stationary_cov + ou.stationary_cov * ou.drift.transpose() + ou.diffusion;
  CHECK(residual.norm() < 1e-12);

  const auto diag = ou_params(expand(kDesk), desk_point(), DriftVariant::DiagonalOnly);
  CHECK(diag.drift(0, 1) == 0.0);
  CHECK(diag.stationary_cov(0, 0) == doctest::Approx(2.8));
  CHECK(diag.stationary_cov(0, 1) == doctest::Approx(-0.4));
}

TEST_CASE("Lyapunov solve against the 3x3 oracle on random stable drifts") {
  std::mt19937_64 rng(3);
  std::uniform_real_distribution<double> u(-1.0, 1.0);
  for (int trial = 0; trial < 50; ++trial) {
    Eigen::Matrix2d A;
    A << u(rng) - 2.5, u(rng), u(rng), u(rng) - 2.5;
    Eigen::Matrix2d R;
    R << u(rng), u(rng), u(rng), u(rng);
    const Eigen::Matrix2d G = R * R.transpose() + Eigen::Matrix2d::Identity();
    CHECK((solve_lyapunov(A, G) - lyapunov_2x2(A, G)).norm() < 1e-11);
  }
}

TEST_CASE("larger systems satisfy the Lyapunov equation") {
  std::mt19937_64 rng(4);
  std::uniform_real_distribution<double> u(-0.3, 0.3);
  Eigen::MatrixXd A = -2.0 * Eigen::MatrixXd::Identity(5, 5);
  Eigen::MatrixXd R(5, 5);
  for (int i = 0; i < 5; ++i) {
    for (int j = 0; j < 5; ++j) {
      A(i, j) += u(rng);
      R(i, j) = u(rng);
    }
  }
  const Eigen::MatrixXd G = R * R.transpose();
  const Eigen::MatrixXd S = solve_lyapunov(A, G);
  CHECK((A * S + S * A.transpose() + G).norm() < 1e-12);
  CHECK((S - S.transpose()).norm() == 0.0);
}

TEST_CASE("without migration the boxes decouple") {
  SymmetricParams s = kDesk;
  s.mig = 0;
  const auto p = expand(s);
  const auto ou = ou_params(p, make_report(p, Eigen::Vector2d(2, 2), Provenance::ClosedFormSymmetric));
  CHECK(ou.stationary_cov(0, 1) == doctest::Approx(0.0).scale(1.0));
  // One-box OU variance g / (2 |j|) with g = 2 beta z, j = -(beta - mu).
  CHECK(ou.stationary_cov(0, 0) == doctest::Approx(2 * 3.0 * 2 / (2 * 2.0)));
}

TEST_CASE("OU parameters do not depend on the box size") {
  const auto a = ou_params(expand(kDesk), desk_point());
  SymmetricParams big = kDesk;
  big.scale = 12345;
  const auto b = ou_params(expand(big), make_report(expand(big), Eigen::Vector2d(2, 2), Provenance::ClosedFormSymmetric));
  CHECK((a.stationary_cov - b.stationary_cov).norm() == 0.0);
}

TEST_CASE("unstable equilibria are rejected") {
  const auto origin = make_report(expand(kDesk), Eigen::Vector2d::Zero(), Provenance::ClosedFormTrivial);
  CHECK_THROWS_AS(ou_params(expand(kDesk), origin), Error);
}

TEST_CASE("relative Frobenius distance") {
  const Eigen::Matrix2d b = Eigen::Matrix2d::Identity();
  CHECK(relative_frobenius(b * 1.1, b) == doctest::Approx(0.1));
}

TEST_CASE("lag covariance at zero lag is the sample covariance") {
  std::mt19937_64 rng(6);
  std::normal_distribution<double> g;
  Eigen::MatrixXd x(500, 3);
  for (Eigen::Index i = 0; i < x.rows(); ++i) {
    for (Eigen::Index j = 0; j < 3; ++j) x(i, j) = g(rng) + 0.3 * j;
  }
  const Eigen::MatrixXd centred = x.rowwise() - x.colwise().mean();
  const Eigen::MatrixXd cov = centred.transpose() * centred / static_cast<double>(x.rows());
  CHECK((lag_covariance(x, 0) - cov).norm() < 1e-12);
}

TEST_CASE("law of large numbers at small scale") {
  LlnOptions o;
  o.z0 = Eigen::Vector2d(1.0, 3.0);
  o.scales = {50, 200, 800};
  o.horizon = 3.0;
  o.replicas = 40;
  o.seed = 12;
  const auto r = lln_check(validated(kDesk), o);
  REQUIRE(r.levels.size() == 3);
  CHECK(r.levels[0].sup_error > r.levels[2].sup_error);
  CHECK(r.fitted_slope < 0.0);
  CHECK(r.times.size() == r.ode_path.size());
  const auto again = lln_check(validated(kDesk), o);
  CHECK(again.levels[1].sup_error == r.levels[1].sup_error);
}

TEST_CASE("subcritical populations die out along with the ODE") {
  SymmetricParams s{.beta = 2, .mu = 1, .inner = 1, .outer = 0, .mig = 0.5, .n_boxes = 2, .scale = 10};
  auto p = expand(s);
  p.birth = Eigen::Vector2d(0.5, 0.5);
  const auto m = validated(p);
  LlnOptions o;
  o.z0 = Eigen::Vector2d(0.5, 0.5);
  o.scales = {100};
  o.horizon = 15.0;
  o.replicas = 20;
  o.seed = 3;
  const auto r = lln_check(m, o);
  CHECK(r.ode_path.back().maxCoeff() < 1e-3);
  CHECK(r.levels[0].mean_path.back().maxCoeff() < 0.01);
}

TEST_CASE("short stationary run reproduces the covariance roughly") {
  CltOptions o;
  o.scale = 1000;
  o.horizon = 200;
  o.seed = 21;
  const auto r = clt_check(validated(kDesk), desk_point(), o);
  CHECK(r.samples > 1000);
  CHECK(r.relative_error < 0.3);
  CHECK(r.burn_in == doctest::Approx(10.0 / 2.0));
  CHECK(r.effective_sample_size > 100);
  CHECK(r.predicted_lag_cov.rows() == 2);
}
