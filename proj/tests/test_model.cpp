#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <limits>

#include "bpmf/model.hpp"

using namespace bpmf;

namespace {

ModelParams two_box() {
  ModelParams p;
  p.n_boxes = 2;
  p.scale = 100;
  p.birth = Eigen::Vector2d(3, 3);
  p.death = Eigen::Vector2d(1, 1);
  p.migration = Eigen::Matrix2d{{0, 0.5}, {0.5, 0}};
  p.competition = Eigen::Matrix2d::Identity();
  return p;
}

std::vector<ValidationIssue> issues_of(const ModelParams& p) {
  auto r = validate(p);
  if (std::holds_alternative<ValidatedModel>(r)) return {};
  return std::get<std::vector<ValidationIssue>>(r);
}

}  // namespace

TEST_CASE("a well-formed two-box model validates") {
  auto r = validate(two_box());
  REQUIRE(std::holds_alternative<ValidatedModel>(r));
  const auto& m = std::get<ValidatedModel>(r);
  CHECK(m.n_boxes() == 2);
  CHECK(m.scale() == 100);
  CHECK(m.with_scale(7).scale() == 7);
  CHECK(m.with_scale(7).params().birth == m.params().birth);
}

TEST_CASE("negative birth rate is reported with its index") {
  auto p = two_box();
  p.birth[1] = -1.0;
  const auto issues = issues_of(p);
  REQUIRE(issues.size() == 1);
  CHECK(issues[0].kind == IssueKind::NegativeRate);
  CHECK(issues[0].field == "birth");
  CHECK(issues[0].index == 1);
  CHECK(issues[0].describe() == "NegativeRate(birth, 1)");
}

TEST_CASE("nonzero migration diagonal is reported") {
  auto p = two_box();
  p.migration(0, 0) = 0.1;
  const auto issues = issues_of(p);
  REQUIRE(issues.size() == 1);
  CHECK(issues[0].kind == IssueKind::NonzeroMigrationDiagonal);
  CHECK(issues[0].index == 0);
}

TEST_CASE("every violation is collected") {
  auto p = two_box();
  p.death[0] = -2.0;
  p.competition(1, 0) = std::numeric_limits<double>::quiet_NaN();
  p.scale = 0;
  const auto issues = issues_of(p);
  CHECK(issues.size() == 3);
}

TEST_CASE("shape mismatch") {
  auto p = two_box();
  p.birth = Eigen::Vector3d(1, 1, 1);
  const auto issues = issues_of(p);
  REQUIRE_FALSE(issues.empty());
  CHECK(issues[0].kind == IssueKind::ShapeMismatch);
  CHECK_THROWS_AS(validated(p), ValidationError);
}

TEST_CASE("symmetric expansion") {
  SymmetricParams s{.beta = 3, .mu = 1, .inner = 1, .outer = 0, .mig = 0.5, .n_boxes = 2, .scale = 10};
  const auto p = expand(s);
  CHECK(p.competition == Eigen::Matrix2d::Identity());
  CHECK(p.migration == Eigen::Matrix2d{{0, 0.5}, {0.5, 0}});
  CHECK(p.birth == Eigen::Vector2d(3, 3));
  CHECK(p.death == Eigen::Vector2d(1, 1));
  CHECK(p.total_migration(0) == doctest::Approx(0.5));
  CHECK_FALSE(p.has_cross_competition());

  s.n_boxes = 3;
  s.outer = 2;
  const auto q = expand(s);
  for (int i = 0; i < 3; ++i) {
    for (int j = 0; j < 3; ++j) CHECK(q.competition(i, j) == (i == j ? 1.0 : 2.0));
  }
  CHECK(q.has_cross_competition());

  s.n_boxes = 1;
  const auto r = expand(s);
  CHECK(r.migration.rows() == 1);
  CHECK(r.migration(0, 0) == 0.0);
  CHECK(r.competition(0, 0) == 1.0);
}

TEST_CASE("symmetric parameters need births above deaths") {
  SymmetricParams s{.beta = 1, .mu = 2, .inner = 1, .outer = 0, .mig = 0, .n_boxes = 2, .scale = 10};
  const auto issues = check(s);
  REQUIRE(issues.size() == 1);
  CHECK(issues[0].kind == IssueKind::BirthNotAboveDeath);
  CHECK_THROWS_AS(validated(s), ValidationError);
}

TEST_CASE("error codes have names") {
  CHECK(to_string(ErrorCode::InvalidHorizon) == "InvalidHorizon");
  CHECK(to_string(IssueKind::NegativeRate) == "NegativeRate");
  const Error e(ErrorCode::NotStable, "x");
  CHECK(e.code() == ErrorCode::NotStable);
}
