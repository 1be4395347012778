#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <map>
#include <set>
#include <sstream>

#include "bpmf/ctmc.hpp"
#include "bpmf/rng.hpp"

using namespace bpmf;

namespace {

ValidatedModel two_box(int scale = 100) {
  return validated(SymmetricParams{.beta = 3, .mu = 1, .inner = 1, .outer = 0, .mig = 0.5, .n_boxes = 2, .scale = scale});
}

// Rate lookup written out from the transition function, independent of the
// library's rate table.
std::map<std::tuple<int, int, int>, double> reference_rates(const ModelParams& p, const Counts& n) {
  std::map<std::tuple<int, int, int>, double> out;
  const double L = p.scale;
  for (int i = 0; i < p.n_boxes; ++i) {
    const double ni = static_cast<double>(n[static_cast<std::size_t>(i)]);
    double pressure = 0.0;
    for (int j = 0; j < p.n_boxes; ++j) pressure += p.competition(i, j) * static_cast<double>(n[static_cast<std::size_t>(j)]);
    out[{0, i, i}] = p.birth[i] * ni;
    out[{1, i, i}] = p.death[i] * ni + ni * pressure / L;
    for (int j = 0; j < p.n_boxes; ++j) {
      if (j != i) out[{2, i, j}] = ni * p.migration(i, j);
    }
  }
  return out;
}

double rate_of(const std::vector<RateEntry>& rs, EventType t) {
  for (const auto& r : rs) {
    if (r.type == t) return r.rate;
  }
  return 0.0;
}

}  // namespace

TEST_CASE("rates at a hand-checked state") {
  const auto m = two_box();
  const Counts n{100, 0};
  const auto rs = rates(m, n);
  CHECK(rate_of(rs, EventType::birth(0)) == doctest::Approx(300));
  CHECK(rate_of(rs, EventType::death(0)) == doctest::Approx(200));
  CHECK(rate_of(rs, EventType::migration(0, 1)) == doctest::Approx(50));
  CHECK(total_rate(m, n) == doctest::Approx(550));
}

TEST_CASE("rates agree with the reference calculator") {
  ModelParams p;
  p.n_boxes = 3;
  p.scale = 7;
  p.birth = Eigen::Vector3d(2, 3, 4);
  p.death = Eigen::Vector3d(0.5, 1, 1.5);
  p.migration = Eigen::Matrix3d{{0, 0.1, 0.2}, {0.3, 0, 0.4}, {0.5, 0.6, 0}};
  p.competition = Eigen::Matrix3d{{1, 0.2, 0.3}, {0.4, 2, 0.1}, {0, 0.5, 3}};
  const auto m = validated(p);
  Rng rng(5);
  for (int trial = 0; trial < 50; ++trial) {
    Counts n{static_cast<std::int64_t>(rng() % 30), static_cast<std::int64_t>(rng() % 30),
             static_cast<std::int64_t>(rng() % 30)};
    const auto ref = reference_rates(p, n);
    const auto rs = rates(m, n);
    double total = 0.0;
    for (const auto& [key, value] : ref) {
      const auto [k, i, j] = key;
      const EventType t{static_cast<EventKind>(k), i, j};
      CHECK(rate_of(rs, t) == doctest::Approx(value).epsilon(1e-12));
      total += value;
    }
    CHECK(total_rate(m, n) == doctest::Approx(total).epsilon(1e-12));
  }
}

TEST_CASE("empty state has no rates") {
  const auto m = two_box();
  const Counts n{0, 0};
  CHECK(rates(m, n).empty());
  CHECK(total_rate(m, n) == 0.0);
  Rng rng(1);
  CHECK_FALSE(step(m, PopulationState{n, 0.0}, rng).has_value());
}

TEST_CASE("one-box death rate is quadratic in n") {
  const auto m = validated(SymmetricParams{.beta = 3, .mu = 1, .inner = 2, .outer = 0, .mig = 0, .n_boxes = 1, .scale = 10});
  const Counts n{15};
  CHECK(rate_of(rates(m, n), EventType::death(0)) == doctest::Approx(1.0 * 15 + 2.0 * 15 * 15 / 10.0));
}

TEST_CASE("a single possible event is always chosen") {
  ModelParams p;
  p.n_boxes = 1;
  p.scale = 1;
  p.birth = Eigen::VectorXd::Constant(1, 2.0);
  p.death = Eigen::VectorXd::Zero(1);
  p.migration = Eigen::MatrixXd::Zero(1, 1);
  p.competition = Eigen::MatrixXd::Zero(1, 1);
  const auto m = validated(p);
  Rng rng(3);
  for (int k = 0; k < 100; ++k) {
    const auto s = step(m, PopulationState{{4}, 0.0}, rng);
    REQUIRE(s);
    CHECK(s->event.type == EventType::birth(0));
    CHECK(s->state.counts[0] == 5);
  }
}

TEST_CASE("event frequencies match rate over total within three binomial errors") {
  const auto m = two_box();
  const Counts n{100, 40};
  const auto rs = rates(m, n);
  const double total = total_rate(m, n);
  const int draws = 1'000'000;
  std::map<std::tuple<int, int, int>, int> hits;
  Rng rng(2024);
  const PopulationState frozen{n, 0.0};
  for (int k = 0; k < draws; ++k) {
    const auto s = step(m, frozen, rng);
    const auto& t = s->event.type;
    ++hits[{static_cast<int>(t.kind), t.from, t.to}];
  }
  for (const auto& r : rs) {
    const double p = r.rate / total;
    const double sigma = std::sqrt(draws * p * (1 - p));
    const int observed = hits[{static_cast<int>(r.type.kind), r.type.from, r.type.to}];
    CHECK(std::abs(observed - draws * p) <= 3 * sigma);
  }
}

TEST_CASE("waiting times are exponential with the total rate") {
  const auto m = two_box();
  const PopulationState frozen{{50, 50}, 0.0};
  const double total = total_rate(m, frozen.counts);
  Rng rng(99);
  const int draws = 200'000;
  double sum = 0.0;
  for (int k = 0; k < draws; ++k) sum += step(m, frozen, rng)->state.time;
  const double mean = sum / draws;
  CHECK(std::abs(mean - 1.0 / total) <= 4.0 / total / std::sqrt(draws));
}

TEST_CASE("simulation is deterministic for a fixed seed") {
  const auto m = two_box();
  SimulationOptions o{.horizon = 2.0, .sample_every = 0.1, .seed = 17};
  const PopulationState start{{150, 250}, 0.0};
  const auto a = simulate(m, start, o);
  const auto b = simulate(m, start, o);
  CHECK(a == b);
  std::ostringstream sa, sb;
  write_samples_csv(sa, a);
  write_samples_csv(sb, b);
  CHECK(sa.str() == sb.str());
  o.seed = 18;
  CHECK_FALSE(simulate(m, start, o) == a);
}

TEST_CASE("replaying the event log reproduces the grid samples") {
  const auto m = two_box(20);
  const SimulationOptions o{.horizon = 3.0, .sample_every = 0.05, .seed = 4};
  const auto t = simulate(m, PopulationState{{40, 10}, 0.0}, o);
  REQUIRE(t.terminated_by == Termination::TimeLimit);
  REQUIRE(t.events.size() == t.event_count);
  Counts state = t.initial.counts;
  std::size_t next = 0;
  for (std::size_t k = 0; k < t.sample_count(); ++k) {
    // Left-continuous: events at exactly the grid time are not yet visible.
    while (next < t.events.size() && t.events[next].occurred_at < t.sample_times[k]) {
      t.events[next].type.apply(state);
      ++next;
    }
    const auto s = t.sample(k);
    CHECK(Counts(s.begin(), s.end()) == state);
  }
  for (; next < t.events.size(); ++next) t.events[next].type.apply(state);
  CHECK(state == t.final_state.counts);
  CHECK(t.sample_count() == 61);
}

TEST_CASE("invalid horizon and absorbed start") {
  const auto m = two_box();
  CHECK_THROWS_AS(simulate(m, PopulationState{{1, 1}, 0.0}, SimulationOptions{.horizon = 0.0}), Error);
  try {
    simulate(m, PopulationState{{1, 1}, 0.0}, SimulationOptions{.horizon = 0.0});
  } catch (const Error& e) {
    CHECK(e.code() == ErrorCode::InvalidHorizon);
  }
  const auto t = simulate(m, PopulationState{{0, 0}, 0.0}, SimulationOptions{.horizon = 1.0, .sample_every = 0.25});
  CHECK(t.event_count == 0);
  CHECK(t.terminated_by == Termination::Absorbed);
  CHECK(t.sample_count() == 5);
}

TEST_CASE("event cap stops the run") {
  const auto m = two_box();
  const auto t = simulate(m, PopulationState{{100, 100}, 0.0},
                          SimulationOptions{.horizon = 100.0, .sample_every = 1.0, .event_cap = 500, .seed = 1});
  CHECK(t.terminated_by == Termination::EventLimit);
  CHECK(t.event_count == 500);
}

TEST_CASE("ensemble is deterministic and independent of worker count") {
  const auto m = two_box(10);
  const SimulationOptions o{.horizon = 1.0, .sample_every = 0.1, .seed = 123};
  const PopulationState start{{20, 20}, 0.0};
  const auto one = ensemble(m, start, o, 1, 1);
  SimulationOptions derived = o;
  derived.seed = derive_seed(o.seed, 0);
  CHECK(one.front() == simulate(m, start, derived));

  const auto a = ensemble(m, start, o, 100, 1);
  const auto b = ensemble(m, start, o, 100, 4);
  CHECK(a == b);
  std::set<std::vector<std::int64_t>> distinct;
  for (const auto& t : a) distinct.insert(t.sample_counts);
  CHECK(distinct.size() == 100);
}

TEST_CASE("derived seeds differ") {
  std::set<std::uint64_t> seen;
  for (std::uint64_t k = 0; k < 1000; ++k) seen.insert(derive_seed(7, k));
  CHECK(seen.size() == 1000);
}

TEST_CASE("embedded chain at the origin is uniform over unit vectors") {
  const auto m = validated(SymmetricParams{.beta = 3, .mu = 1, .inner = 1, .outer = 0, .mig = 0.5, .n_boxes = 3, .scale = 10});
  const Counts zero{0, 0, 0};
  const auto jumps = embedded_transitions(m, zero);
  REQUIRE(jumps.size() == 3);
  for (int i = 0; i < 3; ++i) {
    CHECK(jumps[static_cast<std::size_t>(i)].type == EventType::birth(i));
    CHECK(jumps[static_cast<std::size_t>(i)].probability == doctest::Approx(1.0 / 3.0));
  }
}

TEST_CASE("one-box embedded probabilities") {
  const double beta = 3, mu = 1, a = 2, L = 10;
  const auto m = validated(SymmetricParams{.beta = beta, .mu = mu, .inner = a, .outer = 0, .mig = 0, .n_boxes = 1, .scale = 10});
  const std::int64_t n = 7;
  const Counts x{n};
  const double c = (beta + mu + a * n / L) * n;
  CHECK(exit_rate(m, x) == doctest::Approx(c));
  double up = 0, down = 0;
  for (const auto& j : embedded_transitions(m, x)) {
    if (j.type.kind == EventKind::Birth) up += j.probability;
    if (j.type.kind == EventKind::Death) down += j.probability;
  }
  CHECK(up == doctest::Approx(beta * n / c));
  CHECK(down == doctest::Approx((mu * n + a * n * n / L) / c));
}

TEST_CASE("embedded probabilities sum to one and match rates over total") {
  const auto m = two_box(10);
  Rng rng(8);
  for (int trial = 0; trial < 100; ++trial) {
    const Counts x{static_cast<std::int64_t>(rng() % 40), static_cast<std::int64_t>(rng() % 40)};
    double sum = 0.0;
    for (const auto& j : embedded_transitions(m, x)) sum += j.probability;
    CHECK(sum == doctest::Approx(1.0).epsilon(1e-14));
    if (x[0] + x[1] > 0) {
      // Without cross competition c(x) is the CTMC total rate.
      CHECK(exit_rate(m, x) == doctest::Approx(total_rate(m, x)).epsilon(1e-13));
    }
  }
}

TEST_CASE("embedded chain rejects cross competition") {
  const auto m = validated(SymmetricParams{.beta = 10, .mu = 1, .inner = 1, .outer = 3, .mig = 1, .n_boxes = 2, .scale = 10});
  const Counts x{1, 1};
  CHECK_THROWS_AS(embedded_transitions(m, x), Error);
  try {
    require_embedded_assumptions(m);
  } catch (const Error& e) {
    CHECK(e.code() == ErrorCode::CrossCompetitionUnsupported);
  }
}

TEST_CASE("embedded step follows the transition law") {
  const auto m = two_box(10);
  const Counts x{5, 3};
  std::map<Counts, int> hits;
  Rng rng(77);
  const int draws = 200'000;
  for (int k = 0; k < draws; ++k) ++hits[embedded_step(m, x, rng)];
  for (const auto& j : embedded_transitions(m, x)) {
    Counts y = x;
    j.type.apply(y);
    const double sigma = std::sqrt(draws * j.probability * (1 - j.probability));
    CHECK(std::abs(hits[y] - draws * j.probability) <= 4 * sigma);
  }
}

TEST_CASE("csv output has the documented headers") {
  const auto m = two_box(10);
  const auto t = simulate(m, PopulationState{{20, 20}, 0.0}, SimulationOptions{.horizon = 0.5, .sample_every = 0.1, .seed = 2});
  std::ostringstream samples, events;
  write_samples_csv(samples, t);
  write_events_csv(events, t);
  CHECK(samples.str().rfind("t,n_1,n_2\n", 0) == 0);
  CHECK(events.str().rfind("t,kind,i,j\n", 0) == 0);
}
