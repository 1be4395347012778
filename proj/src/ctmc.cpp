#include "bpmf/ctmc.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <iomanip>
#include <ostream>
#include <thread>

namespace bpmf {

std::string_view to_string(EventKind kind) {
  switch (kind) {
    case EventKind::Birth: return "birth";
    case EventKind::Death: return "death";
    case EventKind::Migration: return "migration";
  }
  return "unknown";
}

std::string_view to_string(Termination t) {
  switch (t) {
    case Termination::TimeLimit: return "TimeLimit";
    case Termination::Absorbed: return "Absorbed";
    case Termination::EventLimit: return "EventLimit";
  }
  return "unknown";
}

void EventType::apply(std::span<std::int64_t> counts) const {
  switch (kind) {
    case EventKind::Birth: ++counts[from]; break;
    case EventKind::Death: --counts[from]; break;
    case EventKind::Migration:
      --counts[from];
      ++counts[to];
      break;
  }
}

namespace {

// Fixed-layout rate table reused across steps: births, deaths, then
// migrations in row-major (i, j != i) order. Zero rates stay in place and
// are never selected.
class RateTable {
 public:
  explicit RateTable(const ModelParams& p) : p_(p), inv_scale_(1.0 / p.scale) {
    const int n = p.n_boxes;
    entries_.reserve(static_cast<std::size_t>(n * (n + 1)));
    for (int i = 0; i < n; ++i) entries_.push_back({EventType::birth(i), 0.0});
    for (int i = 0; i < n; ++i) entries_.push_back({EventType::death(i), 0.0});
    for (int i = 0; i < n; ++i) {
      for (int j = 0; j < n; ++j) {
        if (i != j) entries_.push_back({EventType::migration(i, j), 0.0});
      }
    }
  }

  double refresh(std::span<const std::int64_t> counts) {
    const int n = p_.n_boxes;
    double total = 0.0;
    std::size_t k = 0;
    for (int i = 0; i < n; ++i) {
      const double r = p_.birth[i] * static_cast<double>(counts[i]);
      entries_[k++].rate = r;
      total += r;
    }
    for (int i = 0; i < n; ++i) {
      const double ni = static_cast<double>(counts[i]);
      double pressure = 0.0;
      if (ni > 0.0) {
        for (int j = 0; j < n; ++j) pressure += p_.competition(i, j) * static_cast<double>(counts[j]);
      }
      const double r = ni * (p_.death[i] + pressure * inv_scale_);
      entries_[k++].rate = r;
      total += r;
    }
    for (int i = 0; i < n; ++i) {
      const double ni = static_cast<double>(counts[i]);
      for (int j = 0; j < n; ++j) {
        if (i == j) continue;
        const double r = ni * p_.migration(i, j);
        entries_[k++].rate = r;
        total += r;
      }
    }
    return total;
  }

  // First entry whose cumulative rate exceeds target; rounding past the end
  // falls back to the last positive entry.
  const EventType& select(double target) const {
    double cumulative = 0.0;
    const RateEntry* last_positive = nullptr;
    for (const auto& e : entries_) {
      if (e.rate <= 0.0) continue;
      cumulative += e.rate;
      last_positive = &e;
      if (target < cumulative) return e.type;
    }
    return last_positive->type;
  }

  const std::vector<RateEntry>& entries() const { return entries_; }

 private:
  const ModelParams& p_;
  double inv_scale_;
  std::vector<RateEntry> entries_;
};

void check_counts(const ValidatedModel& model, std::span<const std::int64_t> counts) {
  if (static_cast<int>(counts.size()) != model.n_boxes()) {
    throw Error(ErrorCode::InvalidArgument, "state dimension does not match n_boxes");
  }
  for (auto c : counts) {
    if (c < 0) throw Error(ErrorCode::InvalidArgument, "negative count in state");
  }
}

}  // namespace

std::vector<RateEntry> rates(const ValidatedModel& model, std::span<const std::int64_t> counts) {
  check_counts(model, counts);
  RateTable table(model.params());
  table.refresh(counts);
  std::vector<RateEntry> out;
  for (const auto& e : table.entries()) {
    if (e.rate > 0.0) out.push_back(e);
  }
  return out;
}

double total_rate(const ValidatedModel& model, std::span<const std::int64_t> counts) {
  check_counts(model, counts);
  RateTable table(model.params());
  return table.refresh(counts);
}

std::optional<StepResult> step(const ValidatedModel& model, const PopulationState& state, Rng& rng) {
  check_counts(model, state.counts);
  RateTable table(model.params());
  const double total = table.refresh(state.counts);
  if (total <= 0.0) return std::nullopt;
  StepResult result;
  result.state.time = state.time + exponential(rng, total);
  result.event.occurred_at = result.state.time;
  result.event.type = table.select(uniform01(rng) * total);
  result.state.counts = state.counts;
  result.event.type.apply(result.state.counts);
  return result;
}

Trajectory simulate(const ValidatedModel& model, const PopulationState& initial,
                    const SimulationOptions& options) {
  if (!(options.horizon > 0.0) || !std::isfinite(options.horizon)) {
    throw Error(ErrorCode::InvalidHorizon, "horizon must be positive and finite");
  }
  if (!(options.sample_every > 0.0)) {
    throw Error(ErrorCode::InvalidArgument, "sample_every must be positive");
  }
  check_counts(model, initial.counts);

  const auto n = initial.counts.size();
  const double t0 = initial.time;
  const double t_end = t0 + options.horizon;
  const auto grid_points = static_cast<std::size_t>(std::floor(options.horizon / options.sample_every + 1e-9)) + 1;
  auto grid_time = [&](std::size_t k) { return t0 + static_cast<double>(k) * options.sample_every; };

  Trajectory traj;
  traj.initial = initial;
  traj.sample_times.reserve(grid_points);
  traj.sample_counts.reserve(grid_points * n);

  Counts counts = initial.counts;
  std::size_t next_grid = 0;
  auto record_until = [&](double limit) {
    while (next_grid < grid_points && grid_time(next_grid) <= limit) {
      traj.sample_times.push_back(grid_time(next_grid));
      traj.sample_counts.insert(traj.sample_counts.end(), counts.begin(), counts.end());
      ++next_grid;
    }
  };

  Rng rng(options.seed);
  RateTable table(model.params());
  double t = t0;
  while (true) {
    const double total = table.refresh(counts);
    if (total <= 0.0) {
      record_until(t_end);
      traj.terminated_by = Termination::Absorbed;
      break;
    }
    const double t_next = t + exponential(rng, total);
    if (t_next > t_end) {
      record_until(t_end);
      traj.terminated_by = Termination::TimeLimit;
      t = t_end;
      break;
    }
    record_until(t_next);
    if (traj.event_count >= options.event_cap) {
      traj.terminated_by = Termination::EventLimit;
      break;
    }
    const EventType& type = table.select(uniform01(rng) * total);
    type.apply(counts);
    t = t_next;
    ++traj.event_count;
    if (options.record_events) traj.events.push_back({type, t});
  }
  traj.final_state = {counts, t};
  return traj;
}

std::vector<Trajectory> ensemble(const ValidatedModel& model, const PopulationState& initial,
                                 const SimulationOptions& options, int replicas, int workers) {
  if (replicas < 1) throw Error(ErrorCode::InvalidArgument, "replicas must be >= 1");
  if (workers <= 0) workers = static_cast<int>(std::max(1u, std::thread::hardware_concurrency()));
  workers = std::min(workers, replicas);

  std::vector<Trajectory> out(static_cast<std::size_t>(replicas));
  std::atomic<int> next{0};
  std::exception_ptr failure;
  std::atomic<bool> failed{false};
  auto worker = [&] {
    for (int r = next++; r < replicas && !failed; r = next++) {
      try {
        SimulationOptions opts = options;
        opts.seed = derive_seed(options.seed, static_cast<std::uint64_t>(r));
        out[static_cast<std::size_t>(r)] = simulate(model, initial, opts);
      } catch (...) {
        if (!failed.exchange(true)) failure = std::current_exception();
      }
    }
  };
  if (workers == 1) {
    worker();
  } else {
    std::vector<std::jthread> pool;
    for (int w = 0; w < workers; ++w) pool.emplace_back(worker);
  }
  if (failure) std::rethrow_exception(failure);
  return out;
}

void require_embedded_assumptions(const ValidatedModel& model) {
  const auto& p = model.params();
  if (p.has_cross_competition()) {
    throw Error(ErrorCode::CrossCompetitionUnsupported,
                "embedded chain requires zero competition between distinct boxes");
  }
  if (!(p.competition.diagonal().array() > 0.0).any()) {
    throw Error(ErrorCode::NoSelfCompetition, "embedded chain requires a-_ii > 0 for some box");
  }
}

double exit_rate(const ValidatedModel& model, std::span<const std::int64_t> counts) {
  const auto& p = model.params();
  const double inv_scale = 1.0 / p.scale;
  double c = 0.0;
  for (int i = 0; i < p.n_boxes; ++i) {
    const double x = static_cast<double>(counts[i]);
    c += (p.birth[i] + p.death[i] + p.competition(i, i) * inv_scale * x) * x + p.migration_out(i) * x;
  }
  return c;
}

std::vector<JumpProbability> embedded_transitions(const ValidatedModel& model,
                                                  std::span<const std::int64_t> counts) {
  require_embedded_assumptions(model);
  check_counts(model, counts);
  const auto& p = model.params();
  const int n = p.n_boxes;
  std::vector<JumpProbability> out;
  if (std::all_of(counts.begin(), counts.end(), [](auto c) { return c == 0; })) {
    for (int i = 0; i < n; ++i) out.push_back({EventType::birth(i), 1.0 / n});
    return out;
  }
  const double c = exit_rate(model, counts);
  const double inv_scale = 1.0 / p.scale;
  for (int i = 0; i < n; ++i) {
    const double x = static_cast<double>(counts[i]);
    if (p.birth[i] * x > 0.0) out.push_back({EventType::birth(i), p.birth[i] * x / c});
    const double down = p.death[i] * x + p.competition(i, i) * inv_scale * x * x;
    if (down > 0.0) out.push_back({EventType::death(i), down / c});
    for (int j = 0; j < n; ++j) {
      if (j != i && p.migration(i, j) * x > 0.0) {
        out.push_back({EventType::migration(i, j), p.migration(i, j) * x / c});
      }
    }
  }
  return out;
}

Counts embedded_step(const ValidatedModel& model, std::span<const std::int64_t> counts, Rng& rng) {
  const auto moves = embedded_transitions(model, counts);
  Counts next(counts.begin(), counts.end());
  if (moves.empty()) return next;  // x != 0 with every rate zero: nothing can move
  const double target = uniform01(rng);
  double cumulative = 0.0;
  const EventType* chosen = &moves.back().type;
  for (const auto& m : moves) {
    cumulative += m.probability;
    if (target < cumulative) {
      chosen = &m.type;
      break;
    }
  }
  chosen->apply(next);
  return next;
}

void write_samples_csv(std::ostream& out, const Trajectory& trajectory) {
  const int n = trajectory.n_boxes();
  out << "t";
  for (int i = 1; i <= n; ++i) out << ",n_" << i;
  out << '\n';
  out << std::setprecision(17);
  for (std::size_t k = 0; k < trajectory.sample_count(); ++k) {
    out << trajectory.sample_times[k];
    for (auto c : trajectory.sample(k)) out << ',' << c;
    out << '\n';
  }
}

void write_events_csv(std::ostream& out, const Trajectory& trajectory) {
  out << "t,kind,i,j\n";
  out << std::setprecision(17);
  for (const auto& e : trajectory.events) {
    out << e.occurred_at << ',' << to_string(e.type.kind) << ',' << e.type.from + 1 << ',';
    if (e.type.kind == EventKind::Migration) out << e.type.to + 1;
    out << '\n';
  }
}

}  // namespace bpmf
