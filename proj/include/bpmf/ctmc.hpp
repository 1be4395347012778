#ifndef BPMF_CTMC_HPP
#define BPMF_CTMC_HPP

#include <cstdint>
#include <iosfwd>
#include <optional>
#include <span>
#include <vector>

#include "bpmf/model.hpp"
#include "bpmf/rng.hpp"

namespace bpmf {

using Counts = std::vector<std::int64_t>;

enum class EventKind : std::uint8_t { Birth, Death, Migration };

/// One transition type. For Birth and Death `to == from`.
struct EventType {
  EventKind kind = EventKind::Birth;
  int from = 0;
  int to = 0;

  static EventType birth(int i) { return {EventKind::Birth, i, i}; }
  static EventType death(int i) { return {EventKind::Death, i, i}; }
  static EventType migration(int i, int j) { return {EventKind::Migration, i, j}; }

  /// Adds the displacement (e_i, -e_i or e_j - e_i) to `counts`.
  void apply(std::span<std::int64_t> counts) const;

  bool operator==(const EventType&) const = default;
};

struct Event {
  EventType type;
  double occurred_at = 0.0;

  bool operator==(const Event&) const = default;
};

struct RateEntry {
  EventType type;
  double rate = 0.0;
};

struct PopulationState {
  Counts counts;
  double time = 0.0;

  bool operator==(const PopulationState&) const = default;
};

enum class Termination { TimeLimit, Absorbed, EventLimit };

std::string_view to_string(EventKind kind);
std::string_view to_string(Termination t);

struct Trajectory {
  PopulationState initial;
  std::vector<Event> events;  // empty unless events were recorded
  std::vector<double> sample_times;
  std::vector<std::int64_t> sample_counts;  // row-major, n_boxes per sample
  PopulationState final_state;
  std::uint64_t event_count = 0;
  Termination terminated_by = Termination::TimeLimit;

  int n_boxes() const { return static_cast<int>(initial.counts.size()); }
  std::size_t sample_count() const { return sample_times.size(); }
  std::span<const std::int64_t> sample(std::size_t k) const {
    return {sample_counts.data() + k * initial.counts.size(), initial.counts.size()};
  }

  bool operator==(const Trajectory&) const = default;
};

/// Positive transition rates out of `counts`:
/// birth beta_i n_i, death mu_i n_i + (n_i / L) sum_j a-_ij n_j, and
/// migration n_i a+_ij for each ordered pair i != j.
std::vector<RateEntry> rates(const ValidatedModel& model, std::span<const std::int64_t> counts);

double total_rate(const ValidatedModel& model, std::span<const std::int64_t> counts);

struct StepResult {
  Event event;
  PopulationState state;
};

/// One Gillespie step. Returns nullopt when the state is absorbing (R(n) = 0).
std::optional<StepResult> step(const ValidatedModel& model, const PopulationState& state, Rng& rng);

struct SimulationOptions {
  double horizon = 1.0;
  double sample_every = 0.1;
  std::uint64_t event_cap = 1'000'000'000ULL;
  std::uint64_t seed = 0;
  bool record_events = true;
};

/// Exact simulation on [0, horizon]. Grid samples at k * sample_every hold
/// the left-continuous state: an event landing exactly on a grid time is
/// not yet visible in that sample.
Trajectory simulate(const ValidatedModel& model, const PopulationState& initial,
                    const SimulationOptions& options);

/// Replica r runs simulate() with seed derive_seed(options.seed, r).
/// `workers` <= 0 picks the hardware concurrency. Output order is by
/// replica index regardless of scheduling.
std::vector<Trajectory> ensemble(const ValidatedModel& model, const PopulationState& initial,
                                 const SimulationOptions& options, int replicas, int workers = 0);

/// Transition of the embedded jump chain with its probability.
struct JumpProbability {
  EventType type;
  double probability = 0.0;
};

/// c(x): total exit rate of the embedded chain for a model without cross
/// competition. Zero at the origin.
double exit_rate(const ValidatedModel& model, std::span<const std::int64_t> counts);

/// Outgoing law of the embedded chain, including the reflection at 0
/// (uniform jump to some e_i, reported as Birth(i)). Throws
/// CrossCompetitionUnsupported when any a-_ij != 0 for i != j, and
/// NoSelfCompetition when every a-_ii is zero.
std::vector<JumpProbability> embedded_transitions(const ValidatedModel& model,
                                                  std::span<const std::int64_t> counts);

Counts embedded_step(const ValidatedModel& model, std::span<const std::int64_t> counts, Rng& rng);

/// Same preconditions as embedded_transitions, without building a list.
void require_embedded_assumptions(const ValidatedModel& model);

/// CSV `t,n_1,...,n_N` of the grid samples.
void write_samples_csv(std::ostream& out, const Trajectory& trajectory);
/// CSV `t,kind,i,j` of the event log (1-based box indices; j empty unless migration).
void write_events_csv(std::ostream& out, const Trajectory& trajectory);

}  // namespace bpmf

#endif  // BPMF_CTMC_HPP
