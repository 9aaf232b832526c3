#pragma once

// The Moran model with single-crossover recombination, forward in time.

#include <Eigen/SparseCore>
#include <cstdint>
#include <iosfwd>
#include <map>
#include <vector>

#include "moran/measure.hpp"
#include "moran/random.hpp"
#include "moran/recombination.hpp"

namespace moran {

inline constexpr std::size_t kDefaultPopulationStateCap = 20000;

struct ForwardModel {
  ForwardModel(SiteSpace space, int N, RecombinationDistribution recomb);

  SiteSpace space;
  int N;
  RecombinationDistribution recomb;
};

/// Σ_{A∈O≤2(S)} r_A R_A(z): the type distribution of a new offspring.
MeasureD offspring_distribution(const ForwardModel& model, const PopulationState& z);

/// λ(z; y, x): rate at which a type-y individual is replaced by a type-x
/// offspring. Includes the silent case x = y.
double rate_lambda(const ForwardModel& model, const PopulationState& z, TypeIndex y, TypeIndex x);

/// Number of population states C(N+|X|−1, |X|−1), saturating at SIZE_MAX.
std::size_t population_state_count(std::size_t types, int N);

/// All counting measures with norm N, in lexicographic order of counts.
std::vector<PopulationState> enumerate_population_states(
    const SiteSpace& space, int N, std::size_t cap = kDefaultPopulationStateCap);

struct ForwardGenerator {
  std::vector<PopulationState> states;
  Eigen::SparseMatrix<double, Eigen::RowMajor> Q;

  std::size_t index_of(const PopulationState& z) const;

 private:
  friend ForwardGenerator generator_lambda(const ForwardModel&, std::size_t);
  std::map<std::vector<std::int64_t>, std::size_t> lookup_;
};

/// Generator Λ over E with off-diagonal Λ(z, z+δ_x−δ_y) = λ(z; y, x).
ForwardGenerator generator_lambda(const ForwardModel& model,
                                  std::size_t cap = kDefaultPopulationStateCap);

struct ForwardEvent {
  double time;
  TypeIndex dying_type;
  TypeIndex new_type;
};

struct TrajectoryRecord {
  PopulationState initial;
  std::vector<ForwardEvent> events;
  std::uint64_t seed = 0;
  std::uint64_t replicate = 0;

  /// Population after replaying every event with time ≤ t.
  PopulationState state_at(double t) const;
};

struct SimulationOptions {
  /// Record silent events (offspring type equal to the dying type) too.
  bool exact_events = false;
};

/// Event-driven simulation on [0, t_end]. Each individual dies at rate 1 and
/// is replaced by an offspring assembled from parents drawn uniformly with
/// replacement according to the recombination distribution.
TrajectoryRecord simulate_forward(const ForwardModel& model, const PopulationState& z0,
                                  double t_end, std::uint64_t seed, std::uint64_t replicate = 0,
                                  SimulationOptions options = {});

/// "time,dying,new" with type labels. The initial population appears as
/// births at time 0 with an empty dying field, one row per individual.
void write_forward_trajectory_csv(std::ostream& os, const TrajectoryRecord& tr);
/// Inverse of write_forward_trajectory_csv ('#' lines are skipped).
TrajectoryRecord read_forward_trajectory_csv(std::istream& is, const SiteSpace& space);

/// Same law as simulate_forward, returning only the state at t_end.
PopulationState simulate_forward_state(const ForwardModel& model, const PopulationState& z0,
                                       double t_end, Rng& rng);

/// Runs until the population is monomorphic and returns the fixed type.
TypeIndex simulate_to_absorption(const ForwardModel& model, const PopulationState& z0, Rng& rng);

/// Right-hand side Σ_{A∈O₂(S)} r_A (R_A(ω) − ω) of the deterministic
/// single-crossover equation.
MeasureD deterministic_rhs(const RecombinationDistribution& recomb, const MeasureD& omega);

/// One classical RK4 step of the deterministic equation.
MeasureD deterministic_step(const RecombinationDistribution& recomb, const MeasureD& omega,
                            double dt);

/// Integrates the deterministic equation to time t with fixed steps.
MeasureD deterministic_solve(const RecombinationDistribution& recomb, MeasureD omega, double t,
                             double dt = 1e-3);

}  // namespace moran
