#pragma once

// The partitioning process Σ_t on P(S): ancestral sites of a sample traced
// back in time, split among ancestors by recombination and merged by
// common ancestry.

#include <Eigen/Core>
#include <cstdint>
#include <iosfwd>
#include <optional>
#include <vector>

#include "moran/partition.hpp"
#include "moran/random.hpp"
#include "moran/recombination.hpp"

namespace moran {

enum class Variant { finite_n, deterministic_limit, diffusion_limit };

const char* to_string(Variant v);
/// "finite_n", "deterministic_limit" / "deterministic", "diffusion_limit" / "diffusion".
Variant parse_variant(std::string_view text);

struct BackwardModel {
  int n = 1;
  /// Population size; only meaningful for Variant::finite_n.
  int N = 0;
  RecombinationDistribution recomb = RecombinationDistribution::none(1);
  Variant variant = Variant::finite_n;
  std::optional<DiffusionRates> rho;

  static BackwardModel finite(int N, RecombinationDistribution recomb);
  static BackwardModel deterministic(RecombinationDistribution recomb);
  static BackwardModel diffusion(DiffusionRates rho);

  SiteSet sites() const { return SiteSet::range(1, n); }
};

/// (N−(m−1))!/(N−k)! for k ≥ m−1 new-or-old parents, zero when k > N.
double parent_weight(int N, std::size_t m, std::size_t k);

/// ϑ_{j,jj;a,b}: rate at which block j of a splits according to jj and the
/// fragments land so that the new state is b. Finite-N variant only.
double theta_rate(const BackwardModel& model, std::size_t j, const Partition& jj,
                  const Partition& a, const Partition& b);

/// Generator over all partitions of {1..n}, rows and columns in
/// restricted-growth order.
struct PartitionGenerator {
  PartitionIndex states;
  Eigen::MatrixXd Q;
};

/// Θ built by running every split and parent assignment of the event
/// narrative. Rows of states with more than N blocks are zero.
PartitionGenerator generator_theta(const BackwardModel& model,
                                   std::size_t site_cap = kDefaultSiteCap);
/// Θ assembled entry by entry from theta_rate; the oracle for generator_theta.
PartitionGenerator generator_theta_formula(const BackwardModel& model,
                                           std::size_t site_cap = kDefaultSiteCap);
/// Θ′: pure splitting at rates r_jj^{A_j}.
PartitionGenerator generator_theta_det(const BackwardModel& model,
                                       std::size_t site_cap = kDefaultSiteCap);
/// Θ″: splitting at ϱ_jj^{A_j}, every pair of blocks merging at rate 2.
PartitionGenerator generator_theta_diff(const BackwardModel& model,
                                        std::size_t site_cap = kDefaultSiteCap);
/// Dispatches on model.variant.
PartitionGenerator generator(const BackwardModel& model, std::size_t site_cap = kDefaultSiteCap);

/// Permutation p with p[k] = restricted-growth index of the k-th state in the
/// order (𝟏, 1|23, 12|3, 13|2, 𝟎) used for printed 3-site matrices.
std::vector<std::size_t> three_site_display_order();
/// M(p, p) for a square matrix over P({1,2,3}).
Eigen::MatrixXd to_display_order(const Eigen::MatrixXd& m);

/// Dense CSV: header "state,<p_1>,...", one row per state.
void write_generator_csv(std::ostream& os, const PartitionGenerator& g);

struct PartitionEvent {
  double time;
  Partition state;
};

struct PartitionTrajectory {
  Partition initial;
  std::vector<PartitionEvent> events;
  std::uint64_t seed = 0;
  std::uint64_t replicate = 0;

  Partition state_at(double t) const;
};

struct BackwardOptions {
  /// Record events that leave the partition unchanged.
  bool exact_events = false;
};

/// Event-driven simulation of Σ_t on [0, t_end]. Throws InvalidInitialError
/// if sigma0 is not a partition of {1..n}, or has more than N blocks in the
/// finite-N variant.
PartitionTrajectory simulate_backward(const BackwardModel& model, const Partition& sigma0,
                                      double t_end, std::uint64_t seed,
                                      std::uint64_t replicate = 0, BackwardOptions options = {});

/// State at t_end only, drawing from `rng`.
Partition simulate_backward_state(const BackwardModel& model, const Partition& sigma0,
                                  double t_end, Rng& rng);

/// "time,partition" with the partition quoted.
void write_partition_trajectory_csv(std::ostream& os, const PartitionTrajectory& tr);
/// Reads the rows written by write_partition_trajectory_csv (comments with '#').
std::vector<PartitionEvent> read_partition_trajectory_csv(std::istream& is);

}  // namespace moran
