#pragma once

// Expectations of sampling functions and correlation functions through the
// duality E[H_A(Z_t) | Z_0 = z] = E[H_{Σ_t}(z) | Σ_0 = A].

#include <Eigen/Core>
#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

#include "moran/backward.hpp"
#include "moran/forward.hpp"

namespace moran {

/// Rows H_A(z), one per partition of z's sites in restricted-growth order,
/// as a Bell(n) × |X| matrix. Rows with |A| > ‖z‖ are zero.
Eigen::MatrixXd sampling_matrix(const PartitionIndex& partitions, const CountMeasure& z);
/// Rows R_A(ω) for a measure ω with positive norm.
Eigen::MatrixXd recombinator_matrix(const PartitionIndex& partitions, const MeasureD& omega);

/// H_A(z) for every population state z ∈ E and partition A.
struct DualityMatrixH {
  std::vector<PopulationState> states;
  PartitionIndex partitions;
  /// by_state[i] = sampling_matrix(partitions, states[i]).
  std::vector<Eigen::MatrixXd> by_state;

  MeasureD measure(std::size_t state, std::size_t partition) const;
};

DualityMatrixH duality_matrix(const ForwardGenerator& lambda, const PartitionIndex& partitions);

/// max over (z, A, x) of |(ΛH_A)(z)(x) − Σ_B Θ_AB H_B(z)(x)|.
/// Throws ValidationError if the two models disagree on n, N or r.
double check_generator_duality(const ForwardModel& forward, const BackwardModel& backward,
                               std::size_t state_cap = kDefaultPopulationStateCap);

enum class OdeMethod { matrix_exponential, rk4 };

/// E[H_A(Z_t)] for every A on a time grid, E(t) = e^{tΘ} E(0).
struct ExpectationTrajectory {
  std::vector<double> times;
  PartitionIndex partitions;
  SiteSet sites;
  std::vector<int> radices;
  /// values[k] is Bell(n) × |X| at times[k].
  std::vector<Eigen::MatrixXd> values;

  MeasureD at(std::size_t time_index, const Partition& a) const;
};

/// Solves dE/dt = Θ E from E(0) = H_·(z0) (finite N) or R_·(z0/N) (limit
/// variants, whose sampling functions are the recombinators). Times are in
/// the time scale of the chosen variant.
ExpectationTrajectory expected_sampling(const BackwardModel& backward, const PopulationState& z0,
                                        const std::vector<double>& times,
                                        OdeMethod method = OdeMethod::matrix_exponential,
                                        double rk4_dt = 1e-3);

/// Evolves an initial Bell(n) × k matrix under dE/dt = Q E.
std::vector<Eigen::MatrixXd> evolve(const Eigen::MatrixXd& Q, const Eigen::MatrixXd& e0,
                                    const std::vector<double>& times, OdeMethod method,
                                    double rk4_dt = 1e-3);

/// Matrix T with L_A = Σ_C T_AC H_C over the partitions of one site set,
/// T_AC = Σ_{B ≼ A∧C} μ(B,A) N!/((N−|C|)! N^|B|). Without N, the N → ∞
/// limit T_AC = μ(C,A)[C ≼ A] (L in terms of recombinators).
Eigen::MatrixXd lde_transform_matrix(const PartitionIndex& partitions,
                                     std::optional<int> N = std::nullopt);

/// Partition of {1..n} with the same blocks as c except that the sites
/// outside c's ground set are added to the first block.
Partition lift_partition(const Partition& c, const SiteSet& all);

/// E[L^U_A(π_U Z_t)] for every partition A of U.
struct LdeTrajectory {
  std::vector<double> times;
  PartitionIndex partitions;
  SiteSet sites;
  std::vector<int> radices;
  /// values[k] is Bell(|U|) × |X_U|.
  std::vector<Eigen::MatrixXd> values;

  MeasureD at(std::size_t time_index, const Partition& a) const;
};

LdeTrajectory lde_trajectory(const BackwardModel& backward, const PopulationState& z0,
                             const SiteSet& u, const std::vector<double>& times,
                             OdeMethod method = OdeMethod::matrix_exponential);

/// Rows are left eigenvectors of a lower-triangular matrix M with unit
/// diagonal: Vinv·M = D·Vinv, D = diag(M). Throws ValidationError if M is
/// not diagonalizable.
Eigen::MatrixXd left_eigenvectors_lower(const Eigen::MatrixXd& m, double tol = 1e-12);

struct LdeTransform {
  Eigen::MatrixXd T;
  Eigen::MatrixXd Tinv;
  /// T Θ T⁻¹.
  Eigen::MatrixXd conjugated;
  Eigen::MatrixXd Vinv;
  Eigen::VectorXd D;
  /// max |Vinv·M − D·Vinv|.
  double residual = 0.0;
  /// Largest |entry| strictly above the diagonal of T Θ T⁻¹.
  double upper_max = 0.0;
};

/// T, T Θ T⁻¹ and its diagonalisation for three sites, all in the order
/// (𝟏, 1|23, 12|3, 13|2, 𝟎). Throws ShapeError unless n = 3.
LdeTransform lde_conjugation_3site(const BackwardModel& backward);

/// Plain-text report: eigenvalues, residual, upper-triangle magnitude.
void write_diagonalization_report(std::ostream& os, const LdeTransform& t);

/// Long-run fixation probabilities for two sites:
/// 2/(2+r(N−1))·z0/N + r(N−1)/(2+r(N−1))·H_𝟎(z0). Throws ShapeError unless n = 2.
MeasureD fixation_2site(const ForwardModel& forward, const PopulationState& z0);

/// "time,partition,type,value"; only the listed partitions (all if empty).
void write_expectation_csv(std::ostream& os, const std::vector<double>& times,
                           const PartitionIndex& partitions, const std::vector<int>& radices,
                           const std::vector<Eigen::MatrixXd>& values,
                           const std::vector<Partition>& only = {});

struct ExpectationRow {
  double time;
  Partition partition;
  std::string type;
  double value;
};
std::vector<ExpectationRow> read_expectation_csv(std::istream& is);

}  // namespace moran
