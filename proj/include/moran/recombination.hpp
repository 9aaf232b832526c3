#pragma once

// Recombination distributions and the operators built on them:
// recombinators R̄_A / R_A, sampling functions H̄_A / H_A and the correlation
// (linkage disequilibrium) operators L_A.

#include <cmath>
#include <cstdint>
#include <filesystem>
#include <optional>
#include <span>
#include <vector>

#include "moran/measure.hpp"
#include "moran/partition.hpp"

namespace moran {

/// Probabilities r_A for A ∈ O≤2(S), parametrised by the n−1 crossover
/// probabilities (gap i ↦ probability of a split after site i).
class RecombinationDistribution {
 public:
  /// Throws ValidationError unless every value is in [0,1] and the sum is ≤ 1.
  explicit RecombinationDistribution(std::vector<double> crossover_probs);
  /// No recombination on n sites.
  static RecombinationDistribution none(int n);

  int n() const { return static_cast<int>(crossover_.size()) + 1; }
  double crossover(int gap) const { return crossover_[static_cast<std::size_t>(gap - 1)]; }
  const std::vector<double>& crossovers() const { return crossover_; }
  /// r_𝟏 = 1 − Σ crossover probabilities.
  double no_recombination() const { return no_recomb_; }
  /// r_A for A ∈ O≤2(S); throws NotOrderedPartitionError otherwise.
  double prob(const Partition& a) const;

 private:
  std::vector<double> crossover_;
  double no_recomb_ = 1.0;
};

/// Diffusion-limit recombination rates ϱ_A for A ∈ O₂(S), one per gap.
class DiffusionRates {
 public:
  explicit DiffusionRates(std::vector<double> rates);
  int n() const { return static_cast<int>(rates_.size()) + 1; }
  double rate(int gap) const { return rates_[static_cast<std::size_t>(gap - 1)]; }
  const std::vector<double>& rates() const { return rates_; }

 private:
  std::vector<double> rates_;
};

/// Contents of a recombination distribution file.
struct RecombinationSpec {
  RecombinationDistribution recomb;
  std::optional<DiffusionRates> rho;
};

/// Reads {"crossover_probs": [...], "rho": [...]} (rho optional).
RecombinationSpec load_recombination_file(const std::filesystem::path& path);

/// r_B^U: total probability of the single-crossover events whose restriction
/// to U = b.ground() is b. Throws NotOrderedPartitionError unless b ∈ O≤2(U).
double marginal_recomb_prob(const RecombinationDistribution& r, const Partition& b);

/// ϱ_B^U for b ∈ O₂(U), the same restriction sum over rates.
double marginal_rate(const DiffusionRates& rho, const Partition& b);

// ------------------------------------------------------------ recombinators

/// R̄_A(m): site-ordered product of the block marginals of m. Norm ‖m‖^|A|.
/// For the empty partition this is the scalar ‖m‖.
template <typename Scalar>
Measure<Scalar> recombinator_bar(const Partition& a, const Measure<Scalar>& m) {
  if (a.empty()) return Measure<Scalar>::scalar(m.norm());
  if (a.ground() != m.sites())
    throw GroundMismatchError("partition " + a.to_string() + " does not match measure sites {" +
                              m.sites().to_string() + "}");
  if (a.size() == 1) return m;
  std::vector<Measure<Scalar>> marginals;
  marginals.reserve(a.size());
  for (const auto& block : a.blocks()) marginals.push_back(marginalize(m, block));
  return tensor_site_ordered<Scalar>(std::span<const Measure<Scalar>>(marginals));
}

/// R_A(m) = R̄_A(m)/‖m‖^|A|, a probability measure.
template <typename Scalar>
MeasureD recombinator(const Partition& a, const Measure<Scalar>& m) {
  const double norm = static_cast<double>(m.norm());
  if (!(norm > 0.0)) throw ZeroMeasureError("recombinator of a measure with zero norm");
  MeasureD out = recombinator_bar(a, m.template cast<double>());
  out *= 1.0 / std::pow(norm, static_cast<double>(a.size()));
  return out;
}

// --------------------------------------------------------- sampling functions

/// H̄_A(ω) = Σ_{B ≽ A} μ(A,B) R̄_B(ω). For a counting measure z with
/// ‖z‖ ≥ |A| this counts ordered samples of distinct individuals.
template <typename Scalar>
Measure<Scalar> sampling_bar(const Partition& a, const Measure<Scalar>& z) {
  if (a.empty()) return Measure<Scalar>::scalar(z.norm());
  Measure<Scalar> out(z.sites(), z.radices());
  for (const auto& b : coarsenings(a, a.ground().size()))
    out += static_cast<Scalar>(mobius(a, b)) * recombinator_bar(b, z);
  return out;
}

/// (N−m)!/N! falling-factorial normaliser of H̄_A for |A| = m.
inline double falling_factorial(std::int64_t N, std::int64_t m) {
  double f = 1.0;
  for (std::int64_t i = 0; i < m; ++i) f *= static_cast<double>(N - i);
  return f;
}

/// H_A(z) = H̄_A(z)·(N−m)!/N!. Throws SampleTooLargeError when |A| > N.
MeasureD sampling(const Partition& a, const CountMeasure& z);

/// Brute-force H̄_A(z): counts, over all ordered tuples of distinct
/// individuals, the type assembled by taking block j from individual j.
CountMeasure sampling_oracle(const Partition& a, const CountMeasure& z,
                             std::int64_t individual_cap = 12);

// ---------------------------------------------------- correlation operators

/// L_A(m) = Σ_{B ≼ A} μ(B,A) R_B(m), a signed measure.
MeasureD lde_operator(const Partition& a, const MeasureD& m);

/// L_𝟏^U(π_U.z) via N!/(N^k (N−k)!) Σ_{A∈P(U)} μ(A,𝟏) H_A(π_U.z), valid for
/// k = |U| ≤ 3 ≤ N (k < 3 is accepted for N ≥ k). Throws SizeCapError for k > 3.
MeasureD lde_from_sampling(const SiteSet& u, const CountMeasure& z);

}  // namespace moran
