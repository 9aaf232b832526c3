#include "moran/recombination.hpp"

#include <algorithm>
#include <fstream>

#include "json.hpp"

namespace moran {

RecombinationDistribution::RecombinationDistribution(std::vector<double> crossover_probs)
    : crossover_(std::move(crossover_probs)) {
  double sum = 0.0;
  for (double p : crossover_) {
    if (!(p >= 0.0 && p <= 1.0))
      throw ValidationError("crossover probabilities must lie in [0,1]");
    sum += p;
  }
  if (sum > 1.0 + 1e-12)
    throw ValidationError("crossover probabilities sum to " + std::to_string(sum) + " > 1");
  no_recomb_ = std::max(0.0, 1.0 - sum);
}

RecombinationDistribution RecombinationDistribution::none(int n) {
  return RecombinationDistribution(std::vector<double>(static_cast<std::size_t>(n - 1), 0.0));
}

double RecombinationDistribution::prob(const Partition& a) const {
  if (a.ground() != SiteSet::range(1, n()))
    throw GroundMismatchError("r_A is defined for partitions of {1..n}");
  if (a.size() == 1) return no_recomb_;
  if (a.size() == 2 && a.is_ordered_in(a.ground())) return crossover(a.block(0).max());
  throw NotOrderedPartitionError(a.to_string() + " is not in O<=2(S)");
}

DiffusionRates::DiffusionRates(std::vector<double> rates) : rates_(std::move(rates)) {
  for (double r : rates_)
    if (!(r >= 0.0) || !std::isfinite(r))
      throw ValidationError("diffusion rates must be finite and nonnegative");
}

RecombinationSpec load_recombination_file(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ValidationError("cannot open recombination file " + path.string());
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(in);
  } catch (const nlohmann::json::parse_error& e) {
    throw ParseError(path.string() + ": " + e.what());
  }
  if (!j.contains("crossover_probs"))
    throw ValidationError(path.string() + ": missing key 'crossover_probs'");
  RecombinationSpec spec{RecombinationDistribution(j.at("crossover_probs").get<std::vector<double>>()),
                         std::nullopt};
  if (j.contains("rho")) {
    spec.rho = DiffusionRates(j.at("rho").get<std::vector<double>>());
    if (spec.rho->n() != spec.recomb.n())
      throw ValidationError(path.string() + ": 'rho' and 'crossover_probs' differ in length");
  }
  return spec;
}

namespace {

void require_ordered_le2(const Partition& b) {
  const bool ok = b.size() == 1 || (b.size() == 2 && b.is_ordered_in(b.ground()));
  if (!ok) throw NotOrderedPartitionError(b.to_string() + " is not an ordered partition into <= 2 parts");
}

// Restriction of the split after site `cut` (cut = 0: no split) to u.
Partition restricted_split(int n, int cut, const SiteSet& u) {
  if (cut == 0) return Partition::coarsest(u);
  return restrict(canonicalize({SiteSet::range(1, cut), SiteSet::range(cut + 1, n)}), u);
}

}  // namespace

double marginal_recomb_prob(const RecombinationDistribution& r, const Partition& b) {
  require_ordered_le2(b);
  const SiteSet& u = b.ground();
  if (u.max() > r.n()) throw NotSubsetError("partition sites exceed n");
  double total = 0.0;
  if (restricted_split(r.n(), 0, u) == b) total += r.no_recombination();
  for (int cut = 1; cut < r.n(); ++cut)
    if (restricted_split(r.n(), cut, u) == b) total += r.crossover(cut);
  return total;
}

double marginal_rate(const DiffusionRates& rho, const Partition& b) {
  require_ordered_le2(b);
  const SiteSet& u = b.ground();
  if (u.max() > rho.n()) throw NotSubsetError("partition sites exceed n");
  double total = 0.0;
  for (int cut = 1; cut < rho.n(); ++cut)
    if (restricted_split(rho.n(), cut, u) == b) total += rho.rate(cut);
  return total;
}

MeasureD sampling(const Partition& a, const CountMeasure& z) {
  const std::int64_t N = z.norm();
  const auto m = static_cast<std::int64_t>(a.size());
  if (m > N)
    throw SampleTooLargeError("cannot sample " + std::to_string(m) + " blocks from " +
                              std::to_string(N) + " individuals");
  MeasureD out = sampling_bar(a, z).cast<double>();
  out *= 1.0 / falling_factorial(N, m);
  return out;
}

CountMeasure sampling_oracle(const Partition& a, const CountMeasure& z, std::int64_t individual_cap) {
  const std::int64_t N = z.norm();
  if (N > individual_cap)
    throw SizeCapError("brute-force sampling over " + std::to_string(N) +
                       " individuals exceeds the cap of " + std::to_string(individual_cap));
  if (a.ground() != z.sites()) throw GroundMismatchError("partition does not match measure sites");
  std::vector<std::vector<int>> individuals;
  for (TypeIndex x = 0; x < z.size(); ++x)
    for (std::int64_t c = 0; c < z[x]; ++c) individuals.push_back(z.decode(x));

  // Position of each ground site within z's letter vector, per block.
  std::vector<std::vector<std::size_t>> block_pos(a.size());
  for (std::size_t j = 0; j < a.size(); ++j)
    for (Site s : a.block(j)) block_pos[j].push_back(z.sites().position(s));

  CountMeasure out(z.sites(), z.radices());
  const std::size_t m = a.size();
  std::vector<std::size_t> labels(m);
  std::vector<bool> used(individuals.size(), false);
  std::vector<int> letters(z.sites().size());

  auto recurse = [&](auto&& self, std::size_t depth) -> void {
    if (depth == m) {
      for (std::size_t j = 0; j < m; ++j)
        for (std::size_t p : block_pos[j]) letters[p] = individuals[labels[j]][p];
      out[out.encode(letters)] += 1;
      return;
    }
    for (std::size_t l = 0; l < individuals.size(); ++l) {
      if (used[l]) continue;
      used[l] = true;
      labels[depth] = l;
      self(self, depth + 1);
      used[l] = false;
    }
  };
  recurse(recurse, 0);
  return out;
}

MeasureD lde_operator(const Partition& a, const MeasureD& m) {
  if (!(m.norm() > 0.0)) throw ZeroMeasureError("LDE of a measure with zero norm");
  MeasureD out(m.sites(), m.radices());
  for (const auto& b : refinements(a, a.ground().size()))
    out += static_cast<double>(mobius(b, a)) * recombinator(b, m);
  out.set_signed(true);
  return out;
}

MeasureD lde_from_sampling(const SiteSet& u, const CountMeasure& z) {
  const auto k = static_cast<std::int64_t>(u.size());
  if (k > 3) throw SizeCapError("the closed sampling form of the LDE covers at most 3 sites");
  const CountMeasure zu = marginalize(z, u);
  const std::int64_t N = zu.norm();
  if (N < k) throw SampleTooLargeError("need at least |U| individuals");
  const Partition top = Partition::coarsest(u);
  MeasureD out(zu.sites(), zu.radices());
  for (const auto& a : enumerate_partitions(u))
    out += static_cast<double>(mobius(a, top)) * sampling(a, zu);
  out *= falling_factorial(N, k) / std::pow(static_cast<double>(N), static_cast<double>(k));
  out.set_signed(true);
  return out;
}

}  // namespace moran
