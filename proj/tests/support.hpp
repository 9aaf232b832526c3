#pragma once

// Hand-rolled generators for property tests.

#include <cstdint>
#include <random>
#include <vector>

#include "moran/measure.hpp"
#include "moran/partition.hpp"
#include "moran/recombination.hpp"

namespace testing {

using moran::CountMeasure;
using moran::MeasureD;
using moran::Partition;
using moran::SiteSet;

inline std::mt19937_64& rng() {
  static std::mt19937_64 g(20240611);
  return g;
}

inline int uniform_int(std::mt19937_64& g, int lo, int hi) {
  return std::uniform_int_distribution<int>(lo, hi)(g);
}

inline double uniform_real(std::mt19937_64& g, double lo, double hi) {
  return std::uniform_real_distribution<double>(lo, hi)(g);
}

inline std::vector<int> random_radices(std::mt19937_64& g, std::size_t n, int max_card = 3) {
  std::vector<int> r(n);
  for (auto& v : r) v = uniform_int(g, 2, max_card);
  return r;
}

/// Strictly positive weights in (0.1, 1.1).
inline MeasureD random_measure(std::mt19937_64& g, const SiteSet& sites,
                               const std::vector<int>& radices) {
  MeasureD m(sites, radices);
  for (moran::TypeIndex i = 0; i < m.size(); ++i) m[i] = uniform_real(g, 0.1, 1.1);
  return m;
}

/// N individuals with uniformly drawn types.
inline CountMeasure random_population(std::mt19937_64& g, const SiteSet& sites,
                                      const std::vector<int>& radices, int N) {
  CountMeasure z(sites, radices);
  std::uniform_int_distribution<moran::TypeIndex> pick(0, z.size() - 1);
  for (int k = 0; k < N; ++k) z[pick(g)] += 1;
  return z;
}

inline Partition random_partition(std::mt19937_64& g, const SiteSet& w) {
  std::vector<std::vector<moran::Site>> blocks;
  for (moran::Site s : w) {
    const int j = uniform_int(g, 0, static_cast<int>(blocks.size()));
    if (j == static_cast<int>(blocks.size())) blocks.emplace_back();
    blocks[static_cast<std::size_t>(j)].push_back(s);
  }
  std::vector<SiteSet> sets;
  for (auto& b : blocks) sets.emplace_back(b);
  return moran::canonicalize(std::move(sets));
}

/// Crossover probabilities with sum ≤ 1.
inline moran::RecombinationDistribution random_recombination(std::mt19937_64& g, int n) {
  std::vector<double> p(static_cast<std::size_t>(n - 1));
  for (auto& v : p) v = uniform_real(g, 0.0, 1.0 / static_cast<double>(n - 1));
  return moran::RecombinationDistribution(p);
}

/// All nonempty subsets of {1..n}.
inline std::vector<SiteSet> nonempty_subsets(int n) {
  std::vector<SiteSet> out;
  for (unsigned mask = 1; mask < (1u << n); ++mask) {
    std::vector<moran::Site> v;
    for (int s = 1; s <= n; ++s)
      if (mask & (1u << (s - 1))) v.push_back(s);
    out.emplace_back(v);
  }
  return out;
}

/// Every counting measure of norm N on the given shape.
inline std::vector<CountMeasure> all_populations(const SiteSet& sites,
                                                 const std::vector<int>& radices, int N) {
  CountMeasure shape(sites, radices);
  std::vector<CountMeasure> out;
  auto rec = [&](auto&& self, moran::TypeIndex pos, std::int64_t left) -> void {
    if (pos + 1 == shape.size()) {
      shape[pos] = left;
      out.push_back(shape);
      return;
    }
    for (std::int64_t v = 0; v <= left; ++v) {
      shape[pos] = v;
      self(self, pos + 1, left - v);
    }
  };
  rec(rec, 0, N);
  return out;
}

inline double max_abs(const MeasureD& a, const MeasureD& b) {
  return (a.weights() - b.weights()).cwiseAbs().maxCoeff();
}

}  // namespace testing
