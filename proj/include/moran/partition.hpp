#pragma once

// Set partitions of a finite, totally ordered site set and the refinement
// lattice on them.
//
// A Partition is stored canonically: blocks are sorted site lists and the
// blocks themselves are ordered by their minimum element. With this order the
// block index of each ground site, read in ground order, is the
// restricted-growth string of the partition, and comparing partitions by that
// string gives the enumeration order used for every matrix over P(W).

#include <compare>
#include <cstddef>
#include <cstdint>
#include <initializer_list>
#include <map>
#include <string>
#include <string_view>
#include <vector>

namespace moran {

using Site = int;

/// Default cap on |W| for exhaustive enumeration (Bell(8) = 4140).
inline constexpr std::size_t kDefaultSiteCap = 8;

class SiteSet {
 public:
  SiteSet() = default;
  /// Sorts and validates; throws ValidationError on duplicates or sites < 1.
  explicit SiteSet(std::vector<Site> sites);
  SiteSet(std::initializer_list<Site> sites) : SiteSet(std::vector<Site>(sites)) {}

  /// {first, first+1, ..., last}
  static SiteSet range(Site first, Site last);

  std::size_t size() const { return sites_.size(); }
  bool empty() const { return sites_.empty(); }
  Site operator[](std::size_t i) const { return sites_[i]; }
  Site min() const { return sites_.front(); }
  Site max() const { return sites_.back(); }
  auto begin() const { return sites_.begin(); }
  auto end() const { return sites_.end(); }
  const std::vector<Site>& values() const { return sites_; }

  bool contains(Site s) const;
  bool is_subset_of(const SiteSet& other) const;
  bool intersects(const SiteSet& other) const;
  /// Position of `s` within this set, or size() if absent.
  std::size_t position(Site s) const;

  SiteSet united(const SiteSet& other) const;
  SiteSet intersected(const SiteSet& other) const;
  SiteSet minus(const SiteSet& other) const;

  std::string to_string() const;

  friend bool operator==(const SiteSet&, const SiteSet&) = default;
  friend auto operator<=>(const SiteSet&, const SiteSet&) = default;

 private:
  std::vector<Site> sites_;
};

class Partition {
 public:
  /// The partition of the empty set (no blocks). Only used for the empty-set
  /// conventions, e.g. A \ A_j when A has a single block.
  Partition() = default;

  static Partition coarsest(const SiteSet& ground);
  static Partition finest(const SiteSet& ground);

  std::size_t size() const { return blocks_.size(); }
  bool empty() const { return blocks_.empty(); }
  const SiteSet& block(std::size_t j) const { return blocks_[j]; }
  const std::vector<SiteSet>& blocks() const { return blocks_; }
  const SiteSet& ground() const { return ground_; }

  /// Index of the block containing `s`; throws NotSubsetError if absent.
  std::size_t block_of(Site s) const;

  /// Restricted-growth string: block index of each ground site in order.
  std::vector<int> rgs() const;

  /// True if every block is an interval of `within` (ordered partition).
  bool is_ordered_in(const SiteSet& within) const;

  /// The partition A_{M\j} of the remaining blocks.
  Partition without_block(std::size_t j) const;
  /// Disjoint union with a partition of a disjoint ground set.
  Partition disjoint_union(const Partition& other) const;

  /// "1,3,4|2,5"
  std::string to_string() const;

  friend bool operator==(const Partition& a, const Partition& b) {
    return a.blocks_ == b.blocks_;
  }
  /// Orders by ground set, then by restricted-growth string.
  friend std::strong_ordering operator<=>(const Partition& a, const Partition& b);

 private:
  friend Partition canonicalize(std::vector<SiteSet> blocks);
  std::vector<SiteSet> blocks_;
  SiteSet ground_;
};

/// Sorts blocks by minimum element. Throws EmptyBlockError for an empty
/// block list or an empty block, OverlapError if blocks intersect.
Partition canonicalize(std::vector<SiteSet> blocks);

/// a ≼ b: every block of a lies inside a block of b.
bool refines(const Partition& a, const Partition& b);
Partition meet(const Partition& a, const Partition& b);
Partition join(const Partition& a, const Partition& b);
/// Nonempty intersections A_i ∩ u. Throws NotSubsetError unless u ⊆ ground.
Partition restrict(const Partition& a, const SiteSet& u);

/// Möbius function of the partition lattice, by the closed product formula
/// Π_j (−1)^(n_j−1) (n_j−1)!. Throws NotComparableError unless a ≼ b.
std::int64_t mobius(const Partition& a, const Partition& b);

/// All partitions of w in restricted-growth (lexicographic) order.
std::vector<Partition> enumerate_partitions(const SiteSet& w,
                                            std::size_t site_cap = kDefaultSiteCap);
/// {b : a ≼ b}, in enumeration order.
std::vector<Partition> coarsenings(const Partition& a,
                                   std::size_t site_cap = kDefaultSiteCap);
/// {b : b ≼ a}, in enumeration order.
std::vector<Partition> refinements(const Partition& a,
                                   std::size_t site_cap = kDefaultSiteCap);

/// {1|_u} ∪ O₂(u): the coarsest partition followed by the |u|−1 splits of u
/// at its internal gaps, in order of the cut.
std::vector<Partition> ordered_partitions_le2(const SiteSet& u);

/// Parses "1,3,4|2,5" and canonicalizes it.
Partition parse_partition(std::string_view text);

/// Row/column index for matrices over an explicit list of partitions.
class PartitionIndex {
 public:
  PartitionIndex() = default;
  explicit PartitionIndex(std::vector<Partition> states);

  std::size_t size() const { return states_.size(); }
  const Partition& operator[](std::size_t i) const { return states_[i]; }
  const std::vector<Partition>& states() const { return states_; }
  /// Throws NotSubsetError if `p` is not a state.
  std::size_t index_of(const Partition& p) const;
  bool contains(const Partition& p) const { return lookup_.count(p) != 0; }

 private:
  std::vector<Partition> states_;
  std::map<Partition, std::size_t> lookup_;
};

}  // namespace moran
