#include "moran/partition.hpp"

#include <algorithm>
#include <numeric>
#include <sstream>

#include "moran/errors.hpp"

namespace moran {

// ---------------------------------------------------------------- SiteSet

SiteSet::SiteSet(std::vector<Site> sites) : sites_(std::move(sites)) {
  std::sort(sites_.begin(), sites_.end());
  if (std::adjacent_find(sites_.begin(), sites_.end()) != sites_.end())
    throw ValidationError("site set contains a duplicate site");
  if (!sites_.empty() && sites_.front() < 1)
    throw ValidationError("sites are numbered from 1");
}

SiteSet SiteSet::range(Site first, Site last) {
  std::vector<Site> v;
  for (Site s = first; s <= last; ++s) v.push_back(s);
  return SiteSet(std::move(v));
}

bool SiteSet::contains(Site s) const {
  return std::binary_search(sites_.begin(), sites_.end(), s);
}

bool SiteSet::is_subset_of(const SiteSet& other) const {
  return std::includes(other.sites_.begin(), other.sites_.end(), sites_.begin(),
                       sites_.end());
}

bool SiteSet::intersects(const SiteSet& other) const {
  auto i = sites_.begin();
  auto j = other.sites_.begin();
  while (i != sites_.end() && j != other.sites_.end()) {
    if (*i == *j) return true;
    if (*i < *j)
      ++i;
    else
      ++j;
  }
  return false;
}

std::size_t SiteSet::position(Site s) const {
  auto it = std::lower_bound(sites_.begin(), sites_.end(), s);
  if (it == sites_.end() || *it != s) return sites_.size();
  return static_cast<std::size_t>(it - sites_.begin());
}

SiteSet SiteSet::united(const SiteSet& other) const {
  std::vector<Site> out;
  std::set_union(sites_.begin(), sites_.end(), other.sites_.begin(),
                 other.sites_.end(), std::back_inserter(out));
  SiteSet r;
  r.sites_ = std::move(out);
  return r;
}

SiteSet SiteSet::intersected(const SiteSet& other) const {
  std::vector<Site> out;
  std::set_intersection(sites_.begin(), sites_.end(), other.sites_.begin(),
                        other.sites_.end(), std::back_inserter(out));
  SiteSet r;
  r.sites_ = std::move(out);
  return r;
}

SiteSet SiteSet::minus(const SiteSet& other) const {
  std::vector<Site> out;
  std::set_difference(sites_.begin(), sites_.end(), other.sites_.begin(),
                      other.sites_.end(), std::back_inserter(out));
  SiteSet r;
  r.sites_ = std::move(out);
  return r;
}

std::string SiteSet::to_string() const {
  std::string s;
  for (std::size_t i = 0; i < sites_.size(); ++i) {
    if (i) s += ',';
    s += std::to_string(sites_[i]);
  }
  return s;
}

// -------------------------------------------------------------- Partition

Partition canonicalize(std::vector<SiteSet> blocks) {
  if (blocks.empty()) throw EmptyBlockError("a partition needs at least one block");
  for (const auto& b : blocks)
    if (b.empty()) throw EmptyBlockError("partition blocks must be nonempty");
  std::sort(blocks.begin(), blocks.end(),
            [](const SiteSet& x, const SiteSet& y) { return x.min() < y.min(); });
  SiteSet ground;
  for (const auto& b : blocks) {
    if (ground.intersects(b))
      throw OverlapError("partition blocks overlap at block {" + b.to_string() + "}");
    ground = ground.united(b);
  }
  Partition p;
  p.blocks_ = std::move(blocks);
  p.ground_ = std::move(ground);
  return p;
}

Partition Partition::coarsest(const SiteSet& ground) { return canonicalize({ground}); }

Partition Partition::finest(const SiteSet& ground) {
  std::vector<SiteSet> blocks;
  for (Site s : ground) blocks.push_back(SiteSet{s});
  return canonicalize(std::move(blocks));
}

std::size_t Partition::block_of(Site s) const {
  for (std::size_t j = 0; j < blocks_.size(); ++j)
    if (blocks_[j].contains(s)) return j;
  throw NotSubsetError("site " + std::to_string(s) + " is not in the ground set");
}

std::vector<int> Partition::rgs() const {
  std::vector<int> out(ground_.size());
  for (std::size_t j = 0; j < blocks_.size(); ++j)
    for (Site s : blocks_[j]) out[ground_.position(s)] = static_cast<int>(j);
  return out;
}

bool Partition::is_ordered_in(const SiteSet& within) const {
  for (const auto& b : blocks_) {
    const std::size_t lo = within.position(b.min());
    const std::size_t hi = within.position(b.max());
    if (lo == within.size() || hi == within.size()) return false;
    if (hi - lo + 1 != b.size()) return false;
  }
  return true;
}

Partition Partition::without_block(std::size_t j) const {
  if (blocks_.size() == 1) return Partition{};
  std::vector<SiteSet> rest;
  for (std::size_t k = 0; k < blocks_.size(); ++k)
    if (k != j) rest.push_back(blocks_[k]);
  return canonicalize(std::move(rest));
}

Partition Partition::disjoint_union(const Partition& other) const {
  if (empty()) return other;
  if (other.empty()) return *this;
  std::vector<SiteSet> all = blocks_;
  all.insert(all.end(), other.blocks_.begin(), other.blocks_.end());
  return canonicalize(std::move(all));
}

std::string Partition::to_string() const {
  std::string s;
  for (std::size_t j = 0; j < blocks_.size(); ++j) {
    if (j) s += '|';
    s += blocks_[j].to_string();
  }
  return s;
}

std::strong_ordering operator<=>(const Partition& a, const Partition& b) {
  if (auto c = a.ground_ <=> b.ground_; c != 0) return c;
  return a.rgs() <=> b.rgs();
}

// ------------------------------------------------------ lattice operations

namespace {

void require_same_ground(const Partition& a, const Partition& b) {
  if (a.ground() != b.ground())
    throw GroundMismatchError("partitions " + a.to_string() + " and " + b.to_string() +
                              " have different ground sets");
}

// Builds the partition whose blocks are the label classes of `labels`
// over the sites of `ground`.
Partition from_labels(const SiteSet& ground, const std::vector<int>& labels) {
  const int k = labels.empty() ? 0 : *std::max_element(labels.begin(), labels.end()) + 1;
  std::vector<std::vector<Site>> parts(static_cast<std::size_t>(k));
  for (std::size_t i = 0; i < ground.size(); ++i)
    parts[static_cast<std::size_t>(labels[i])].push_back(ground[i]);
  std::vector<SiteSet> blocks;
  for (auto& p : parts)
    if (!p.empty()) blocks.emplace_back(std::move(p));
  return canonicalize(std::move(blocks));
}

// Calls f(labels) for every restricted-growth string of length k.
template <typename F>
void for_each_rgs(std::size_t k, F&& f) {
  if (k == 0) return;
  std::vector<int> a(k, 0), prefix_max(k, 0);
  while (true) {
    f(a);
    // Find the rightmost position that can be incremented.
    std::size_t i = k - 1;
    while (i > 0 && a[i] > prefix_max[i - 1]) --i;
    if (i == 0) return;
    ++a[i];
    prefix_max[i] = std::max(prefix_max[i - 1], a[i]);
    for (std::size_t j = i + 1; j < k; ++j) {
      a[j] = 0;
      prefix_max[j] = prefix_max[j - 1];
    }
  }
}

void check_cap(std::size_t size, std::size_t cap) {
  if (size > cap)
    throw SizeCapError("partition enumeration over " + std::to_string(size) +
                       " sites exceeds the cap of " + std::to_string(cap));
}

std::int64_t factorial(int k) {
  std::int64_t f = 1;
  for (int i = 2; i <= k; ++i) f *= i;
  return f;
}

}  // namespace

bool refines(const Partition& a, const Partition& b) {
  require_same_ground(a, b);
  for (const auto& block : a.blocks()) {
    const std::size_t j = b.block_of(block.min());
    if (!block.is_subset_of(b.block(j))) return false;
  }
  return true;
}

Partition meet(const Partition& a, const Partition& b) {
  require_same_ground(a, b);
  std::vector<SiteSet> blocks;
  for (const auto& x : a.blocks())
    for (const auto& y : b.blocks())
      if (auto z = x.intersected(y); !z.empty()) blocks.push_back(std::move(z));
  return canonicalize(std::move(blocks));
}

Partition join(const Partition& a, const Partition& b) {
  require_same_ground(a, b);
  const SiteSet& g = a.ground();
  std::vector<std::size_t> parent(g.size());
  std::iota(parent.begin(), parent.end(), std::size_t{0});
  auto find = [&](std::size_t x) {
    while (parent[x] != x) x = parent[x] = parent[parent[x]];
    return x;
  };
  for (const Partition* p : {&a, &b})
    for (const auto& block : p->blocks())
      for (Site s : block) parent[find(g.position(s))] = find(g.position(block.min()));
  std::vector<int> labels(g.size());
  for (std::size_t i = 0; i < g.size(); ++i) labels[i] = static_cast<int>(find(i));
  return from_labels(g, labels);
}

Partition restrict(const Partition& a, const SiteSet& u) {
  if (u.empty()) return Partition{};
  if (!u.is_subset_of(a.ground()))
    throw NotSubsetError("{" + u.to_string() + "} is not contained in the ground set of " +
                         a.to_string());
  std::vector<SiteSet> blocks;
  for (const auto& x : a.blocks())
    if (auto z = x.intersected(u); !z.empty()) blocks.push_back(std::move(z));
  return canonicalize(std::move(blocks));
}

std::int64_t mobius(const Partition& a, const Partition& b) {
  if (!refines(a, b))
    throw NotComparableError(a.to_string() + " does not refine " + b.to_string());
  std::vector<int> count(b.size(), 0);
  for (const auto& block : a.blocks()) ++count[b.block_of(block.min())];
  std::int64_t mu = 1;
  for (int nj : count) mu *= ((nj - 1) % 2 ? -1 : 1) * factorial(nj - 1);
  return mu;
}

std::vector<Partition> enumerate_partitions(const SiteSet& w, std::size_t site_cap) {
  check_cap(w.size(), site_cap);
  std::vector<Partition> out;
  for_each_rgs(w.size(), [&](const std::vector<int>& labels) {
    out.push_back(from_labels(w, labels));
  });
  return out;
}

std::vector<Partition> coarsenings(const Partition& a, std::size_t site_cap) {
  check_cap(a.ground().size(), site_cap);
  std::vector<Partition> out;
  for_each_rgs(a.size(), [&](const std::vector<int>& labels) {
    std::vector<std::vector<Site>> merged(a.size());
    for (std::size_t j = 0; j < a.size(); ++j) {
      auto& dst = merged[static_cast<std::size_t>(labels[j])];
      dst.insert(dst.end(), a.block(j).begin(), a.block(j).end());
    }
    std::vector<SiteSet> blocks;
    for (auto& m : merged)
      if (!m.empty()) blocks.emplace_back(std::move(m));
    out.push_back(canonicalize(std::move(blocks)));
  });
  std::sort(out.begin(), out.end());
  return out;
}

std::vector<Partition> refinements(const Partition& a, std::size_t site_cap) {
  check_cap(a.ground().size(), site_cap);
  std::vector<Partition> out{Partition{}};
  for (const auto& block : a.blocks()) {
    const auto parts = enumerate_partitions(block, site_cap);
    std::vector<Partition> next;
    next.reserve(out.size() * parts.size());
    for (const auto& prefix : out)
      for (const auto& p : parts) next.push_back(prefix.disjoint_union(p));
    out = std::move(next);
  }
  std::sort(out.begin(), out.end());
  return out;
}

std::vector<Partition> ordered_partitions_le2(const SiteSet& u) {
  std::vector<Partition> out{Partition::coarsest(u)};
  for (std::size_t cut = 1; cut < u.size(); ++cut) {
    std::vector<Site> lead(u.begin(), u.begin() + static_cast<std::ptrdiff_t>(cut));
    std::vector<Site> trail(u.begin() + static_cast<std::ptrdiff_t>(cut), u.end());
    out.push_back(canonicalize({SiteSet(std::move(lead)), SiteSet(std::move(trail))}));
  }
  return out;
}

Partition parse_partition(std::string_view text) {
  std::vector<SiteSet> blocks;
  std::vector<Site> current;
  std::string token;
  auto flush_token = [&] {
    if (token.empty()) throw ParseError("empty site in partition '" + std::string(text) + "'");
    std::size_t used = 0;
    int value = 0;
    try {
      value = std::stoi(token, &used);
    } catch (const std::exception&) {
      used = 0;
    }
    if (used != token.size())
      throw ParseError("bad site '" + token + "' in partition '" + std::string(text) + "'");
    current.push_back(value);
    token.clear();
  };
  for (char c : text) {
    if (c == ' ' || c == '\t') continue;
    if (c == ',') {
      flush_token();
    } else if (c == '|') {
      flush_token();
      blocks.emplace_back(std::move(current));
      current.clear();
    } else {
      token += c;
    }
  }
  flush_token();
  blocks.emplace_back(std::move(current));
  return canonicalize(std::move(blocks));
}

// --------------------------------------------------------- PartitionIndex

PartitionIndex::PartitionIndex(std::vector<Partition> states) : states_(std::move(states)) {
  for (std::size_t i = 0; i < states_.size(); ++i) lookup_.emplace(states_[i], i);
}

std::size_t PartitionIndex::index_of(const Partition& p) const {
  auto it = lookup_.find(p);
  if (it == lookup_.end()) throw NotSubsetError("partition " + p.to_string() + " is not a state");
  return it->second;
}

}  // namespace moran
