#pragma once

// Finite measures on product type spaces X_u = ×_{i∈u} X_i.
//
// Weights are stored densely in mixed-radix order with the lowest-numbered
// site as the most significant digit, so for two binary sites the order is
// (0,0), (0,1), (1,0), (1,1).

#include <Eigen/Core>
#include <algorithm>
#include <cstddef>
#include <cstdint>
#include <iosfwd>
#include <span>
#include <string>
#include <vector>

#include "moran/errors.hpp"
#include "moran/partition.hpp"

namespace moran {

/// Default cap on the number of types of a dense measure.
inline constexpr std::size_t kDefaultStateCap = std::size_t{1} << 20;

using TypeIndex = std::size_t;

/// Alphabet sizes of the sites 1..n.
class SiteSpace {
 public:
  explicit SiteSpace(std::vector<int> cardinalities, std::size_t state_cap = kDefaultStateCap);

  int n() const { return static_cast<int>(card_.size()); }
  int cardinality(Site s) const { return card_[static_cast<std::size_t>(s - 1)]; }
  const std::vector<int>& cardinalities() const { return card_; }
  SiteSet all_sites() const { return SiteSet::range(1, n()); }
  /// Radices of the sites in u, in site order.
  std::vector<int> radices(const SiteSet& u) const;
  /// |X| for the full site set.
  std::size_t type_count() const { return types_; }

  friend bool operator==(const SiteSpace&, const SiteSpace&) = default;

 private:
  std::vector<int> card_;
  std::size_t types_ = 1;
};

template <typename Scalar>
class Measure {
 public:
  using Vector = Eigen::Matrix<Scalar, Eigen::Dynamic, 1>;

  Measure() : weights_(Vector::Zero(1)) {}

  /// Zero measure on the sites `sites` with the given per-site radices.
  Measure(SiteSet sites, std::vector<int> radices)
      : sites_(std::move(sites)), radices_(std::move(radices)) {
    if (radices_.size() != sites_.size())
      throw ShapeError("one radix per site is required");
    std::size_t count = 1;
    for (int r : radices_) {
      if (r < 1) throw ValidationError("alphabet sizes must be at least 1");
      count *= static_cast<std::size_t>(r);
      if (count > kDefaultStateCap) throw SizeCapError("measure exceeds the dense state cap");
    }
    weights_ = Vector::Zero(static_cast<Eigen::Index>(count));
  }

  Measure(const SiteSpace& space, const SiteSet& sites)
      : Measure(sites, space.radices(sites)) {}

  /// Measure on the empty site set, i.e. a single number.
  static Measure scalar(Scalar value) {
    Measure m;
    m.weights_(0) = value;
    return m;
  }

  const SiteSet& sites() const { return sites_; }
  const std::vector<int>& radices() const { return radices_; }
  std::size_t size() const { return static_cast<std::size_t>(weights_.size()); }
  const Vector& weights() const { return weights_; }
  Vector& weights() { return weights_; }
  Scalar operator[](TypeIndex i) const { return weights_(static_cast<Eigen::Index>(i)); }
  Scalar& operator[](TypeIndex i) { return weights_(static_cast<Eigen::Index>(i)); }

  Scalar norm() const { return weights_.sum(); }

  /// LDE outputs are flagged as signed; positivity checks skip them.
  bool is_signed() const { return signed_; }
  void set_signed(bool s) { signed_ = s; }

  TypeIndex encode(std::span<const int> letters) const {
    TypeIndex idx = 0;
    for (std::size_t i = 0; i < radices_.size(); ++i) {
      if (letters[i] < 0 || letters[i] >= radices_[i])
        throw ValidationError("letter out of range for site " + std::to_string(sites_[i]));
      idx = idx * static_cast<TypeIndex>(radices_[i]) + static_cast<TypeIndex>(letters[i]);
    }
    return idx;
  }

  std::vector<int> decode(TypeIndex idx) const {
    std::vector<int> letters(radices_.size());
    for (std::size_t i = radices_.size(); i-- > 0;) {
      letters[i] = static_cast<int>(idx % static_cast<TypeIndex>(radices_[i]));
      idx /= static_cast<TypeIndex>(radices_[i]);
    }
    return letters;
  }

  Scalar at(std::span<const int> letters) const { return (*this)[encode(letters)]; }

  bool same_shape(const Measure& other) const {
    return sites_ == other.sites_ && radices_ == other.radices_;
  }

  template <typename To>
  Measure<To> cast() const {
    Measure<To> out(sites_, radices_);
    out.weights() = weights_.template cast<To>();
    out.set_signed(signed_);
    return out;
  }

  Measure& operator+=(const Measure& o) {
    require_shape(o);
    weights_ += o.weights_;
    return *this;
  }
  Measure& operator-=(const Measure& o) {
    require_shape(o);
    weights_ -= o.weights_;
    return *this;
  }
  Measure& operator*=(Scalar s) {
    weights_ *= s;
    return *this;
  }
  friend Measure operator+(Measure a, const Measure& b) { return a += b; }
  friend Measure operator-(Measure a, const Measure& b) { return a -= b; }
  friend Measure operator*(Scalar s, Measure a) { return a *= s; }

  friend bool operator==(const Measure& a, const Measure& b) {
    return a.same_shape(b) && a.weights_ == b.weights_;
  }

 private:
  void require_shape(const Measure& o) const {
    if (!same_shape(o)) throw ShapeError("measures live on different type spaces");
  }

  SiteSet sites_;
  std::vector<int> radices_;
  Vector weights_;
  bool signed_ = false;
};

using MeasureD = Measure<double>;
using CountMeasure = Measure<std::int64_t>;

namespace detail {

// For every index of `from`, the index of its restriction to the sites of
// `to` (which must be a subset of from.sites()).
template <typename A, typename B>
std::vector<TypeIndex> projection_map(const Measure<A>& from, const Measure<B>& to) {
  const auto& fs = from.sites();
  std::vector<std::size_t> pos;
  for (Site s : to.sites()) pos.push_back(fs.position(s));
  std::vector<TypeIndex> map(from.size());
  for (TypeIndex i = 0; i < from.size(); ++i) {
    const auto letters = from.decode(i);
    TypeIndex j = 0;
    for (std::size_t k = 0; k < pos.size(); ++k)
      j = j * static_cast<TypeIndex>(to.radices()[k]) + static_cast<TypeIndex>(letters[pos[k]]);
    map[i] = j;
  }
  return map;
}

template <typename Scalar>
std::vector<int> radices_of(const Measure<Scalar>& m, const SiteSet& v) {
  std::vector<int> r;
  for (Site s : v) r.push_back(m.radices()[m.sites().position(s)]);
  return r;
}

}  // namespace detail

/// π_v.m. Marginalising to the empty set gives the norm as a 0-site measure.
template <typename Scalar>
Measure<Scalar> marginalize(const Measure<Scalar>& m, const SiteSet& v) {
  if (!v.is_subset_of(m.sites()))
    throw NotSubsetError("cannot marginalize onto {" + v.to_string() + "}: not a subset of {" +
                         m.sites().to_string() + "}");
  if (v == m.sites()) return m;
  Measure<Scalar> out(v, detail::radices_of(m, v));
  const auto map = detail::projection_map(m, out);
  for (TypeIndex i = 0; i < m.size(); ++i) out[map[i]] += m[i];
  out.set_signed(m.is_signed());
  return out;
}

/// Product measure of factors on pairwise disjoint site sets, with
/// coordinates placed in global site order.
template <typename Scalar>
Measure<Scalar> tensor_site_ordered(std::span<const Measure<Scalar>> factors) {
  SiteSet all;
  std::vector<std::pair<Site, int>> site_radix;
  for (const auto& f : factors) {
    if (all.intersects(f.sites()))
      throw OverlapError("tensor factors must live on disjoint site sets");
    all = all.united(f.sites());
    for (std::size_t k = 0; k < f.sites().size(); ++k)
      site_radix.emplace_back(f.sites()[k], f.radices()[k]);
  }
  std::sort(site_radix.begin(), site_radix.end());
  std::vector<int> radices;
  for (const auto& sr : site_radix) radices.push_back(sr.second);
  Measure<Scalar> out(all, radices);
  out.weights().setOnes();
  bool is_signed = false;
  for (const auto& f : factors) {
    is_signed = is_signed || f.is_signed();
    if (f.sites().empty()) {
      out.weights() *= f[0];
      continue;
    }
    const auto map = detail::projection_map(out, f);
    for (TypeIndex i = 0; i < out.size(); ++i) out[i] *= f[map[i]];
  }
  out.set_signed(is_signed);
  return out;
}

template <typename Scalar>
Measure<Scalar> tensor_site_ordered(const Measure<Scalar>& a, const Measure<Scalar>& b) {
  const Measure<Scalar> f[] = {a, b};
  return tensor_site_ordered<Scalar>(std::span<const Measure<Scalar>>(f));
}

/// A Moran population: counting measure on the full type space with norm N.
class PopulationState {
 public:
  PopulationState(const SiteSpace& space, CountMeasure counts);
  /// Builds a state from explicit per-type counts (length |X|).
  static PopulationState from_counts(const SiteSpace& space, std::vector<std::int64_t> counts);

  const CountMeasure& measure() const { return counts_; }
  int N() const { return static_cast<int>(counts_.norm()); }
  std::int64_t operator[](TypeIndex x) const { return counts_[x]; }
  std::size_t type_count() const { return counts_.size(); }
  MeasureD as_double() const { return counts_.cast<double>(); }
  bool is_monomorphic() const;

  friend bool operator==(const PopulationState&, const PopulationState&) = default;

 private:
  CountMeasure counts_;
};

/// Counting measure of z with one more individual of type x.
CountMeasure add_delta(const PopulationState& z, TypeIndex x);
/// Counting measure of z with one individual of type y removed; throws
/// NegativeWeightError if z(y) = 0.
CountMeasure sub_delta(const PopulationState& z, TypeIndex y);

/// Type label: letters of each site joined in site order, e.g. "01".
std::string type_label(const std::vector<int>& letters);
std::vector<int> parse_type_label(const std::string& label);

/// CSV with header "type,weight", rows in mixed-radix order, 17 significant digits.
void write_measure_csv(std::ostream& os, const MeasureD& m);
/// Reads a measure written by write_measure_csv. Lines starting with '#' are
/// ignored.
MeasureD read_measure_csv(std::istream& is, const SiteSet& sites, const std::vector<int>& radices);

}  // namespace moran
