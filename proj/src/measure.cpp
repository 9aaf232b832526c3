#include "moran/measure.hpp"

#include <charconv>
#include <cstdio>
#include <istream>
#include <ostream>
#include <sstream>

namespace moran {

SiteSpace::SiteSpace(std::vector<int> cardinalities, std::size_t state_cap)
    : card_(std::move(cardinalities)) {
  if (card_.empty()) throw ValidationError("a site space needs at least one site");
  for (int c : card_) {
    if (c < 1) throw ValidationError("alphabet sizes must be at least 1");
    types_ *= static_cast<std::size_t>(c);
    if (types_ > state_cap)
      throw SizeCapError("type space has more than " + std::to_string(state_cap) + " states");
  }
}

std::vector<int> SiteSpace::radices(const SiteSet& u) const {
  std::vector<int> r;
  for (Site s : u) {
    if (s > n()) throw NotSubsetError("site " + std::to_string(s) + " exceeds n");
    r.push_back(cardinality(s));
  }
  return r;
}

PopulationState::PopulationState(const SiteSpace& space, CountMeasure counts)
    : counts_(std::move(counts)) {
  if (counts_.sites() != space.all_sites() || counts_.radices() != space.cardinalities())
    throw ShapeError("a population state lives on the full type space");
  for (TypeIndex x = 0; x < counts_.size(); ++x)
    if (counts_[x] < 0) throw NegativeWeightError("population counts must be nonnegative");
  if (counts_.norm() < 1) throw ValidationError("a population needs at least one individual");
}

PopulationState PopulationState::from_counts(const SiteSpace& space,
                                             std::vector<std::int64_t> counts) {
  CountMeasure m(space, space.all_sites());
  if (counts.size() != m.size())
    throw ShapeError("expected " + std::to_string(m.size()) + " counts, got " +
                     std::to_string(counts.size()));
  for (TypeIndex x = 0; x < m.size(); ++x) m[x] = counts[x];
  return PopulationState(space, std::move(m));
}

bool PopulationState::is_monomorphic() const {
  for (TypeIndex x = 0; x < counts_.size(); ++x)
    if (counts_[x] != 0) return counts_[x] == counts_.norm();
  return false;
}

CountMeasure add_delta(const PopulationState& z, TypeIndex x) {
  CountMeasure m = z.measure();
  m[x] += 1;
  return m;
}

CountMeasure sub_delta(const PopulationState& z, TypeIndex y) {
  if (z[y] < 1)
    throw NegativeWeightError("no individual of type " + std::to_string(y) + " to remove");
  CountMeasure m = z.measure();
  m[y] -= 1;
  return m;
}

std::string type_label(const std::vector<int>& letters) {
  std::string s;
  for (int l : letters) {
    if (l < 0 || l > 9) throw ValidationError("type labels support alphabets of size <= 10");
    s += static_cast<char>('0' + l);
  }
  return s;
}

std::vector<int> parse_type_label(const std::string& label) {
  std::vector<int> letters;
  for (char c : label) {
    if (c < '0' || c > '9') throw ParseError("bad type label '" + label + "'");
    letters.push_back(c - '0');
  }
  return letters;
}

void write_measure_csv(std::ostream& os, const MeasureD& m) {
  os << "type,weight\n";
  char buf[64];
  for (TypeIndex i = 0; i < m.size(); ++i) {
    std::snprintf(buf, sizeof buf, "%.17g", m[i]);
    os << type_label(m.decode(i)) << ',' << buf << '\n';
  }
}

MeasureD read_measure_csv(std::istream& is, const SiteSet& sites, const std::vector<int>& radices) {
  MeasureD m(sites, radices);
  std::string line;
  bool header = false;
  std::size_t lineno = 0;
  while (std::getline(is, line)) {
    ++lineno;
    if (line.empty() || line[0] == '#') continue;
    if (!header) {
      if (line != "type,weight") throw ParseError("line " + std::to_string(lineno) + ": expected header 'type,weight'");
      header = true;
      continue;
    }
    const auto comma = line.find(',');
    if (comma == std::string::npos)
      throw ParseError("line " + std::to_string(lineno) + ": expected 'type,weight'");
    const auto letters = parse_type_label(line.substr(0, comma));
    if (letters.size() != sites.size())
      throw ParseError("line " + std::to_string(lineno) + ": type has the wrong number of sites");
    try {
      m[m.encode(letters)] = std::stod(line.substr(comma + 1));
    } catch (const std::invalid_argument&) {
      throw ParseError("line " + std::to_string(lineno) + ": bad weight");
    }
  }
  return m;
}

}  // namespace moran
