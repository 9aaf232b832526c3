#include "moran/forward.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <istream>
#include <limits>
#include <ostream>
#include <random>
#include <string>

namespace moran {

ForwardModel::ForwardModel(SiteSpace space_, int N_, RecombinationDistribution recomb_)
    : space(std::move(space_)), N(N_), recomb(std::move(recomb_)) {
  if (N < 1) throw ValidationError("population size N must be at least 1");
  if (recomb.n() != space.n())
    throw ValidationError("recombination distribution has " + std::to_string(recomb.n()) +
                          " sites, type space has " + std::to_string(space.n()));
}

MeasureD offspring_distribution(const ForwardModel& model, const PopulationState& z) {
  const SiteSet s = model.space.all_sites();
  MeasureD q(model.space, s);
  for (const auto& a : ordered_partitions_le2(s)) {
    const double r = model.recomb.prob(a);
    if (r == 0.0) continue;
    q += r * recombinator(a, z.measure());
  }
  return q;
}

double rate_lambda(const ForwardModel& model, const PopulationState& z, TypeIndex y,
                   TypeIndex x) {
  if (z[y] == 0) return 0.0;
  return offspring_distribution(model, z)[x] * static_cast<double>(z[y]);
}

std::size_t population_state_count(std::size_t types, int N) {
  // C(N+k−1, k−1), computed incrementally; each partial product is a binomial.
  const std::size_t k = types - 1;
  std::size_t c = 1;
  for (std::size_t i = 1; i <= k; ++i) {
    const std::size_t num = static_cast<std::size_t>(N) + i;
    if (c > std::numeric_limits<std::size_t>::max() / num)
      return std::numeric_limits<std::size_t>::max();
    c = c * num / i;
  }
  return c;
}

std::vector<PopulationState> enumerate_population_states(const SiteSpace& space, int N,
                                                         std::size_t cap) {
  const std::size_t types = space.type_count();
  const std::size_t count = population_state_count(types, N);
  if (count > cap)
    throw SizeCapError("state space has " + std::to_string(count) +
                       " population states, above the cap of " + std::to_string(cap));
  std::vector<PopulationState> out;
  out.reserve(count);
  std::vector<std::int64_t> c(types, 0);
  auto rec = [&](auto&& self, std::size_t pos, std::int64_t left) -> void {
    if (pos + 1 == types) {
      c[pos] = left;
      out.push_back(PopulationState::from_counts(space, c));
      return;
    }
    for (std::int64_t v = left; v >= 0; --v) {
      c[pos] = v;
      self(self, pos + 1, left - v);
    }
  };
  rec(rec, 0, N);
  std::reverse(out.begin(), out.end());
  return out;
}

std::size_t ForwardGenerator::index_of(const PopulationState& z) const {
  const auto& w = z.measure().weights();
  auto it = lookup_.find(std::vector<std::int64_t>(w.data(), w.data() + w.size()));
  if (it == lookup_.end()) throw ValidationError("population state is not in the state space");
  return it->second;
}

ForwardGenerator generator_lambda(const ForwardModel& model, std::size_t cap) {
  ForwardGenerator g;
  g.states = enumerate_population_states(model.space, model.N, cap);
  for (std::size_t i = 0; i < g.states.size(); ++i) {
    const auto& w = g.states[i].measure().weights();
    g.lookup_.emplace(std::vector<std::int64_t>(w.data(), w.data() + w.size()), i);
  }

  const std::size_t types = model.space.type_count();
  std::vector<Eigen::Triplet<double>> trip;
  for (std::size_t i = 0; i < g.states.size(); ++i) {
    const PopulationState& z = g.states[i];
    const MeasureD q = offspring_distribution(model, z);
    double out_rate = 0.0;
    for (TypeIndex y = 0; y < types; ++y) {
      if (z[y] == 0) continue;
      const CountMeasure removed = sub_delta(z, y);
      for (TypeIndex x = 0; x < types; ++x) {
        if (x == y || q[x] == 0.0) continue;
        const double rate = q[x] * static_cast<double>(z[y]);
        CountMeasure next = removed;
        next[x] += 1;
        const std::size_t j = g.index_of(PopulationState(model.space, std::move(next)));
        trip.emplace_back(static_cast<int>(i), static_cast<int>(j), rate);
        out_rate += rate;
      }
    }
    trip.emplace_back(static_cast<int>(i), static_cast<int>(i), -out_rate);
  }
  const auto n = static_cast<Eigen::Index>(g.states.size());
  g.Q.resize(n, n);
  g.Q.setFromTriplets(trip.begin(), trip.end());
  return g;
}

PopulationState TrajectoryRecord::state_at(double t) const {
  CountMeasure m = initial.measure();
  for (const auto& e : events) {
    if (e.time > t) break;
    m[e.dying_type] -= 1;
    m[e.new_type] += 1;
  }
  return PopulationState::from_counts(
      SiteSpace(m.radices()),
      std::vector<std::int64_t>(m.weights().data(), m.weights().data() + m.size()));
}

void write_forward_trajectory_csv(std::ostream& os, const TrajectoryRecord& tr) {
  const CountMeasure& z0 = tr.initial.measure();
  os << "time,dying,new\n";
  for (TypeIndex x = 0; x < z0.size(); ++x)
    for (std::int64_t k = 0; k < z0[x]; ++k) os << "0,," << type_label(z0.decode(x)) << '\n';
  char buf[32];
  for (const auto& e : tr.events) {
    std::snprintf(buf, sizeof buf, "%.17g", e.time);
    os << buf << ',' << type_label(z0.decode(e.dying_type)) << ','
       << type_label(z0.decode(e.new_type)) << '\n';
  }
}

TrajectoryRecord read_forward_trajectory_csv(std::istream& is, const SiteSpace& space) {
  CountMeasure z0(space.all_sites(), space.cardinalities());
  std::vector<ForwardEvent> events;
  std::string line;
  std::size_t lineno = 0;
  bool header = false;
  auto type_of = [&](const std::string& label, const std::string& where) {
    const auto letters = parse_type_label(label);
    if (letters.size() != z0.sites().size()) throw ParseError(where + "type has the wrong number of sites");
    for (std::size_t i = 0; i < letters.size(); ++i)
      if (letters[i] >= z0.radices()[i]) throw ParseError(where + "letter outside the alphabet");
    return z0.encode(letters);
  };
  while (std::getline(is, line)) {
    ++lineno;
    if (line.empty() || line[0] == '#') continue;
    const std::string where = "line " + std::to_string(lineno) + ": ";
    if (!header) {
      if (line != "time,dying,new") throw ParseError(where + "expected header 'time,dying,new'");
      header = true;
      continue;
    }
    const auto c1 = line.find(','), c2 = line.find(',', c1 == std::string::npos ? 0 : c1 + 1);
    if (c1 == std::string::npos || c2 == std::string::npos) throw ParseError(where + "expected three fields");
    double t = 0.0;
    try {
      t = std::stod(line.substr(0, c1));
    } catch (const std::exception&) {
      throw ParseError(where + "bad time");
    }
    const std::string dying = line.substr(c1 + 1, c2 - c1 - 1);
    const TypeIndex born = type_of(line.substr(c2 + 1), where);
    if (dying.empty()) {
      if (t != 0.0 || !events.empty()) throw ParseError(where + "initial births must come first, at time 0");
      z0[born] += 1;
    } else {
      events.push_back({t, type_of(dying, where), born});
    }
  }
  if (!header) throw ParseError("missing header 'time,dying,new'");
  TrajectoryRecord tr{PopulationState(space, z0), std::move(events)};
  return tr;
}

namespace {

// Individual-based population. Every individual dies at rate 1; the
// replacement is assembled from parents drawn uniformly with replacement
// from the population just before the death (the dying individual included).
class Population {
 public:
  Population(const ForwardModel& model, const PopulationState& z0)
      : counts_(z0.measure()) {
    for (TypeIndex x = 0; x < counts_.size(); ++x)
      for (std::int64_t c = 0; c < counts_[x]; ++c) individuals_.push_back(x);
    // stride_[c]: number of types sharing a prefix of sites 1..c.
    const auto& radices = counts_.radices();
    stride_.assign(radices.size() + 1, 1);
    for (std::size_t c = radices.size(); c-- > 0;)
      stride_[c] = stride_[c + 1] * static_cast<TypeIndex>(radices[c]);
    std::vector<double> w{model.recomb.no_recombination()};
    for (double p : model.recomb.crossovers()) w.push_back(p);
    cut_ = std::discrete_distribution<int>(w.begin(), w.end());
  }

  double total_rate() const { return static_cast<double>(individuals_.size()); }

  // Returns (dying type, new type) and updates the population.
  std::pair<TypeIndex, TypeIndex> step(Rng& rng) {
    std::uniform_int_distribution<std::size_t> pick(0, individuals_.size() - 1);
    const std::size_t dying = pick(rng);
    const int cut = cut_(rng);
    TypeIndex child = individuals_[pick(rng)];
    if (cut > 0) {
      const TypeIndex second = individuals_[pick(rng)];
      const TypeIndex s = stride_[static_cast<std::size_t>(cut)];
      child = (child / s) * s + second % s;
    }
    const TypeIndex old = individuals_[dying];
    individuals_[dying] = child;
    counts_[old] -= 1;
    counts_[child] += 1;
    return {old, child};
  }

  bool monomorphic() const { return counts_[individuals_.front()] == counts_.norm(); }
  TypeIndex some_type() const { return individuals_.front(); }
  const CountMeasure& counts() const { return counts_; }

 private:
  CountMeasure counts_;
  std::vector<TypeIndex> individuals_;
  std::vector<TypeIndex> stride_;
  std::discrete_distribution<int> cut_;
};

void require_initial(const ForwardModel& model, const PopulationState& z0) {
  if (z0.N() != model.N)
    throw InvalidInitialError("initial population has " + std::to_string(z0.N()) +
                              " individuals, model has N = " + std::to_string(model.N));
  if (z0.measure().radices() != model.space.cardinalities())
    throw InvalidInitialError("initial population lives on a different type space");
}

}  // namespace

TrajectoryRecord simulate_forward(const ForwardModel& model, const PopulationState& z0,
                                  double t_end, std::uint64_t seed, std::uint64_t replicate,
                                  SimulationOptions options) {
  require_initial(model, z0);
  Rng rng = make_stream(seed, replicate);
  TrajectoryRecord rec{z0, {}, seed, replicate};
  Population pop(model, z0);
  std::exponential_distribution<double> wait(pop.total_rate());
  double t = 0.0;
  while (true) {
    t += wait(rng);
    if (t > t_end) break;
    const auto [dying, born] = pop.step(rng);
    if (dying != born || options.exact_events) rec.events.push_back({t, dying, born});
  }
  return rec;
}

PopulationState simulate_forward_state(const ForwardModel& model, const PopulationState& z0,
                                       double t_end, Rng& rng) {
  require_initial(model, z0);
  Population pop(model, z0);
  std::exponential_distribution<double> wait(pop.total_rate());
  for (double t = wait(rng); t <= t_end; t += wait(rng)) pop.step(rng);
  return PopulationState(model.space, pop.counts());
}

TypeIndex simulate_to_absorption(const ForwardModel& model, const PopulationState& z0, Rng& rng) {
  require_initial(model, z0);
  Population pop(model, z0);
  while (!pop.monomorphic()) pop.step(rng);
  return pop.some_type();
}

MeasureD deterministic_rhs(const RecombinationDistribution& recomb, const MeasureD& omega) {
  MeasureD out(omega.sites(), omega.radices());
  const auto splits = ordered_partitions_le2(omega.sites());
  for (std::size_t k = 1; k < splits.size(); ++k) {
    const double r = recomb.crossover(static_cast<int>(k));
    if (r == 0.0) continue;
    out += r * (recombinator(splits[k], omega) - omega);
  }
  return out;
}

MeasureD deterministic_step(const RecombinationDistribution& recomb, const MeasureD& omega,
                            double dt) {
  const MeasureD k1 = deterministic_rhs(recomb, omega);
  const MeasureD k2 = deterministic_rhs(recomb, omega + (dt / 2) * k1);
  const MeasureD k3 = deterministic_rhs(recomb, omega + (dt / 2) * k2);
  const MeasureD k4 = deterministic_rhs(recomb, omega + dt * k3);
  return omega + (dt / 6) * (k1 + 2.0 * k2 + 2.0 * k3 + k4);
}

MeasureD deterministic_solve(const RecombinationDistribution& recomb, MeasureD omega, double t,
                             double dt) {
  if (!(dt > 0.0)) throw ValidationError("step size must be positive");
  const auto steps = static_cast<long>(std::ceil(t / dt - 1e-12));
  const double h = steps > 0 ? t / static_cast<double>(steps) : 0.0;
  for (long i = 0; i < steps; ++i) omega = deterministic_step(recomb, omega, h);
  return omega;
}

}  // namespace moran
