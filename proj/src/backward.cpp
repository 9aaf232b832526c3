#include "moran/backward.hpp"

#include <cmath>
#include <istream>
#include <map>
#include <ostream>
#include <random>
#include <sstream>

#include "moran/errors.hpp"

namespace moran {

const char* to_string(Variant v) {
  switch (v) {
    case Variant::finite_n: return "finite_n";
    case Variant::deterministic_limit: return "deterministic_limit";
    case Variant::diffusion_limit: return "diffusion_limit";
  }
  return "?";
}

Variant parse_variant(std::string_view text) {
  if (text == "finite_n" || text == "finite") return Variant::finite_n;
  if (text == "deterministic_limit" || text == "deterministic") return Variant::deterministic_limit;
  if (text == "diffusion_limit" || text == "diffusion") return Variant::diffusion_limit;
  throw ValidationError("unknown variant '" + std::string(text) +
                        "' (expected finite_n, deterministic_limit or diffusion_limit)");
}

BackwardModel BackwardModel::finite(int N, RecombinationDistribution recomb) {
  if (N < 1) throw ValidationError("population size N must be at least 1");
  BackwardModel m;
  m.n = recomb.n();
  m.N = N;
  m.recomb = std::move(recomb);
  m.variant = Variant::finite_n;
  return m;
}

BackwardModel BackwardModel::deterministic(RecombinationDistribution recomb) {
  BackwardModel m;
  m.n = recomb.n();
  m.recomb = std::move(recomb);
  m.variant = Variant::deterministic_limit;
  return m;
}

BackwardModel BackwardModel::diffusion(DiffusionRates rho) {
  BackwardModel m;
  m.n = rho.n();
  m.recomb = RecombinationDistribution::none(m.n);
  m.rho = std::move(rho);
  m.variant = Variant::diffusion_limit;
  return m;
}

double parent_weight(int N, std::size_t m, std::size_t k) {
  if (k > static_cast<std::size_t>(N)) return 0.0;
  double w = 1.0;
  for (std::size_t occupied = m - 1; occupied < k; ++occupied)
    w *= static_cast<double>(static_cast<std::size_t>(N) - occupied);
  return w;
}

double theta_rate(const BackwardModel& model, std::size_t j, const Partition& jj,
                  const Partition& a, const Partition& b) {
  if (model.variant != Variant::finite_n)
    throw ValidationError("theta_rate is defined for the finite-N variant");
  const std::size_t m = a.size();
  if (m > static_cast<std::size_t>(model.N)) return 0.0;
  const SiteSet& aj = a.block(j);
  if (jj.ground() != aj) throw GroundMismatchError("jj must partition block A_j");
  if (b.ground() != a.ground()) return 0.0;
  if (!refines(jj, restrict(b, aj))) return 0.0;
  const Partition rest = a.without_block(j);
  if (!rest.empty() && restrict(b, rest.ground()) != rest) return 0.0;
  const double r = marginal_recomb_prob(model.recomb, jj);
  if (r == 0.0) return 0.0;
  return r / std::pow(static_cast<double>(model.N), static_cast<double>(jj.size())) *
         parent_weight(model.N, m, b.size());
}

namespace {

void require_sites(const BackwardModel& model, std::size_t site_cap) {
  if (static_cast<std::size_t>(model.n) > site_cap)
    throw SizeCapError("n = " + std::to_string(model.n) + " exceeds the site cap of " +
                       std::to_string(site_cap) + " (Bell number too large)");
}

PartitionGenerator empty_generator(const BackwardModel& model, std::size_t site_cap) {
  require_sites(model, site_cap);
  PartitionGenerator g;
  g.states = PartitionIndex(enumerate_partitions(model.sites(), site_cap));
  const auto s = static_cast<Eigen::Index>(g.states.size());
  g.Q = Eigen::MatrixXd::Zero(s, s);
  return g;
}

// Sets the diagonal so that every row sums to zero.
void close_rows(Eigen::MatrixXd& q) {
  q.diagonal().setZero();
  q.diagonal() = -q.rowwise().sum();
}

std::vector<SiteSet> other_blocks(const Partition& a, std::size_t j) {
  std::vector<SiteSet> out;
  for (std::size_t i = 0; i < a.size(); ++i)
    if (i != j) out.push_back(a.block(i));
  return out;
}

}  // namespace

PartitionGenerator generator_theta(const BackwardModel& model, std::size_t site_cap) {
  if (model.variant != Variant::finite_n)
    throw ValidationError("generator_theta is the finite-N generator");
  PartitionGenerator g = empty_generator(model, site_cap);
  const int N = model.N;
  for (std::size_t i = 0; i < g.states.size(); ++i) {
    const Partition& a = g.states[i];
    if (a.size() > static_cast<std::size_t>(N)) continue;
    for (std::size_t j = 0; j < a.size(); ++j) {
      for (const auto& jj : ordered_partitions_le2(a.block(j))) {
        const double r = marginal_recomb_prob(model.recomb, jj);
        if (r == 0.0) continue;
        const double base = r / std::pow(static_cast<double>(N), static_cast<double>(jj.size()));
        // Fragments choose parents one after the other: an occupied parent
        // with weight 1 each, or one of the N − k unoccupied ones.
        std::vector<SiteSet> groups = other_blocks(a, j);
        auto place = [&](auto&& self, std::size_t f, double w) -> void {
          if (f == jj.size()) {
            const Partition b = canonicalize(groups);
            if (b != a) g.Q(static_cast<Eigen::Index>(i),
                            static_cast<Eigen::Index>(g.states.index_of(b))) += base * w;
            return;
          }
          const SiteSet& frag = jj.block(f);
          for (std::size_t p = 0; p < groups.size(); ++p) {
            const SiteSet saved = groups[p];
            groups[p] = saved.united(frag);
            self(self, f + 1, w);
            groups[p] = saved;
          }
          const double fresh = static_cast<double>(N) - static_cast<double>(groups.size());
          if (fresh > 0.0) {
            groups.push_back(frag);
            self(self, f + 1, w * fresh);
            groups.pop_back();
          }
        };
        place(place, 0, 1.0);
      }
    }
  }
  close_rows(g.Q);
  return g;
}

PartitionGenerator generator_theta_formula(const BackwardModel& model, std::size_t site_cap) {
  if (model.variant != Variant::finite_n)
    throw ValidationError("generator_theta_formula is the finite-N generator");
  PartitionGenerator g = empty_generator(model, site_cap);
  for (std::size_t i = 0; i < g.states.size(); ++i) {
    const Partition& a = g.states[i];
    for (std::size_t k = 0; k < g.states.size(); ++k) {
      if (k == i) continue;
      double total = 0.0;
      for (std::size_t j = 0; j < a.size(); ++j)
        for (const auto& jj : ordered_partitions_le2(a.block(j)))
          total += theta_rate(model, j, jj, a, g.states[k]);
      g.Q(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(k)) = total;
    }
  }
  close_rows(g.Q);
  return g;
}

namespace {

template <typename RateOf>
void add_splits(PartitionGenerator& g, RateOf&& rate_of) {
  for (std::size_t i = 0; i < g.states.size(); ++i) {
    const Partition& a = g.states[i];
    for (std::size_t j = 0; j < a.size(); ++j) {
      const auto options = ordered_partitions_le2(a.block(j));
      for (std::size_t k = 1; k < options.size(); ++k) {
        const double r = rate_of(options[k]);
        if (r == 0.0) continue;
        const Partition b = a.without_block(j).disjoint_union(options[k]);
        g.Q(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(g.states.index_of(b))) += r;
      }
    }
  }
}

}  // namespace

PartitionGenerator generator_theta_det(const BackwardModel& model, std::size_t site_cap) {
  PartitionGenerator g = empty_generator(model, site_cap);
  add_splits(g, [&](const Partition& jj) { return marginal_recomb_prob(model.recomb, jj); });
  close_rows(g.Q);
  return g;
}

PartitionGenerator generator_theta_diff(const BackwardModel& model, std::size_t site_cap) {
  if (!model.rho) throw ValidationError("the diffusion limit needs rates rho");
  PartitionGenerator g = empty_generator(model, site_cap);
  add_splits(g, [&](const Partition& jj) { return marginal_rate(*model.rho, jj); });
  for (std::size_t i = 0; i < g.states.size(); ++i) {
    const Partition& a = g.states[i];
    for (std::size_t j = 0; j < a.size(); ++j)
      for (std::size_t k = j + 1; k < a.size(); ++k) {
        std::vector<SiteSet> blocks = other_blocks(a, j);
        for (auto& blk : blocks)
          if (blk == a.block(k)) blk = blk.united(a.block(j));
        const Partition b = canonicalize(std::move(blocks));
        g.Q(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(g.states.index_of(b))) += 2.0;
      }
  }
  close_rows(g.Q);
  return g;
}

PartitionGenerator generator(const BackwardModel& model, std::size_t site_cap) {
  switch (model.variant) {
    case Variant::finite_n: return generator_theta(model, site_cap);
    case Variant::deterministic_limit: return generator_theta_det(model, site_cap);
    case Variant::diffusion_limit: return generator_theta_diff(model, site_cap);
  }
  throw ValidationError("unknown variant");
}

std::vector<std::size_t> three_site_display_order() {
  const PartitionIndex idx(enumerate_partitions(SiteSet::range(1, 3)));
  std::vector<std::size_t> p;
  for (const char* s : {"1,2,3", "1|2,3", "1,2|3", "1,3|2", "1|2|3"})
    p.push_back(idx.index_of(parse_partition(s)));
  return p;
}

Eigen::MatrixXd to_display_order(const Eigen::MatrixXd& m) {
  if (m.rows() != 5 || m.cols() != 5) throw ShapeError("expected a 5x5 matrix over P({1,2,3})");
  const auto p = three_site_display_order();
  Eigen::MatrixXd out(5, 5);
  for (Eigen::Index i = 0; i < 5; ++i)
    for (Eigen::Index k = 0; k < 5; ++k)
      out(i, k) = m(static_cast<Eigen::Index>(p[static_cast<std::size_t>(i)]),
                    static_cast<Eigen::Index>(p[static_cast<std::size_t>(k)]));
  return out;
}

void write_generator_csv(std::ostream& os, const PartitionGenerator& g) {
  os << "state";
  for (const auto& s : g.states.states()) os << ",\"" << s.to_string() << '"';
  os << '\n';
  char buf[32];
  for (std::size_t i = 0; i < g.states.size(); ++i) {
    os << '"' << g.states[i].to_string() << '"';
    for (Eigen::Index k = 0; k < g.Q.cols(); ++k) {
      std::snprintf(buf, sizeof buf, "%.17g", g.Q(static_cast<Eigen::Index>(i), k));
      os << ',' << buf;
    }
    os << '\n';
  }
}

Partition PartitionTrajectory::state_at(double t) const {
  Partition cur = initial;
  for (const auto& e : events) {
    if (e.time > t) break;
    cur = e.state;
  }
  return cur;
}

namespace {

// Split choices of a block with their marginal probabilities (or rates).
struct SplitTable {
  std::vector<Partition> options;
  std::discrete_distribution<std::size_t> pick;
};

class BlockSplits {
 public:
  explicit BlockSplits(const BackwardModel& model) : model_(model) {}

  SplitTable& operator()(const SiteSet& block) {
    auto it = cache_.find(block);
    if (it != cache_.end()) return it->second;
    SplitTable t;
    t.options = ordered_partitions_le2(block);
    std::vector<double> w;
    for (const auto& o : t.options) w.push_back(marginal_recomb_prob(model_.recomb, o));
    t.pick = std::discrete_distribution<std::size_t>(w.begin(), w.end());
    return cache_.emplace(block, std::move(t)).first->second;
  }

 private:
  const BackwardModel& model_;
  std::map<SiteSet, SplitTable> cache_;
};

void require_initial(const BackwardModel& model, const Partition& sigma0) {
  if (sigma0.ground() != model.sites())
    throw InvalidInitialError("initial partition " + sigma0.to_string() +
                              " is not a partition of 1.." + std::to_string(model.n));
  if (model.variant == Variant::finite_n && sigma0.size() > static_cast<std::size_t>(model.N))
    throw InvalidInitialError("initial partition has " + std::to_string(sigma0.size()) +
                              " blocks but N = " + std::to_string(model.N));
}

// One event of the finite-N or deterministic narrative, at total rate m.
Partition narrative_step(const BackwardModel& model, const Partition& a, BlockSplits& splits,
                         Rng& rng) {
  std::uniform_int_distribution<std::size_t> block(0, a.size() - 1);
  const std::size_t j = block(rng);
  SplitTable& t = splits(a.block(j));
  const Partition& jj = t.options[t.pick(rng)];
  if (model.variant == Variant::deterministic_limit) {
    if (jj.size() == 1) return a;
    return a.without_block(j).disjoint_union(jj);
  }
  // Parents are labelled 0..N−1; the other blocks sit in 0..m−2.
  std::vector<SiteSet> groups = other_blocks(a, j);
  std::map<std::size_t, std::size_t> fresh;
  std::uniform_int_distribution<std::size_t> parent(0, static_cast<std::size_t>(model.N) - 1);
  for (const auto& frag : jj.blocks()) {
    const std::size_t p = parent(rng);
    if (p < groups.size() && p + 1 < a.size()) {
      groups[p] = groups[p].united(frag);
    } else if (auto it = fresh.find(p); it != fresh.end()) {
      groups[it->second] = groups[it->second].united(frag);
    } else {
      fresh.emplace(p, groups.size());
      groups.push_back(frag);
    }
  }
  return canonicalize(std::move(groups));
}

// Gillespie step of the diffusion limit; returns false if no event can occur.
bool diffusion_step(const BackwardModel& model, Partition& a, double& t, Rng& rng) {
  std::vector<Partition> targets;
  std::vector<double> rates;
  for (std::size_t j = 0; j < a.size(); ++j) {
    const auto options = ordered_partitions_le2(a.block(j));
    for (std::size_t k = 1; k < options.size(); ++k) {
      const double r = marginal_rate(*model.rho, options[k]);
      if (r == 0.0) continue;
      targets.push_back(a.without_block(j).disjoint_union(options[k]));
      rates.push_back(r);
    }
  }
  const std::size_t m = a.size();
  const double coal = static_cast<double>(m) * static_cast<double>(m - 1);
  double split_total = 0.0;
  for (double r : rates) split_total += r;
  const double total = split_total + coal;
  if (total <= 0.0) return false;
  t += std::exponential_distribution<double>(total)(rng);
  if (std::uniform_real_distribution<double>(0.0, total)(rng) < split_total) {
    std::discrete_distribution<std::size_t> pick(rates.begin(), rates.end());
    a = targets[pick(rng)];
    return true;
  }
  std::uniform_int_distribution<std::size_t> first(0, m - 1), second(0, m - 2);
  const std::size_t j = first(rng);
  std::size_t k = second(rng);
  if (k >= j) ++k;
  std::vector<SiteSet> blocks;
  for (std::size_t i = 0; i < m; ++i)
    if (i != j && i != k) blocks.push_back(a.block(i));
  blocks.push_back(a.block(j).united(a.block(k)));
  a = canonicalize(std::move(blocks));
  return true;
}

template <typename OnEvent>
void run_backward(const BackwardModel& model, const Partition& sigma0, double t_end, Rng& rng,
                  OnEvent&& on_event) {
  require_initial(model, sigma0);
  if (model.variant == Variant::diffusion_limit && !model.rho)
    throw ValidationError("the diffusion limit needs rates rho");
  Partition cur = sigma0;
  double t = 0.0;
  if (model.variant == Variant::diffusion_limit) {
    while (true) {
      Partition next = cur;
      if (!diffusion_step(model, next, t, rng) || t > t_end) return;
      on_event(t, cur, next);
      cur = std::move(next);
    }
  }
  BlockSplits splits(model);
  while (true) {
    t += std::exponential_distribution<double>(static_cast<double>(cur.size()))(rng);
    if (t > t_end) return;
    Partition next = narrative_step(model, cur, splits, rng);
    on_event(t, cur, next);
    cur = std::move(next);
  }
}

}  // namespace

PartitionTrajectory simulate_backward(const BackwardModel& model, const Partition& sigma0,
                                      double t_end, std::uint64_t seed, std::uint64_t replicate,
                                      BackwardOptions options) {
  Rng rng = make_stream(seed, replicate);
  PartitionTrajectory tr{sigma0, {}, seed, replicate};
  run_backward(model, sigma0, t_end, rng,
               [&](double t, const Partition& from, const Partition& to) {
                 if (to != from || options.exact_events) tr.events.push_back({t, to});
               });
  return tr;
}

Partition simulate_backward_state(const BackwardModel& model, const Partition& sigma0,
                                  double t_end, Rng& rng) {
  Partition last = sigma0;
  run_backward(model, sigma0, t_end, rng,
               [&](double, const Partition&, const Partition& to) { last = to; });
  return last;
}

void write_partition_trajectory_csv(std::ostream& os, const PartitionTrajectory& tr) {
  char buf[32];
  os << "time,partition\n";
  os << "0,\"" << tr.initial.to_string() << "\"\n";
  for (const auto& e : tr.events) {
    std::snprintf(buf, sizeof buf, "%.17g", e.time);
    os << buf << ",\"" << e.state.to_string() << "\"\n";
  }
}

std::vector<PartitionEvent> read_partition_trajectory_csv(std::istream& is) {
  std::vector<PartitionEvent> out;
  std::string line;
  std::size_t lineno = 0;
  bool header = false;
  while (std::getline(is, line)) {
    ++lineno;
    if (line.empty() || line[0] == '#') continue;
    if (!header) {
      if (line != "time,partition") throw ParseError("line " + std::to_string(lineno) +
                                                     ": expected header 'time,partition'");
      header = true;
      continue;
    }
    const auto comma = line.find(',');
    if (comma == std::string::npos)
      throw ParseError("line " + std::to_string(lineno) + ": missing partition field");
    std::string field = line.substr(comma + 1);
    if (field.size() >= 2 && field.front() == '"' && field.back() == '"')
      field = field.substr(1, field.size() - 2);
    try {
      out.push_back({std::stod(line.substr(0, comma)), parse_partition(field)});
    } catch (const std::invalid_argument&) {
      throw ParseError("line " + std::to_string(lineno) + ": bad time value");
    }
  }
  return out;
}

}  // namespace moran
