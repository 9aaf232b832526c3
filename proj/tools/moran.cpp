// moran: command-line driver for the forward/backward engines.
//
//   moran <subcommand> --config run.json [--seed S] [--reps R] [--t-end T]
//         [--grid G] [--out DIR] [--variant V] [--exact-events]
//
// Exit codes: 0 success, 2 invalid input, 3 size cap exceeded,
// 4 duality defect above 1e-8.

#include <algorithm>
#include <atomic>
#include <cmath>
#include <cstdio>
#include <exception>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <mutex>
#include <optional>
#include <set>
#include <sstream>
#include <string>
#include <thread>
#include <vector>

#include "CLI11.hpp"
#include "json.hpp"
#include "moran/backward.hpp"
#include "moran/errors.hpp"
#include "moran/expectation.hpp"
#include "moran/forward.hpp"

namespace fs = std::filesystem;
using nlohmann::json;
using namespace moran;

namespace {

constexpr double kDefectTolerance = 1e-8;

// ------------------------------------------------------------------ config

/// Where each key came from, for error messages of the form
/// "run.json:7: key 'N': ...".
class Locator {
 public:
  Locator(std::string path, std::string text) : path_(std::move(path)), text_(std::move(text)) {}

  void mark_flag(const std::string& key, const std::string& flag) { flags_[key] = flag; }

  std::string at(const std::string& key) const {
    if (auto it = flags_.find(key); it != flags_.end()) return it->second + ": ";
    const auto pos = text_.find('"' + key + '"');
    if (pos == std::string::npos) return path_ + ": ";
    const auto line = 1 + std::count(text_.begin(), text_.begin() + static_cast<std::ptrdiff_t>(pos), '\n');
    return path_ + ":" + std::to_string(line) + ": ";
  }

  [[noreturn]] void fail(const std::string& key, const std::string& what) const {
    throw ValidationError(at(key) + "key '" + key + "': " + what);
  }

  const std::string& path() const { return path_; }

 private:
  std::string path_, text_;
  std::map<std::string, std::string> flags_;
};

struct RunConfig {
  std::vector<int> alphabet;
  std::optional<int> N;
  std::vector<double> crossover;
  std::optional<std::vector<double>> rho;
  Variant variant = Variant::finite_n;
  std::optional<PopulationState> initial;
  Partition sigma0;
  double t_end = 1.0;
  int grid = 10;
  int reps = 100;
  std::uint64_t seed = 1;
  fs::path out = "out";
  bool exact_events = false;
  std::vector<Partition> partitions;
  std::optional<SiteSet> lde_sites;
  OdeMethod ode = OdeMethod::matrix_exponential;
  unsigned threads = 0;
  bool trajectory_files = true;
  std::size_t state_cap = kDefaultPopulationStateCap;
  std::size_t site_cap = kDefaultSiteCap;

  int n() const { return static_cast<int>(alphabet.size()); }
  SiteSpace space() const { return SiteSpace(alphabet); }
  std::vector<double> times() const {
    std::vector<double> t;
    for (int k = 0; k <= grid; ++k) t.push_back(t_end * k / grid);
    return t;
  }
};

const std::set<std::string> kKeys = {
    "alphabet_sizes", "sites", "N", "crossover_probs", "rho", "variant", "initial_population",
    "initial_partition", "t_end", "grid", "replicates", "seed", "output", "exact_events",
    "partitions", "lde_sites", "ode", "threads", "trajectory_files", "state_cap", "site_cap"};

template <typename T>
T get(const json& j, const std::string& key, const Locator& loc) {
  try {
    return j.at(key).get<T>();
  } catch (const json::exception&) {
    loc.fail(key, "has the wrong type");
  }
}

std::int64_t get_int(const json& j, const std::string& key, const Locator& loc, std::int64_t lo) {
  if (!j.at(key).is_number_integer()) loc.fail(key, "must be an integer");
  const auto v = j.at(key).get<std::int64_t>();
  if (v < lo) loc.fail(key, "must be at least " + std::to_string(lo));
  return v;
}

PopulationState read_initial(const json& v, const RunConfig& cfg, const Locator& loc,
                             const fs::path& base) {
  const SiteSpace space = cfg.space();
  std::vector<std::int64_t> counts(space.type_count(), 0);
  CountMeasure shape(space.all_sites(), space.cardinalities());
  if (v.is_array()) {
    if (v.size() != counts.size())
      loc.fail("initial_population", "expected " + std::to_string(counts.size()) + " counts, got " +
                                         std::to_string(v.size()));
    for (std::size_t i = 0; i < counts.size(); ++i) {
      if (!v[i].is_number_integer()) loc.fail("initial_population", "counts must be integers");
      counts[i] = v[i].get<std::int64_t>();
    }
  } else if (v.is_object()) {
    for (const auto& [label, c] : v.items()) {
      std::vector<int> letters;
      try {
        letters = parse_type_label(label);
      } catch (const ParseError& e) {
        loc.fail("initial_population", e.what());
      }
      if (letters.size() != shape.sites().size())
        loc.fail("initial_population", "type '" + label + "' has the wrong number of sites");
      for (std::size_t i = 0; i < letters.size(); ++i)
        if (letters[i] >= cfg.alphabet[i]) loc.fail("initial_population", "type '" + label + "' is outside the alphabet");
      if (!c.is_number_integer()) loc.fail("initial_population", "counts must be integers");
      counts[shape.encode(letters)] += c.get<std::int64_t>();
    }
  } else if (v.is_string()) {
    const fs::path file = base / v.get<std::string>();
    std::ifstream in(file);
    if (!in) loc.fail("initial_population", "cannot open '" + file.string() + "'");
    MeasureD m;
    try {
      m = read_measure_csv(in, space.all_sites(), space.cardinalities());
    } catch (const Error& e) {
      loc.fail("initial_population", file.string() + ": " + e.what());
    }
    for (TypeIndex i = 0; i < m.size(); ++i) {
      if (m[i] != std::floor(m[i])) loc.fail("initial_population", file.string() + ": weights must be integer counts");
      counts[i] = static_cast<std::int64_t>(m[i]);
    }
  } else {
    loc.fail("initial_population", "expected a count array, a {type: count} object or a CSV path");
  }
  try {
    return PopulationState::from_counts(space, counts);
  } catch (const Error& e) {
    loc.fail("initial_population", e.what());
  }
}

RunConfig read_config(const json& j, const Locator& loc, const fs::path& base) {
  if (!j.is_object()) throw ValidationError(loc.path() + ":1: the config must be a JSON object");
  for (const auto& [key, value] : j.items())
    if (!kKeys.count(key)) loc.fail(key, "unknown key");

  RunConfig cfg;
  if (!j.contains("alphabet_sizes")) throw ValidationError(loc.path() + ": missing required key 'alphabet_sizes'");
  cfg.alphabet = get<std::vector<int>>(j, "alphabet_sizes", loc);
  if (cfg.alphabet.empty()) loc.fail("alphabet_sizes", "at least one site is required");
  for (int a : cfg.alphabet)
    if (a < 1 || a > 10) loc.fail("alphabet_sizes", "alphabet sizes must be between 1 and 10");
  if (j.contains("sites") && get_int(j, "sites", loc, 1) != cfg.n())
    loc.fail("sites", "does not match the length of alphabet_sizes");
  if (j.contains("state_cap")) cfg.state_cap = static_cast<std::size_t>(get_int(j, "state_cap", loc, 1));
  if (j.contains("site_cap")) cfg.site_cap = static_cast<std::size_t>(get_int(j, "site_cap", loc, 1));
  try {
    (void)SiteSpace(cfg.alphabet, cfg.state_cap);
  } catch (const SizeCapError& e) {
    throw SizeCapError(loc.at("alphabet_sizes") + e.what());
  }

  if (j.contains("variant")) {
    try {
      cfg.variant = parse_variant(get<std::string>(j, "variant", loc));
    } catch (const ValidationError& e) {
      loc.fail("variant", e.what());
    }
  }
  if (j.contains("N")) cfg.N = static_cast<int>(get_int(j, "N", loc, 1));

  if (j.contains("crossover_probs")) {
    cfg.crossover = get<std::vector<double>>(j, "crossover_probs", loc);
    if (static_cast<int>(cfg.crossover.size()) != cfg.n() - 1)
      loc.fail("crossover_probs", "expected " + std::to_string(cfg.n() - 1) + " values (one per gap)");
    try {
      (void)RecombinationDistribution(cfg.crossover);
    } catch (const ValidationError& e) {
      loc.fail("crossover_probs", e.what());
    }
  } else if (cfg.variant != Variant::diffusion_limit) {
    if (cfg.n() > 1) throw ValidationError(loc.path() + ": missing required key 'crossover_probs'");
  }
  if (j.contains("rho")) {
    cfg.rho = get<std::vector<double>>(j, "rho", loc);
    if (static_cast<int>(cfg.rho->size()) != cfg.n() - 1)
      loc.fail("rho", "expected " + std::to_string(cfg.n() - 1) + " values (one per gap)");
    try {
      (void)DiffusionRates(*cfg.rho);
    } catch (const ValidationError& e) {
      loc.fail("rho", e.what());
    }
  } else if (cfg.variant == Variant::diffusion_limit) {
    loc.fail("variant", "the diffusion limit needs 'rho'");
  }

  if (j.contains("initial_population")) {
    cfg.initial = read_initial(j.at("initial_population"), cfg, loc, base);
    if (cfg.N && *cfg.N != cfg.initial->N())
      loc.fail("initial_population", "holds " + std::to_string(cfg.initial->N()) + " individuals but N = " +
                                         std::to_string(*cfg.N));
    cfg.N = cfg.initial->N();
  }

  const SiteSet all = SiteSet::range(1, cfg.n());
  cfg.sigma0 = Partition::coarsest(all);
  if (j.contains("initial_partition")) {
    try {
      cfg.sigma0 = parse_partition(get<std::string>(j, "initial_partition", loc));
    } catch (const Error& e) {
      loc.fail("initial_partition", e.what());
    }
    if (cfg.sigma0.ground() != all) loc.fail("initial_partition", "must partition {" + all.to_string() + "}");
    if (cfg.variant == Variant::finite_n && cfg.N && static_cast<int>(cfg.sigma0.size()) > *cfg.N)
      loc.fail("initial_partition", "has more blocks than N = " + std::to_string(*cfg.N));
  }
  if (j.contains("partitions")) {
    for (const auto& text : get<std::vector<std::string>>(j, "partitions", loc)) {
      try {
        cfg.partitions.push_back(parse_partition(text));
      } catch (const Error& e) {
        loc.fail("partitions", e.what());
      }
    }
  }
  if (j.contains("lde_sites")) {
    const auto v = get<std::vector<int>>(j, "lde_sites", loc);
    std::vector<Site> sites(v.begin(), v.end());
    for (Site s : sites)
      if (s < 1 || s > cfg.n()) loc.fail("lde_sites", "sites must lie in 1.." + std::to_string(cfg.n()));
    if (sites.empty()) loc.fail("lde_sites", "must be nonempty");
    cfg.lde_sites = SiteSet(sites);
  }

  if (j.contains("t_end")) {
    cfg.t_end = get<double>(j, "t_end", loc);
    if (!(cfg.t_end >= 0.0) || !std::isfinite(cfg.t_end)) loc.fail("t_end", "must be a finite time ≥ 0");
  }
  if (j.contains("grid")) cfg.grid = static_cast<int>(get_int(j, "grid", loc, 1));
  if (j.contains("replicates")) cfg.reps = static_cast<int>(get_int(j, "replicates", loc, 0));
  if (j.contains("seed")) cfg.seed = static_cast<std::uint64_t>(get_int(j, "seed", loc, 0));
  if (j.contains("output")) cfg.out = get<std::string>(j, "output", loc);
  if (j.contains("exact_events")) cfg.exact_events = get<bool>(j, "exact_events", loc);
  if (j.contains("trajectory_files")) cfg.trajectory_files = get<bool>(j, "trajectory_files", loc);
  if (j.contains("threads")) cfg.threads = static_cast<unsigned>(get_int(j, "threads", loc, 0));
  if (j.contains("ode")) {
    const auto m = get<std::string>(j, "ode", loc);
    if (m == "expm") cfg.ode = OdeMethod::matrix_exponential;
    else if (m == "rk4") cfg.ode = OdeMethod::rk4;
    else loc.fail("ode", "expected 'expm' or 'rk4'");
  }
  return cfg;
}

// ----------------------------------------------------------------- helpers

std::uint64_t fnv1a(const std::string& s) {
  std::uint64_t h = 0xcbf29ce484222325ull;
  for (unsigned char c : s) {
    h ^= c;
    h *= 0x100000001b3ull;
  }
  return h;
}

struct Context {
  RunConfig cfg;
  std::string command;
  std::string stamp;  // '#' lines heading every output file

  std::ofstream open(const fs::path& rel) const {
    const fs::path p = cfg.out / rel;
    fs::create_directories(p.parent_path());
    std::ofstream os(p);
    if (!os) throw ValidationError("cannot write '" + p.string() + "'");
    os << stamp;
    return os;
  }
};

std::string fmt(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

std::string quoted(const Partition& p) { return '"' + p.to_string() + '"'; }

/// Runs body(k) for k in [0, count) on a small pool. Results must be stored
/// per index by the caller, which keeps the output independent of scheduling.
template <typename Body>
void parallel_for(std::size_t count, unsigned threads, Body body) {
  if (threads == 0) threads = std::max(1u, std::thread::hardware_concurrency());
  threads = static_cast<unsigned>(std::min<std::size_t>(threads, std::max<std::size_t>(count, 1)));
  std::atomic<std::size_t> next{0};
  std::exception_ptr failure;
  std::mutex failure_mutex;
  auto worker = [&] {
    for (std::size_t k; (k = next.fetch_add(1)) < count;) {
      try {
        body(k);
      } catch (...) {
        std::lock_guard lock(failure_mutex);
        if (!failure) failure = std::current_exception();
        next = count;
      }
    }
  };
  std::vector<std::thread> pool;
  for (unsigned t = 1; t < threads; ++t) pool.emplace_back(worker);
  worker();
  for (auto& t : pool) t.join();
  if (failure) std::rethrow_exception(failure);
}

RecombinationDistribution recomb_of(const RunConfig& cfg) {
  return cfg.crossover.empty() ? RecombinationDistribution::none(cfg.n())
                               : RecombinationDistribution(cfg.crossover);
}

BackwardModel backward_of(const RunConfig& cfg) {
  switch (cfg.variant) {
    case Variant::finite_n:
      if (!cfg.N) throw ValidationError("the finite_n variant needs N (or an initial_population)");
      return BackwardModel::finite(*cfg.N, recomb_of(cfg));
    case Variant::deterministic_limit:
      return BackwardModel::deterministic(recomb_of(cfg));
    case Variant::diffusion_limit:
      return BackwardModel::diffusion(DiffusionRates(*cfg.rho));
  }
  throw ValidationError("unknown variant");
}

ForwardModel forward_of(const RunConfig& cfg) {
  if (!cfg.N) throw ValidationError("this command needs N (or an initial_population)");
  return ForwardModel(cfg.space(), *cfg.N, recomb_of(cfg));
}

const PopulationState& initial_of(const RunConfig& cfg) {
  if (!cfg.initial) throw ValidationError("this command needs 'initial_population'");
  return *cfg.initial;
}

std::vector<Partition> selected(const RunConfig& cfg, const PartitionIndex& idx) {
  for (const auto& p : cfg.partitions)
    if (!idx.contains(p)) throw ValidationError("partition " + p.to_string() + " is not a partition of the sites");
  return cfg.partitions;
}

// ---------------------------------------------------------------- commands

int cmd_simulate_forward(const Context& ctx) {
  const RunConfig& cfg = ctx.cfg;
  const ForwardModel model = forward_of(cfg);
  const PopulationState& z0 = initial_of(cfg);
  const PartitionIndex idx(enumerate_partitions(model.space.all_sites(), cfg.site_cap));
  const std::vector<double> times = cfg.reps > 0 ? cfg.times() : std::vector<double>{0.0};
  const auto reps = static_cast<std::size_t>(cfg.reps);

  // per replicate, per grid time: H_·(Z_t), Bell(n) × |X|
  std::vector<std::vector<Eigen::MatrixXd>> h(reps);
  parallel_for(reps, cfg.threads, [&](std::size_t k) {
    const auto tr = simulate_forward(model, z0, cfg.t_end, cfg.seed, k, {cfg.exact_events});
    if (cfg.trajectory_files) {
      char name[48];
      std::snprintf(name, sizeof name, "forward/rep_%06zu.csv", k);
      auto os = ctx.open(name);
      write_forward_trajectory_csv(os, tr);
    }
    for (double t : times) h[k].push_back(sampling_matrix(idx, tr.state_at(t).measure()));
  });

  std::vector<Eigen::MatrixXd> mean(times.size()), se(times.size());
  for (std::size_t g = 0; g < times.size(); ++g) {
    const Eigen::MatrixXd h0 = sampling_matrix(idx, z0.measure());
    if (reps == 0) {
      mean[g] = h0;
      se[g] = Eigen::MatrixXd::Zero(h0.rows(), h0.cols());
      continue;
    }
    Eigen::MatrixXd sum = Eigen::MatrixXd::Zero(h0.rows(), h0.cols()), sq = sum;
    for (std::size_t k = 0; k < reps; ++k) {
      sum += h[k][g];
      sq += h[k][g].cwiseAbs2();
    }
    const double r = static_cast<double>(reps);
    mean[g] = sum / r;
    se[g] = Eigen::MatrixXd::Zero(h0.rows(), h0.cols());
    if (reps > 1) se[g] = ((sq - r * mean[g].cwiseAbs2()).cwiseMax(0.0) / (r - 1) / r).cwiseSqrt();
  }

  auto os = ctx.open("summary.csv");
  os << "time,partition,type,value,stderr\n";
  const auto only = selected(cfg, idx);
  CountMeasure shape(model.space.all_sites(), model.space.cardinalities());
  for (std::size_t g = 0; g < times.size(); ++g)
    for (std::size_t a = 0; a < idx.size(); ++a) {
      if (!only.empty() && std::find(only.begin(), only.end(), idx[a]) == only.end()) continue;
      for (TypeIndex x = 0; x < shape.size(); ++x) {
        const auto i = static_cast<Eigen::Index>(a), c = static_cast<Eigen::Index>(x);
        os << fmt(times[g]) << ',' << quoted(idx[a]) << ',' << type_label(shape.decode(x)) << ','
           << fmt(mean[g](i, c)) << ',' << fmt(se[g](i, c)) << '\n';
      }
    }

  // Exact expectations through the dual process, for comparison: the largest
  // z-score over the whole grid, and at t_end over the selected partitions.
  double worst = 0.0, worst_end = 0.0;
  if (reps > 1) {
    const auto exact = expected_sampling(BackwardModel::finite(model.N, model.recomb), z0, times, cfg.ode);
    for (std::size_t g = 0; g < times.size(); ++g)
      for (std::size_t a = 0; a < idx.size(); ++a)
        for (Eigen::Index c = 0; c < mean[g].cols(); ++c) {
          const auto i = static_cast<Eigen::Index>(a);
          const double diff = std::abs(mean[g](i, c) - exact.values[g](i, c));
          if (diff <= 1e-12) continue;
          const double z = diff / std::max(se[g](i, c), 1e-300);
          worst = std::max(worst, z);
          if (g + 1 == times.size() && (only.empty() || std::find(only.begin(), only.end(), idx[a]) != only.end()))
            worst_end = std::max(worst_end, z);
        }
  }
  std::printf("simulate-forward: %zu replicates, %zu grid times\n", reps, times.size());
  if (reps > 1)
    std::printf("max |mean − exact|/SE at t_end (selected partitions) = %.3f, over the whole grid = %.3f\n",
                worst_end, worst);
  return 0;
}

int cmd_simulate_backward(const Context& ctx) {
  const RunConfig& cfg = ctx.cfg;
  const BackwardModel model = backward_of(cfg);
  const auto gen = generator(model, cfg.site_cap);
  if (!gen.states.contains(cfg.sigma0)) throw ValidationError("initial_partition is not a partition of the sites");
  const std::vector<double> times = cfg.times();
  const auto reps = static_cast<std::size_t>(cfg.reps);
  const auto states = static_cast<Eigen::Index>(gen.states.size());

  std::vector<std::vector<std::size_t>> at(reps);
  parallel_for(reps, cfg.threads, [&](std::size_t k) {
    const auto tr = simulate_backward(model, cfg.sigma0, cfg.t_end, cfg.seed, k, {cfg.exact_events});
    if (cfg.trajectory_files) {
      char name[48];
      std::snprintf(name, sizeof name, "backward/rep_%06zu.csv", k);
      auto os = ctx.open(name);
      write_partition_trajectory_csv(os, tr);
    }
    for (double t : times) at[k].push_back(gen.states.index_of(tr.state_at(t)));
  });

  // Exact law of Σ_t from row σ0 of e^{tQ}.
  Eigen::MatrixXd e0 = Eigen::MatrixXd::Zero(states, 1);
  e0(static_cast<Eigen::Index>(gen.states.index_of(cfg.sigma0)), 0) = 1.0;
  const auto exact = evolve(gen.Q.transpose(), e0, times, cfg.ode);

  auto os = ctx.open("summary.csv");
  os << "time,partition,frequency,stderr,exact\n";
  double worst = 0.0;
  const double r = static_cast<double>(reps);
  for (std::size_t g = 0; g < times.size(); ++g) {
    Eigen::VectorXd count = Eigen::VectorXd::Zero(states);
    for (std::size_t k = 0; k < reps; ++k) count(static_cast<Eigen::Index>(at[k][g])) += 1.0;
    for (Eigen::Index b = 0; b < states; ++b) {
      const double p = reps ? count(b) / r : 0.0;
      const double se = reps > 1 ? std::sqrt(p * (1 - p) / r) : 0.0;
      const double want = exact[g](b, 0);
      if (reps > 1 && std::abs(p - want) > 1e-12)
        worst = std::max(worst, std::abs(p - want) / std::max(std::sqrt(want * (1 - want) / r), 1e-300));
      os << fmt(times[g]) << ',' << quoted(gen.states[static_cast<std::size_t>(b)]) << ',' << fmt(p) << ','
         << fmt(se) << ',' << fmt(want) << '\n';
    }
  }
  std::printf("simulate-backward (%s): %zu replicates, max |frequency − exact|/SE = %.3f\n",
              to_string(model.variant), reps, worst);
  return 0;
}

int cmd_expectations(const Context& ctx) {
  const RunConfig& cfg = ctx.cfg;
  const BackwardModel model = backward_of(cfg);
  const auto e = expected_sampling(model, initial_of(cfg), cfg.times(), cfg.ode);
  auto os = ctx.open("expectations.csv");
  write_expectation_csv(os, e.times, e.partitions, e.radices, e.values, selected(cfg, e.partitions));
  auto gq = ctx.open("generator.csv");
  write_generator_csv(gq, generator(model, cfg.site_cap));
  std::printf("expectations (%s): %zu partitions × %zu times written\n", to_string(model.variant),
              e.partitions.size(), e.times.size());
  return 0;
}

int cmd_lde(const Context& ctx) {
  const RunConfig& cfg = ctx.cfg;
  const BackwardModel model = backward_of(cfg);
  const SiteSet u = cfg.lde_sites.value_or(model.sites());
  const auto l = lde_trajectory(model, initial_of(cfg), u, cfg.times(), cfg.ode);
  auto os = ctx.open("lde.csv");
  write_expectation_csv(os, l.times, l.partitions, l.radices, l.values, selected(cfg, l.partitions));
  if (model.n == 3 && (model.variant != Variant::finite_n || model.N >= 3)) {
    const auto tr = lde_conjugation_3site(model);
    auto rep = ctx.open("lde_report.txt");
    write_diagonalization_report(rep, tr);
    std::printf("diag(T Θ T⁻¹) in order 1,2,3 | 1|2,3 | 1,2|3 | 1,3|2 | 1|2|3:");
    for (Eigen::Index i = 0; i < tr.conjugated.rows(); ++i) std::printf(" %.10g", tr.conjugated(i, i));
    std::printf("\nresidual %.3e, largest strictly-upper entry %.3e\n", tr.residual, tr.upper_max);
  }
  std::printf("lde (%s): U = {%s}, %zu times written\n", to_string(model.variant), u.to_string().c_str(),
              l.times.size());
  return 0;
}

int cmd_duality_check(const Context& ctx) {
  const RunConfig& cfg = ctx.cfg;
  if (cfg.variant != Variant::finite_n) throw ValidationError("duality-check needs the finite_n variant");
  const ForwardModel fwd = forward_of(cfg);
  const double defect = check_generator_duality(fwd, BackwardModel::finite(fwd.N, fwd.recomb), cfg.state_cap);
  const bool ok = defect <= kDefectTolerance;
  auto os = ctx.open("duality.txt");
  os << "defect " << fmt(defect) << "\ntolerance " << fmt(kDefectTolerance) << '\n'
     << (ok ? "PASS" : "FAIL") << '\n';
  std::printf("duality defect max|ΛH − HΘᵀ| = %.3e (%s 1e-10) — %s\n", defect, defect < 1e-10 ? "<" : "≥",
              ok ? "PASS" : "FAIL");
  return ok ? 0 : 4;
}

int cmd_fixation(const Context& ctx) {
  const RunConfig& cfg = ctx.cfg;
  const ForwardModel fwd = forward_of(cfg);
  const PopulationState& z0 = initial_of(cfg);
  const MeasureD p = fixation_2site(fwd, z0);
  auto os = ctx.open("fixation.csv");
  write_measure_csv(os, p);

  if (cfg.reps > 0) {
    const auto reps = static_cast<std::size_t>(cfg.reps);
    std::vector<TypeIndex> fixed(reps);
    parallel_for(reps, cfg.threads, [&](std::size_t k) {
      Rng rng = make_stream(cfg.seed, k);
      fixed[k] = simulate_to_absorption(fwd, z0, rng);
    });
    std::vector<double> hits(p.size(), 0.0);
    for (TypeIndex x : fixed) hits[x] += 1.0;
    auto mc = ctx.open("fixation_mc.csv");
    mc << "type,predicted,observed,stderr\n";
    double worst = 0.0;
    const double r = static_cast<double>(reps);
    for (TypeIndex x = 0; x < p.size(); ++x) {
      const double f = hits[x] / r, se = std::sqrt(p[x] * (1 - p[x]) / r);
      if (std::abs(f - p[x]) > 1e-12) worst = std::max(worst, std::abs(f - p[x]) / std::max(se, 1e-300));
      mc << type_label(p.decode(x)) << ',' << fmt(p[x]) << ',' << fmt(f) << ',' << fmt(se) << '\n';
    }
    std::printf("fixation: %zu absorbed runs, max |observed − predicted|/SE = %.3f\n", reps, worst);
  }
  for (TypeIndex x = 0; x < p.size(); ++x) std::printf("%s %.12g\n", type_label(p.decode(x)).c_str(), p[x]);
  return 0;
}

// -------------------------------------------------------------------- main

struct Overrides {
  std::optional<std::uint64_t> seed;
  std::optional<int> reps;
  std::optional<double> t_end;
  std::optional<int> grid;
  std::optional<std::string> out, variant;
  bool exact_events = false;
};

int run(const std::string& command, const std::string& config_path, const Overrides& ov) {
  std::ifstream in(config_path);
  if (!in) throw ValidationError(config_path + ": cannot open the config file");
  std::stringstream buf;
  buf << in.rdbuf();
  const std::string text = buf.str();

  json j;
  try {
    j = json::parse(text);
  } catch (const json::parse_error& e) {
    const auto upto = std::min(e.byte, text.size());
    const auto line = 1 + std::count(text.begin(), text.begin() + static_cast<std::ptrdiff_t>(upto ? upto - 1 : 0), '\n');
    throw ParseError(config_path + ":" + std::to_string(line) + ": invalid JSON (" + e.what() + ")");
  }

  Locator loc(config_path, text);
  if (j.is_object()) {
    if (ov.seed) j["seed"] = *ov.seed, loc.mark_flag("seed", "--seed");
    if (ov.reps) j["replicates"] = *ov.reps, loc.mark_flag("replicates", "--reps");
    if (ov.t_end) j["t_end"] = *ov.t_end, loc.mark_flag("t_end", "--t-end");
    if (ov.grid) j["grid"] = *ov.grid, loc.mark_flag("grid", "--grid");
    if (ov.out) j["output"] = *ov.out, loc.mark_flag("output", "--out");
    if (ov.variant) j["variant"] = *ov.variant, loc.mark_flag("variant", "--variant");
    if (ov.exact_events) j["exact_events"] = true, loc.mark_flag("exact_events", "--exact-events");
  }

  Context ctx{read_config(j, loc, fs::path(config_path).parent_path()), command, {}};
  // Relative output paths are taken from the working directory.
  // The hash identifies the experiment: keys that cannot change any number
  // written (output location, thread count) are left out.
  json hashed = j;
  hashed.erase("output");
  hashed.erase("threads");
  const std::string canonical = hashed.dump();
  char hash[24];
  std::snprintf(hash, sizeof hash, "%016llx", static_cast<unsigned long long>(fnv1a(canonical)));
  ctx.stamp = "# moran " + command + "\n# config_hash fnv1a64:" + hash + "\n# seed " +
              std::to_string(ctx.cfg.seed) + "\n";
  fs::create_directories(ctx.cfg.out);
  {
    std::ofstream eff(ctx.cfg.out / "config.json");
    eff << j.dump(2) << '\n';
  }

  if (command == "simulate-forward") return cmd_simulate_forward(ctx);
  if (command == "simulate-backward") return cmd_simulate_backward(ctx);
  if (command == "expectations") return cmd_expectations(ctx);
  if (command == "lde") return cmd_lde(ctx);
  if (command == "duality-check") return cmd_duality_check(ctx);
  return cmd_fixation(ctx);
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Moran model with single-crossover recombination and its partitioning process"};
  app.require_subcommand(1);
  std::string config;
  Overrides ov;
  const std::vector<std::pair<const char*, const char*>> commands = {
      {"simulate-forward", "simulate Z_t; per-replicate trajectories plus mean sampling functions"},
      {"simulate-backward", "simulate Σ_t in the chosen variant"},
      {"expectations", "E[H_A(Z_t)] for every partition A via the dual ODE"},
      {"lde", "E[L_A(Z_t)] and, for three sites, the triangularised generator"},
      {"duality-check", "max |ΛH − HΘᵀ| over the exact generators; exit 4 above 1e-8"},
      {"fixation", "two-site fixation probabilities (Monte Carlo with --reps > 0)"}};
  for (const auto& [name, help] : commands) {
    auto* sub = app.add_subcommand(name, help);
    sub->add_option("--config", config, "JSON run configuration")->required();
    sub->add_option("--seed", ov.seed, "base seed; replicate k uses the stream (seed, k)");
    sub->add_option("--reps", ov.reps, "number of replicates");
    sub->add_option("--t-end", ov.t_end, "final time");
    sub->add_option("--grid", ov.grid, "number of grid intervals on [0, t_end]");
    sub->add_option("--out", ov.out, "output directory");
    sub->add_option("--variant", ov.variant, "finite_n | deterministic_limit | diffusion_limit");
    sub->add_flag("--exact-events", ov.exact_events, "record silent events too");
  }
  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : 2;
  }
  const std::string command = app.get_subcommands().front()->get_name();
  try {
    return run(command, config, ov);
  } catch (const SizeCapError& e) {
    std::fprintf(stderr, "error: %s\nhint: reduce the number of sites, the alphabet sizes or N, "
                         "or raise 'state_cap' / 'site_cap' in the config\n", e.what());
    return 3;
  } catch (const Error& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return 2;
  } catch (const std::exception& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return 1;
  }
}
