#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include <cmath>
#include <sstream>

#include "moran/errors.hpp"
#include "moran/forward.hpp"
#include "support.hpp"

using namespace moran;

namespace {

const SiteSpace kTwoBinary({2, 2});

PopulationState example_state() { return PopulationState::from_counts(kTwoBinary, {2, 0, 0, 1}); }

// Product measure on {1,2} with the given site-wise weights.
MeasureD product2(const std::vector<double>& p, const std::vector<double>& q) {
  MeasureD m(SiteSet{1, 2}, {static_cast<int>(p.size()), static_cast<int>(q.size())});
  for (std::size_t i = 0; i < p.size(); ++i)
    for (std::size_t j = 0; j < q.size(); ++j)
      m[i * q.size() + j] = p[i] * q[j];
  return m;
}

}  // namespace

TEST_CASE("λ on the worked example") {
  const ForwardModel model(kTwoBinary, 3, RecombinationDistribution({0.5}));
  const PopulationState z = example_state();
  // type 11 (index 3) replaced by the recombinant 01 (index 1)
  CHECK(rate_lambda(model, z, 3, 1) == doctest::Approx(1.0 / 9.0));
  CHECK(rate_lambda(model, z, 1, 0) == 0.0);  // nobody of type 01 to die
  for (TypeIndex y = 0; y < 4; ++y) {
    double sum = 0.0;
    for (TypeIndex x = 0; x < 4; ++x) sum += rate_lambda(model, z, y, x);
    CHECK(sum == doctest::Approx(static_cast<double>(z[y])));
  }
}

TEST_CASE("monomorphic population: every event is silent") {
  const ForwardModel model(kTwoBinary, 5, RecombinationDistribution({0.7}));
  const auto z = PopulationState::from_counts(kTwoBinary, {0, 0, 5, 0});
  CHECK(rate_lambda(model, z, 2, 2) == doctest::Approx(5.0));
  const MeasureD off = offspring_distribution(model, z);
  CHECK(off[2] == doctest::Approx(1.0));
}

TEST_CASE("offspring distribution is a probability measure") {
  auto& g = testing::rng();
  for (int trial = 0; trial < 20; ++trial) {
    const int n = testing::uniform_int(g, 1, 4);
    const auto radices = testing::random_radices(g, static_cast<std::size_t>(n), 3);
    const SiteSpace space(radices);
    const int N = testing::uniform_int(g, 1, 9);
    const auto counts = testing::random_population(g, SiteSet::range(1, n), radices, N);
    const PopulationState z(space, counts);
    const ForwardModel model(space, N, testing::random_recombination(g, n));
    const MeasureD off = offspring_distribution(model, z);
    CHECK(off.norm() == doctest::Approx(1.0));
    CHECK(off.weights().minCoeff() >= 0.0);
  }
}

TEST_CASE("model validation") {
  CHECK_THROWS_AS(ForwardModel(kTwoBinary, 0, RecombinationDistribution::none(2)), ValidationError);
  CHECK_THROWS_AS(ForwardModel(kTwoBinary, 3, RecombinationDistribution::none(3)), ValidationError);
}

TEST_CASE("population state enumeration") {
  CHECK(population_state_count(4, 3) == 20);
  const auto states = enumerate_population_states(kTwoBinary, 3);
  REQUIRE(states.size() == 20);
  for (std::size_t i = 1; i < states.size(); ++i) {
    std::vector<std::int64_t> a, b;
    for (TypeIndex x = 0; x < 4; ++x) a.push_back(states[i - 1][x]), b.push_back(states[i][x]);
    CHECK(a < b);
  }
  for (const auto& z : states) CHECK(z.N() == 3);
  CHECK_THROWS_AS(enumerate_population_states(SiteSpace({2, 2, 2}), 30, 1000), SizeCapError);
}

TEST_CASE("Λ is a generator; monomorphic states are absorbing") {
  auto& g = testing::rng();
  for (int N : {2, 3, 5}) {
    const ForwardModel model(SiteSpace({2, 2, 2}), N, testing::random_recombination(g, 3));
    const auto gen = generator_lambda(model);
    const Eigen::VectorXd sums = gen.Q * Eigen::VectorXd::Ones(gen.Q.cols());
    CHECK(sums.cwiseAbs().maxCoeff() < 1e-12);
    for (std::size_t i = 0; i < gen.states.size(); ++i) {
      CHECK(gen.index_of(gen.states[i]) == i);
      if (gen.states[i].is_monomorphic())
        CHECK(gen.Q.row(static_cast<Eigen::Index>(i)).norm() == 0.0);
    }
  }
}

TEST_CASE("without recombination Λ is the plain Moran generator") {
  const int N = 2;
  const ForwardModel model(kTwoBinary, N, RecombinationDistribution::none(2));
  const auto gen = generator_lambda(model);
  const Eigen::MatrixXd Q(gen.Q);
  for (std::size_t i = 0; i < gen.states.size(); ++i) {
    const auto& z = gen.states[i];
    for (TypeIndex y = 0; y < 4; ++y)
      for (TypeIndex x = 0; x < 4; ++x) {
        if (x == y || z[y] == 0) continue;
        const PopulationState next(kTwoBinary, add_delta(PopulationState(kTwoBinary, sub_delta(z, y)), x));
        const double expected = static_cast<double>(z[y] * z[x]) / N;
        CHECK(Q(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(gen.index_of(next))) ==
              doctest::Approx(expected));
      }
  }
}

TEST_CASE("simulation basics") {
  const ForwardModel model(SiteSpace({2, 3}), 12, RecombinationDistribution({0.4}));
  const auto z0 = PopulationState::from_counts(model.space, {3, 0, 2, 0, 4, 3});
  const auto a = simulate_forward(model, z0, 5.0, 42, 0);
  const auto b = simulate_forward(model, z0, 5.0, 42, 0);
  const auto c = simulate_forward(model, z0, 5.0, 42, 1);
  REQUIRE(a.events.size() == b.events.size());
  for (std::size_t k = 0; k < a.events.size(); ++k) {
    CHECK(a.events[k].time == b.events[k].time);
    CHECK(a.events[k].new_type == b.events[k].new_type);
  }
  CHECK((a.events.size() != c.events.size() || a.state_at(5.0) != c.state_at(5.0) ||
         a.events.front().time != c.events.front().time));
  double last = 0.0;
  for (const auto& e : a.events) {
    CHECK(e.time > last);
    CHECK(e.time <= 5.0);
    CHECK(e.dying_type != e.new_type);  // silent events are not recorded by default
    last = e.time;
  }
  CHECK(a.state_at(5.0).N() == 12);
  CHECK(a.state_at(0.0) == z0);

  Rng rng = make_stream(42, 0);
  CHECK(simulate_forward_state(model, z0, 5.0, rng) == a.state_at(5.0));

  CHECK_THROWS_AS(simulate_forward(model, PopulationState::from_counts(model.space, {1, 0, 0, 0, 0, 0}),
                                   1.0, 1),
                  InvalidInitialError);
}

TEST_CASE("exact events: event count is Poisson(N t)") {
  const ForwardModel model(kTwoBinary, 10, RecombinationDistribution({0.3}));
  const auto z0 = PopulationState::from_counts(kTwoBinary, {5, 0, 0, 5});
  const double t = 3.0;
  const int reps = 400;
  double total = 0.0;
  for (int rep = 0; rep < reps; ++rep)
    total += static_cast<double>(simulate_forward(model, z0, t, 7, static_cast<std::uint64_t>(rep), {true}).events.size());
  const double mean = total / reps, expected = model.N * t;
  CHECK(std::abs(mean - expected) < 4.0 * std::sqrt(expected / reps));
}

TEST_CASE("a monomorphic population never changes") {
  const ForwardModel model(kTwoBinary, 6, RecombinationDistribution({1.0}));
  const auto z0 = PopulationState::from_counts(kTwoBinary, {0, 6, 0, 0});
  const auto tr = simulate_forward(model, z0, 10.0, 3);
  CHECK(tr.events.empty());
  CHECK(tr.state_at(10.0) == z0);
}

TEST_CASE("neutral fixation: each site's letter fixes with its initial frequency") {
  const ForwardModel model(kTwoBinary, 6, RecombinationDistribution({0.5}));
  const auto z0 = PopulationState::from_counts(kTwoBinary, {1, 2, 0, 3});
  const int reps = 4000;
  int site1_zero = 0, site2_zero = 0;
  for (int rep = 0; rep < reps; ++rep) {
    Rng rng = make_stream(99, static_cast<std::uint64_t>(rep));
    const TypeIndex x = simulate_to_absorption(model, z0, rng);
    site1_zero += (x / 2 == 0);
    site2_zero += (x % 2 == 0);
  }
  const double p1 = 3.0 / 6.0, p2 = 1.0 / 6.0;
  CHECK(std::abs(site1_zero / double(reps) - p1) < 3.0 * std::sqrt(p1 * (1 - p1) / reps));
  CHECK(std::abs(site2_zero / double(reps) - p2) < 3.0 * std::sqrt(p2 * (1 - p2) / reps));
}

TEST_CASE("without recombination a full type fixes with its initial frequency") {
  const ForwardModel model(kTwoBinary, 5, RecombinationDistribution::none(2));
  const auto z0 = PopulationState::from_counts(kTwoBinary, {1, 0, 0, 4});
  const int reps = 4000;
  int hits = 0;
  for (int rep = 0; rep < reps; ++rep) {
    Rng rng = make_stream(5, static_cast<std::uint64_t>(rep));
    const TypeIndex x = simulate_to_absorption(model, z0, rng);
    CHECK((x == 0 || x == 3));
    hits += (x == 0);
  }
  const double p = 0.2;
  CHECK(std::abs(hits / double(reps) - p) < 3.0 * std::sqrt(p * (1 - p) / reps));
}

TEST_CASE("deterministic equation: fixed points and invariants") {
  const RecombinationDistribution r({0.35});
  const MeasureD prod = product2({0.3, 0.7}, {0.1, 0.5, 0.4});
  CHECK(deterministic_rhs(r, prod).weights().cwiseAbs().maxCoeff() < 1e-15);
  CHECK(testing::max_abs(deterministic_solve(r, prod, 2.0), prod) < 1e-14);

  MeasureD omega(SiteSet{1, 2}, {2, 2});
  omega[0] = 0.5, omega[3] = 0.5;
  CHECK(testing::max_abs(deterministic_solve(RecombinationDistribution::none(2), omega, 3.0), omega) == 0.0);

  const MeasureD later = deterministic_solve(r, omega, 1.5);
  CHECK(later.norm() == doctest::Approx(1.0).epsilon(1e-13));
  CHECK(later.weights().minCoeff() >= 0.0);
  // Linkage disequilibrium decays at rate r.
  const double d0 = omega[0] * omega[3] - omega[1] * omega[2];
  const double d1 = later[0] * later[3] - later[1] * later[2];
  CHECK(d1 == doctest::Approx(d0 * std::exp(-0.35 * 1.5)).epsilon(1e-9));
}

TEST_CASE("three sites: deterministic solution preserves single-site marginals") {
  auto& g = testing::rng();
  const SiteSet s = SiteSet::range(1, 3);
  MeasureD omega = testing::random_measure(g, s, {2, 3, 2});
  omega *= 1.0 / omega.norm();
  const auto r = testing::random_recombination(g, 3);
  const MeasureD later = deterministic_solve(r, omega, 2.0);
  for (Site x : s)
    CHECK(testing::max_abs(marginalize(later, SiteSet{x}), marginalize(omega, SiteSet{x})) < 1e-12);
}

TEST_CASE("large populations follow the deterministic equation") {
  // The first moment of Z_t/N differs from the ODE only through sampling
  // correlations, which are O(t/N).
  const int N = 400;
  const ForwardModel model(kTwoBinary, N, RecombinationDistribution({0.5}));
  const auto z0 = PopulationState::from_counts(kTwoBinary, {N / 2, 0, 0, N / 2});
  const double t = 1.0;
  const int reps = 200;
  Eigen::Vector4d mean = Eigen::Vector4d::Zero(), sq = Eigen::Vector4d::Zero();
  for (int rep = 0; rep < reps; ++rep) {
    Rng rng = make_stream(2024, static_cast<std::uint64_t>(rep));
    const auto z = simulate_forward_state(model, z0, t, rng);
    for (TypeIndex x = 0; x < 4; ++x) {
      const double f = static_cast<double>(z[x]) / N;
      mean[static_cast<Eigen::Index>(x)] += f / reps;
      sq[static_cast<Eigen::Index>(x)] += f * f / reps;
    }
  }
  const MeasureD ode = deterministic_solve(model.recomb, (1.0 / N) * z0.as_double(), t);
  for (TypeIndex x = 0; x < 4; ++x) {
    const auto k = static_cast<Eigen::Index>(x);
    const double se = std::sqrt(std::max(sq[k] - mean[k] * mean[k], 0.0) / reps);
    CHECK(std::abs(mean[k] - ode[x]) < 4.0 * se + 2.0 * t / N);
  }
}

TEST_CASE("trajectory CSV round-trips") {
  const ForwardModel model(SiteSpace({2, 3}), 7, RecombinationDistribution({0.6}));
  const auto z0 = PopulationState::from_counts(model.space, {3, 0, 0, 0, 0, 4});
  const auto tr = simulate_forward(model, z0, 2.0, 11);
  std::stringstream ss;
  ss << "# comment\n";
  write_forward_trajectory_csv(ss, tr);
  const auto back = read_forward_trajectory_csv(ss, model.space);
  CHECK(back.initial == z0);
  REQUIRE(back.events.size() == tr.events.size());
  for (std::size_t k = 0; k < tr.events.size(); ++k) {
    CHECK(back.events[k].time == tr.events[k].time);
    CHECK(back.events[k].dying_type == tr.events[k].dying_type);
    CHECK(back.events[k].new_type == tr.events[k].new_type);
  }
  std::istringstream bad("time,dying,new\n0,,03\n");
  CHECK_THROWS_AS(read_forward_trajectory_csv(bad, model.space), ParseError);
}
