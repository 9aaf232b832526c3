#include "moran/expectation.hpp"

#include <unsupported/Eigen/MatrixFunctions>

#include <Eigen/LU>
#include <cmath>
#include <cstdio>
#include <istream>
#include <ostream>

#include "moran/errors.hpp"

namespace moran {

Eigen::MatrixXd sampling_matrix(const PartitionIndex& partitions, const CountMeasure& z) {
  const std::int64_t N = z.norm();
  Eigen::MatrixXd h = Eigen::MatrixXd::Zero(static_cast<Eigen::Index>(partitions.size()),
                                            static_cast<Eigen::Index>(z.size()));
  for (std::size_t i = 0; i < partitions.size(); ++i) {
    if (static_cast<std::int64_t>(partitions[i].size()) > N) continue;
    h.row(static_cast<Eigen::Index>(i)) = sampling(partitions[i], z).weights().transpose();
  }
  return h;
}

Eigen::MatrixXd recombinator_matrix(const PartitionIndex& partitions, const MeasureD& omega) {
  Eigen::MatrixXd h(static_cast<Eigen::Index>(partitions.size()),
                    static_cast<Eigen::Index>(omega.size()));
  for (std::size_t i = 0; i < partitions.size(); ++i)
    h.row(static_cast<Eigen::Index>(i)) = recombinator(partitions[i], omega).weights().transpose();
  return h;
}

MeasureD DualityMatrixH::measure(std::size_t state, std::size_t partition) const {
  const CountMeasure& z = states[state].measure();
  MeasureD m(z.sites(), z.radices());
  m.weights() = by_state[state].row(static_cast<Eigen::Index>(partition)).transpose();
  return m;
}

DualityMatrixH duality_matrix(const ForwardGenerator& lambda, const PartitionIndex& partitions) {
  DualityMatrixH h{lambda.states, partitions, {}};
  h.by_state.reserve(h.states.size());
  for (const auto& z : h.states) h.by_state.push_back(sampling_matrix(partitions, z.measure()));
  return h;
}

double check_generator_duality(const ForwardModel& forward, const BackwardModel& backward,
                               std::size_t state_cap) {
  if (backward.variant != Variant::finite_n)
    throw ValidationError("the generator duality holds for the finite-N partitioning process");
  if (forward.N != backward.N || forward.space.n() != backward.n ||
      forward.recomb.crossovers() != backward.recomb.crossovers())
    throw ValidationError("forward and backward models must share n, N and r");
  const ForwardGenerator lambda = generator_lambda(forward, state_cap);
  const PartitionGenerator theta = generator_theta(backward);
  const DualityMatrixH h = duality_matrix(lambda, theta.states);

  double defect = 0.0;
  for (Eigen::Index i = 0; i < lambda.Q.outerSize(); ++i) {
    Eigen::MatrixXd lhs = Eigen::MatrixXd::Zero(h.by_state[0].rows(), h.by_state[0].cols());
    for (Eigen::SparseMatrix<double, Eigen::RowMajor>::InnerIterator it(lambda.Q, i); it; ++it)
      lhs += it.value() * h.by_state[static_cast<std::size_t>(it.col())];
    const Eigen::MatrixXd rhs = theta.Q * h.by_state[static_cast<std::size_t>(i)];
    defect = std::max(defect, (lhs - rhs).cwiseAbs().maxCoeff());
  }
  return defect;
}

std::vector<Eigen::MatrixXd> evolve(const Eigen::MatrixXd& Q, const Eigen::MatrixXd& e0,
                                    const std::vector<double>& times, OdeMethod method,
                                    double rk4_dt) {
  std::vector<Eigen::MatrixXd> out;
  out.reserve(times.size());
  double prev_t = 0.0;
  Eigen::MatrixXd cur = e0;
  for (double t : times) {
    if (!(t >= 0.0)) throw ValidationError("times must be nonnegative");
    if (method == OdeMethod::matrix_exponential) {
      out.push_back((Q * t).exp() * e0);
      continue;
    }
    if (t < prev_t) throw ValidationError("RK4 integration needs a nondecreasing time grid");
    const double span = t - prev_t;
    const auto steps = static_cast<long>(std::ceil(span / rk4_dt - 1e-9));
    const double h = steps > 0 ? span / static_cast<double>(steps) : 0.0;
    for (long s = 0; s < steps; ++s) {
      const Eigen::MatrixXd k1 = Q * cur;
      const Eigen::MatrixXd k2 = Q * (cur + (h / 2) * k1);
      const Eigen::MatrixXd k3 = Q * (cur + (h / 2) * k2);
      const Eigen::MatrixXd k4 = Q * (cur + h * k3);
      cur += (h / 6) * (k1 + 2 * k2 + 2 * k3 + k4);
    }
    prev_t = t;
    out.push_back(cur);
  }
  return out;
}

MeasureD ExpectationTrajectory::at(std::size_t time_index, const Partition& a) const {
  MeasureD m(sites, radices);
  m.weights() = values[time_index].row(static_cast<Eigen::Index>(partitions.index_of(a))).transpose();
  return m;
}

ExpectationTrajectory expected_sampling(const BackwardModel& backward, const PopulationState& z0,
                                        const std::vector<double>& times, OdeMethod method,
                                        double rk4_dt) {
  const CountMeasure& z = z0.measure();
  if (static_cast<int>(z.sites().size()) != backward.n)
    throw ShapeError("initial population and partitioning process differ in n");
  if (backward.variant == Variant::finite_n && z0.N() != backward.N)
    throw ValidationError("initial population size differs from N");
  const PartitionGenerator g = generator(backward);
  ExpectationTrajectory tr{times, g.states, z.sites(), z.radices(), {}};
  const Eigen::MatrixXd e0 =
      backward.variant == Variant::finite_n
          ? sampling_matrix(g.states, z)
          : recombinator_matrix(g.states, z.cast<double>());
  tr.values = evolve(g.Q, e0, times, method, rk4_dt);
  return tr;
}

Eigen::MatrixXd lde_transform_matrix(const PartitionIndex& partitions, std::optional<int> N) {
  const auto s = static_cast<Eigen::Index>(partitions.size());
  Eigen::MatrixXd t = Eigen::MatrixXd::Zero(s, s);
  for (std::size_t i = 0; i < partitions.size(); ++i) {
    const Partition& a = partitions[i];
    for (std::size_t k = 0; k < partitions.size(); ++k) {
      const Partition& c = partitions[k];
      double v = 0.0;
      if (!N) {
        if (refines(c, a)) v = static_cast<double>(mobius(c, a));
      } else {
        const double ff = falling_factorial(*N, static_cast<std::int64_t>(c.size()));
        for (const auto& b : refinements(meet(a, c), a.ground().size()))
          v += static_cast<double>(mobius(b, a)) * ff /
               std::pow(static_cast<double>(*N), static_cast<double>(b.size()));
      }
      t(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(k)) = v;
    }
  }
  return t;
}

Partition lift_partition(const Partition& c, const SiteSet& all) {
  if (!c.ground().is_subset_of(all)) throw NotSubsetError("partition sites exceed the site set");
  const SiteSet rest = all.minus(c.ground());
  if (rest.empty()) return c;
  std::vector<SiteSet> blocks = c.blocks();
  blocks.front() = blocks.front().united(rest);
  return canonicalize(std::move(blocks));
}

MeasureD LdeTrajectory::at(std::size_t time_index, const Partition& a) const {
  MeasureD m(sites, radices);
  m.weights() = values[time_index].row(static_cast<Eigen::Index>(partitions.index_of(a))).transpose();
  m.set_signed(true);
  return m;
}

LdeTrajectory lde_trajectory(const BackwardModel& backward, const PopulationState& z0,
                             const SiteSet& u, const std::vector<double>& times,
                             OdeMethod method) {
  const CountMeasure& z = z0.measure();
  if (u.empty() || !u.is_subset_of(z.sites()))
    throw NotSubsetError("U must be a nonempty subset of the sites");
  const ExpectationTrajectory full = expected_sampling(backward, z0, times, method);
  const PartitionIndex pu(enumerate_partitions(u));
  const std::optional<int> N =
      backward.variant == Variant::finite_n ? std::optional<int>(z0.N()) : std::nullopt;
  const Eigen::MatrixXd t = lde_transform_matrix(pu, N);

  const MeasureD shape = marginalize(z.cast<double>(), u);
  const auto proj = detail::projection_map(z, shape);
  std::vector<std::size_t> lifted;
  for (const auto& c : pu.states()) lifted.push_back(full.partitions.index_of(lift_partition(c, z.sites())));

  LdeTrajectory out{times, pu, u, shape.radices(), {}};
  for (const auto& e : full.values) {
    Eigen::MatrixXd hu = Eigen::MatrixXd::Zero(static_cast<Eigen::Index>(pu.size()),
                                               static_cast<Eigen::Index>(shape.size()));
    for (std::size_t c = 0; c < pu.size(); ++c)
      for (std::size_t x = 0; x < proj.size(); ++x)
        hu(static_cast<Eigen::Index>(c), static_cast<Eigen::Index>(proj[x])) +=
            e(static_cast<Eigen::Index>(lifted[c]), static_cast<Eigen::Index>(x));
    out.values.push_back(t * hu);
  }
  return out;
}

Eigen::MatrixXd left_eigenvectors_lower(const Eigen::MatrixXd& m, double tol) {
  if (m.rows() != m.cols()) throw ShapeError("expected a square matrix");
  const Eigen::Index s = m.rows();
  const double scale = std::max(1.0, m.cwiseAbs().maxCoeff());
  Eigen::MatrixXd w = Eigen::MatrixXd::Zero(s, s);
  for (Eigen::Index i = 0; i < s; ++i) {
    const double d = m(i, i);
    w(i, i) = 1.0;
    for (Eigen::Index k = i - 1; k >= 0; --k) {
      double num = 0.0;
      for (Eigen::Index j = k + 1; j <= i; ++j) num += w(i, j) * m(j, k);
      const double gap = d - m(k, k);
      if (std::abs(gap) <= tol * scale) {
        if (std::abs(num) > 1e3 * tol * scale)
          throw ValidationError("repeated eigenvalue with a nontrivial Jordan block");
        w(i, k) = 0.0;
      } else {
        w(i, k) = num / gap;
      }
    }
  }
  return w;
}

LdeTransform lde_conjugation_3site(const BackwardModel& backward) {
  if (backward.n != 3) throw ShapeError("the three-site conjugation needs n = 3");
  std::optional<int> N;
  if (backward.variant == Variant::finite_n) {
    if (backward.N < 3) throw ValidationError("T is invertible only for N >= 3");
    N = backward.N;
  }
  const PartitionGenerator g = generator(backward);
  LdeTransform out;
  out.T = to_display_order(lde_transform_matrix(g.states, N));
  out.Tinv = out.T.partialPivLu().inverse();
  out.conjugated = out.T * to_display_order(g.Q) * out.Tinv;
  out.upper_max = out.conjugated.triangularView<Eigen::StrictlyUpper>().toDenseMatrix().cwiseAbs().maxCoeff();
  out.D = out.conjugated.diagonal();
  out.Vinv = left_eigenvectors_lower(out.conjugated);
  out.residual =
      (out.Vinv * out.conjugated - out.D.asDiagonal() * out.Vinv).cwiseAbs().maxCoeff();
  return out;
}

void write_diagonalization_report(std::ostream& os, const LdeTransform& t) {
  static const char* names[] = {"1,2,3", "1|2,3", "1,2|3", "1,3|2", "1|2|3"};
  char buf[64];
  os << "state order: (1,2,3) (1|2,3) (1,2|3) (1,3|2) (1|2|3)\n";
  os << "eigenvalues (diagonal of T Theta T^-1):\n";
  for (Eigen::Index i = 0; i < t.D.size(); ++i) {
    std::snprintf(buf, sizeof buf, "%.17g", t.D(i));
    os << "  " << (t.D.size() == 5 ? names[i] : "") << " " << buf << '\n';
  }
  std::snprintf(buf, sizeof buf, "%.3e", t.upper_max);
  os << "max |strictly upper entry|: " << buf << '\n';
  std::snprintf(buf, sizeof buf, "%.3e", t.residual);
  os << "diagonalisation residual max|Vinv M - D Vinv|: " << buf << '\n';
  os << "Vinv:\n";
  for (Eigen::Index i = 0; i < t.Vinv.rows(); ++i) {
    os << ' ';
    for (Eigen::Index k = 0; k < t.Vinv.cols(); ++k) {
      std::snprintf(buf, sizeof buf, " %.10g", t.Vinv(i, k));
      os << buf;
    }
    os << '\n';
  }
}

MeasureD fixation_2site(const ForwardModel& forward, const PopulationState& z0) {
  if (forward.space.n() != 2) throw ShapeError("the two-site fixation formula needs n = 2");
  if (z0.N() != forward.N) throw ValidationError("initial population size differs from N");
  const double N = forward.N;
  const double r = forward.recomb.crossover(1);
  const double denom = 2.0 + r * (N - 1.0);
  MeasureD out = z0.as_double();
  out *= (2.0 / denom) / N;
  if (forward.N >= 2)
    out += (r * (N - 1.0) / denom) * sampling(Partition::finest(forward.space.all_sites()), z0.measure());
  return out;
}

void write_expectation_csv(std::ostream& os, const std::vector<double>& times,
                           const PartitionIndex& partitions, const std::vector<int>& radices,
                           const std::vector<Eigen::MatrixXd>& values,
                           const std::vector<Partition>& only) {
  std::vector<std::size_t> rows;
  if (only.empty())
    for (std::size_t i = 0; i < partitions.size(); ++i) rows.push_back(i);
  else
    for (const auto& p : only) rows.push_back(partitions.index_of(p));
  std::vector<std::string> labels;
  {
    Measure<double> shape(SiteSet::range(1, static_cast<int>(radices.size())), radices);
    for (TypeIndex x = 0; x < shape.size(); ++x) labels.push_back(type_label(shape.decode(x)));
  }
  char tbuf[32], vbuf[32];
  os << "time,partition,type,value\n";
  for (std::size_t k = 0; k < times.size(); ++k) {
    std::snprintf(tbuf, sizeof tbuf, "%.17g", times[k]);
    for (std::size_t i : rows) {
      const std::string p = partitions[i].to_string();
      for (std::size_t x = 0; x < labels.size(); ++x) {
        std::snprintf(vbuf, sizeof vbuf, "%.17g",
                      values[k](static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(x)));
        os << tbuf << ",\"" << p << "\"," << labels[x] << ',' << vbuf << '\n';
      }
    }
  }
}

std::vector<ExpectationRow> read_expectation_csv(std::istream& is) {
  std::vector<ExpectationRow> out;
  std::string line;
  std::size_t lineno = 0;
  bool header = false;
  while (std::getline(is, line)) {
    ++lineno;
    if (line.empty() || line[0] == '#') continue;
    const std::string where = "line " + std::to_string(lineno) + ": ";
    if (!header) {
      if (line.rfind("time,partition,type,value", 0) != 0)
        throw ParseError(where + "expected header 'time,partition,type,value'");
      header = true;
      continue;
    }
    const auto c1 = line.find(",\"");
    const auto c2 = line.find("\",", c1 == std::string::npos ? 0 : c1 + 2);
    if (c1 == std::string::npos || c2 == std::string::npos)
      throw ParseError(where + "expected a quoted partition field");
    const auto c3 = line.find(',', c2 + 2);
    if (c3 == std::string::npos) throw ParseError(where + "missing value field");
    auto c4 = line.find(',', c3 + 1);
    try {
      out.push_back({std::stod(line.substr(0, c1)), parse_partition(line.substr(c1 + 2, c2 - c1 - 2)),
                     line.substr(c2 + 2, c3 - c2 - 2),
                     std::stod(line.substr(c3 + 1, c4 == std::string::npos ? std::string::npos
                                                                           : c4 - c3 - 1))});
    } catch (const std::invalid_argument&) {
      throw ParseError(where + "bad number");
    }
  }
  return out;
}

}  // namespace moran
