#pragma once

// Independent reference values: printed three-site matrices (state order
// 𝟏, 1|23, 12|3, 13|2, 𝟎), the two-site closed form, and the recursive
// Möbius function.

#include <Eigen/Core>
#include <cmath>
#include <map>

#include "moran/partition.hpp"

namespace oracle {

/// Θ for three sites. Column 1 of rows 2–4 uses (N−1)/N² (row sums force it).
inline Eigen::MatrixXd theta3(double N, double r1, double r2) {
  const double s = r1 + r2, a = (N - 1) / N, b = (N - 1) / (N * N), c = (N - 1) * (N - 2) / (N * N);
  const double d = (N - 1) * (N - 1) / (N * N);
  Eigen::MatrixXd m(5, 5);
  m << -a * s, a * r1, a * r2, 0, 0,
      2 / N - b * r2, -2 / N - d * r2, b * r2, b * r2, c * r2,
      2 / N - b * r1, b * r1, -2 / N - d * r1, b * r1, c * r1,
      2 / N - b * s, b * s, b * s, -2 / N - d * s, c * s,
      0, 2 / N, 2 / N, 2 / N, -6 / N;
  return m;
}

/// The same matrix with column 1, rows 2–4 exactly as typeset ((N−1)/N).
inline Eigen::MatrixXd theta3_as_typeset(double N, double r1, double r2) {
  Eigen::MatrixXd m = theta3(N, r1, r2);
  m(1, 0) = 2 / N - (N - 1) / N * r2;
  m(2, 0) = 2 / N - (N - 1) / N * r1;
  m(3, 0) = 2 / N - (N - 1) / N * (r1 + r2);
  return m;
}

inline Eigen::MatrixXd transform3(double N) {
  const double a = 1 / (N - 2);
  Eigen::MatrixXd m(5, 5);
  m << 1, -1, -1, -1, 2,
      a, 1 + a, -a, -a, -1,
      a, -a, 1 + a, -a, -1,
      a, -a, -a, 1 + a, -1,
      1 / ((N - 1) * (N - 2)), a, a, a, 1;
  return (N - 1) * (N - 2) / (N * N) * m;
}

inline Eigen::MatrixXd conjugated3(double N, double r1, double r2) {
  const double s = r1 + r2;
  const double off = 2 / N - (N - 1) / (N * N) * s;
  Eigen::MatrixXd m(5, 5);
  m << -6 / N - (N - 1) * (N - 2) / (N * N) * s, 0, 0, 0, 0,
      off, -2 / N - (N - 1) / N * r2, 0, 0, 0,
      off, 0, -2 / N - (N - 1) / N * r1, 0, 0,
      off, 0, 0, -2 / N - (N - 1) / N * s, 0,
      -s / (N * N), 2 / N - r2 / N, 2 / N - r1 / N, 2 / N - s / N, 0;
  return m;
}

inline Eigen::MatrixXd conjugated3_diffusion(double p1, double p2) {
  Eigen::MatrixXd m(5, 5);
  m << -(6 + p1 + p2), 0, 0, 0, 0,
      2, -(2 + p2), 0, 0, 0,
      2, 0, -(2 + p1), 0, 0,
      2, 0, 0, -(2 + p1 + p2), 0,
      0, 2, 2, 2, 0;
  return m;
}

inline Eigen::MatrixXd vinv3_diffusion(double p1, double p2) {
  const double s = p1 + p2;
  Eigen::MatrixXd m(5, 5);
  m << 1, 0, 0, 0, 0,
      2 / ((2 + p2) * (4 + p1)), 1 / (2 + p2), 0, 0, 0,
      2 / ((2 + p1) * (4 + p2)), 0, 1 / (2 + p1), 0, 0,
      1 / (2 * (2 + s)), 0, 0, 1 / (2 + s), 0,
      4 * (p1 * p2 + (2 + s) * (6 + s)) / ((2 + p1) * (2 + p2) * (2 + s) * (6 + s)), 2 / (2 + p2),
      2 / (2 + p1), 2 / (2 + s), 1;
  return m;
}

/// E[H_𝟏(Z_t)](x) for two sites given z0(x)/N and H_𝟎(z0)(x).
inline double two_site_h1(double N, double r, double t, double z_over_n, double h0) {
  const double k = r * (N - 1);
  return z_over_n + k / (k + 2) * (1 - std::exp(-(k + 2) / N * t)) * (h0 - z_over_n);
}

/// μ(a,b) by the defining recursion μ(a,a) = 1, μ(a,b) = −Σ_{a ≼ c ≺ b} μ(a,c).
class RecursiveMobius {
 public:
  std::int64_t operator()(const moran::Partition& a, const moran::Partition& b) {
    if (a == b) return 1;
    auto key = std::make_pair(a, b);
    if (auto it = memo_.find(key); it != memo_.end()) return it->second;
    std::int64_t sum = 0;
    for (const auto& c : moran::coarsenings(a))
      if (c != b && moran::refines(c, b)) sum += (*this)(a, c);
    memo_[key] = -sum;
    return -sum;
  }

 private:
  std::map<std::pair<moran::Partition, moran::Partition>, std::int64_t> memo_;
};

}  // namespace oracle
