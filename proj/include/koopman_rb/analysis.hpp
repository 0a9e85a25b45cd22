// Copyright 2026 The koopman_rb Authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

// Validity and controllability analysis of the truncated lifted model:
// Eulerian-number norm bounds on the attitude ladder, the time-limit
// estimators t_lim / t_lim,M, and the last-row Jordan controllability test.
#pragma once

#include <cmath>
#include <cstdint>
#include <limits>
#include <numbers>
#include <optional>
#include <span>
#include <vector>

#include <Eigen/SVD>

#include "koopman_rb/lifted_model.hpp"

namespace koopman_rb {

/// Largest n for which every Eulerian number <n, k> fits in uint64.
inline constexpr int kMaxEulerianOrder = 20;

/// Eulerian number <n, k>: permutations of n elements with exactly k descents.
inline std::uint64_t eulerian(int n, int k) {
  if (n < 0 || k < 0) throw DomainError("eulerian requires n >= 0 and k >= 0");
  if (n > kMaxEulerianOrder) throw OverflowError("eulerian: n > 20 overflows uint64");
  if (n == 0) return k == 0 ? 1 : 0;
  if (k >= n) return 0;
  std::vector<std::uint64_t> row{1};  // n = 1
  for (int m = 2; m <= n; ++m) {
    std::vector<std::uint64_t> next(m, 0);
    for (int j = 0; j < m; ++j) {
      const std::uint64_t a = j < m - 1 ? (j + 1) * row[j] : 0;
      const std::uint64_t b = j >= 1 ? (m - j) * row[j - 1] : 0;
      next[j] = a + b;
    }
    row = std::move(next);
  }
  return row[k];
}

inline double factorial(int n) {
  double f = 1.0;
  for (int i = 2; i <= n; ++i) f *= i;
  return f;
}

struct BoundReport {
  double j_inv_norm = 0.0;
  double gamma_norm = 0.0;
  double nu_norm = 0.0;
  double torque_norm = 0.0;
  /// Bounds for k = 0..K. nu_bound[k] bounds ||nu_k|| (so nu_bound[k+1] is the
  /// bound on ||nu_{k+1}||); likewise for gamma. H_bound[k] bounds ||H_k||,
  /// nu_dot_bound[k] bounds ||d/dt nu_k||.
  std::vector<double> nu_bound, gamma_bound, H_bound, nu_dot_bound;
  /// Factorial relaxations using ||nu|| <= ||J^-1|| ||gamma||.
  std::vector<double> nu_bound_relaxed, H_bound_relaxed, nu_dot_bound_relaxed;
  std::optional<double> t_lim;
  std::optional<double> t_lim_M;
  std::optional<double> torque_integral;
};

namespace detail {

/// sum_{n=0}^{k} <k+1, n> a^n b^(k-n)
inline double eulerian_poly(int k, double a, double b) {
  double s = 0.0;
  for (int n = 0; n <= k; ++n) {
    s += static_cast<double>(eulerian(k + 1, n)) * std::pow(a, n) * std::pow(b, k - n);
  }
  return s;
}

}  // namespace detail

/// Tight (Eulerian) and relaxed (factorial) bounds for k = 0..K (K <= 19).
inline BoundReport attitude_bounds(const BodyParams& params, double gamma0_norm,
                                   double nu0_norm, int K, double torque_norm = 0.0) {
  if (gamma0_norm < 0.0 || nu0_norm < 0.0 || torque_norm < 0.0) {
    throw DomainError("norms must be nonnegative");
  }
  if (K < 0 || K + 1 > kMaxEulerianOrder) throw DomainError("K must be in [0, 19]");
  BoundReport r;
  r.j_inv_norm = params.J_inv_norm();
  r.gamma_norm = gamma0_norm;
  r.nu_norm = nu0_norm;
  r.torque_norm = torque_norm;
  const double a = r.j_inv_norm * gamma0_norm;
  const double b = nu0_norm;
  for (int k = 0; k <= K; ++k) {
    if (k == 0) {
      r.nu_bound.push_back(b);
      r.gamma_bound.push_back(gamma0_norm);
      r.nu_bound_relaxed.push_back(a);
    } else {
      const double e = detail::eulerian_poly(k - 1, a, b);
      r.nu_bound.push_back(a * b * e);
      r.gamma_bound.push_back(gamma0_norm * b * e);
      r.nu_bound_relaxed.push_back(std::pow(a, k + 1) * factorial(k));
    }
    const double hb = detail::eulerian_poly(k, a, b);
    r.H_bound.push_back(hb);
    r.H_bound_relaxed.push_back(std::pow(a, k) * factorial(k + 1));
    r.nu_dot_bound.push_back(hb * r.j_inv_norm * (gamma0_norm * b + torque_norm));
    const double ratio = gamma0_norm > 0.0 ? torque_norm / gamma0_norm
                                           : (torque_norm > 0.0 ? INFINITY : 0.0);
    r.nu_dot_bound_relaxed.push_back(std::pow(a, k + 1) * factorial(k + 1) * (a + ratio));
  }
  if (gamma0_norm > 0.0) r.t_lim = 1.0 / a;
  return r;
}

/// Time after which higher-order terms dominate the unforced solution,
/// t_lim = 1 / (||J^-1|| ||gamma(t0)||).
inline double t_lim(const BodyParams& params, const Vec3& gamma0) {
  const double g = gamma0.norm();
  if (g == 0.0) throw InfiniteHorizon("gamma(t0) = 0: the unforced model never diverges");
  return 1.0 / (params.J_inv_norm() * g);
}

/// t_lim for an angular velocity, gamma0 = J nu0.
inline double t_lim_from_nu(const BodyParams& params, const Vec3& nu0) {
  return t_lim(params, params.inertia_diagonal.cwiseProduct(nu0));
}

/// Forced estimate t_lim,M = 1 / (||J^-1|| ||gamma|| ((k+1) M_int)^(1/k)).
inline double t_lim_forced(const BodyParams& params, double gamma_rms,
                           double torque_integral, int k) {
  if (!(gamma_rms > 0.0)) throw DomainError("gamma_rms must be positive");
  if (!(torque_integral > 0.0)) throw DomainError("torque integral must be positive");
  if (k < 1) throw DomainError("order k must be >= 1");
  return 1.0 / (params.J_inv_norm() * gamma_rms *
                std::pow((k + 1) * torque_integral, 1.0 / k));
}

/// Norm of the antiderivative amplitude of M(t) = alpha [beta_i sin(rho_i t + .)],
/// alpha sqrt(sum (beta_i / rho_i)^2). For beta_i = 1, rho_i = 2 pi this is
/// alpha sqrt(3) / (2 pi).
inline double sinusoid_torque_integral(double alpha, const Vec3& beta, const Vec3& rho) {
  double s = 0.0;
  for (int i = 0; i < 3; ++i) {
    if (rho[i] == 0.0) throw DomainError("sinusoid frequency must be nonzero");
    s += (beta[i] / rho[i]) * (beta[i] / rho[i]);
  }
  return std::abs(alpha) * std::sqrt(s);
}

/// Root mean square of ||J nu|| over a sampled angular-velocity history.
inline double gamma_rms(const BodyParams& params, std::span<const Vec3> nus) {
  if (nus.empty()) throw DomainError("empty angular velocity history");
  double s = 0.0;
  for (const Vec3& nu : nus) s += params.inertia_diagonal.cwiseProduct(nu).squaredNorm();
  return std::sqrt(s / static_cast<double>(nus.size()));
}

// ---------------------------------------------------------------------------
// Controllability

struct ControllabilityReport {
  MatX matrix;
  int rank = 0;
  bool full_rank = false;
  VecX singular_values;
  /// Absolute threshold applied to the singular values of the equilibrated matrix.
  double tolerance = 0.0;
  /// Relative factor used: tolerance = factor * eps * sigma_max (factor
  /// defaults to max(rows, cols)).
  double tolerance_factor = 0.0;
  bool equilibrated = true;
};

struct RankOptions {
  /// Multiplier of eps * sigma_max; <= 0 selects max(rows, cols).
  double tolerance_factor = 0.0;
  /// Scale rows and columns to unit norm before the SVD (rank preserving).
  bool equilibrate = true;
};

inline ControllabilityReport numeric_rank(const MatX& m, const RankOptions& opt = {}) {
  ControllabilityReport r;
  r.matrix = m;
  r.equilibrated = opt.equilibrate;
  MatX w = m;
  if (opt.equilibrate) {
    for (Eigen::Index i = 0; i < w.rows(); ++i) {
      const double n = w.row(i).norm();
      if (n > 0.0) w.row(i) /= n;
    }
    for (Eigen::Index j = 0; j < w.cols(); ++j) {
      const double n = w.col(j).norm();
      if (n > 0.0) w.col(j) /= n;
    }
  }
  Eigen::JacobiSVD<MatX> svd(w);
  r.singular_values = svd.singularValues();
  r.tolerance_factor = opt.tolerance_factor > 0.0
                           ? opt.tolerance_factor
                           : static_cast<double>(std::max(w.rows(), w.cols()));
  const double smax = r.singular_values.size() ? r.singular_values(0) : 0.0;
  r.tolerance = r.tolerance_factor * std::numeric_limits<double>::epsilon() * smax;
  r.rank = 0;
  for (Eigen::Index i = 0; i < r.singular_values.size(); ++i) {
    if (r.singular_values(i) > r.tolerance) ++r.rank;
  }
  r.full_rank = r.rank == m.rows();
  return r;
}

/// Full-rank test of [Xi_{Nz-1}, -Z_{Nz-1}; 0_3, J^-1 H_{Nnu-1}]: the rows of B
/// belonging to the last row of every Jordan chain must be independent.
inline ControllabilityReport controllability_check(const Mat3& xi_last, const Mat3& z_last,
                                                   const Mat3& h_last,
                                                   const BodyParams& params,
                                                   const RankOptions& opt = {}) {
  MatX m = MatX::Zero(6, 6);
  m.block<3, 3>(0, 0) = xi_last;
  m.block<3, 3>(0, 3) = -z_last;
  m.block<3, 3>(3, 3) = params.J_inv() * h_last;
  return numeric_rank(m, opt);
}

/// Controllability test at a physical state for a given truncation.
inline ControllabilityReport controllability_at(const RigidBodyState& s,
                                                const BodyParams& params,
                                                const TruncationConfig& c,
                                                const RankOptions& opt = {}) {
  const LiftedState ls = lift(s, params, c);
  return controllability_check(ls.position.Xi[c.n_z - 1], ls.position.Z[c.n_z - 1],
                               ls.attitude.H[c.n_nu - 1], params, opt);
}

}  // namespace koopman_rb
