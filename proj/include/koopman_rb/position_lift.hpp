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

// Position observable ladders.
//
// Base observables g_0 = R^T g e3, v_0 = R^T p' (the body velocity) and
// p_0 = R^T p each follow a rotating-frame ladder
//
//   a_{k+1} = sum_{n=0}^{k} C(k,n) S^T(nu_n) a_{k-n},   a in {g, v, p},
//
// with forced dynamics
//
//   g_k' = g_{k+1} - G_k M
//   v_k' = v_{k+1} - g_k - V_k M + (1/m) Omega_k F
//   p_k' = p_{k+1} + v_k - P_k M
//
// where, for A in {G, V, P} paired with a in {g, v, p},
//
//   A_{k+1} = sum C(k,n) [ S^T(a_n) J^-1 H_{k-n} + S^T(nu_n) A_{k-n} ],  A_0 = 0
//   Omega_{k+1} = sum C(k,n) S^T(nu_n) Omega_{k-n},                      Omega_0 = I.
//
// The gravity term enters v_k' with a minus sign so that k = 0 reproduces
// v' = F/m - S(nu) v - g R^T e3 exactly.
//
// The combined low-order ladder z_k = p_k + alpha_k v_{k-1} - beta_k g_{k-2}
// (alpha_k = k, beta_k = k(k-1)/2) obeys z_k' = z_{k+1} - Z_k M + Xi_k F with
// Z_k = P_k + alpha_k V_{k-1} - beta_k G_{k-2} and Xi_k = (alpha_k/m) Omega_{k-1}.
#pragma once

#include <span>
#include <vector>

#include "koopman_rb/attitude_lift.hpp"

namespace koopman_rb {

/// Sign of the gravity observable in the velocity ladder dynamics.
inline constexpr double kGravityLadderSign = -1.0;

/// Which printed variant of the coefficient recursions to evaluate.
enum class CoefficientForm {
  /// Product-rule consistent recursions (validated against the nonlinear flow).
  kDerived,
  /// Recursions as typeset: an extra J^-1 in the S^T(nu_n) A_{k-n} sums and
  /// S^T(v_n) in the Omega recursion. Kept for comparison only.
  kAsPrinted,
};

struct PositionLadder {
  std::vector<Vec3> g, v, p;
  std::vector<Mat3> G, V, P, Omega;
  std::vector<Vec3> z;
  std::vector<Mat3> Z, Xi;
  std::vector<long long> alpha, beta;

  int size() const { return static_cast<int>(z.size()); }
};

inline long long z_alpha(int k) { return k; }
inline long long z_beta(int k) { return static_cast<long long>(k) * (k - 1) / 2; }

/// alpha_k, beta_k for k = 0..n-1 from alpha_k = k, beta_k = alpha_{k-1} + beta_{k-1}.
inline void z_coefficients(int n, std::vector<long long>& alpha,
                           std::vector<long long>& beta) {
  alpha.assign(n, 0);
  beta.assign(n, 0);
  for (int k = 1; k < n; ++k) {
    alpha[k] = k;
    beta[k] = alpha[k - 1] + beta[k - 1];
  }
}

/// Rotating-frame ladder a_0..a_{n-1} seeded with a_0 = base.
inline std::vector<Vec3> rotating_ladder(const Vec3& base, std::span<const Vec3> nus,
                                         int n) {
  check_ladder_length(n);
  if (static_cast<int>(nus.size()) < n - 1) {
    throw DomainError("attitude ladder too short for requested position ladder");
  }
  std::vector<Vec3> a(n);
  a[0] = base;
  for (int k = 0; k + 1 < n; ++k) {
    Vec3 acc = Vec3::Zero();
    for (int n_ = 0; n_ <= k; ++n_) {
      // S^T(nu) a = a x nu
      acc += static_cast<double>(binomial(k, n_)) * a[k - n_].cross(nus[n_]);
    }
    a[k + 1] = acc;
  }
  return a;
}

struct PositionCoefficients {
  std::vector<Mat3> G, V, P, Omega;
};

namespace detail {

inline std::vector<Mat3> torque_coefficients(std::span<const Vec3> a,
                                             std::span<const Vec3> nus,
                                             std::span<const Mat3> H,
                                             const Mat3& j_inv, int n,
                                             CoefficientForm form) {
  std::vector<Mat3> out(n);
  out[0].setZero();
  for (int k = 0; k + 1 < n; ++k) {
    Mat3 acc = Mat3::Zero();
    for (int n_ = 0; n_ <= k; ++n_) {
      const double c = static_cast<double>(binomial(k, n_));
      acc += c * skew(a[n_]).transpose() * j_inv * H[k - n_];
      if (form == CoefficientForm::kDerived) {
        acc += c * skew(nus[n_]).transpose() * out[k - n_];
      } else {
        acc += c * skew(nus[n_]).transpose() * j_inv * out[k - n_];
      }
    }
    out[k + 1] = acc;
  }
  return out;
}

}  // namespace detail

/// G_k, V_k, P_k, Omega_k for k = 0..n-1 from ladder entries (exact or
/// propagated). Each input sequence needs at least n-1 entries.
inline PositionCoefficients position_coefficients(
    std::span<const Vec3> g, std::span<const Vec3> v, std::span<const Vec3> p,
    std::span<const Vec3> nus, std::span<const Mat3> H, const BodyParams& params,
    int n, CoefficientForm form = CoefficientForm::kDerived) {
  check_ladder_length(n);
  const auto need = static_cast<std::size_t>(n - 1);
  if (g.size() < need || v.size() < need || p.size() < need || nus.size() < need ||
      H.size() < need) {
    throw DomainError("ladder inputs too short for coefficient recursion");
  }
  const Mat3 j_inv = params.J_inv();
  PositionCoefficients c;
  c.G = detail::torque_coefficients(g, nus, H, j_inv, n, form);
  c.V = detail::torque_coefficients(v, nus, H, j_inv, n, form);
  c.P = detail::torque_coefficients(p, nus, H, j_inv, n, form);
  c.Omega.resize(n);
  c.Omega[0].setIdentity();
  for (int k = 0; k + 1 < n; ++k) {
    Mat3 acc = Mat3::Zero();
    for (int n_ = 0; n_ <= k; ++n_) {
      const Vec3& axis = form == CoefficientForm::kDerived ? nus[n_] : v[n_];
      acc += static_cast<double>(binomial(k, n_)) * skew(axis).transpose() *
             c.Omega[k - n_];
    }
    c.Omega[k + 1] = acc;
  }
  return c;
}

/// z_k = p_k + alpha_k v_{k-1} - beta_k g_{k-2}, k = 0..n-1.
inline std::vector<Vec3> compose_z(std::span<const Vec3> g, std::span<const Vec3> v,
                                   std::span<const Vec3> p, int n) {
  std::vector<Vec3> z(n);
  for (int k = 0; k < n; ++k) {
    z[k] = p[k];
    if (k >= 1) z[k] += static_cast<double>(z_alpha(k)) * v[k - 1];
    if (k >= 2) z[k] += kGravityLadderSign * static_cast<double>(z_beta(k)) * g[k - 2];
  }
  return z;
}

struct ZCoefficients {
  std::vector<Mat3> Z, Xi;
};

/// Z_k = P_k + alpha_k V_{k-1} - beta_k G_{k-2},  Xi_k = (alpha_k/m) Omega_{k-1}.
inline ZCoefficients compose_z_coefficients(const PositionCoefficients& c,
                                            double mass, int n) {
  ZCoefficients out;
  out.Z.resize(n);
  out.Xi.resize(n);
  for (int k = 0; k < n; ++k) {
    out.Z[k] = c.P[k];
    out.Xi[k].setZero();
    if (k >= 1) {
      out.Z[k] += static_cast<double>(z_alpha(k)) * c.V[k - 1];
      out.Xi[k] = (static_cast<double>(z_alpha(k)) / mass) * c.Omega[k - 1];
    }
    if (k >= 2) {
      out.Z[k] += kGravityLadderSign * static_cast<double>(z_beta(k)) * c.G[k - 2];
    }
  }
  return out;
}

/// Fills G, V, P, Omega, Z, Xi of a ladder whose g, v, p (and z) are set.
inline void build_coefficient_matrices(PositionLadder& ladder, const AttitudeLadder& att,
                                       const BodyParams& params,
                                       CoefficientForm form = CoefficientForm::kDerived) {
  const int n = static_cast<int>(ladder.g.size());
  PositionCoefficients c =
      position_coefficients(ladder.g, ladder.v, ladder.p, att.nu, att.H, params, n, form);
  ZCoefficients zc = compose_z_coefficients(c, params.mass, n);
  ladder.G = std::move(c.G);
  ladder.V = std::move(c.V);
  ladder.P = std::move(c.P);
  ladder.Omega = std::move(c.Omega);
  ladder.Z = std::move(zc.Z);
  ladder.Xi = std::move(zc.Xi);
}

/// Position ladder of length n_z at state s. `att` must hold at least
/// n_z - 1 entries (nu_n and H_n up to n_z - 2 are consumed).
inline PositionLadder build_position_ladder(const RigidBodyState& s,
                                            const AttitudeLadder& att,
                                            const BodyParams& params, int n_z,
                                            CoefficientForm form = CoefficientForm::kDerived) {
  check_ladder_length(n_z);
  if (att.size() < n_z - 1) {
    throw DomainError("attitude ladder shorter than n_z - 1");
  }
  const Mat3 rt = s.R.transpose();
  PositionLadder ladder;
  ladder.g = rotating_ladder(params.gravity * rt.col(2), att.nu, n_z);
  ladder.v = rotating_ladder(s.v, att.nu, n_z);
  ladder.p = rotating_ladder(rt * s.p, att.nu, n_z);
  ladder.z = compose_z(ladder.g, ladder.v, ladder.p, n_z);
  z_coefficients(n_z, ladder.alpha, ladder.beta);
  build_coefficient_matrices(ladder, att, params, form);
  return ladder;
}

/// Stacked position input matrix with row blocks [Xi_k, -Z_k], k = 0..n-1,
/// acting on zeta = [F; M].
inline MatX position_input_matrix(std::span<const Mat3> Xi, std::span<const Mat3> Z) {
  const int n = static_cast<int>(Xi.size());
  MatX b(3 * n, 6);
  for (int k = 0; k < n; ++k) {
    b.block<3, 3>(3 * k, 0) = Xi[k];
    b.block<3, 3>(3 * k, 3) = -Z[k];
  }
  return b;
}

struct PositionSystem {
  MatX A;
  int n_z = 1;

  MatX B(const PositionLadder& ladder) const {
    if (ladder.size() < n_z) throw DomainError("position ladder shorter than n_z");
    return position_input_matrix(std::span<const Mat3>(ladder.Xi.data(), n_z),
                                 std::span<const Mat3>(ladder.Z.data(), n_z));
  }
};

inline PositionSystem assemble_position_system(int n_z) {
  check_ladder_length(n_z);
  return PositionSystem{block_shift(n_z), n_z};
}

}  // namespace koopman_rb
