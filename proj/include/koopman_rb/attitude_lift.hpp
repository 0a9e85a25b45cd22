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

// Attitude observable ladder.
//
// Along the torque-free flow of J nu' = -nu x J nu the k-th time derivative
// of nu is nu_k, with gamma_k = J nu_k and
//
//   nu_{k+1} = J^-1 sum_{n=0}^{k} C(k,n) S(gamma_n) nu_{k-n}.
//
// Under a torque M the chain picks up an input term,
//
//   d/dt nu_k = nu_{k+1} + J^-1 H_k M,
//   H_{k+1} = sum_{n=0}^{k} C(k,n) h_n H_{k-n},  H_0 = I,
//   h_k = S(gamma_k) J^-1 - S(nu_k).
//
// Stacking nu_0..nu_{N-1} gives x' = A x + B(x) M with A a block shift.
#pragma once

#include <span>
#include <vector>

#include "koopman_rb/binomial.hpp"
#include "koopman_rb/rigid_body.hpp"

namespace koopman_rb {

struct TruncationConfig {
  int n_nu = 1;
  int n_z = 1;

  void validate() const {
    check_ladder_length(n_nu);
    check_ladder_length(n_z);
  }
  int attitude_dim() const { return 3 * n_nu; }
  int position_dim() const { return 3 * n_z; }
  int dim() const { return attitude_dim() + position_dim(); }

  friend bool operator==(const TruncationConfig&, const TruncationConfig&) = default;
};

struct AttitudeLadder {
  std::vector<Vec3> nu;
  std::vector<Vec3> gamma;
  std::vector<Mat3> h;
  std::vector<Mat3> H;

  int size() const { return static_cast<int>(nu.size()); }
};

/// nu_0..nu_{n-1} starting from nu_0 = nu.
inline std::vector<Vec3> attitude_observables(const Vec3& nu,
                                              const BodyParams& params, int n) {
  check_ladder_length(n);
  const Vec3& jd = params.inertia_diagonal;
  std::vector<Vec3> nus(n), gammas(n);
  nus[0] = nu;
  gammas[0] = jd.cwiseProduct(nu);
  for (int k = 0; k + 1 < n; ++k) {
    Vec3 acc = Vec3::Zero();
    for (int n_ = 0; n_ <= k; ++n_) {
      acc += static_cast<double>(binomial(k, n_)) * gammas[n_].cross(nus[k - n_]);
    }
    nus[k + 1] = acc.cwiseQuotient(jd);
    gammas[k + 1] = jd.cwiseProduct(nus[k + 1]);
  }
  return nus;
}

struct AttitudeCoefficients {
  std::vector<Mat3> h;
  std::vector<Mat3> H;
};

/// h_k and H_k for a given sequence of ladder entries (either exact ladder
/// values or propagated lifted states). Returns as many H_k as entries.
inline AttitudeCoefficients attitude_coefficients(std::span<const Vec3> nus,
                                                  const BodyParams& params) {
  const int n = static_cast<int>(nus.size());
  check_ladder_length(n);
  const Mat3 j = params.J();
  const Mat3 j_inv = params.J_inv();
  AttitudeCoefficients out;
  out.h.resize(n);
  out.H.resize(n);
  for (int k = 0; k < n; ++k) {
    out.h[k] = skew(j * nus[k]) * j_inv - skew(nus[k]);
  }
  out.H[0] = Mat3::Identity();
  for (int k = 0; k + 1 < n; ++k) {
    Mat3 acc = Mat3::Zero();
    for (int n_ = 0; n_ <= k; ++n_) {
      acc += static_cast<double>(binomial(k, n_)) * out.h[n_] * out.H[k - n_];
    }
    out.H[k + 1] = acc;
  }
  return out;
}

/// Fills h_k, H_k of a ladder whose nu_k / gamma_k are already set.
inline void build_H_matrices(AttitudeLadder& ladder, const BodyParams& params) {
  AttitudeCoefficients c = attitude_coefficients(ladder.nu, params);
  ladder.h = std::move(c.h);
  ladder.H = std::move(c.H);
}

/// Ladder of length n_nu evaluated at angular velocity `nu`.
inline AttitudeLadder build_attitude_ladder(const Vec3& nu,
                                            const BodyParams& params, int n_nu) {
  AttitudeLadder ladder;
  ladder.nu = attitude_observables(nu, params, n_nu);
  ladder.gamma.reserve(n_nu);
  for (const Vec3& nk : ladder.nu) {
    ladder.gamma.push_back(params.inertia_diagonal.cwiseProduct(nk));
  }
  build_H_matrices(ladder, params);
  return ladder;
}

/// Nilpotent block shift with I_block on the first block superdiagonal.
inline MatX block_shift(int blocks, int block_size = 3) {
  const int n = blocks * block_size;
  MatX a = MatX::Zero(n, n);
  for (int k = 0; k + 1 < blocks; ++k) {
    a.block(k * block_size, (k + 1) * block_size, block_size, block_size).setIdentity();
  }
  return a;
}

/// Stacked input matrix [J^-1 H_0; ...; J^-1 H_{N-1}].
inline MatX attitude_input_matrix(std::span<const Mat3> H, const BodyParams& params) {
  const int n = static_cast<int>(H.size());
  const Mat3 j_inv = params.J_inv();
  MatX b(3 * n, 3);
  for (int k = 0; k < n; ++k) b.block<3, 3>(3 * k, 0) = j_inv * H[k];
  return b;
}

struct AttitudeSystem {
  MatX A;
  int n_nu = 1;
  BodyParams params;

  /// B_nu for a ladder with at least n_nu entries.
  MatX B(const AttitudeLadder& ladder) const {
    if (ladder.size() < n_nu) throw DomainError("attitude ladder shorter than n_nu");
    return attitude_input_matrix(std::span<const Mat3>(ladder.H.data(), n_nu), params);
  }
  MatX B(const Vec3& nu) const { return B(build_attitude_ladder(nu, params, n_nu)); }
};

inline AttitudeSystem assemble_attitude_system(int n_nu, const BodyParams& params) {
  check_ladder_length(n_nu);
  return AttitudeSystem{block_shift(n_nu), n_nu, params};
}

/// Index map from block layout (x_0, ..., x_{N-1}), each x_k in R^blocks, to
/// per-axis layout (x_0(i), ..., x_{N-1}(i)) for i = 0..blocks-1:
/// perm[j] is the block-layout index stored at axis-layout position j.
inline std::vector<int> jordan_permutation(int n, int blocks = 3) {
  if (n < 1 || blocks < 1) throw DomainError("jordan_permutation needs n, blocks >= 1");
  std::vector<int> perm(static_cast<std::size_t>(n * blocks));
  for (int i = 0; i < blocks; ++i) {
    for (int k = 0; k < n; ++k) perm[i * n + k] = k * blocks + i;
  }
  return perm;
}

/// Permutation matrix P with (P x)[j] = x[perm[j]].
inline MatX permutation_matrix(std::span<const int> perm) {
  const int n = static_cast<int>(perm.size());
  MatX p = MatX::Zero(n, n);
  for (int j = 0; j < n; ++j) p(j, perm[j]) = 1.0;
  return p;
}

}  // namespace koopman_rb
