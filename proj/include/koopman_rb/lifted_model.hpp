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

// Combined lifted model x' = A x + B(x) zeta with x = (nu_0..nu_{Nnu-1},
// z_0..z_{Nz-1}) and zeta = [F; M]. Provides lifting, simulation of the
// truncated model and reconstruction of physical quantities.
#pragma once

#include <algorithm>
#include <cmath>
#include <optional>
#include <vector>

#include "koopman_rb/position_lift.hpp"

namespace koopman_rb {

/// Where the state-dependent input matrix is evaluated during simulation.
enum class BSource {
  /// From auxiliary g/v/p/nu chains propagated with their own lifted dynamics.
  kLifted,
  /// From the lifting of a concurrently integrated nonlinear state.
  kNonlinear,
};

/// Lifted coordinates plus the auxiliary ladders they were built from.
struct LiftedState {
  TruncationConfig config;
  VecX x;
  /// Ladders of length max(n_nu, n_z) at the lifting point.
  AttitudeLadder attitude;
  PositionLadder position;
  /// Physical state the lifting was computed from.
  RigidBodyState origin;

  Eigen::Ref<const VecX> nu_block() const {
    return x.head(config.attitude_dim());
  }
  Eigen::Ref<const VecX> z_block() const { return x.tail(config.position_dim()); }
  Vec3 nu(int k) const { return x.segment<3>(3 * k); }
  Vec3 z(int k) const { return x.segment<3>(config.attitude_dim() + 3 * k); }
};

inline int aux_length(const TruncationConfig& c) { return std::max(c.n_nu, c.n_z); }

/// Input matrix rows for the combined state: attitude rows [0, J^-1 H_k],
/// position rows [Xi_k, -Z_k].
inline MatX combined_input_matrix(const TruncationConfig& c, std::span<const Mat3> H,
                                  std::span<const Mat3> Xi, std::span<const Mat3> Z,
                                  const BodyParams& params) {
  MatX b = MatX::Zero(c.dim(), 6);
  b.block(0, 3, c.attitude_dim(), 3) =
      attitude_input_matrix(H.first(static_cast<std::size_t>(c.n_nu)), params);
  b.block(c.attitude_dim(), 0, c.position_dim(), 6) = position_input_matrix(
      Xi.first(static_cast<std::size_t>(c.n_z)), Z.first(static_cast<std::size_t>(c.n_z)));
  return b;
}

/// Permutation taking the block layout of x to per-axis Jordan chains
/// (three attitude chains followed by three position chains).
inline std::vector<int> lifted_jordan_permutation(const TruncationConfig& c) {
  std::vector<int> perm = jordan_permutation(c.n_nu);
  for (int j : jordan_permutation(c.n_z)) perm.push_back(c.attitude_dim() + j);
  return perm;
}

struct LiftedSystem {
  TruncationConfig config;
  BodyParams params;
  CoefficientForm form = CoefficientForm::kDerived;
  /// Constant state matrix in block layout: blkdiag(shift(n_nu), shift(n_z)).
  MatX A;

  /// B(x) from the auxiliary ladders carried by a lifted state.
  MatX B(const LiftedState& s) const {
    return combined_input_matrix(config, s.attitude.H, s.position.Xi, s.position.Z,
                                 params);
  }

  /// A x + B(x) zeta, with zeta = [F; M].
  VecX vector_field(const LiftedState& s, const BodyInput& u) const {
    Eigen::Matrix<double, 6, 1> zeta;
    zeta << u.force, u.torque;
    return A * s.x + B(s) * zeta;
  }

  /// State matrix in per-axis Jordan layout, P A P^T.
  MatX jordan_A() const {
    const MatX p = permutation_matrix(lifted_jordan_permutation(config));
    return p * A * p.transpose();
  }
};

inline LiftedSystem assemble_lifted_system(const TruncationConfig& config,
                                           const BodyParams& params,
                                           CoefficientForm form = CoefficientForm::kDerived) {
  config.validate();
  params.validate();
  LiftedSystem sys{config, params, form, MatX::Zero(config.dim(), config.dim())};
  sys.A.topLeftCorner(config.attitude_dim(), config.attitude_dim()) =
      block_shift(config.n_nu);
  sys.A.bottomRightCorner(config.position_dim(), config.position_dim()) =
      block_shift(config.n_z);
  return sys;
}

inline LiftedState lift(const RigidBodyState& s, const BodyParams& params,
                        const TruncationConfig& config,
                        CoefficientForm form = CoefficientForm::kDerived) {
  config.validate();
  const int la = aux_length(config);
  LiftedState out;
  out.config = config;
  out.origin = s;
  out.attitude = build_attitude_ladder(s.nu, params, la);
  out.position = build_position_ladder(s, out.attitude, params, la, form);
  out.x.resize(config.dim());
  for (int k = 0; k < config.n_nu; ++k) out.x.segment<3>(3 * k) = out.attitude.nu[k];
  for (int k = 0; k < config.n_z; ++k) {
    out.x.segment<3>(config.attitude_dim() + 3 * k) = out.position.z[k];
  }
  return out;
}

// ---------------------------------------------------------------------------
// Reconstruction

inline constexpr double kGravityNormTolerance = 0.5;

/// Gravity observable g_0 implied by the lifted coordinates, using
/// g_0 = p_2 + 2 v_1 - z_2 with p_0 = z_0 and v_0 = z_1 - S^T(nu_0) z_0.
/// Needs n_z >= 3; returns nullopt otherwise.
inline std::optional<Vec3> gravity_from_lifted(const TruncationConfig& c, const VecX& x,
                                               const BodyParams& params) {
  if (c.n_z < 3) return std::nullopt;
  const int off = c.attitude_dim();
  const Vec3 nu0 = x.segment<3>(0);
  const Vec3 nu1 = c.n_nu >= 2 ? Vec3(x.segment<3>(3))
                               : attitude_observables(nu0, params, 2)[1];
  const Vec3 z0 = x.segment<3>(off), z1 = x.segment<3>(off + 3),
             z2 = x.segment<3>(off + 6);
  const Vec3 p1 = z0.cross(nu0);
  const Vec3 v0 = z1 - p1;
  const Vec3 p2 = p1.cross(nu0) + z0.cross(nu1);
  const Vec3 v1 = v0.cross(nu0);
  return p2 + 2.0 * v1 - z2;
}

/// Roll and pitch from g_0 = g R^T e3 = g (-s_theta, s_phi c_theta, c_phi c_theta).
inline Vec3 roll_pitch_from_gravity(const Vec3& g0) {
  const double roll = std::atan2(g0.y(), g0.z());
  const double pitch = std::atan2(-g0.x(), std::hypot(g0.y(), g0.z()));
  return {roll, pitch, 0.0};
}

struct Reconstruction {
  Vec3 nu = Vec3::Zero();
  Vec3 eta = Vec3::Zero();
  Vec3 p = Vec3::Zero();
  /// Body-frame velocity v_0 = z_1 - S^T(nu_0) z_0 (zero when n_z < 2).
  Vec3 v = Vec3::Zero();
};

/// Physical quantities from lifted coordinates. Roll and pitch come from the
/// gravity observable (`g0_fallback` is used when n_z < 3), yaw is supplied.
inline Reconstruction reconstruct(const TruncationConfig& c, const VecX& x, double psi,
                                  const BodyParams& params,
                                  const std::optional<Vec3>& g0_fallback = std::nullopt,
                                  double gimbal_tolerance = kGimbalTolerance) {
  std::optional<Vec3> g0 = gravity_from_lifted(c, x, params);
  if (!g0) g0 = g0_fallback;
  if (!g0) throw DegenerateGravityObservable("no gravity observable available (n_z < 3)");
  const double g = std::abs(params.gravity);
  if (!g0->allFinite() || std::abs(g0->norm() - g) > kGravityNormTolerance * g) {
    throw DegenerateGravityObservable("|g_0| deviates from g by more than 50%");
  }
  Reconstruction r;
  r.eta = roll_pitch_from_gravity(params.gravity < 0 ? Vec3(-*g0) : *g0);
  if (std::cos(r.eta.y()) < gimbal_tolerance) {
    throw DegenerateGravityObservable("gravity observable at the pitch singularity");
  }
  r.eta.z() = psi;
  r.nu = x.segment<3>(0);
  const Vec3 z0 = x.segment<3>(c.attitude_dim());
  r.p = rotation_from_euler(r.eta) * z0;
  if (c.n_z >= 2) r.v = x.segment<3>(c.attitude_dim() + 3) - z0.cross(r.nu);
  return r;
}

inline Reconstruction reconstruct(const LiftedState& s, double psi,
                                  const BodyParams& params) {
  return reconstruct(s.config, s.x, psi, params,
                     s.position.g.empty() ? std::nullopt : std::optional<Vec3>(s.position.g[0]));
}

// ---------------------------------------------------------------------------
// Simulation of the truncated lifted dynamics

struct LiftedSimOptions {
  IntegrationOptions integration;
  BSource b_source = BSource::kLifted;
  /// Integrate in per-axis Jordan coordinates (results are mapped back).
  bool jordan = false;
};

struct LiftedTrajectory {
  TruncationConfig config;
  std::vector<double> t;
  /// Lifted coordinates in block layout.
  std::vector<VecX> x;
  /// Integrated yaw estimate.
  std::vector<double> psi;
  /// Gravity observable of the auxiliary chain (or of the nonlinear state).
  std::vector<Vec3> g0_aux;
  std::optional<double> nonfinite_time;
};

namespace detail {

inline Vec3 segment3(const VecX& y, int offset, int k) {
  return y.segment<3>(offset + 3 * k);
}

inline std::vector<Vec3> unpack_chain(const VecX& y, int offset, int n) {
  std::vector<Vec3> out(n);
  for (int k = 0; k < n; ++k) out[k] = segment3(y, offset, k);
  return out;
}

inline double yaw_rate(const Vec3& nu, const Vec3& g0) {
  const Vec3 rp = roll_pitch_from_gravity(g0);
  const double c = std::cos(rp.y());
  if (std::abs(c) < kGimbalTolerance) return 0.0;
  return (std::sin(rp.x()) * nu.y() + std::cos(rp.x()) * nu.z()) / c;
}

/// Layout of the simulation vector in lifted-B mode:
///   [x | nu chain | g chain | v chain | p chain | psi], chains of length la.
struct LiftedLayout {
  int nx, la, nu_off, g_off, v_off, p_off, psi_off, size;
  explicit LiftedLayout(const TruncationConfig& c) {
    nx = c.dim();
    la = aux_length(c);
    nu_off = nx;
    g_off = nu_off + 3 * la;
    v_off = g_off + 3 * la;
    p_off = v_off + 3 * la;
    psi_off = p_off + 3 * la;
    size = psi_off + 1;
  }
};

}  // namespace detail

/// Integrates x' = A x + B(x) zeta(t) with the same RK4 scheme as the
/// nonlinear model. In kLifted mode B is evaluated from auxiliary chains
///   nu_k' = nu_{k+1} + J^-1 H_k M,   g_k' = g_{k+1} - G_k M,
///   v_k'  = v_{k+1} - g_k - V_k M + Omega_k F / m,   p_k' = p_{k+1} + v_k - P_k M
/// truncated at max(n_nu, n_z) entries; in kNonlinear mode B is the lifting of
/// a nonlinear state integrated alongside.
inline LiftedTrajectory simulate_lifted(const LiftedState& x0, const InputSignal& input,
                                        const BodyParams& params,
                                        const LiftedSimOptions& options,
                                        CoefficientForm form = CoefficientForm::kDerived) {
  const TruncationConfig c = x0.config;
  const LiftedSystem sys = assemble_lifted_system(c, params, form);
  const MatX perm = options.jordan ? permutation_matrix(lifted_jordan_permutation(c))
                                   : MatX::Identity(c.dim(), c.dim());
  const MatX A = options.jordan ? MatX(perm * sys.A * perm.transpose()) : sys.A;
  const Mat3 j_inv = params.J_inv();
  const int nx = c.dim();

  auto to_block = [&](const VecX& xs) -> VecX {
    return options.jordan ? VecX(perm.transpose() * xs) : xs;
  };
  auto to_sim = [&](const VecX& xb) -> VecX {
    return options.jordan ? VecX(perm * xb) : xb;
  };

  LiftedTrajectory out;
  out.config = c;

  if (options.b_source == BSource::kLifted) {
    const detail::LiftedLayout L(c);
    VecX y0(L.size);
    y0.head(nx) = to_sim(x0.x);
    for (int k = 0; k < L.la; ++k) {
      y0.segment<3>(L.nu_off + 3 * k) = x0.attitude.nu[k];
      y0.segment<3>(L.g_off + 3 * k) = x0.position.g[k];
      y0.segment<3>(L.v_off + 3 * k) = x0.position.v[k];
      y0.segment<3>(L.p_off + 3 * k) = x0.position.p[k];
    }
    y0(L.psi_off) = euler_from_rotation(x0.origin.R).z();

    auto field = [&](double t, const VecX& y) -> VecX {
      const BodyInput u = input(t);
      const VecX xb = to_block(y.head(nx));
      const std::vector<Vec3> nus = detail::unpack_chain(y, L.nu_off, L.la);
      const std::vector<Vec3> gs = detail::unpack_chain(y, L.g_off, L.la);
      const std::vector<Vec3> vs = detail::unpack_chain(y, L.v_off, L.la);
      const std::vector<Vec3> ps = detail::unpack_chain(y, L.p_off, L.la);
      const AttitudeCoefficients aux_att = attitude_coefficients(nus, params);
      const PositionCoefficients pc =
          position_coefficients(gs, vs, ps, nus, aux_att.H, params, L.la, form);
      const ZCoefficients zc = compose_z_coefficients(pc, params.mass, L.la);
      std::vector<Vec3> own_nu(c.n_nu);
      for (int k = 0; k < c.n_nu; ++k) own_nu[k] = xb.segment<3>(3 * k);
      const AttitudeCoefficients own_att = attitude_coefficients(own_nu, params);

      Eigen::Matrix<double, 6, 1> zeta;
      zeta << u.force, u.torque;
      const MatX B = combined_input_matrix(c, own_att.H, zc.Xi, zc.Z, params);
      VecX dy(L.size);
      dy.head(nx) = to_sim(sys.A * xb + B * zeta);

      const Vec3 fm = u.force / params.mass;
      for (int k = 0; k < L.la; ++k) {
        const bool top = k + 1 == L.la;
        dy.segment<3>(L.nu_off + 3 * k) =
            (top ? Vec3::Zero() : nus[k + 1]) + j_inv * aux_att.H[k] * u.torque;
        dy.segment<3>(L.g_off + 3 * k) =
            (top ? Vec3::Zero() : gs[k + 1]) - pc.G[k] * u.torque;
        dy.segment<3>(L.v_off + 3 * k) = (top ? Vec3::Zero() : vs[k + 1]) +
                                         kGravityLadderSign * gs[k] -
                                         pc.V[k] * u.torque + pc.Omega[k] * fm;
        dy.segment<3>(L.p_off + 3 * k) =
            (top ? Vec3::Zero() : ps[k + 1]) + vs[k] - pc.P[k] * u.torque;
      }
      const std::optional<Vec3> g_est = gravity_from_lifted(c, xb, params);
      dy(L.psi_off) = detail::yaw_rate(xb.segment<3>(0), g_est ? *g_est : gs[0]);
      return dy;
    };

    const VectorTrajectory raw = integrate_vector(
        field, y0,
        IntegrationOptions{options.integration.dt, options.integration.horizon,
                           options.integration.t0, options.integration.record_every,
                           OnNonFinite::kStop});
    out.t = raw.t;
    out.nonfinite_time = raw.nonfinite_time;
    for (const VecX& y : raw.y) {
      out.x.push_back(to_block(y.head(nx)));
      out.psi.push_back(y(L.psi_off));
      out.g0_aux.push_back(y.segment<3>(L.g_off));
    }
    if (options.integration.on_nonfinite == OnNonFinite::kThrow && out.nonfinite_time) {
      throw NonFiniteState("lifted state became non-finite at t = " +
                           std::to_string(*out.nonfinite_time));
    }
    return out;
  }

  // kNonlinear: [x | packed nonlinear state | psi]
  const int nl_off = nx;
  const int psi_off = nx + kRigidBodyStateSize;
  VecX y0(psi_off + 1);
  y0.head(nx) = to_sim(x0.x);
  y0.segment(nl_off, kRigidBodyStateSize) = pack(x0.origin);
  y0(psi_off) = euler_from_rotation(x0.origin.R).z();

  auto field = [&](double t, const VecX& y) -> VecX {
    const BodyInput u = input(t);
    const VecX xb = to_block(y.head(nx));
    const RigidBodyState s = unpack(y.segment(nl_off, kRigidBodyStateSize));
    const LiftedState ls = lift(s, params, c, form);
    Eigen::Matrix<double, 6, 1> zeta;
    zeta << u.force, u.torque;
    VecX dy(y.size());
    dy.head(nx) = to_sim(sys.A * xb + sys.B(ls) * zeta);
    dy.segment(nl_off, kRigidBodyStateSize) =
        pack(nonlinear_derivative(s, u.force, u.torque, params));
    const std::optional<Vec3> g_est = gravity_from_lifted(c, xb, params);
    dy(psi_off) = detail::yaw_rate(xb.segment<3>(0), g_est ? *g_est : ls.position.g[0]);
    return dy;
  };
  auto post = [&](VecX& y) {
    if (!y.allFinite()) return;
    const Mat3 r = orthonormalize(Eigen::Map<const Mat3>(y.data() + nl_off + 6));
    Eigen::Map<Mat3>(y.data() + nl_off + 6) = r;
  };
  const VectorTrajectory raw = integrate_vector(
      field, y0,
      IntegrationOptions{options.integration.dt, options.integration.horizon,
                         options.integration.t0, options.integration.record_every,
                         OnNonFinite::kStop},
      post);
  out.t = raw.t;
  out.nonfinite_time = raw.nonfinite_time;
  for (const VecX& y : raw.y) {
    out.x.push_back(to_block(y.head(nx)));
    out.psi.push_back(y(psi_off));
    out.g0_aux.push_back(params.gravity *
                         unpack(y.segment(nl_off, kRigidBodyStateSize)).R.transpose().col(2));
  }
  if (options.integration.on_nonfinite == OnNonFinite::kThrow && out.nonfinite_time) {
    throw NonFiniteState("lifted state became non-finite at t = " +
                         std::to_string(*out.nonfinite_time));
  }
  return out;
}

}  // namespace koopman_rb
