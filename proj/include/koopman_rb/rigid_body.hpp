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

// Exact Newton-Euler rigid-body dynamics, Euler-angle utilities and the
// fixed-step RK4 integrator shared by the nonlinear and lifted simulations.
#pragma once

#include <cmath>
#include <cstddef>
#include <functional>
#include <optional>
#include <vector>

#include <Eigen/SVD>

#include "koopman_rb/types.hpp"

namespace koopman_rb {

/// Cross-product matrix: skew(a) * b == a x b.
inline Mat3 skew(const Vec3& a) {
  Mat3 s;
  s << 0.0, -a.z(), a.y(),
       a.z(), 0.0, -a.x(),
       -a.y(), a.x(), 0.0;
  return s;
}

/// Body-to-inertial rotation for Euler angles eta = (roll, pitch, yaw),
/// R = Rz(yaw) * Ry(pitch) * Rx(roll).
inline Mat3 rotation_from_euler(const Vec3& eta) {
  const double cf = std::cos(eta.x()), sf = std::sin(eta.x());
  const double ct = std::cos(eta.y()), st = std::sin(eta.y());
  const double cp = std::cos(eta.z()), sp = std::sin(eta.z());
  Mat3 r;
  r << ct * cp, sf * st * cp - cf * sp, cf * st * cp + sf * sp,
       ct * sp, sf * st * sp + cf * cp, cf * st * sp - sf * cp,
       -st, sf * ct, cf * ct;
  return r;
}

/// Minimum |cos(pitch)| accepted when Euler rates are extracted.
inline constexpr double kGimbalTolerance = 1e-6;

/// Matrix W with nu = W * eta_dot for the roll-pitch-yaw convention above.
inline Mat3 euler_rate_matrix(const Vec3& eta,
                              double gimbal_tolerance = kGimbalTolerance) {
  const double cf = std::cos(eta.x()), sf = std::sin(eta.x());
  const double ct = std::cos(eta.y()), st = std::sin(eta.y());
  if (std::abs(ct) < gimbal_tolerance) {
    throw GimbalProximity("pitch too close to +/-pi/2 for Euler-rate extraction");
  }
  Mat3 w;
  w << 1.0, 0.0, -st,
       0.0, cf, ct * sf,
       0.0, -sf, ct * cf;
  return w;
}

/// Euler angles (roll, pitch, yaw) of a rotation matrix, pitch in [-pi/2, pi/2].
inline Vec3 euler_from_rotation(const Mat3& R) {
  const double pitch = std::atan2(-R(2, 0), std::hypot(R(2, 1), R(2, 2)));
  const double roll = std::atan2(R(2, 1), R(2, 2));
  const double yaw = std::atan2(R(1, 0), R(0, 0));
  return {roll, pitch, yaw};
}

/// Closest rotation matrix in the Frobenius sense (polar factor).
inline Mat3 orthonormalize(const Mat3& R) {
  Eigen::JacobiSVD<Mat3> svd(R, Eigen::ComputeFullU | Eigen::ComputeFullV);
  Mat3 q = svd.matrixU() * svd.matrixV().transpose();
  if (q.determinant() < 0.0) {
    Mat3 u = svd.matrixU();
    u.col(2) *= -1.0;
    q = u * svd.matrixV().transpose();
  }
  return q;
}

/// External force and torque, both expressed in the body frame.
struct BodyInput {
  Vec3 force = Vec3::Zero();
  Vec3 torque = Vec3::Zero();
};

using InputSignal = std::function<BodyInput(double)>;

inline InputSignal zero_input() {
  return [](double) { return BodyInput{}; };
}

inline InputSignal constant_input(const BodyInput& u) {
  return [u](double) { return u; };
}

/// Newton-Euler vector field:
///   R' = R S(nu),  J nu' = M - S(nu) J nu,  p' = R v,
///   v' = F/m - S(nu) v - g R^T e3.
inline StateDerivative nonlinear_derivative(const RigidBodyState& s,
                                            const Vec3& force,
                                            const Vec3& torque,
                                            const BodyParams& params) {
  const Vec3 gamma = params.inertia_diagonal.cwiseProduct(s.nu);
  StateDerivative d;
  d.p_dot = s.R * s.v;
  d.R_dot = s.R * skew(s.nu);
  d.nu_dot = (torque - s.nu.cross(gamma)).cwiseQuotient(params.inertia_diagonal);
  d.v_dot = force / params.mass - s.nu.cross(s.v) -
            params.gravity * s.R.transpose().col(2);
  return d;
}

// Flat layout used by the integrator: p(3) v(3) R(9, column-major) nu(3).
inline constexpr int kRigidBodyStateSize = 18;

inline VecX pack(const RigidBodyState& s) {
  VecX y(kRigidBodyStateSize);
  y.segment<3>(0) = s.p;
  y.segment<3>(3) = s.v;
  y.segment<9>(6) = Eigen::Map<const Eigen::Matrix<double, 9, 1>>(s.R.data());
  y.segment<3>(15) = s.nu;
  return y;
}

inline RigidBodyState unpack(const VecX& y) {
  RigidBodyState s;
  s.p = y.segment<3>(0);
  s.v = y.segment<3>(3);
  s.R = Eigen::Map<const Mat3>(y.data() + 6);
  s.nu = y.segment<3>(15);
  return s;
}

inline VecX pack(const StateDerivative& d) {
  VecX y(kRigidBodyStateSize);
  y.segment<3>(0) = d.p_dot;
  y.segment<3>(3) = d.v_dot;
  y.segment<9>(6) = Eigen::Map<const Eigen::Matrix<double, 9, 1>>(d.R_dot.data());
  y.segment<3>(15) = d.nu_dot;
  return y;
}

/// One classical RK4 step of y' = f(t, y).
template <class Field>
VecX rk4_step(const Field& f, double t, const VecX& y, double dt) {
  const VecX k1 = f(t, y);
  const VecX k2 = f(t + 0.5 * dt, y + (0.5 * dt) * k1);
  const VecX k3 = f(t + 0.5 * dt, y + (0.5 * dt) * k2);
  const VecX k4 = f(t + dt, y + dt * k3);
  return y + (dt / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4);
}

enum class OnNonFinite { kThrow, kStop };

struct IntegrationOptions {
  double dt = 1e-3;
  double horizon = 1.0;
  double t0 = 0.0;
  /// Keep every n-th sample (the final sample is always kept).
  std::size_t record_every = 1;
  OnNonFinite on_nonfinite = OnNonFinite::kThrow;
};

struct VectorTrajectory {
  std::vector<double> t;
  std::vector<VecX> y;
  /// Time of the first step that produced a non-finite state, if any.
  std::optional<double> nonfinite_time;
};

inline std::size_t step_count(const IntegrationOptions& opt) {
  if (!(opt.dt > 0.0) || !(opt.horizon >= opt.dt)) {
    throw DomainError("integration requires dt > 0 and horizon >= dt");
  }
  return static_cast<std::size_t>(std::llround(opt.horizon / opt.dt));
}

/// Fixed-step RK4 over [t0, t0 + horizon]. Samples lie at t0 + i*dt.
/// `post` is applied to the state after every step (e.g. re-orthonormalization).
template <class Field, class Post>
VectorTrajectory integrate_vector(const Field& f, const VecX& y0,
                                  const IntegrationOptions& opt,
                                  const Post& post) {
  const std::size_t steps = step_count(opt);
  const std::size_t stride = std::max<std::size_t>(1, opt.record_every);
  VectorTrajectory out;
  out.t.reserve(steps / stride + 2);
  out.y.reserve(steps / stride + 2);
  out.t.push_back(opt.t0);
  out.y.push_back(y0);
  VecX y = y0;
  for (std::size_t i = 0; i < steps; ++i) {
    const double t = opt.t0 + static_cast<double>(i) * opt.dt;
    y = rk4_step(f, t, y, opt.dt);
    post(y);
    const double t_next = opt.t0 + static_cast<double>(i + 1) * opt.dt;
    if (!y.allFinite()) {
      if (opt.on_nonfinite == OnNonFinite::kThrow) {
        throw NonFiniteState("state became non-finite at t = " +
                             std::to_string(t_next));
      }
      out.nonfinite_time = t_next;
      break;
    }
    if ((i + 1) % stride == 0 || i + 1 == steps) {
      out.t.push_back(t_next);
      out.y.push_back(y);
    }
  }
  return out;
}

template <class Field>
VectorTrajectory integrate_vector(const Field& f, const VecX& y0,
                                  const IntegrationOptions& opt) {
  return integrate_vector(f, y0, opt, [](VecX&) {});
}

struct RigidBodyTrajectory {
  std::vector<double> t;
  std::vector<RigidBodyState> states;
  std::optional<double> nonfinite_time;
};

/// Packed Newton-Euler field for the integrator.
inline auto rigid_body_field(const BodyParams& params, const InputSignal& input) {
  return [&params, &input](double t, const VecX& y) -> VecX {
    const BodyInput u = input(t);
    return pack(nonlinear_derivative(unpack(y), u.force, u.torque, params));
  };
}

inline void reorthonormalize_packed(VecX& y) {
  if (!y.allFinite()) return;
  const Mat3 r = orthonormalize(Eigen::Map<const Mat3>(y.data() + 6));
  Eigen::Map<Mat3>(y.data() + 6) = r;
}

/// Integrates the nonlinear dynamics with fixed-step RK4; the rotation is
/// projected back onto SO(3) after every step.
inline RigidBodyTrajectory integrate(const BodyParams& params,
                                     const RigidBodyState& s0,
                                     const InputSignal& input,
                                     const IntegrationOptions& opt) {
  const auto field = rigid_body_field(params, input);
  VectorTrajectory raw =
      integrate_vector(field, pack(s0), opt, reorthonormalize_packed);
  RigidBodyTrajectory out;
  out.t = std::move(raw.t);
  out.states.reserve(raw.y.size());
  for (const VecX& y : raw.y) out.states.push_back(unpack(y));
  out.nonfinite_time = raw.nonfinite_time;
  return out;
}

/// Advances a single state by `duration` using `substeps` RK4 steps (negative
/// durations integrate backwards). Used for short flow-map evaluations.
inline RigidBodyState flow(const BodyParams& params, const RigidBodyState& s0,
                           const BodyInput& input, double duration,
                           int substeps = 1) {
  const InputSignal u = constant_input(input);
  const auto field = rigid_body_field(params, u);
  VecX y = pack(s0);
  const double h = duration / substeps;
  for (int i = 0; i < substeps; ++i) y = rk4_step(field, i * h, y, h);
  return unpack(y);
}

}  // namespace koopman_rb
