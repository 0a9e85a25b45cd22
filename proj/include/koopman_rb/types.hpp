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

// Core value types shared by every module: small fixed-size Eigen aliases,
// body parameters, the physical rigid-body state and the error hierarchy.
#pragma once

#include <cmath>
#include <stdexcept>
#include <string>

#include <Eigen/Dense>

namespace koopman_rb {

using Vec3 = Eigen::Vector3d;
using Mat3 = Eigen::Matrix3d;
using VecX = Eigen::VectorXd;
using MatX = Eigen::MatrixXd;

/// Base class of every error raised by the library.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

#define KOOPMAN_RB_DEFINE_ERROR(Name)         \
  class Name : public Error {                 \
   public:                                    \
    using Error::Error;                       \
  }

KOOPMAN_RB_DEFINE_ERROR(GimbalProximity);
KOOPMAN_RB_DEFINE_ERROR(NonFiniteState);
KOOPMAN_RB_DEFINE_ERROR(DegenerateGravityObservable);
KOOPMAN_RB_DEFINE_ERROR(InfiniteHorizon);
KOOPMAN_RB_DEFINE_ERROR(DomainError);
KOOPMAN_RB_DEFINE_ERROR(OverflowError);
KOOPMAN_RB_DEFINE_ERROR(NoConvergence);
KOOPMAN_RB_DEFINE_ERROR(NotStabilizable);
KOOPMAN_RB_DEFINE_ERROR(RankDeficientB);
KOOPMAN_RB_DEFINE_ERROR(SymmetryViolation);
KOOPMAN_RB_DEFINE_ERROR(ZeroNormalizer);
KOOPMAN_RB_DEFINE_ERROR(ConfigError);

#undef KOOPMAN_RB_DEFINE_ERROR

/// Standard gravitational acceleration [m/s^2].
inline constexpr double kStandardGravity = 9.81;

/// Inertia [kg m^2], mass [kg] and gravity [m/s^2] of a rigid body.
///
/// The inertia tensor is expressed in principal axes, so only the diagonal is
/// stored. Every entry must be strictly positive.
struct BodyParams {
  Vec3 inertia_diagonal{1.0, 1.0, 1.0};
  double mass = 1.0;
  double gravity = kStandardGravity;

  Mat3 J() const { return inertia_diagonal.asDiagonal(); }
  Mat3 J_inv() const { return inertia_diagonal.cwiseInverse().asDiagonal(); }

  /// Spectral norm of J^-1 (largest inverse principal moment).
  double J_inv_norm() const { return 1.0 / inertia_diagonal.minCoeff(); }

  void validate() const {
    if (!(inertia_diagonal.array() > 0.0).all() ||
        !inertia_diagonal.allFinite()) {
      throw DomainError("inertia diagonal must be finite and strictly positive");
    }
    if (!(mass > 0.0) || !std::isfinite(mass)) {
      throw DomainError("mass must be finite and strictly positive");
    }
    if (!std::isfinite(gravity)) {
      throw DomainError("gravity must be finite");
    }
  }
};

/// Physical state of the body.
///
/// `p` is the inertial position, `v` the body-frame linear velocity, `R` the
/// body-to-inertial rotation and `nu` the body-frame angular velocity.
struct RigidBodyState {
  Vec3 p = Vec3::Zero();
  Vec3 v = Vec3::Zero();
  Mat3 R = Mat3::Identity();
  Vec3 nu = Vec3::Zero();

  bool all_finite() const {
    return p.allFinite() && v.allFinite() && R.allFinite() && nu.allFinite();
  }
};

/// Time derivative of a RigidBodyState.
struct StateDerivative {
  Vec3 p_dot = Vec3::Zero();
  Vec3 v_dot = Vec3::Zero();
  Mat3 R_dot = Mat3::Zero();
  Vec3 nu_dot = Vec3::Zero();
};

// Named inertia tensors used by the validation scenarios [kg m^2].
namespace inertia {
inline Vec3 J0() { return {0.0131, 0.020, 0.0234}; }
inline Vec3 J1() { return {0.001, 0.01, 0.1}; }
inline Vec3 J2() { return {0.1, 0.11, 0.012}; }
inline Vec3 J3() { return {0.1, 0.11, 0.12}; }
inline Vec3 J4() { return {1.0, 2.0, 3.0}; }
inline Vec3 JQ() { return {0.0131, 0.0131, 0.0234}; }
inline Vec3 JI() { return {1.0, 1.0, 1.0}; }
}  // namespace inertia

}  // namespace koopman_rb
