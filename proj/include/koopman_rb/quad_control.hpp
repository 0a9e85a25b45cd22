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

// Quadrotor case study on the lifted model: the reduced 16-state model with
// thrust-only force, LQI synthesis on the surrogate (A, I), least-squares
// recovery of the physical input and the two-rate closed loop.
#pragma once

#include <algorithm>
#include <cmath>
#include <complex>
#include <limits>
#include <optional>
#include <string>
#include <vector>

#include <Eigen/Eigenvalues>
#include <Eigen/QR>

#include "koopman_rb/lifted_model.hpp"

namespace koopman_rb {

/// Position ladder length of the reduced model.
inline constexpr int kQuadNz = 5;
/// 3 * kQuadNz position observables plus the yaw rate.
inline constexpr int kQuadStateDim = 3 * kQuadNz + 1;
inline constexpr int kQuadInputDim = 4;
inline constexpr int kQuadYawIndex = 3 * kQuadNz;
/// Largest tolerated relative mismatch |Ix - Iy| / Ix.
inline constexpr double kQuadSymmetryTolerance = 1e-3;

using QuadVec = Eigen::Matrix<double, kQuadStateDim, 1>;
using QuadB = Eigen::Matrix<double, kQuadStateDim, kQuadInputDim>;
using QuadInput = Eigen::Vector4d;  // [T; Mx; My; Mz]

/// Reduced lifted quadrotor: x = (z_0, ..., z_4, nu_0z), zeta = [T; M].
struct QuadModel {
  BodyParams params;
  MatX A;

  TruncationConfig lift_config() const { return {1, kQuadNz}; }

  /// Reduced coordinates of a physical state, together with its lifting.
  QuadVec state(const LiftedState& ls) const {
    QuadVec x;
    x.head<3 * kQuadNz>() = ls.z_block();
    x(kQuadYawIndex) = ls.nu(0).z();
    return x;
  }

  LiftedState lift_state(const RigidBodyState& s) const {
    return lift(s, params, lift_config());
  }

  /// Rows [Xi_k e3, -Z_k] for every z_k and [0, 0, 0, 1/Iz] for the yaw rate.
  QuadB B(const LiftedState& ls) const {
    QuadB b = QuadB::Zero();
    for (int k = 0; k < kQuadNz; ++k) {
      b.block<3, 1>(3 * k, 0) = ls.position.Xi[k].col(2);
      b.block<3, 3>(3 * k, 1) = -ls.position.Z[k];
    }
    b(kQuadYawIndex, 3) = 1.0 / params.inertia_diagonal.z();
    return b;
  }
};

inline QuadModel build_quad_model(const BodyParams& params) {
  params.validate();
  const Vec3& j = params.inertia_diagonal;
  if (std::abs(j.x() - j.y()) / j.x() > kQuadSymmetryTolerance) {
    throw SymmetryViolation("reduced quadrotor model needs Ix == Iy");
  }
  QuadModel m{params, MatX::Zero(kQuadStateDim, kQuadStateDim)};
  m.A.topLeftCorner(3 * kQuadNz, 3 * kQuadNz) = block_shift(kQuadNz);
  return m;
}

// ---------------------------------------------------------------------------
// Continuous algebraic Riccati equation

struct CareOptions {
  int max_iterations = 100;
  double sign_tolerance = 1e-13;
  /// Newton-Kleinman polishing steps applied after the sign iteration.
  int refinement_steps = 2;
  double residual_tolerance = 1e-8;
};

struct CareResult {
  MatX P;
  MatX K;  // R^-1 B^T P
  int iterations = 0;
  /// ||A^T P + P A - P B R^-1 B^T P + Q|| / ||P|| (spectral-free Frobenius).
  double relative_residual = 0.0;
};

/// Solves M X + X N = C by complex Schur decompositions (Bartels-Stewart).
inline MatX solve_sylvester(const MatX& M, const MatX& N, const MatX& C) {
  using CMat = Eigen::MatrixXcd;
  Eigen::ComplexSchur<MatX> sm(M), sn(N);
  const CMat& S = sm.matrixT();
  const CMat& U = sm.matrixU();
  const CMat& T = sn.matrixT();
  const CMat& V = sn.matrixU();
  const CMat Cp = U.adjoint() * C.cast<std::complex<double>>() * V;
  const Eigen::Index n = N.rows();
  CMat Y(M.rows(), n);
  for (Eigen::Index j = 0; j < n; ++j) {
    Eigen::VectorXcd rhs = Cp.col(j);
    for (Eigen::Index i = 0; i < j; ++i) rhs -= T(i, j) * Y.col(i);
    CMat lhs = S;
    lhs.diagonal().array() += T(j, j);
    Y.col(j) = lhs.triangularView<Eigen::Upper>().solve(rhs);
  }
  return (U * Y * V.adjoint()).real();
}

/// True when every eigenvalue of A with nonnegative real part passes the PBH
/// rank test rank [A - lambda I, B] = n.
inline bool is_stabilizable(const MatX& A, const MatX& B, double tol = 1e-9) {
  const Eigen::Index n = A.rows();
  Eigen::EigenSolver<MatX> es(A, false);
  for (Eigen::Index i = 0; i < n; ++i) {
    const std::complex<double> lambda = es.eigenvalues()(i);
    if (lambda.real() < -tol) continue;
    Eigen::MatrixXcd m(n, n + B.cols());
    m.leftCols(n) = A.cast<std::complex<double>>();
    m.leftCols(n).diagonal().array() -= lambda;
    m.rightCols(B.cols()) = B.cast<std::complex<double>>();
    Eigen::JacobiSVD<Eigen::MatrixXcd> svd(m);
    const auto& sv = svd.singularValues();
    const double cut = static_cast<double>(std::max(m.rows(), m.cols())) *
                       std::numeric_limits<double>::epsilon() * std::max(sv(0), 1.0);
    if ((sv.array() > cut).count() < n) return false;
  }
  return true;
}

inline double care_residual(const MatX& A, const MatX& G, const MatX& Q, const MatX& P) {
  return (A.transpose() * P + P * A - P * G * P + Q).norm();
}

/// Stabilizing solution of A^T P + P A - P B R^-1 B^T P + Q = 0.
///
/// Matrix sign function of the Hamiltonian with determinant scaling, followed
/// by Newton-Kleinman steps.
inline CareResult care_solve(const MatX& A, const MatX& B, const MatX& Q, const MatX& R,
                             const CareOptions& opt = {}) {
  const Eigen::Index n = A.rows();
  if (A.cols() != n || B.rows() != n || Q.rows() != n || Q.cols() != n ||
      R.rows() != B.cols() || R.cols() != B.cols()) {
    throw DomainError("care_solve: inconsistent dimensions");
  }
  Eigen::LLT<MatX> rllt(0.5 * (R + R.transpose()));
  if (rllt.info() != Eigen::Success) throw DomainError("R must be positive definite");
  if (!is_stabilizable(A, B)) throw NotStabilizable("(A, B) is not stabilizable");

  const MatX Rinv_Bt = rllt.solve(B.transpose());
  const MatX G = B * Rinv_Bt;
  const MatX Qs = 0.5 * (Q + Q.transpose());

  MatX Z(2 * n, 2 * n);
  Z << A, -G, -Qs, -A.transpose();
  CareResult out;
  bool converged = false;
  for (int it = 1; it <= opt.max_iterations; ++it) {
    Eigen::PartialPivLU<MatX> lu(Z);
    const double logdet = lu.matrixLU().diagonal().array().abs().log().sum();
    if (!std::isfinite(logdet)) {
      throw NoConvergence("Hamiltonian has eigenvalues on the imaginary axis");
    }
    const double c = std::exp(logdet / static_cast<double>(2 * n));
    const MatX next = 0.5 * (Z / c + c * lu.inverse());
    const double change = (next - Z).norm() / next.norm();
    Z = next;
    out.iterations = it;
    if (change < opt.sign_tolerance) {
      converged = true;
      break;
    }
  }
  if (!converged) throw NoConvergence("matrix sign iteration did not converge");

  const MatX I = MatX::Identity(n, n);
  MatX lhs(2 * n, n), rhs(2 * n, n);
  lhs << Z.topRightCorner(n, n), Z.bottomRightCorner(n, n) + I;
  rhs << -(Z.topLeftCorner(n, n) + I), -Z.bottomLeftCorner(n, n);
  MatX P = lhs.colPivHouseholderQr().solve(rhs);
  P = 0.5 * (P + P.transpose());

  for (int r = 0; r < opt.refinement_steps; ++r) {
    const MatX Acl = A - G * P;
    const MatX res = A.transpose() * P + P * A - P * G * P + Qs;
    const MatX dP = solve_sylvester(Acl.transpose(), Acl, -res);
    P += 0.5 * (dP + dP.transpose());
  }
  if (!P.allFinite()) throw NoConvergence("Riccati solution is not finite");
  out.P = P;
  out.K = Rinv_Bt * P;
  out.relative_residual = care_residual(A, G, Qs, P) / P.norm();
  if (!(out.relative_residual < opt.residual_tolerance)) {
    throw NoConvergence("Riccati residual above tolerance");
  }
  return out;
}

inline double spectral_abscissa(const MatX& M) {
  Eigen::EigenSolver<MatX> es(M, false);
  return es.eigenvalues().real().maxCoeff();
}

// ---------------------------------------------------------------------------
// LQI on the surrogate dynamics x' = A x + U*

struct LqiWeights {
  QuadVec q_state = QuadVec::Ones();
  QuadVec q_integral = QuadVec::Ones();
  QuadVec r = QuadVec::Ones();
};

struct LqiController {
  MatX K;  // 16 x 32 over X = [x - x_d, x_i]
  MatX Q, R;
  MatX P;
  double riccati_residual = 0.0;
  double closed_loop_abscissa = 0.0;
  QuadVec x_i = QuadVec::Zero();
  QuadVec last_error = QuadVec::Zero();
  bool started = false;
  /// Elementwise clamp on x_i; <= 0 disables it.
  double integrator_limit = 0.0;
  bool clamp_active = false;
};

/// Augmented pair for X = [x - x_d, x_i], x_i' = x_d - x, surrogate B* = I.
inline void lqi_augmented(const MatX& A, MatX& A_aug, MatX& B_aug) {
  const Eigen::Index n = A.rows();
  A_aug = MatX::Zero(2 * n, 2 * n);
  A_aug.topLeftCorner(n, n) = A;
  A_aug.bottomLeftCorner(n, n) = -MatX::Identity(n, n);
  B_aug = MatX::Zero(2 * n, n);
  B_aug.topRows(n) = MatX::Identity(n, n);
}

inline LqiController synthesize_lqi(const QuadModel& model, const LqiWeights& w,
                                    double integrator_limit,
                                    const CareOptions& opt = {}) {
  MatX A_aug, B_aug;
  lqi_augmented(model.A, A_aug, B_aug);
  LqiController c;
  c.Q = MatX::Zero(2 * kQuadStateDim, 2 * kQuadStateDim);
  c.Q.diagonal() << w.q_state, w.q_integral;
  c.R = w.r.asDiagonal();
  const CareResult care = care_solve(A_aug, B_aug, c.Q, c.R, opt);
  c.K = care.K;
  c.P = care.P;
  c.riccati_residual = care.relative_residual;
  c.closed_loop_abscissa = spectral_abscissa(A_aug - B_aug * c.K);
  c.integrator_limit = integrator_limit;
  return c;
}

/// U* = -K X + U*_d with X = [x - x_d, x_i]; x_i advances by the trapezoid rule.
inline QuadVec lqi_step(LqiController& ctrl, const QuadVec& x, const QuadVec& x_d,
                        const QuadVec& u_d, double dt_ctrl) {
  const QuadVec e = x_d - x;
  if (ctrl.started) ctrl.x_i += 0.5 * dt_ctrl * (ctrl.last_error + e);
  ctrl.started = true;
  ctrl.last_error = e;
  ctrl.clamp_active = false;
  if (ctrl.integrator_limit > 0.0) {
    for (int i = 0; i < kQuadStateDim; ++i) {
      const double lim = ctrl.integrator_limit;
      if (std::abs(ctrl.x_i(i)) > lim) {
        ctrl.x_i(i) = std::clamp(ctrl.x_i(i), -lim, lim);
        ctrl.clamp_active = true;
      }
    }
  }
  Eigen::Matrix<double, 2 * kQuadStateDim, 1> X;
  X << -e, ctrl.x_i;
  return -ctrl.K * X + u_d;
}

struct InputRecovery {
  VecX zeta;
  /// ||B zeta - U*|| / ||B zeta||; infinite when B zeta = 0 and U* != 0.
  double residual = 0.0;
  bool zero_denominator = false;
};

/// Least-squares zeta = argmin ||B zeta - U*|| by column-pivoted QR.
inline InputRecovery recover_input(const MatX& B, const VecX& u_star) {
  Eigen::ColPivHouseholderQR<MatX> qr(B);
  qr.setThreshold(static_cast<double>(std::max(B.rows(), B.cols())) *
                  std::numeric_limits<double>::epsilon());
  if (qr.rank() < B.cols()) throw RankDeficientB("input matrix lost column rank");
  InputRecovery out;
  out.zeta = qr.solve(u_star);
  const VecX fit = B * out.zeta;
  const double num = (fit - u_star).norm();
  const double den = fit.norm();
  if (den == 0.0) {
    out.zero_denominator = true;
    out.residual = num == 0.0 ? 0.0 : std::numeric_limits<double>::infinity();
  } else {
    out.residual = num / den;
  }
  return out;
}

// ---------------------------------------------------------------------------
// Reference generation

/// Ninth-order rest-to-rest polynomial per axis on [0, duration].
struct PolySegment {
  double t0 = 0.0;
  double duration = 1.0;
  /// coeffs(i, a): coefficient of tau^i, tau = (t - t0) / duration, axis a.
  Eigen::Matrix<double, 10, 3> coeffs = Eigen::Matrix<double, 10, 3>::Zero();

  /// d-th time derivative (d <= 9) at absolute time t, clamped to the segment.
  Vec3 eval(double t, int d = 0) const {
    const double tau = std::clamp((t - t0) / duration, 0.0, 1.0);
    Vec3 out = Vec3::Zero();
    for (int i = d; i < 10; ++i) {
      double f = 1.0;
      for (int j = 0; j < d; ++j) f *= i - j;
      out += f * std::pow(tau, i - d) * coeffs.row(i).transpose();
    }
    return out / std::pow(duration, d);
  }
};

/// Segment from a to b with zero velocity through snap at both ends.
inline PolySegment rest_to_rest(const Vec3& a, const Vec3& b, double t0, double duration) {
  if (!(duration > 0.0)) throw DomainError("segment duration must be positive");
  PolySegment s;
  s.t0 = t0;
  s.duration = duration;
  // 126 tau^5 - 420 tau^6 + 540 tau^7 - 315 tau^8 + 70 tau^9
  static constexpr double kBlend[10] = {0, 0, 0, 0, 0, 126, -420, 540, -315, 70};
  s.coeffs.row(0) = a.transpose();
  for (int i = 5; i < 10; ++i) s.coeffs.row(i) += kBlend[i] * (b - a).transpose();
  return s;
}

/// Position and its first four derivatives.
struct FlatOutput {
  Vec3 p, v, a, j, s;
};

struct PiecewiseTrajectory {
  std::vector<PolySegment> segments;
  /// Times at which the reference comes to rest at a corner and starts a hold.
  std::vector<double> corner_times;
  double total_time = 0.0;

  FlatOutput at(double t) const {
    auto it = std::upper_bound(segments.begin(), segments.end(), t,
                               [](double x, const PolySegment& s) { return x < s.t0; });
    const PolySegment& seg = it == segments.begin() ? segments.front() : *std::prev(it);
    return {seg.eval(t, 0), seg.eval(t, 1), seg.eval(t, 2), seg.eval(t, 3), seg.eval(t, 4)};
  }
};

struct SquareOptions {
  double side = 2.0;
  double total_time = 70.0;
  /// Fraction of each quarter (and of the initial / final pad) spent at rest.
  double hold_fraction = 1.0 / 3.0;
  Vec3 origin = Vec3::Zero();
};

/// Closed square in the horizontal plane: initial hold, then four legs each
/// followed by a hold, then a final hold. With the defaults: 5 s, 4 x (10 s
/// + 5 s), 5 s.
inline PiecewiseTrajectory square_trajectory(const SquareOptions& o) {
  if (!(o.total_time > 0.0)) throw DomainError("total_time must be positive");
  if (!(o.hold_fraction > 0.0 && o.hold_fraction < 1.0)) {
    throw DomainError("hold_fraction must lie in (0, 1)");
  }
  // total = 2 pad + 4 (leg + hold), pad = hold, hold = f (leg + hold).
  const double quarter = o.total_time / (4.0 + 2.0 * o.hold_fraction);
  const double hold = o.hold_fraction * quarter;
  const double leg = quarter - hold;
  const Vec3 corners[5] = {o.origin, o.origin + Vec3(o.side, 0, 0),
                           o.origin + Vec3(o.side, o.side, 0),
                           o.origin + Vec3(0, o.side, 0), o.origin};
  PiecewiseTrajectory tr;
  double t = 0.0;
  tr.segments.push_back(rest_to_rest(corners[0], corners[0], t, hold));
  t += hold;
  for (int i = 0; i < 4; ++i) {
    tr.segments.push_back(rest_to_rest(corners[i], corners[i + 1], t, leg));
    t += leg;
    tr.corner_times.push_back(t);
    tr.segments.push_back(rest_to_rest(corners[i + 1], corners[i + 1], t, hold));
    t += hold;
  }
  tr.segments.push_back(rest_to_rest(corners[4], corners[4], t, hold));
  t += hold;
  tr.total_time = t;
  return tr;
}

namespace detail {

/// Unit vector u / |u| and its first two time derivatives.
inline void normalize_jet(const Vec3& u, const Vec3& du, const Vec3& ddu, Vec3& n,
                          Vec3& dn, Vec3& ddn) {
  const double r = u.norm();
  if (!(r > 0.0)) throw DomainError("cannot normalize a zero vector");
  n = u / r;
  const double dr = n.dot(du);
  dn = (du - dr * n) / r;
  const double ddr = dn.dot(du) + n.dot(ddu);
  ddn = (ddu - ddr * n - 2.0 * dr * dn) / r;
}

}  // namespace detail

/// Physical state and input that realize a flat output with zero yaw.
struct FlatState {
  RigidBodyState state;
  Vec3 nu_dot;
  QuadInput zeta;  // [T; M]
};

/// Differential flatness with R = Ry(theta) Rx(phi): thrust axis b3 along
/// a + g e3, b1 = e2 x b3 normalized.
inline FlatState flat_state(const FlatOutput& f, const BodyParams& params) {
  const Vec3 e2 = Vec3::UnitY();
  const Vec3 t = f.a + params.gravity * Vec3::UnitZ();
  Vec3 b3, db3, ddb3, b1, db1, ddb1;
  detail::normalize_jet(t, f.j, f.s, b3, db3, ddb3);
  detail::normalize_jet(e2.cross(b3), e2.cross(db3), e2.cross(ddb3), b1, db1, ddb1);
  const Vec3 b2 = b3.cross(b1);
  const Vec3 db2 = db3.cross(b1) + b3.cross(db1);
  const Vec3 ddb2 = ddb3.cross(b1) + 2.0 * db3.cross(db1) + b3.cross(ddb1);

  FlatState out;
  RigidBodyState& s = out.state;
  s.R.col(0) = b1;
  s.R.col(1) = b2;
  s.R.col(2) = b3;
  s.p = f.p;
  s.v = s.R.transpose() * f.v;
  s.nu = {b3.dot(db2), b1.dot(db3), b2.dot(db1)};
  out.nu_dot = {db3.dot(db2) + b3.dot(ddb2), db1.dot(db3) + b1.dot(ddb3),
                db2.dot(db1) + b2.dot(ddb1)};
  const Vec3 jn = params.inertia_diagonal.cwiseProduct(s.nu);
  const Vec3 torque = params.inertia_diagonal.cwiseProduct(out.nu_dot) + s.nu.cross(jn);
  out.zeta << params.mass * t.norm(), torque;
  return out;
}

/// Lifted reference x_d and feedforward U*_d = B(x_d) zeta_d.
struct QuadReferencePoint {
  QuadVec x_d;
  QuadVec u_d;
  FlatState flat;
};

inline QuadReferencePoint quad_reference(const QuadModel& model, const FlatOutput& f) {
  QuadReferencePoint r;
  r.flat = flat_state(f, model.params);
  const LiftedState ls = model.lift_state(r.flat.state);
  r.x_d = model.state(ls);
  r.u_d = model.B(ls) * r.flat.zeta;
  return r;
}

// ---------------------------------------------------------------------------
// Closed loop

struct ClosedLoopOptions {
  double plant_dt = 1e-3;
  double control_dt = 1e-2;
  double horizon = 70.0;
  /// Added to the reference start position.
  Vec3 initial_offset = Vec3::Zero();
};

struct ClosedLoopSample {
  double t = 0.0;
  Vec3 p, p_ref, eta;
  QuadInput zeta;
  double residual = 0.0;
  bool clamp_active = false;
};

struct ClosedLoopLog {
  std::vector<ClosedLoopSample> samples;
  double max_tracking_error = 0.0;
  /// Set when the plant state became non-finite; the run stops there.
  std::optional<double> nonfinite_time;
};

/// Nonlinear plant at plant_dt with zero-order hold on zeta; the controller
/// lifts the measured state every control_dt. Starts at the reference state.
inline ClosedLoopLog closed_loop_sim(const QuadModel& model, LqiController ctrl,
                                     const PiecewiseTrajectory& ref,
                                     const ClosedLoopOptions& opt) {
  if (!(opt.plant_dt > 0.0) || !(opt.control_dt > 0.0) || !(opt.horizon > 0.0)) {
    throw DomainError("closed loop periods and horizon must be positive");
  }
  const long ratio = std::lround(opt.control_dt / opt.plant_dt);
  if (ratio < 1 || std::abs(ratio * opt.plant_dt - opt.control_dt) > 1e-12) {
    throw DomainError("control period must be an integer multiple of the plant step");
  }
  const long steps = std::lround(opt.horizon / opt.plant_dt);
  ClosedLoopLog log;
  log.samples.reserve(static_cast<std::size_t>(steps / ratio + 1));
  RigidBodyState s = flat_state(ref.at(0.0), model.params).state;
  s.p += opt.initial_offset;
  VecX y = pack(s);
  QuadInput zeta = QuadInput::Zero();
  BodyInput held;
  const auto field = [&](double, const VecX& yy) {
    return pack(nonlinear_derivative(unpack(yy), held.force, held.torque, model.params));
  };
  for (long i = 0; i <= steps; ++i) {
    const double t = static_cast<double>(i) * opt.plant_dt;
    s = unpack(y);
    if (!s.all_finite()) {
      log.nonfinite_time = t;
      break;
    }
    if (i % ratio == 0) {
      const FlatOutput f = ref.at(t);
      const QuadReferencePoint r = quad_reference(model, f);
      const LiftedState ls = model.lift_state(s);
      const QuadVec x = model.state(ls);
      const QuadVec u = lqi_step(ctrl, x, r.x_d, r.u_d, opt.control_dt);
      const InputRecovery rec = recover_input(model.B(ls), u);
      zeta = rec.zeta;
      held.force = Vec3(0.0, 0.0, zeta(0));
      held.torque = zeta.tail<3>();
      ClosedLoopSample smp;
      smp.t = t;
      smp.p = s.p;
      smp.p_ref = f.p;
      smp.eta = euler_from_rotation(s.R);
      smp.zeta = zeta;
      smp.residual = rec.residual;
      smp.clamp_active = ctrl.clamp_active;
      log.max_tracking_error = std::max(log.max_tracking_error, (s.p - f.p).norm());
      log.samples.push_back(smp);
    }
    if (i == steps) break;
    y = rk4_step(field, t, y, opt.plant_dt);
    reorthonormalize_packed(y);
  }
  return log;
}

// ---------------------------------------------------------------------------
// Square-trajectory scenario

struct QuadScenarioConfig {
  std::string name = "quad-square";
  std::string description;
  Vec3 inertia_diagonal = inertia::JQ();
  double mass = 1.2;
  double gravity = kStandardGravity;
  SquareOptions square;
  ClosedLoopOptions loop;
  /// State weights per z_k order (applied to all three axes) and on nu_0z.
  Eigen::Matrix<double, kQuadNz, 1> q_z = Eigen::Matrix<double, kQuadNz, 1>::Ones();
  double q_yaw = 1.0;
  Eigen::Matrix<double, kQuadNz, 1> q_integral_z = Eigen::Matrix<double, kQuadNz, 1>::Ones();
  double q_integral_yaw = 1.0;
  /// Input weights on the rows the physical input reaches at hover (z_1z,
  /// z_3x, z_3y, nu_0z) and on every other row.
  double r_actuated = 1.0;
  double r_unactuated = 1.0;
  /// Integrator clamp as a multiple of ||U*_d|| at hover.
  double integrator_limit_factor = 10.0;

  BodyParams params() const {
    BodyParams p;
    p.inertia_diagonal = inertia_diagonal;
    p.mass = mass;
    p.gravity = gravity;
    return p;
  }

  LqiWeights weights() const {
    LqiWeights w;
    for (int k = 0; k < kQuadNz; ++k) {
      w.q_state.segment<3>(3 * k).setConstant(q_z(k));
      w.q_integral.segment<3>(3 * k).setConstant(q_integral_z(k));
    }
    w.q_state(kQuadYawIndex) = q_yaw;
    w.q_integral(kQuadYawIndex) = q_integral_yaw;
    w.r.setConstant(r_unactuated);
    for (int i : kActuatedRows) w.r(i) = r_actuated;
    return w;
  }

  /// z_1z (thrust), z_3x and z_3y (roll / pitch torque), nu_0z (yaw torque).
  static constexpr int kActuatedRows[4] = {5, 9, 10, kQuadYawIndex};
};

/// Hover feedforward magnitude ||B(x_hover) [m g, 0, 0, 0]|| (equals g).
inline double hover_feedforward_norm(const QuadModel& model) {
  RigidBodyState hover;
  QuadInput trim(model.params.mass * model.params.gravity, 0, 0, 0);
  return (model.B(model.lift_state(hover)) * trim).norm();
}

inline void validate(const QuadScenarioConfig& c) {
  try {
    c.params().validate();
  } catch (const DomainError& e) {
    throw ConfigError(e.what());
  }
  if (!(c.square.side > 0.0) || !(c.square.total_time > 0.0) ||
      !(c.square.hold_fraction > 0.0 && c.square.hold_fraction < 1.0)) {
    throw ConfigError("square: side, total_time > 0 and hold_fraction in (0, 1) required");
  }
  if (!(c.loop.plant_dt > 0.0) || !(c.loop.control_dt >= c.loop.plant_dt) ||
      !(c.loop.horizon > 0.0)) {
    throw ConfigError("loop: plant_dt > 0, control_dt >= plant_dt, horizon > 0 required");
  }
  if ((c.q_z.array() <= 0.0).any() || (c.q_integral_z.array() <= 0.0).any() ||
      !(c.q_yaw > 0.0) || !(c.q_integral_yaw > 0.0)) {
    throw ConfigError("state weights must be positive (Q positive definite)");
  }
  if (!(c.r_actuated > 0.0) || !(c.r_unactuated > 0.0)) {
    throw ConfigError("input weights must be positive");
  }
  if (c.integrator_limit_factor < 0.0) throw ConfigError("integrator_limit_factor < 0");
}

struct QuadRunReport {
  LqiController controller;
  ClosedLoopLog log;
  PiecewiseTrajectory reference;
  double side = 0.0;
  double max_tracking_error = 0.0;
  /// Position error at the end of every corner hold.
  std::vector<double> corner_errors;
  double thrust_min = 0.0, thrust_max = 0.0;
  double torque_norm_max = 0.0;
  /// Fraction of controller samples with residual below 20 %.
  double residual_fraction_below_20pct = 0.0;
  double residual_max = 0.0;
  double residual_median = 0.0;
  std::size_t clamp_samples = 0;
};

inline QuadRunReport run_quad_scenario(const QuadScenarioConfig& cfg) {
  validate(cfg);
  const QuadModel model = build_quad_model(cfg.params());
  QuadRunReport rep;
  rep.side = cfg.square.side;
  rep.controller = synthesize_lqi(model, cfg.weights(),
                                  cfg.integrator_limit_factor * hover_feedforward_norm(model));
  rep.reference = square_trajectory(cfg.square);
  rep.log = closed_loop_sim(model, rep.controller, rep.reference, cfg.loop);
  if (rep.log.nonfinite_time) {
    throw NonFiniteState("closed loop diverged at t = " + std::to_string(*rep.log.nonfinite_time));
  }
  const auto& smp = rep.log.samples;
  rep.max_tracking_error = rep.log.max_tracking_error;
  rep.thrust_min = std::numeric_limits<double>::infinity();
  rep.thrust_max = -std::numeric_limits<double>::infinity();
  std::vector<double> residuals;
  std::size_t below = 0;
  for (const ClosedLoopSample& s : smp) {
    rep.thrust_min = std::min(rep.thrust_min, s.zeta(0));
    rep.thrust_max = std::max(rep.thrust_max, s.zeta(0));
    rep.torque_norm_max = std::max(rep.torque_norm_max, s.zeta.tail<3>().norm());
    residuals.push_back(s.residual);
    if (s.residual < 0.2) ++below;
    if (s.clamp_active) ++rep.clamp_samples;
  }
  if (!smp.empty()) {
    rep.residual_fraction_below_20pct = static_cast<double>(below) / smp.size();
    rep.residual_max = *std::max_element(residuals.begin(), residuals.end());
    std::nth_element(residuals.begin(), residuals.begin() + residuals.size() / 2,
                     residuals.end());
    rep.residual_median = residuals[residuals.size() / 2];
  }
  // Corner i is held by segment 2i + 2; the hold ends where segment 2i + 3 starts.
  for (std::size_t i = 0; i < rep.reference.corner_times.size(); ++i) {
    const double hold_end = rep.reference.segments[2 * i + 3].t0;
    const ClosedLoopSample* best = nullptr;
    for (const ClosedLoopSample& s : smp) {
      if (s.t <= hold_end + 1e-9) best = &s;
    }
    if (best) rep.corner_errors.push_back((best->p - best->p_ref).norm());
  }
  return rep;
}

}  // namespace koopman_rb
