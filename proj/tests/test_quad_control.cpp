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

#include <cmath>
#include <random>
#include <set>

#include <gtest/gtest.h>

#include "koopman_rb/presets.hpp"
#include "koopman_rb/quad_control.hpp"
#include "support/oracles.hpp"

namespace koopman_rb {
namespace {

BodyParams quad_params() {
  BodyParams p;
  p.inertia_diagonal = inertia::JQ();
  p.mass = 1.2;
  return p;
}

MatX scalar(double v) { return MatX::Constant(1, 1, v); }

TEST(CareTest, ScalarCasesAreExact) {
  const CareResult zero = care_solve(scalar(0), scalar(1), scalar(1), scalar(1));
  EXPECT_NEAR(zero.P(0, 0), 1.0, 1e-12);
  const CareResult unstable = care_solve(scalar(1), scalar(1), scalar(1), scalar(1));
  EXPECT_NEAR(unstable.P(0, 0), 1.0 + std::sqrt(2.0), 1e-12);
  EXPECT_NEAR(unstable.K(0, 0), 1.0 + std::sqrt(2.0), 1e-12);
}

TEST(CareTest, DoubleIntegrator) {
  MatX A(2, 2), B(2, 1);
  A << 0, 1, 0, 0;
  B << 0, 1;
  const CareResult r = care_solve(A, B, MatX::Identity(2, 2), scalar(1));
  MatX want(2, 2);
  want << std::sqrt(3.0), 1, 1, std::sqrt(3.0);
  EXPECT_LT((r.P - want).norm(), 1e-12);
  EXPECT_LT(r.relative_residual, 1e-12);
  EXPECT_LT(spectral_abscissa(A - B * r.K), 0.0);
}

TEST(CareTest, RandomSystemsMeetResidualGate) {
  std::mt19937_64 rng(51);
  std::normal_distribution<double> n(0.0, 1.0);
  for (int trial = 0; trial < 10; ++trial) {
    const int dim = 6, m = 2;
    MatX A(dim, dim), B(dim, m);
    for (int i = 0; i < A.size(); ++i) A.data()[i] = n(rng);
    for (int i = 0; i < B.size(); ++i) B.data()[i] = n(rng);
    const CareResult r = care_solve(A, B, MatX::Identity(dim, dim), MatX::Identity(m, m));
    EXPECT_LT(r.relative_residual, 1e-8);
    EXPECT_LT((r.P - r.P.transpose()).norm(), 1e-10 * r.P.norm());
    EXPECT_GT(Eigen::SelfAdjointEigenSolver<MatX>(r.P).eigenvalues().minCoeff(), 0.0);
    EXPECT_LT(spectral_abscissa(A - B * r.K), 0.0);
  }
}

TEST(CareTest, RejectsUnstabilizablePairs) {
  EXPECT_FALSE(is_stabilizable(scalar(1), scalar(0)));
  EXPECT_TRUE(is_stabilizable(scalar(-1), scalar(0)));
  EXPECT_THROW(care_solve(scalar(1), scalar(0), scalar(1), scalar(1)), NotStabilizable);
}

TEST(SylvesterTest, SolvesRandomEquation) {
  std::mt19937_64 rng(52);
  std::normal_distribution<double> n(0.0, 1.0);
  MatX M(5, 5), N(3, 3), C(5, 3);
  for (int i = 0; i < M.size(); ++i) M.data()[i] = n(rng);
  for (int i = 0; i < N.size(); ++i) N.data()[i] = n(rng);
  for (int i = 0; i < C.size(); ++i) C.data()[i] = n(rng);
  M.diagonal().array() += 6.0;
  const MatX X = solve_sylvester(M, N, C);
  EXPECT_LT((M * X + X * N - C).norm(), 1e-11 * C.norm());
}

TEST(QuadModelTest, SymmetryIsRequired) {
  EXPECT_NO_THROW(build_quad_model(quad_params()));
  BodyParams p = quad_params();
  p.inertia_diagonal = inertia::J0();
  EXPECT_THROW(build_quad_model(p), SymmetryViolation);
}

TEST(QuadModelTest, HoverInputReachesFourRows) {
  const QuadModel m = build_quad_model(quad_params());
  const QuadB b = m.B(m.lift_state(RigidBodyState{}));
  std::set<int> rows;
  for (int i = 0; i < kQuadStateDim; ++i) {
    if (b.row(i).norm() > 0.0) rows.insert(i);
  }
  EXPECT_EQ(rows, (std::set<int>{5, 9, 10, 15}));
  EXPECT_DOUBLE_EQ(b(5, 0), 1.0 / 1.2);
  EXPECT_DOUBLE_EQ(b(15, 3), 1.0 / inertia::JQ().z());
  EXPECT_DOUBLE_EQ(hover_feedforward_norm(m), m.params.gravity);
}

// The reduced B is the full position input matrix restricted to
// zeta = [T e3; M], plus the yaw-rate row of J^-1.
TEST(QuadModelTest, RestrictionOfFullInputMatrix) {
  const QuadModel m = build_quad_model(quad_params());
  Eigen::Matrix<double, 6, 4> S = Eigen::Matrix<double, 6, 4>::Zero();
  S(2, 0) = 1.0;
  S.bottomRightCorner<3, 3>().setIdentity();
  std::mt19937_64 rng(53);
  for (int i = 0; i < 20; ++i) {
    const RigidBodyState s = testing::random_state(rng, 0.0, 1.0);
    const LiftedState ls = m.lift_state(s);
    const LiftedSystem full = assemble_lifted_system(m.lift_config(), m.params);
    const MatX b_full = full.B(ls);
    const QuadB b = m.B(ls);
    EXPECT_LT((b.topRows(3 * kQuadNz) - b_full.bottomRows(3 * kQuadNz) * S).norm(), 1e-14);
    EXPECT_LT((b.row(kQuadYawIndex) - b_full.row(2) * S).norm(), 1e-14);
    const QuadVec x = m.state(ls);
    EXPECT_EQ(x.head<3 * kQuadNz>(), ls.z_block());
    EXPECT_EQ(x(kQuadYawIndex), s.nu.z());
  }
}

TEST(RecoverInputTest, OrthonormalColumnsAndOrthogonalCommand) {
  std::mt19937_64 rng(54);
  std::normal_distribution<double> n(0.0, 1.0);
  MatX G(16, 4);
  for (int i = 0; i < G.size(); ++i) G.data()[i] = n(rng);
  const MatX Q = Eigen::HouseholderQR<MatX>(G).householderQ() * MatX::Identity(16, 4);
  const VecX zeta = Eigen::Vector4d(1, -2, 0.5, 3);
  const InputRecovery in_range = recover_input(Q, Q * zeta);
  EXPECT_LT((in_range.zeta - zeta).norm(), 1e-12);
  EXPECT_LT(in_range.residual, 1e-14);

  VecX orth = VecX::NullaryExpr(16, [&]() { return n(rng); });
  orth -= Q * (Q.transpose() * orth);
  const InputRecovery none = recover_input(Q, orth);
  EXPECT_LT(none.zeta.norm(), 1e-12);
  EXPECT_TRUE(none.zero_denominator || none.residual > 1e10);

  const InputRecovery zero = recover_input(Q, VecX::Zero(16));
  EXPECT_TRUE(zero.zero_denominator);
  EXPECT_EQ(zero.residual, 0.0);

  MatX deficient = Q;
  deficient.col(3).setZero();
  EXPECT_THROW(recover_input(deficient, orth), RankDeficientB);
}

TEST(RecoverInputTest, HoverTrim) {
  const QuadModel m = build_quad_model(quad_params());
  const QuadB b = m.B(m.lift_state(RigidBodyState{}));
  const QuadInput trim(m.params.mass * m.params.gravity, 0, 0, 0);
  const InputRecovery r = recover_input(b, b * trim);
  EXPECT_LT((r.zeta - trim).norm(), 1e-9);
  EXPECT_LT(r.residual, 1e-12);
}

TEST(RecoverInputTest, LeastSquaresOptimality) {
  const QuadModel m = build_quad_model(quad_params());
  std::mt19937_64 rng(55);
  std::normal_distribution<double> n(0.0, 1.0);
  for (int trial = 0; trial < 5; ++trial) {
    const RigidBodyState s = testing::random_state(rng, 0.1, 1.0);
    const QuadB b = m.B(m.lift_state(s));
    const VecX u = VecX::NullaryExpr(kQuadStateDim, [&]() { return n(rng); });
    const InputRecovery r = recover_input(b, u);
    const VecX res = b * r.zeta - u;
    EXPECT_LT((b.transpose() * res).norm(), 1e-10 * b.norm() * u.norm());
    for (int k = 0; k < 100; ++k) {
      const VecX dz = 1e-3 * VecX::NullaryExpr(4, [&]() { return n(rng); });
      EXPECT_GE((b * (r.zeta + dz) - u).norm(), res.norm() * (1.0 - 1e-12));
    }
  }
}

TEST(TrajectoryTest, SegmentBoundaryConditions) {
  const Vec3 a(1, -2, 0.5), b(3, 4, -1);
  const PolySegment s = rest_to_rest(a, b, 2.0, 4.0);
  EXPECT_LT((s.eval(2.0) - a).norm(), 1e-12);
  EXPECT_LT((s.eval(6.0) - b).norm(), 1e-12);
  EXPECT_LT((s.eval(4.0) - 0.5 * (a + b)).norm(), 1e-12);
  for (int d = 1; d <= 4; ++d) {
    EXPECT_LT(s.eval(2.0, d).norm(), 1e-12) << d;
    EXPECT_LT(s.eval(6.0, d).norm(), 1e-12) << d;
  }
  // Derivatives agree with finite differences of the position.
  const double h = 1e-5, t = 3.3;
  EXPECT_LT((s.eval(t, 1) - (s.eval(t + h) - s.eval(t - h)) / (2 * h)).norm(), 1e-8);
  EXPECT_THROW(rest_to_rest(a, b, 0.0, 0.0), DomainError);
}

TEST(TrajectoryTest, SquareSchedule) {
  const PiecewiseTrajectory tr = square_trajectory({});
  EXPECT_NEAR(tr.total_time, 70.0, 1e-12);
  ASSERT_EQ(tr.corner_times.size(), 4u);
  for (int i = 0; i < 4; ++i) EXPECT_NEAR(tr.corner_times[i], 15.0 * (i + 1), 1e-9);
  EXPECT_LT((tr.at(0.0).p - tr.at(70.0).p).norm(), 1e-9);
  EXPECT_LT((tr.at(15.0).p - Vec3(2, 0, 0)).norm(), 1e-9);
  EXPECT_LT((tr.at(32.0).p - Vec3(2, 2, 0)).norm(), 1e-9);
  EXPECT_LT((tr.at(47.0).p - Vec3(0, 2, 0)).norm(), 1e-9);
  EXPECT_LT(tr.at(17.0).v.norm(), 1e-12);
  EXPECT_GT(tr.at(10.0).v.norm(), 0.1);
  for (double t = 0.0; t <= 70.0; t += 0.5) EXPECT_NEAR(tr.at(t).p.z(), 0.0, 1e-12);
  EXPECT_THROW(square_trajectory({2.0, 70.0, 1.0}), DomainError);
}

TEST(FlatnessTest, HoverAndConsistency) {
  const BodyParams p = quad_params();
  FlatOutput hover{Vec3(1, 2, 3), Vec3::Zero(), Vec3::Zero(), Vec3::Zero(), Vec3::Zero()};
  const FlatState h = flat_state(hover, p);
  EXPECT_LT((h.state.R - Mat3::Identity()).norm(), 1e-15);
  EXPECT_EQ(h.state.nu, Vec3::Zero());
  EXPECT_LT((h.zeta - QuadInput(p.mass * p.gravity, 0, 0, 0)).norm(), 1e-12);

  const PiecewiseTrajectory tr = square_trajectory({});
  for (double t : {6.0, 9.0, 12.3, 22.0, 51.7}) {
    const FlatState f = flat_state(tr.at(t), p);
    const RigidBodyState& s = f.state;
    EXPECT_LT((s.R.transpose() * s.R - Mat3::Identity()).norm(), 1e-13);
    EXPECT_NEAR(euler_from_rotation(s.R).z(), 0.0, 1e-12);
    const StateDerivative d = nonlinear_derivative(s, Vec3(0, 0, f.zeta(0)), f.zeta.tail<3>(), p);
    EXPECT_LT((d.p_dot - tr.at(t).v).norm(), 1e-12);
    // Inertial acceleration R (v' + nu x v) matches the reference.
    EXPECT_LT((s.R * (d.v_dot + s.nu.cross(s.v)) - tr.at(t).a).norm(), 1e-10);
    EXPECT_LT((d.nu_dot - f.nu_dot).norm(), 1e-12);
    const double dt = 1e-5;
    const Mat3 r_dot = (flat_state(tr.at(t + dt), p).state.R -
                        flat_state(tr.at(t - dt), p).state.R) / (2 * dt);
    EXPECT_LT((r_dot - s.R * skew(s.nu)).norm(), 1e-8);
    const Vec3 nu_dot_fd = (flat_state(tr.at(t + dt), p).state.nu -
                            flat_state(tr.at(t - dt), p).state.nu) / (2 * dt);
    EXPECT_LT((nu_dot_fd - f.nu_dot).norm(), 1e-7);
  }
}

TEST(FlatnessTest, ReferenceAtHover) {
  const QuadModel m = build_quad_model(quad_params());
  const QuadReferencePoint r = quad_reference(
      m, FlatOutput{Vec3::Zero(), Vec3::Zero(), Vec3::Zero(), Vec3::Zero(), Vec3::Zero()});
  QuadVec want = QuadVec::Zero();
  want(8) = -m.params.gravity;
  EXPECT_LT((r.x_d - want).norm(), 1e-12);
  QuadVec u = QuadVec::Zero();
  u(5) = m.params.gravity;
  EXPECT_LT((r.u_d - u).norm(), 1e-12);
}

TEST(LqiTest, StepArithmetic) {
  LqiController c;
  c.K = MatX::Zero(kQuadStateDim, 2 * kQuadStateDim);
  const QuadVec x = QuadVec::Zero(), u_d = QuadVec::Constant(0.5);
  QuadVec x_d = QuadVec::Zero();
  EXPECT_EQ(lqi_step(c, x, x_d, u_d, 0.01), u_d);
  EXPECT_EQ(c.x_i, QuadVec::Zero());

  LqiController i;
  i.K = MatX::Zero(kQuadStateDim, 2 * kQuadStateDim);
  x_d(0) = 2.0;
  lqi_step(i, x, x_d, u_d, 0.1);
  EXPECT_EQ(i.x_i(0), 0.0);  // first sample only seeds the trapezoid
  lqi_step(i, x, x_d, u_d, 0.1);
  EXPECT_NEAR(i.x_i(0), 0.2, 1e-15);
  i.integrator_limit = 0.25;
  lqi_step(i, x, x_d, u_d, 0.1);
  EXPECT_EQ(i.x_i(0), 0.25);
  EXPECT_TRUE(i.clamp_active);

  LqiController k;
  k.K = MatX::Zero(kQuadStateDim, 2 * kQuadStateDim);
  k.K(0, 0) = 3.0;
  k.K(0, kQuadStateDim) = 5.0;
  lqi_step(k, x, x_d, u_d, 0.1);
  const QuadVec u = lqi_step(k, x, x_d, u_d, 0.1);
  // X = [x - x_d, x_i] = [-2, 0.2] in the first channel.
  EXPECT_NEAR(u(0), -(3.0 * -2.0 + 5.0 * 0.2) + 0.5, 1e-14);
}

TEST(LqiTest, PresetSynthesisQuality) {
  const QuadScenarioConfig cfg = quad_square_preset();
  const QuadModel m = build_quad_model(cfg.params());
  const LqiController c = synthesize_lqi(m, cfg.weights(), 10.0 * hover_feedforward_norm(m));
  EXPECT_LT(c.riccati_residual, 1e-8);
  EXPECT_LT(c.closed_loop_abscissa, 0.0);
  EXPECT_EQ(c.K.rows(), kQuadStateDim);
  EXPECT_EQ(c.K.cols(), 2 * kQuadStateDim);
}

// The surrogate LTI loop x' = A x + U* removes a constant altitude offset.
TEST(LqiTest, LtiAltitudeStep) {
  const QuadScenarioConfig cfg = quad_square_preset();
  const QuadModel m = build_quad_model(cfg.params());
  LqiController c = synthesize_lqi(m, cfg.weights(), 0.0);
  QuadVec x = QuadVec::Zero(), x_d = QuadVec::Zero();
  x_d(2) = 0.5;
  const double dt = 1e-3;
  for (int i = 0; i < 60000; ++i) {
    const QuadVec u = lqi_step(c, x, x_d, QuadVec::Zero(), dt);
    x += dt * (m.A * x + u);
  }
  EXPECT_LT((x - x_d).norm(), 1e-3);
}

TEST(ClosedLoopTest, HoverIsHeld) {
  const QuadScenarioConfig cfg = quad_square_preset();
  const QuadModel m = build_quad_model(cfg.params());
  const LqiController c = synthesize_lqi(m, cfg.weights(), 10.0 * hover_feedforward_norm(m));
  PiecewiseTrajectory hover;
  hover.segments.push_back(rest_to_rest(Vec3(0, 0, 1), Vec3(0, 0, 1), 0.0, 10.0));
  hover.total_time = 10.0;
  ClosedLoopOptions opt;
  opt.horizon = 10.0;
  const ClosedLoopLog log = closed_loop_sim(m, c, hover, opt);
  EXPECT_FALSE(log.nonfinite_time.has_value());
  EXPECT_LT(log.max_tracking_error, 1e-6);
  for (const ClosedLoopSample& s : log.samples) {
    EXPECT_NEAR(s.zeta(0), m.params.mass * m.params.gravity, 1e-6);
    EXPECT_LT(s.residual, 1e-9);
  }
}

TEST(ClosedLoopTest, SlowerControllerTracksWorse) {
  QuadScenarioConfig cfg = quad_square_preset();
  const double fast = run_quad_scenario(cfg).max_tracking_error;
  cfg.loop.control_dt = 2e-2;
  const double slow = run_quad_scenario(cfg).max_tracking_error;
  EXPECT_GT(slow, fast);
  EXPECT_LT(fast, 0.1 * cfg.square.side);
}

TEST(ClosedLoopTest, RejectsBadPeriods) {
  QuadScenarioConfig cfg = quad_square_preset();
  cfg.loop.control_dt = 1e-4;
  EXPECT_THROW(validate(cfg), ConfigError);
  cfg = quad_square_preset();
  cfg.r_actuated = 0.0;
  EXPECT_THROW(validate(cfg), ConfigError);
}

TEST(QuadJsonTest, RoundTripAndUnknownKeys) {
  const QuadScenarioConfig cfg = quad_square_preset();
  const Json j = to_json(cfg);
  EXPECT_EQ(to_json(quad_scenario_from_json(j)), j);
  Json bad = j;
  bad["weights"]["q_extra"] = 1.0;
  EXPECT_THROW(quad_scenario_from_json(bad), ConfigError);
}

}  // namespace
}  // namespace koopman_rb
