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

#include <random>

#include <gtest/gtest.h>

#include "koopman_rb/lifted_model.hpp"
#include "support/oracles.hpp"

namespace koopman_rb {
namespace {

BodyParams params_for(const Vec3& j, double mass = 1.0) {
  BodyParams p;
  p.inertia_diagonal = j;
  p.mass = mass;
  return p;
}

LiftedSimOptions sim_options(double dt, double horizon, BSource b = BSource::kLifted,
                             bool jordan = false) {
  LiftedSimOptions o;
  o.integration.dt = dt;
  o.integration.horizon = horizon;
  o.b_source = b;
  o.jordan = jordan;
  return o;
}

TEST(LiftTest, RestState) {
  const BodyParams p = params_for(inertia::J0());
  const LiftedState s = lift(RigidBodyState{}, p, {3, 4});
  ASSERT_EQ(s.x.size(), 21);
  VecX want = VecX::Zero(21);
  want.segment<3>(9 + 6) = Vec3(0, 0, -p.gravity);
  EXPECT_EQ(s.x, want);
}

TEST(LiftTest, BaseObservables) {
  const BodyParams p = params_for(inertia::J1());
  std::mt19937_64 rng(31);
  const RigidBodyState st = testing::random_state(rng, 0.1, 1.0);
  const LiftedState s = lift(st, p, {2, 3});
  EXPECT_EQ(s.nu(0), st.nu);
  EXPECT_LT((s.z(0) - st.R.transpose() * st.p).norm(), 1e-15);
  EXPECT_EQ(s.nu_block().size(), 6);
  EXPECT_EQ(s.z_block().size(), 9);
}

TEST(LiftedSystemTest, StateMatrixIsNilpotentBlockShift) {
  const LiftedSystem sys = assemble_lifted_system({3, 5}, params_for(inertia::J0()));
  MatX power = MatX::Identity(24, 24);
  for (int i = 0; i < 5; ++i) power = power * sys.A;
  EXPECT_EQ(power, MatX::Zero(24, 24));
  EXPECT_EQ(sys.A.block(0, 3, 3, 3), MatX::Identity(3, 3));
  EXPECT_EQ(sys.A.block(9, 12, 3, 3), MatX::Identity(3, 3));
  EXPECT_EQ(sys.A.block(6, 9, 3, 3), MatX::Zero(3, 3));
}

// Lifted vector field equals the time derivative of the lifting along the
// forced nonlinear flow, for all blocks whose successor is retained.
TEST(LiftedSystemTest, VectorFieldMatchesFlowDerivative) {
  std::mt19937_64 rng(32);
  const TruncationConfig c{6, 6};
  for (const Vec3& j : {inertia::J0(), inertia::J2(), inertia::JQ()}) {
    const BodyParams p = params_for(j, 1.2);
    const LiftedSystem sys = assemble_lifted_system(c, p);
    for (int trial = 0; trial < 5; ++trial) {
      const RigidBodyState s = testing::random_state(rng, 0.05, 0.3);
      const BodyInput u{testing::random_vec(rng, 12.0), testing::random_vec(rng, 1e-3)};
      const LiftedState ls = lift(s, p, c);
      const VecX field = sys.vector_field(ls, u);
      auto f = [&](const RigidBodyState& st) -> VecX { return lift(st, p, c).x; };
      const VecX d = testing::flow_derivative(f, p, s, u, 1e-3);
      for (int blk = 0; blk < c.n_nu + c.n_z; ++blk) {
        if (blk == c.n_nu - 1 || blk == c.dim() / 3 - 1) continue;
        const Vec3 got = field.segment<3>(3 * blk), want = d.segment<3>(3 * blk);
        const double scale = want.norm() + ls.x.segment<3>(3 * blk).norm() * s.nu.norm() +
                             1e-300;
        EXPECT_LT((got - want).norm() / scale, 1e-6) << "block " << blk;
      }
    }
  }
}

TEST(SimulateLiftedTest, ZeroStateStaysZero) {
  const BodyParams p = params_for(inertia::J0());
  LiftedState s = lift(RigidBodyState{}, p, {3, 3});
  s.x.setZero();
  for (Vec3& g : s.position.g) g.setZero();
  const LiftedTrajectory traj = simulate_lifted(s, zero_input(), p, sim_options(0.01, 2.0));
  for (const VecX& x : traj.x) EXPECT_EQ(x, VecX::Zero(18));
}

TEST(SimulateLiftedTest, SphericalInertiaIsExact) {
  const BodyParams p = params_for(Vec3::Constant(0.7));
  RigidBodyState s0;
  s0.nu = Vec3(0.3, -0.2, 0.4);
  const double dt = 1e-2, horizon = 100.0;
  const auto ref = integrate(p, s0, zero_input(), IntegrationOptions{dt, horizon});
  const LiftedTrajectory traj =
      simulate_lifted(lift(s0, p, {4, 1}), zero_input(), p, sim_options(dt, horizon));
  ASSERT_EQ(traj.x.size(), ref.states.size());
  for (std::size_t i = 0; i < traj.x.size(); ++i) {
    EXPECT_LT((traj.x[i].head<3>() - ref.states[i].nu).norm() / s0.nu.norm(), 1e-9);
  }
}

TEST(SimulateLiftedTest, JordanLayoutGivesSameTrajectory) {
  const BodyParams p = params_for(inertia::J0(), 1.1);
  std::mt19937_64 rng(33);
  const RigidBodyState s0 = testing::random_state(rng, 0.05, 0.1);
  const InputSignal u = constant_input({Vec3(0.1, -0.2, 11.0), Vec3(1e-4, 0, -1e-4)});
  for (BSource b : {BSource::kLifted, BSource::kNonlinear}) {
    const LiftedState x0 = lift(s0, p, {4, 5});
    const auto block = simulate_lifted(x0, u, p, sim_options(1e-2, 3.0, b, false));
    const auto jordan = simulate_lifted(x0, u, p, sim_options(1e-2, 3.0, b, true));
    ASSERT_EQ(block.x.size(), jordan.x.size());
    for (std::size_t i = 0; i < block.x.size(); ++i) {
      EXPECT_LT((block.x[i] - jordan.x[i]).norm(), 1e-12 * (1.0 + block.x[i].norm()));
    }
  }
}

TEST(SimulateLiftedTest, BSourcesAgreeOverShortHorizon) {
  const BodyParams p = params_for(inertia::J0(), 1.1);
  RigidBodyState s0;
  s0.nu = Vec3::Constant(0.01);
  const InputSignal u = constant_input({Vec3(0, 0, 1.1 * 9.85), Vec3(1e-5, 1e-5, 0)});
  const LiftedState x0 = lift(s0, p, {6, 6});
  const auto a = simulate_lifted(x0, u, p, sim_options(1e-2, 1.0, BSource::kLifted));
  const auto b = simulate_lifted(x0, u, p, sim_options(1e-2, 1.0, BSource::kNonlinear));
  EXPECT_LT((a.x.back() - b.x.back()).norm(), 1e-6 * a.x.back().norm());
}

// With J = I and a body-fixed thrust the only error source is the N_z
// truncation: refining the step barely moves the error.
TEST(SimulateLiftedTest, SphericalThrustErrorIsTruncationOnly) {
  const BodyParams p = params_for(inertia::JI());
  RigidBodyState s0;
  s0.nu = Vec3(0.05, -0.03, 0.02);
  const InputSignal u = constant_input({Vec3(0, 0, 9.85), Vec3::Zero()});
  auto final_error = [&](double dt) {
    const double horizon = 4.0;
    const auto ref = integrate(p, s0, u, IntegrationOptions{dt, horizon});
    const auto traj =
        simulate_lifted(lift(s0, p, {1, 4}), u, p, sim_options(dt, horizon));
    const RigidBodyState& sf = ref.states.back();
    return (traj.x.back().segment<3>(3) - sf.R.transpose() * sf.p).norm();
  };
  const double coarse = final_error(2e-3), fine = final_error(1e-3);
  ASSERT_GT(fine, 0.0);
  EXPECT_LT(std::abs(coarse - fine) / fine, 0.01);
}

TEST(ReconstructTest, LevelAttitude) {
  const BodyParams p = params_for(inertia::J0());
  const LiftedState s = lift(RigidBodyState{}, p, {2, 3});
  const Reconstruction r = reconstruct(s, 0.0, p);
  EXPECT_EQ(r.eta, Vec3::Zero());
  EXPECT_EQ(r.p, Vec3::Zero());
}

TEST(ReconstructTest, RoundTripThroughRotation) {
  const BodyParams p = params_for(inertia::J0());
  std::mt19937_64 rng(34);
  for (int i = 0; i < 50; ++i) {
    RigidBodyState st = testing::random_state(rng, 0.0, 0.5);
    const Vec3 eta(0.1, 0.2, testing::random_vec(rng, 3.0).x());
    st.R = rotation_from_euler(eta);
    const LiftedState s = lift(st, p, {3, 3});
    const Reconstruction r = reconstruct(s, eta.z(), p);
    EXPECT_LT((r.eta - eta).norm(), 1e-9);
    EXPECT_LT((r.p - st.p).norm(), 1e-9 * (1.0 + st.p.norm()));
    EXPECT_LT((r.v - st.v).norm(), 1e-9 * (1.0 + st.v.norm()));
    EXPECT_EQ(r.nu, st.nu);
  }
}

TEST(ReconstructTest, GravityFromLiftedMatchesObservable) {
  const BodyParams p = params_for(inertia::J4());
  std::mt19937_64 rng(35);
  for (int i = 0; i < 20; ++i) {
    const RigidBodyState st = testing::random_state(rng, 0.1, 1.0);
    for (const TruncationConfig c : {TruncationConfig{1, 3}, TruncationConfig{4, 5}}) {
      const LiftedState s = lift(st, p, c);
      const auto g0 = gravity_from_lifted(c, s.x, p);
      ASSERT_TRUE(g0.has_value());
      EXPECT_LT((*g0 - s.position.g[0]).norm(), 1e-10 * p.gravity);
    }
  }
  EXPECT_FALSE(gravity_from_lifted({2, 2}, VecX::Zero(12), p).has_value());
}

TEST(ReconstructTest, DegenerateGravityObservable) {
  const BodyParams p = params_for(inertia::J0());
  const TruncationConfig c{2, 2};
  EXPECT_THROW(reconstruct(c, VecX::Zero(c.dim()), 0.0, p), DegenerateGravityObservable);
  EXPECT_NO_THROW(reconstruct(c, VecX::Zero(c.dim()), 0.0, p, Vec3(0, 0, p.gravity)));
  EXPECT_THROW(reconstruct(c, VecX::Zero(c.dim()), 0.0, p, Vec3(0, 0, 0.1 * p.gravity)),
               DegenerateGravityObservable);
  EXPECT_THROW(reconstruct(c, VecX::Zero(c.dim()), 0.0, p, Vec3(p.gravity, 0, 0)),
               DegenerateGravityObservable);
}

}  // namespace
}  // namespace koopman_rb
