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
#include <vector>

#include <gtest/gtest.h>

#include "koopman_rb/attitude_lift.hpp"
#include "support/oracles.hpp"

namespace koopman_rb {
namespace {

BodyParams with_inertia(const Vec3& j) {
  BodyParams p;
  p.inertia_diagonal = j;
  return p;
}

TEST(BinomialTest, SmallValuesAndLimits) {
  EXPECT_EQ(binomial(0, 0), 1u);
  EXPECT_EQ(binomial(5, 2), 10u);
  EXPECT_EQ(binomial(10, 5), 252u);
  EXPECT_EQ(binomial(64, 32), 1832624140942590534ull);
  EXPECT_THROW(binomial(65, 1), OverflowError);
  EXPECT_THROW(binomial(4, 5), DomainError);
  EXPECT_THROW(check_ladder_length(0), DomainError);
  EXPECT_THROW(check_ladder_length(65), OverflowError);
}

TEST(AttitudeLadderTest, ZeroVelocityGivesZeroLadder) {
  const AttitudeLadder l = build_attitude_ladder(Vec3::Zero(), with_inertia(inertia::J0()), 6);
  ASSERT_EQ(l.size(), 6);
  for (int k = 0; k < 6; ++k) EXPECT_EQ(l.nu[k], Vec3::Zero());
  EXPECT_EQ(l.h[0], Mat3::Zero());
  EXPECT_EQ(l.H[0], Mat3::Identity());
  for (int k = 1; k < 6; ++k) EXPECT_EQ(l.H[k], Mat3::Zero());
}

TEST(AttitudeLadderTest, SphericalInertiaIsLinear) {
  const BodyParams p = with_inertia(Vec3::Constant(0.5));
  const AttitudeLadder l = build_attitude_ladder(Vec3(0.3, -1.0, 2.0), p, 5);
  for (int k = 1; k < 5; ++k) {
    EXPECT_LT(l.nu[k].norm(), 1e-15);
    EXPECT_LT(l.H[k].norm(), 1e-15);
  }
  EXPECT_LT(l.h[0].norm(), 1e-15);
}

TEST(AttitudeLadderTest, PrincipalAxisSpinIsExactlyZero) {
  for (const Vec3& j : {inertia::J0(), inertia::J1(), inertia::J4()}) {
    for (int axis = 0; axis < 3; ++axis) {
      const AttitudeLadder l = build_attitude_ladder(1.3 * Vec3::Unit(axis), with_inertia(j), 8);
      for (int k = 1; k < 8; ++k) EXPECT_EQ(l.nu[k], Vec3::Zero());
    }
  }
}

TEST(AttitudeLadderTest, GammaIsInertiaTimesNu) {
  const BodyParams p = with_inertia(inertia::J2());
  const AttitudeLadder l = build_attitude_ladder(Vec3(0.1, 0.2, 0.3), p, 6);
  for (int k = 0; k < 6; ++k) EXPECT_EQ(l.gamma[k], p.J() * l.nu[k]);
}

TEST(AttitudeLadderTest, FirstEntryIsEulerEquation) {
  const BodyParams p = with_inertia(inertia::J0());
  const Vec3 nu(0.1, 0.2, 0.3);
  const AttitudeLadder l = build_attitude_ladder(nu, p, 2);
  const Vec3 want = p.J_inv() * (p.J() * nu).cross(nu);
  EXPECT_LT((l.nu[1] - want).norm(), 1e-16);
  EXPECT_LT((l.H[1] - l.h[0]).norm(), 1e-15);
}

// d/dt nu_k along the unforced flow equals nu_{k+1}.
TEST(AttitudeLadderTest, DerivativeLadderMatchesFlow) {
  const BodyParams p = with_inertia(inertia::J0());
  std::mt19937_64 rng(11);
  for (int trial = 0; trial < 10; ++trial) {
    const RigidBodyState s = testing::random_state(rng, 0.05, 0.3);
    const int n = 7;
    const AttitudeLadder l = build_attitude_ladder(s.nu, p, n);
    for (int k = 0; k + 1 < n; ++k) {
      auto f = [&](const RigidBodyState& st) -> VecX {
        return attitude_observables(st.nu, p, k + 1)[k];
      };
      const VecX d = testing::flow_derivative(f, p, s, {}, 1e-3);
      const double scale = l.nu[k + 1].norm() + l.nu[k].norm() * s.nu.norm() + 1e-300;
      EXPECT_LT(testing::rel_err(d, l.nu[k + 1], scale), 1e-6) << "k=" << k;
    }
  }
}

// d/dt nu_k - nu_{k+1} equals J^-1 H_k M under a constant torque.
TEST(AttitudeLadderTest, ForcedLadderMatchesFlow) {
  const BodyParams p = with_inertia(inertia::J0());
  std::mt19937_64 rng(12);
  for (int trial = 0; trial < 10; ++trial) {
    const RigidBodyState s = testing::random_state(rng, 0.05, 0.3);
    const BodyInput u{Vec3::Zero(), testing::random_vec(rng, 1e-3)};
    const int n = 6;
    const AttitudeLadder l = build_attitude_ladder(s.nu, p, n);
    for (int k = 0; k + 1 < n; ++k) {
      auto f = [&](const RigidBodyState& st) -> VecX {
        return attitude_observables(st.nu, p, k + 1)[k];
      };
      const VecX d = testing::flow_derivative(f, p, s, u, 1e-3);
      const Vec3 want = l.nu[k + 1] + p.J_inv() * l.H[k] * u.torque;
      const double scale = l.nu[k + 1].norm() + (p.J_inv() * l.H[k] * u.torque).norm();
      EXPECT_LT(testing::rel_err(d, want, scale), 1e-6) << "k=" << k;
    }
  }
}

TEST(AttitudeSystemTest, SmallestTruncation) {
  const BodyParams p = with_inertia(inertia::J0());
  const AttitudeSystem sys = assemble_attitude_system(1, p);
  EXPECT_EQ(sys.A, MatX::Zero(3, 3));
  EXPECT_EQ(sys.B(Vec3(0.1, 0.2, 0.3)), MatX(p.J_inv()));
}

TEST(AttitudeSystemTest, RestInputMatrix) {
  const BodyParams p = with_inertia(inertia::J0());
  const AttitudeSystem sys = assemble_attitude_system(2, p);
  MatX want = MatX::Zero(6, 3);
  want.topRows(3) = p.J_inv();
  EXPECT_EQ(sys.B(Vec3::Zero()), want);
  const AttitudeLadder shorter = build_attitude_ladder(Vec3::Zero(), p, 1);
  EXPECT_THROW(sys.B(shorter), DomainError);
}

TEST(AttitudeSystemTest, ShiftIsNilpotent) {
  for (int n = 1; n <= 6; ++n) {
    const MatX a = assemble_attitude_system(n, with_inertia(inertia::J0())).A;
    MatX power = MatX::Identity(3 * n, 3 * n);
    for (int i = 1; i <= n; ++i) {
      power = power * a;
      if (i == 2 && n >= 3) {
        EXPECT_EQ(power.block(0, 6, 3, 3), MatX::Identity(3, 3));
      }
    }
    EXPECT_EQ(power, MatX::Zero(3 * n, 3 * n));
  }
}

TEST(JordanPermutationTest, Examples) {
  EXPECT_EQ(jordan_permutation(1), (std::vector<int>{0, 1, 2}));
  EXPECT_EQ(jordan_permutation(2), (std::vector<int>{0, 3, 1, 4, 2, 5}));
  EXPECT_THROW(jordan_permutation(0), DomainError);
}

TEST(JordanPermutationTest, PermutedShiftIsBlockDiagonal) {
  for (int n = 1; n <= 5; ++n) {
    const std::vector<int> perm = jordan_permutation(n);
    std::vector<int> sorted = perm;
    std::sort(sorted.begin(), sorted.end());
    for (int i = 0; i < 3 * n; ++i) EXPECT_EQ(sorted[i], i);
    const MatX P = permutation_matrix(perm);
    const MatX J = P * block_shift(n) * P.transpose();
    MatX want = MatX::Zero(3 * n, 3 * n);
    for (int b = 0; b < 3; ++b) want.block(b * n, b * n, n, n) = block_shift(n, 1);
    EXPECT_EQ(J, want);
  }
}

}  // namespace
}  // namespace koopman_rb
