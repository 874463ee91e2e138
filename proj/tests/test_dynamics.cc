#include <cmath>

#include <Eigen/Eigenvalues>
#include <gtest/gtest.h>

#include "gaitforge/dynamics.h"
#include "support/oracles.h"

namespace gaitforge {
namespace {

using testing::PendulumRig;

Vec9 RandomPose(Rng& rng, const ModelSpec& spec) {
  Vec9 q = Vec9::Zero();
  q[kPelvisTx] = Uniform(rng, -1.0, 1.0);
  q[kPelvisTy] = Uniform(rng, 0.8, 1.2);
  for (int j = 0; j < kNumJoints; ++j) {
    q[JointCoord(j)] = Uniform(rng, spec.joints[j].range_min, spec.joints[j].range_max);
  }
  return q;
}

Vec9 RandomVelocity(Rng& rng) {
  Vec9 v;
  for (int i = 0; i < kNumCoords; ++i) v[i] = Uniform(rng, -2.0, 2.0);
  return v;
}

TEST(Dynamics, MassMatrixSymmetricPositiveDefinite) {
  Dynamics dyn(BuildDefaultModel(ActuationMode::kTorque));
  Rng rng(11);
  for (int i = 0; i < 1000; ++i) {
    const Mat9 m = dyn.MassMatrix(RandomPose(rng, dyn.spec()));
    EXPECT_LT((m - m.transpose()).cwiseAbs().maxCoeff(), 1e-12);
    EXPECT_GT(Eigen::SelfAdjointEigenSolver<Mat9>(m).eigenvalues().minCoeff(), 0.0);
  }
}

TEST(Dynamics, MassMatrixTranslationEntryIsTotalMass) {
  Dynamics dyn(BuildDefaultModel(ActuationMode::kTorque));
  const Mat9 m = dyn.MassMatrix(Vec9::Zero());
  EXPECT_NEAR(m(0, 0), 75.164, 1e-12);
  EXPECT_NEAR(m(1, 1), 75.164, 1e-12);
}

// Momentum oracle: M qdot equals dT/dqdot with T summed segment by segment.
TEST(Dynamics, MassMatrixMatchesKineticEnergyGradient) {
  Dynamics dyn(BuildDefaultModel(ActuationMode::kTorque));
  const auto& spec = dyn.spec();
  auto kinetic = [&](const Vec9& q, const Vec9& qd) {
    const KinematicState kin = dyn.Kinematics(q, qd);
    double t = 0.0;
    for (size_t s = 0; s < spec.segments.size(); ++s) {
      const Vec2 v = kin.PointVelocity(static_cast<int>(s), spec.segments[s].com_offset);
      t += 0.5 * spec.segments[s].mass * v.squaredNorm() +
           0.5 * spec.segments[s].inertia_zz * kin.omega(static_cast<int>(s)) *
               kin.omega(static_cast<int>(s));
    }
    return t;
  };
  Rng rng(5);
  for (int trial = 0; trial < 20; ++trial) {
    const Vec9 q = RandomPose(rng, spec);
    const Vec9 qd = RandomVelocity(rng);
    const Vec9 p = dyn.MassMatrix(q) * qd;
    for (int i = 0; i < kNumCoords; ++i) {
      const double h = 1e-4;
      Vec9 a = qd, b = qd;
      a[i] += h;
      b[i] -= h;
      // T is quadratic in qdot, so the central difference is exact up to rounding.
      const double fd = (kinetic(q, a) - kinetic(q, b)) / (2 * h);
      EXPECT_NEAR(p[i], fd, 1e-8 * std::max(1.0, std::abs(p[i])));
    }
  }
}

TEST(Dynamics, ZeroGravityRestHasZeroAcceleration) {
  ModelSpec spec = BuildDefaultModel(ActuationMode::kTorque);
  spec.gravity = 0.0;
  spec.contact_enabled = false;
  Dynamics dyn(spec);
  SimState st;
  st.q[kPelvisTy] = 1.0;
  GeneralizedForces f;
  f.external = dyn.ExternalForces(st);
  EXPECT_LT(dyn.ForwardDynamics(st, f).cwiseAbs().maxCoeff(), 1e-14);
}

TEST(Dynamics, SinglePendulumClosedForm) {
  Dynamics dyn(PendulumRig({"knee_r"}));
  for (double theta : {-2.0, -1.2, -0.5, -0.1, 0.0, 0.15}) {
    SimState st;
    st.q[kKneeR] = theta;
    GeneralizedForces f;
    f.external = dyn.ExternalForces(st);
    const Vec9 qdd = dyn.ForwardDynamics(st, f);
    EXPECT_NEAR(qdd[kKneeR], testing::KneePendulumAcceleration(dyn.spec(), theta), 1e-10)
        << "theta " << theta;
    for (int c = 0; c < kNumCoords; ++c) {
      if (c != kKneeR) EXPECT_EQ(qdd[c], 0.0);
    }
  }
}

TEST(Dynamics, DoublePendulumEnergyDrift) {
  Dynamics dyn(PendulumRig({"hip_r", "knee_r"}));
  SimState st;
  st.q[kHipR] = 0.5;
  st.q[kKneeR] = -0.4;
  // Relative to the swing energy above the hanging pose; measured 4.03e-3.
  const double drift = testing::PendulumEnergyDrift(dyn, st, 1e-3, 5.0);
  EXPECT_LT(drift, 5e-3);
}

TEST(Dynamics, FullModelEnergyDriftWithoutContact) {
  ModelSpec spec = BuildDefaultModel(ActuationMode::kTorque);
  spec.contact_enabled = false;
  spec.limits_enabled = false;
  Dynamics dyn(spec);
  SimState st;
  st.q[kPelvisTy] = 1.0;
  st.q[kHipR] = 0.5;
  st.q[kKneeL] = -0.7;
  st.qdot[kAnkleR] = 1.0;
  st.qdot[kPelvisTilt] = 0.3;
  const double e0 = dyn.KineticEnergy(st.q, st.qdot) + dyn.PotentialEnergy(st.q);
  double worst = 0.0, ke_max = 0.0;
  for (int i = 0; i < 5000; ++i) {
    dyn.Step(st, Vec9::Zero(), 1e-3);
    const double ke = dyn.KineticEnergy(st.q, st.qdot);
    ke_max = std::max(ke_max, ke);
    worst = std::max(worst, std::abs(ke + dyn.PotentialEnergy(st.q) - e0));
  }
  EXPECT_LT(worst / ke_max, 5e-3);
}

TEST(Dynamics, CoriolisSkewSymmetry) {
  Dynamics dyn(BuildDefaultModel(ActuationMode::kTorque));
  Rng rng(3);
  for (int i = 0; i < 200; ++i) {
    const Vec9 q = RandomPose(rng, dyn.spec());
    const Vec9 qd = RandomVelocity(rng);
    EXPECT_LT(std::abs(testing::SkewResidual(dyn, q, qd)), 1e-8);
  }
}

TEST(Dynamics, LimitForces) {
  ModelSpec spec = BuildDefaultModel(ActuationMode::kTorque);
  Dynamics dyn(spec);
  SimState st;
  EXPECT_EQ(dyn.LimitForces(st), Vec9::Zero());
  EXPECT_EQ(st.limit_force_max_abs, 0.0);

  st.q[kKneeR] = spec.joints[2].range_max + 0.1;
  const Vec9 f = dyn.LimitForces(st);
  EXPECT_NEAR(f[kKneeR], -50.0, 1e-9);
  EXPECT_NEAR(st.limit_force_max_abs, 50.0, 1e-9);

  st.q[kKneeR] = spec.joints[2].range_min - 0.2;
  EXPECT_GT(dyn.LimitForces(st)[kKneeR], 0.0);
}

TEST(Dynamics, FreeFallFirstStep) {
  ModelSpec spec = BuildDefaultModel(ActuationMode::kTorque);
  Dynamics dyn(spec);
  SimState st;
  st.q[kPelvisTy] = 3.0;
  dyn.Step(st, Vec9::Zero(), 0.002);
  EXPECT_NEAR(st.qdot[kPelvisTy], -9.80665 * 0.002, 1e-12);
  EXPECT_DOUBLE_EQ(st.time, 0.002);
}

TEST(Dynamics, RejectsBadStep) {
  Dynamics dyn(BuildDefaultModel(ActuationMode::kTorque));
  SimState st;
  EXPECT_THROW(dyn.Step(st, Vec9::Zero(), 0.0), std::invalid_argument);
  EXPECT_THROW(dyn.Step(st, Vec9::Zero(), 0.02), std::invalid_argument);
  Vec9 tau = Vec9::Zero();
  tau[kPelvisTx] = 1.0;
  EXPECT_THROW(dyn.Step(st, tau, 0.001), std::invalid_argument);
}

TEST(Dynamics, NonFiniteIsSimulationFault) {
  Dynamics dyn(BuildDefaultModel(ActuationMode::kTorque));
  SimState st;
  st.q[kPelvisTy] = 1.0;
  st.qdot[kHipR] = std::numeric_limits<double>::quiet_NaN();
  EXPECT_THROW(dyn.Step(st, Vec9::Zero(), 0.001), SimulationFault);
}

// Semi-implicit Euler against an RK4 trajectory at dt/100: halving dt must
// at least halve the error.
TEST(Dynamics, IntegratorConvergesAtFirstOrder) {
  Dynamics dyn(PendulumRig({"hip_r", "knee_r"}));
  SimState init;
  init.q[kHipR] = 0.6;
  init.q[kKneeR] = -0.4;
  const double horizon = 0.2;
  auto error_at = [&](double dt) {
    SimState a = init, ref = init;
    const int n = static_cast<int>(std::lround(horizon / dt));
    for (int i = 0; i < n; ++i) dyn.Step(a, Vec9::Zero(), dt);
    for (int i = 0; i < n * 100; ++i) testing::Rk4Step(dyn, ref, Vec9::Zero(), dt / 100);
    return (a.q - ref.q).norm();
  };
  const double e1 = error_at(4e-3);
  const double e2 = error_at(2e-3);
  const double order = std::log2(e1 / e2);
  EXPECT_GE(order, 0.9);
}

TEST(Dynamics, StepIsDeterministic) {
  Dynamics dyn(BuildDefaultModel(ActuationMode::kTorque));
  SimState a;
  a.q[kPelvisTy] = 0.95;
  a.q[kHipL] = 0.3;
  SimState b = a;
  Vec9 tau = Vec9::Zero();
  tau[kKneeR] = 12.5;
  for (int i = 0; i < 200; ++i) {
    dyn.Step(a, tau, 0.002);
    dyn.Step(b, tau, 0.002);
  }
  EXPECT_EQ(a.q, b.q);
  EXPECT_EQ(a.qdot, b.qdot);
}

TEST(Dynamics, LockedCoordinatesStayFrozen) {
  Dynamics dyn(BuildDefaultModel(ActuationMode::kTorque, {"knee_l"}));
  SimState st;
  st.q[kPelvisTy] = 1.5;
  st.qdot[kHipL] = 2.0;
  for (int i = 0; i < 100; ++i) dyn.Step(st, Vec9::Zero(), 0.002);
  EXPECT_EQ(st.q[kKneeL], 0.0);
  EXPECT_EQ(st.qdot[kKneeL], 0.0);
}

}  // namespace
}  // namespace gaitforge
