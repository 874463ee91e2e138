#include <cmath>

#include <gtest/gtest.h>

#include "gaitforge/contact.h"
#include "gaitforge/dynamics.h"
#include "support/oracles.h"

namespace gaitforge {
namespace {

const ContactParams kParams;

TEST(Contact, NoPenetrationNoForce) {
  const ContactWrench w = ContactForce(kParams, 0.03, Vec2(0.0, 0.03), Vec2(0.5, -1.0));
  EXPECT_EQ(w.normal_force, 0.0);
  EXPECT_EQ(w.friction_force, 0.0);
  EXPECT_EQ(w.penetration, 0.0);
}

TEST(Contact, HuntCrossleyLaw) {
  const double x = 0.004, xdot = 0.05;
  const ContactWrench w = ContactForce(kParams, 0.03, Vec2(0.0, 0.03 - x), Vec2(0.0, -xdot));
  const double xn = std::pow(x, 1.5);
  EXPECT_NEAR(w.normal_force, 2.5e6 * xn + 1e6 * xn * xdot, 1e-9);
  EXPECT_NEAR(w.penetration, x, 1e-15);
  EXPECT_NEAR(w.penetration_rate, xdot, 1e-15);
}

TEST(Contact, WithdrawalNeverPulls) {
  const ContactWrench w = ContactForce(kParams, 0.03, Vec2(0.0, 0.029), Vec2(0.0, 50.0));
  EXPECT_EQ(w.normal_force, 0.0);
  EXPECT_GT(w.penetration, 0.0);
}

TEST(Contact, NormalForceContinuousAtTouchdown) {
  const double eps = 1e-9;
  const ContactWrench w = ContactForce(kParams, 0.03, Vec2(0.0, 0.03 - eps), Vec2(0.0, -1.0));
  EXPECT_LT(w.normal_force, 1e-4);
}

TEST(Contact, FrictionBoundedAndOpposesSlip) {
  Rng rng(2);
  for (int i = 0; i < 10000; ++i) {
    const double x = Uniform(rng, 0.0, 0.01);
    const Vec2 v(Uniform(rng, -3.0, 3.0), Uniform(rng, -1.0, 1.0));
    const ContactWrench w = ContactForce(kParams, 0.03, Vec2(0.0, 0.03 - x), v);
    EXPECT_LE(std::abs(w.friction_force), kParams.mu_static * w.normal_force + 1e-9);
    if (w.friction_force != 0.0) EXPECT_LT(w.friction_force * v.x(), 0.0);
  }
}

TEST(Contact, FrictionCoefficientShape) {
  EXPECT_EQ(FrictionCoefficient(kParams, 0.0), 0.0);
  EXPECT_NEAR(FrictionCoefficient(kParams, kParams.v_transition), kParams.mu_static, 1e-12);
  EXPECT_NEAR(FrictionCoefficient(kParams, 1e3), kParams.mu_dynamic, 1e-6);
}

TEST(Contact, AirborneModelHasNoGrf) {
  Dynamics dyn(BuildDefaultModel(ActuationMode::kTorque));
  Vec9 q = Vec9::Zero();
  q[kPelvisTy] = 2.0;
  auto [gen, wrenches] = AccumulateGrf(dyn.spec(), dyn.Kinematics(q, Vec9::Zero()));
  EXPECT_EQ(gen, Vec9::Zero());
  for (const auto& w : wrenches) EXPECT_EQ(w.normal_force, 0.0);
}

// J^T F against finite differences of each application point.
TEST(Contact, GeneralizedForceMatchesPointJacobian) {
  Dynamics dyn(BuildDefaultModel(ActuationMode::kTorque));
  const auto& spec = dyn.spec();
  Vec9 q = Vec9::Zero();
  q[kHipR] = 0.3;
  q[kKneeR] = -0.4;
  q[kAnkleR] = 0.2;
  // Left foot stays flat; sink it so both of its spheres penetrate.
  {
    const KinematicState kin = dyn.Kinematics(q, Vec9::Zero());
    double lowest = 1e9;
    for (const auto& sp : spec.contact_spheres) {
      lowest = std::min(lowest, kin.PointPosition(spec.SegmentIndex(sp.segment), sp.center).y() -
                                    sp.radius);
    }
    q[kPelvisTy] = -lowest - 0.004;
  }
  Vec9 qd = Vec9::Zero();
  qd[kPelvisTx] = 0.3;
  qd[kPelvisTy] = -0.1;
  const KinematicState kin = dyn.Kinematics(q, qd);
  auto [gen, wrenches] = AccumulateGrf(spec, kin);

  Vec9 fd = Vec9::Zero();
  int active = 0;
  for (const auto& w : wrenches) {
    if (w.normal_force == 0.0 && w.friction_force == 0.0) continue;
    ++active;
    const int seg = spec.SegmentIndex(spec.contact_spheres[w.sphere].segment);
    const Vec2 local = Rotation(kin.angle(seg)).transpose() * (w.cop - kin.origin(seg));
    const Vec2 force(w.friction_force, w.normal_force);
    for (int c = 0; c < kNumCoords; ++c) {
      const double h = 1e-6;
      Vec9 a = q, b = q;
      a[c] += h;
      b[c] -= h;
      const Vec2 pa = dyn.Kinematics(a, Vec9::Zero()).PointPosition(seg, local);
      const Vec2 pb = dyn.Kinematics(b, Vec9::Zero()).PointPosition(seg, local);
      fd[c] += ((pa - pb) / (2 * h)).dot(force);
    }
  }
  ASSERT_GE(active, 2);
  for (int c = 0; c < kNumCoords; ++c) {
    EXPECT_NEAR(gen[c], fd[c], 1e-6 * std::max(1.0, std::abs(gen[c]))) << "coord " << c;
  }
}

TEST(Contact, DroppedMassRestsAtStaticRoot) {
  const ModelSpec spec = testing::DroppedMassRig();
  const double expected = testing::StaticPenetration(spec);
  // k x^n = m g with m = 75.164, k = 2.5e6, n = 1.5.
  EXPECT_NEAR(expected, 0.0044299, 1e-6);
  EXPECT_NEAR(testing::SettledPenetration(spec, 0.05, 0.002, 3.0), expected, 1e-5);
}

TEST(Contact, StandingGrfEqualsWeight) {
  EXPECT_NEAR(testing::StandingGrfRatio(), 1.0, 0.01);
}

TEST(Contact, ImpactDoesNotGainEnergy) {
  ModelSpec spec = testing::DroppedMassRig();
  spec.gravity = 0.0;
  Dynamics dyn(spec);
  const auto& sphere = spec.contact_spheres.front();
  SimState st;
  st.q[kPelvisTy] = -(sphere.center.y() - sphere.radius) + 0.002;
  st.qdot[kPelvisTy] = -1.0;
  const double ke0 = dyn.KineticEnergy(st.q, st.qdot);
  for (int i = 0; i < 500; ++i) dyn.Step(st, Vec9::Zero(), 0.001);
  EXPECT_LE(dyn.KineticEnergy(st.q, st.qdot), ke0);
}

TEST(Contact, NormalizedFootWrench) {
  Dynamics dyn(BuildDefaultModel(ActuationMode::kTorque));
  const auto& spec = dyn.spec();
  SimState st;
  const KinematicState kin0 = dyn.Kinematics(st.q, st.qdot);
  double lowest = 1e9;
  for (const auto& sp : spec.contact_spheres) {
    lowest = std::min(lowest, kin0.PointPosition(spec.SegmentIndex(sp.segment), sp.center).y() -
                                  sp.radius);
  }
  st.q[kPelvisTy] = -lowest - 0.003;
  const KinematicState kin = dyn.Kinematics(st.q, st.qdot);
  auto [gen, wrenches] = AccumulateGrf(spec, kin);
  const Eigen::Vector3d w = NormalizedFootWrench(spec, kin, wrenches, "foot_r");
  double fy = 0.0;
  for (const auto& c : wrenches) {
    if (spec.contact_spheres[c.sphere].segment == "foot_r") fy += c.normal_force;
  }
  EXPECT_NEAR(w[1], fy / (spec.total_mass * spec.gravity), 1e-12);
  EXPECT_GT(w[1], 0.0);
}

}  // namespace
}  // namespace gaitforge
