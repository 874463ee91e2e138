#include <cmath>
#include <numbers>
#include <vector>

#include <gtest/gtest.h>

#include "gaitforge/env.h"
#include "support/oracles.h"

namespace gaitforge {
namespace {

ImitationEnv MakeTorqueEnv(EnvConfig config = {}) {
  ModelSpec model = BuildDefaultModel(ActuationMode::kTorque);
  const Dynamics dyn(model);
  config.mode = ActuationMode::kTorque;
  return ImitationEnv(model, MakeSyntheticClip(dyn), config);
}

ImitationEnv MakeMtuEnv(EnvConfig config = {}) {
  ModelSpec model = BuildDefaultModel(ActuationMode::kMtu);
  const Dynamics dyn(model);
  config.mode = ActuationMode::kMtu;
  return ImitationEnv(model, MakeSyntheticClip(dyn), config);
}

// Swaps right and left joint coordinates.
Vec9 MirrorCoords(const Vec9& v) {
  Vec9 m = v;
  for (int k = 0; k < 3; ++k) std::swap(m[kHipR + k], m[kHipL + k]);
  return m;
}

TEST(Env, ObservationDimensions) {
  EXPECT_EQ(MakeTorqueEnv().obs_dim(), 88);
  EXPECT_EQ(MakeMtuEnv().obs_dim(), 130);
  EXPECT_EQ(MakeTorqueEnv().act_dim(), 7);
  EXPECT_EQ(MakeMtuEnv().act_dim(), 14);
  ImitationEnv env = MakeMtuEnv();
  EXPECT_EQ(env.ResetToPhase(0.3).size(), 130);
}

TEST(Env, ResetAtPhaseZeroMatchesFirstFrame) {
  ImitationEnv env = MakeTorqueEnv();
  env.ResetToPhase(0.0);
  EXPECT_EQ(env.state().q, env.clip().frames[0]);
  EXPECT_EQ(env.state().time, 0.0);
  EXPECT_EQ(env.Wraps(), 0);
}

TEST(Env, ResetIsDeterministic) {
  ImitationEnv a = MakeTorqueEnv(), b = MakeTorqueEnv();
  Rng ra(9), rb(9);
  EXPECT_EQ(a.Reset(ra), b.Reset(rb));
  EXPECT_EQ(a.ResetToPhase(0.4), b.ResetToPhase(0.4));
}

TEST(Env, MtuResetInitializesActivations) {
  ImitationEnv env = MakeMtuEnv();
  env.ResetToPhase(0.1);
  EXPECT_EQ(env.state().activations, Eigen::VectorXd::Constant(14, 0.05));
}

// Pearson chi-square against the uniform distribution over start frames.
TEST(Env, RandomStartIsUniformOverFrames) {
  ImitationEnv env = MakeTorqueEnv();
  const int bins = static_cast<int>(env.clip().size()) - 1;
  std::vector<int> counts(bins, 0);
  Rng rng(123);
  const int n = 10000;
  for (int i = 0; i < n; ++i) {
    const Eigen::VectorXd obs = env.Reset(rng);
    const int k = static_cast<int>(std::lround(obs[0] * bins));
    ASSERT_GE(k, 0);
    ASSERT_LT(k, bins);
    ++counts[k];
  }
  const double expected = static_cast<double>(n) / bins;
  double chi2 = 0.0;
  for (int c : counts) chi2 += (c - expected) * (c - expected) / expected;
  // 128 degrees of freedom; 180 is past the 0.999 quantile.
  EXPECT_LT(chi2, 180.0);
}

TEST(Env, TorquePdLaw) {
  ImitationEnv env = MakeTorqueEnv();
  SimState st;
  st.q[kPelvisTy] = 1.0;
  env.ResetToState(st);
  EXPECT_EQ(env.ApplyActionTorque(Eigen::VectorXd::Zero(7)), Vec7::Zero());

  Eigen::VectorXd target = Eigen::VectorXd::Zero(7);
  target[1] = 0.1;  // hip_r
  target[3] = 0.1;  // ankle_r
  const Vec7 tau = env.ApplyActionTorque(target);
  EXPECT_NEAR(tau[1], 10.0, 1e-12);
  EXPECT_NEAR(tau[3], 5.0, 1e-12);
  EXPECT_EQ(tau[0], 0.0);
}

TEST(Env, TorqueTargetsClampedToRange) {
  ImitationEnv env = MakeTorqueEnv();
  SimState st;
  st.q[kPelvisTy] = 1.0;
  env.ResetToState(st);
  Eigen::VectorXd target = Eigen::VectorXd::Zero(7);
  target[2] = 1.0;  // knee_r beyond its 10 degree extension limit
  const double knee_max = env.dynamics().spec().joints[2].range_max;
  EXPECT_NEAR(env.ApplyActionTorque(target)[2], 100.0 * knee_max, 1e-12);
}

TEST(Env, ActionModeMismatchRaises) {
  ImitationEnv torque = MakeTorqueEnv();
  ImitationEnv mtu = MakeMtuEnv();
  EXPECT_THROW(torque.ApplyActionMtu(Eigen::VectorXd::Zero(14)), ModeError);
  EXPECT_THROW(mtu.ApplyActionTorque(Eigen::VectorXd::Zero(7)), ModeError);
}

TEST(Env, ExcitationsClamped) {
  ImitationEnv env = MakeMtuEnv();
  Eigen::VectorXd u = Eigen::VectorXd::Zero(14);
  u[0] = 1.7;
  u[1] = -0.4;
  const Eigen::VectorXd applied = env.ApplyActionMtu(u);
  EXPECT_EQ(applied[0], 1.0);
  EXPECT_EQ(applied[1], 0.0);
}

TEST(Env, ExcitationEqualToActivationHoldsActivation) {
  ImitationEnv env = MakeMtuEnv();
  env.ResetToPhase(0.2);
  const Eigen::VectorXd a = env.state().activations;
  env.Step(a);
  EXPECT_EQ(env.state().activations, a);
}

TEST(Env, SoleusMakesPositiveAnkleTorque) {
  EnvConfig config;
  config.initial_activation = 0.0;
  ImitationEnv env = MakeMtuEnv(config);
  const auto& spec = env.dynamics().spec();
  SimState st;
  st.q[kPelvisTy] = 1.5;
  st.activations = Eigen::VectorXd::Zero(14);
  st.activations[spec.MuscleIndex("SOL_r")] = 1.0;
  env.ResetToState(st);
  Eigen::VectorXd u = Eigen::VectorXd::Zero(14);
  u[spec.MuscleIndex("SOL_r")] = 1.0;
  const StepResult res = env.Step(u);
  EXPECT_GT(res.info.joint_torque[3], 0.0);
}

TEST(Env, PerfectTrackingRewardIsOne) {
  ImitationEnv env = MakeTorqueEnv();
  for (double phase : {0.0, 0.27, 0.61}) {
    const ReferenceTargets ref = Sample(env.clip(), env.dynamics(), phase, 0);
    SimState st;
    st.q = ref.q;
    st.qdot = ref.qdot;
    const RewardBreakdown r = env.ComputeReward(st, phase, 0, Eigen::VectorXd::Zero(7));
    EXPECT_NEAR(r.total, 1.0, 1e-12);
    EXPECT_NEAR(r.r_q, 1.0, 1e-12);
    EXPECT_NEAR(r.r_e, 1.0, 1e-12);
    EXPECT_NEAR(r.r_c, 1.0, 1e-12);
  }
}

TEST(Env, SingleJointErrorReward) {
  ImitationEnv env = MakeTorqueEnv();
  const ReferenceTargets ref = Sample(env.clip(), env.dynamics(), 0.3, 0);
  SimState st;
  st.q = ref.q;
  st.q[kKneeL] += 0.1;
  const RewardBreakdown r = env.ComputeReward(st, 0.3, 0, Eigen::VectorXd::Zero(7));
  EXPECT_NEAR(r.r_q, std::exp(-0.1), 1e-12);
}

TEST(Env, RewardFactorsInUnitInterval) {
  ImitationEnv env = MakeTorqueEnv();
  const auto& spec = env.dynamics().spec();
  Rng rng(17);
  for (int i = 0; i < 10000; ++i) {
    const double phase = Uniform(rng, 0.0, 1.0);
    const ReferenceTargets ref = Sample(env.clip(), env.dynamics(), phase, 0);
    SimState st;
    st.q[kPelvisTx] = ref.q[kPelvisTx] + Uniform(rng, -0.5, 0.5);
    st.q[kPelvisTy] = Uniform(rng, 0.7, 1.2);
    st.q[kPelvisTilt] = Uniform(rng, -0.5, 0.5);
    for (int j = 0; j < kNumJoints; ++j) {
      st.q[JointCoord(j)] = Uniform(rng, spec.joints[j].range_min, spec.joints[j].range_max);
    }
    Eigen::VectorXd effort(7);
    for (int j = 0; j < 7; ++j) effort[j] = Uniform(rng, -1.0, 1.0);
    const RewardBreakdown r = env.ComputeReward(st, phase, 0, effort);
    for (double f : {r.r_q, r.r_e, r.r_c, r.r_effort}) {
      EXPECT_GT(f, 0.0);
      EXPECT_LE(f, 1.0);
    }
    EXPECT_EQ(r.total, r.r_q * r.r_e * r.r_c * r.r_effort);
  }
}

TEST(Env, TerminationThresholds) {
  EnvConfig config;
  config.horizon = 300;
  ImitationEnv env = MakeTorqueEnv(config);
  SimState st;
  st.q[kPelvisTy] = 0.95;
  EXPECT_EQ(env.CheckTermination(st, 10, 0.0), DoneReason::kNone);

  st.q[kPelvisTy] = 0.74;
  EXPECT_EQ(env.CheckTermination(st, 10, 0.0), DoneReason::kFall);
  st.q[kPelvisTy] = 0.75;
  EXPECT_EQ(env.CheckTermination(st, 10, 0.0), DoneReason::kNone);

  st.limit_force_max_abs = 1001.0;
  EXPECT_EQ(env.CheckTermination(st, 10, 0.0), DoneReason::kLimitForce);
  st.limit_force_max_abs = 1000.0;
  EXPECT_EQ(env.CheckTermination(st, 10, 0.0), DoneReason::kNone);

  EXPECT_EQ(env.CheckTermination(st, 10, 10000.5), DoneReason::kAcceleration);
  EXPECT_EQ(env.CheckTermination(st, 10, 10000.0), DoneReason::kNone);

  EXPECT_EQ(env.CheckTermination(st, 300, 0.0), DoneReason::kHorizon);
  EXPECT_EQ(env.CheckTermination(st, 299, 0.0), DoneReason::kNone);

  // Listed order decides ties.
  st.q[kPelvisTy] = 0.5;
  st.limit_force_max_abs = 5000.0;
  EXPECT_EQ(env.CheckTermination(st, 300, 1e6), DoneReason::kFall);
}

TEST(Env, HorizonEndsEpisodeWhenStepping) {
  EnvConfig config;
  config.horizon = 3;
  ImitationEnv env = MakeTorqueEnv(config);
  env.ResetToPhase(0.0);
  StepResult res;
  for (int k = 0; k < 3; ++k) {
    EXPECT_FALSE(env.done());
    res = env.Step(env.ReferenceAction());
  }
  EXPECT_TRUE(res.done);
  EXPECT_EQ(res.done_reason, DoneReason::kHorizon);
  EXPECT_THROW(env.Step(env.ReferenceAction()), UsageError);
}

TEST(Env, FallTerminatesEpisode) {
  ImitationEnv env = MakeTorqueEnv();
  SimState st;
  st.q[kPelvisTy] = 0.76;
  st.qdot[kPelvisTy] = -2.0;
  // Legs folded clear of the ground.
  st.q[kHipR] = st.q[kHipL] = 1.5;
  st.q[kKneeR] = st.q[kKneeL] = -2.0;
  env.ResetToState(st);
  const StepResult res = env.Step(Eigen::VectorXd::Zero(7));
  EXPECT_EQ(res.done_reason, DoneReason::kFall);
  EXPECT_TRUE(res.done);
}

TEST(Env, PhaseTracksSimulationClock) {
  ImitationEnv env = MakeTorqueEnv();
  env.ResetToPhase(0.9);
  const double period = env.clip().duration;
  for (int k = 0; k < 40 && !env.done(); ++k) {
    const StepResult res = env.Step(env.ReferenceAction());
    const double expected = std::fmod(env.state().time, period) / period;
    EXPECT_NEAR(res.observation[0], expected, 1e-12);
    EXPECT_EQ(res.info.wraps, static_cast<long>(std::floor(env.state().time / period)));
  }
  EXPECT_GE(env.Wraps(), 1);
}

TEST(Env, ObservationLandmarksArePelvisRelative) {
  ImitationEnv env = MakeTorqueEnv();
  const ReferenceTargets ref = Sample(env.clip(), env.dynamics(), 0.2, 0);
  SimState a;
  a.q = ref.q;
  SimState b = a;
  b.q[kPelvisTx] += 3.0;
  const Eigen::VectorXd oa = env.ResetToState(a);
  const Eigen::VectorXd ob = env.ResetToState(b);
  EXPECT_LT((oa.segment(22, 66) - ob.segment(22, 66)).cwiseAbs().maxCoeff(), 1e-12);
  for (int i = 0; i < 22; ++i) EXPECT_EQ(oa[24 + 3 * i], 0.0);  // z entries
}

TEST(Env, StepIsDeterministic) {
  ImitationEnv a = MakeMtuEnv(), b = MakeMtuEnv();
  Rng ra(4), rb(4), act(8);
  a.Reset(ra);
  b.Reset(rb);
  for (int k = 0; k < 30 && !a.done(); ++k) {
    Eigen::VectorXd u(14);
    for (int i = 0; i < 14; ++i) u[i] = Uniform(act, 0.0, 1.0);
    const StepResult x = a.Step(u);
    const StepResult y = b.Step(u);
    ASSERT_EQ(x.observation, y.observation);
    ASSERT_EQ(x.reward.total, y.reward.total);
    ASSERT_EQ(x.done, y.done);
  }
}

TEST(Env, SnapshotRestoreResumesExactly) {
  ImitationEnv env = MakeTorqueEnv();
  env.ResetToPhase(0.15);
  for (int k = 0; k < 5; ++k) env.Step(env.ReferenceAction());
  const std::vector<double> snap = env.Snapshot();
  std::vector<Eigen::VectorXd> first;
  for (int k = 0; k < 5; ++k) first.push_back(env.Step(env.ReferenceAction()).observation);
  env.Restore(snap);
  for (int k = 0; k < 5; ++k) EXPECT_EQ(env.Step(env.ReferenceAction()).observation, first[k]);
}

// Swapping the legs in state and action swaps them in the next state.
TEST(Env, MirrorSymmetry) {
  ImitationEnv env = MakeTorqueEnv();
  const ReferenceTargets ref = Sample(env.clip(), env.dynamics(), 0.35, 0);
  SimState st;
  st.q = ref.q;
  st.qdot = ref.qdot;
  Eigen::VectorXd action = ref.q.segment<7>(kFirstJointCoord);
  action[3] = std::clamp(action[3], -1.0, 1.0);
  action[6] = std::clamp(action[6], -1.0, 1.0);
  Eigen::VectorXd mirrored_action = action;
  for (int k = 0; k < 3; ++k) std::swap(mirrored_action[1 + k], mirrored_action[4 + k]);

  env.ResetToState(st);
  env.Step(action);
  const SimState next = env.state();

  SimState ms = st;
  ms.q = MirrorCoords(st.q);
  ms.qdot = MirrorCoords(st.qdot);
  env.ResetToState(ms);
  env.Step(mirrored_action);
  EXPECT_LT((env.state().q - MirrorCoords(next.q)).cwiseAbs().maxCoeff(), 1e-9);
  EXPECT_LT((env.state().qdot - MirrorCoords(next.qdot)).cwiseAbs().maxCoeff(), 1e-9);
}

TEST(Env, LockedJointReceivesNoTorque) {
  EnvConfig config;
  config.locked_joints = {"knee_l"};
  ImitationEnv env = MakeTorqueEnv(config);
  env.ResetToPhase(0.0);
  Eigen::VectorXd target = Eigen::VectorXd::Zero(7);
  target[5] = -1.0;
  EXPECT_EQ(env.ApplyActionTorque(target)[5], 0.0);
  env.Step(target);
  EXPECT_EQ(env.state().q[kKneeL], 0.0);
}

// Frozen regression bound for PD replay of the synthetic clip from phase 0
// over 0.5 s; measured 0.4290 rad.
TEST(Env, ReferenceReplayRegression) {
  ImitationEnv env = MakeTorqueEnv();
  bool terminated = false;
  const double rms = testing::ReferenceReplayRms(env, 0.0, 0.5, &terminated);
  EXPECT_FALSE(terminated);
  EXPECT_LT(rms, 0.45);
}

TEST(ToyEnv, ResetStartsOnReference) {
  ToyTrackingEnv env;
  Rng rng(1);
  const Eigen::VectorXd obs = env.Reset(rng);
  const double t = obs[0];  // period is one second
  EXPECT_NEAR(obs[1], env.Reference(t), 1e-12);
  EXPECT_NEAR(obs[2], env.ReferenceVelocity(t), 1e-9);
}

TEST(ToyEnv, RewardAndTermination) {
  ToyTrackingEnv env;
  Rng rng(2);
  env.Reset(rng);
  StepResult res = env.Step(Eigen::VectorXd::Constant(1, 0.0));
  EXPECT_GT(res.reward.total, 0.0);
  EXPECT_LE(res.reward.total, 1.0);
  int steps = 1;
  while (!res.done) {
    res = env.Step(Eigen::VectorXd::Constant(1, 1.0));
    ++steps;
  }
  EXPECT_LE(steps, 200);
  EXPECT_THROW(env.Step(Eigen::VectorXd::Constant(1, 0.0)), UsageError);
}

TEST(ToyEnv, HorizonIsTwoHundredSteps) {
  ToyTrackingEnv env;
  Rng rng(3);
  env.Reset(rng);
  // Inverse-dynamics feedforward through the PD law tracks the sinusoid.
  const double w = 2.0 * std::numbers::pi;
  StepResult res;
  int steps = 0;
  double t = 0.0;
  {
    const std::vector<double> snap = env.Snapshot();
    t = snap[2];
  }
  do {
    const double mid = t + 0.005;
    const double target = env.Reference(mid) +
                          (-w * w * env.Reference(mid) + 10.0 * env.ReferenceVelocity(mid)) / 100.0;
    t += 0.01;
    res = env.Step(Eigen::VectorXd::Constant(1, target));
    ++steps;
  } while (!res.done);
  EXPECT_EQ(steps, 200);
  EXPECT_EQ(res.done_reason, DoneReason::kHorizon);
}

}  // namespace
}  // namespace gaitforge
