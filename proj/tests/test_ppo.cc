#include <cmath>
#include <filesystem>

#include <unistd.h>

#include <gtest/gtest.h>

#include "gaitforge/ppo.h"
#include "support/oracles.h"

namespace gaitforge {
namespace {

struct Episode {
  Eigen::VectorXd r, v;
  std::vector<bool> done;
  double bootstrap = 0.0;
};

Episode RandomEpisodes(Rng& rng, int length) {
  Episode e;
  e.r.resize(length);
  e.v.resize(length);
  e.done.assign(static_cast<size_t>(length), false);
  for (int t = 0; t < length; ++t) {
    e.r[t] = Uniform(rng, -1.0, 2.0);
    e.v[t] = Uniform(rng, -3.0, 3.0);
    e.done[static_cast<size_t>(t)] = Uniform(rng, 0.0, 1.0) < 0.1;
  }
  e.bootstrap = Uniform(rng, -3.0, 3.0);
  return e;
}

TEST(Gae, MatchesBruteForce) {
  Rng rng(1);
  for (int trial = 0; trial < 100; ++trial) {
    const Episode e = RandomEpisodes(rng, 1 + trial % 40);
    const double gamma = Uniform(rng, 0.8, 1.0), lambda = Uniform(rng, 0.0, 1.0);
    const GaeResult g = ComputeGae(e.r, e.v, e.done, e.bootstrap, gamma, lambda);
    const Eigen::VectorXd oracle =
        testing::BruteForceGae(e.r, e.v, e.done, e.bootstrap, gamma, lambda);
    EXPECT_LT((g.advantages - oracle).cwiseAbs().maxCoeff(), 1e-12) << "trial " << trial;
    EXPECT_LT((g.returns - (g.advantages + e.v)).cwiseAbs().maxCoeff(), 1e-12);
  }
}

TEST(Gae, LambdaOneZeroValueIsRewardToGo) {
  Rng rng(2);
  const int n = 25;
  Eigen::VectorXd r(n);
  for (int t = 0; t < n; ++t) r[t] = Uniform(rng, 0.0, 1.0);
  std::vector<bool> done(n, false);
  done.back() = true;
  const double gamma = 0.97;
  const GaeResult g = ComputeGae(r, Eigen::VectorXd::Zero(n), done, 5.0, gamma, 1.0);
  for (int t = 0; t < n; ++t) {
    double g_t = 0.0, w = 1.0;
    for (int k = t; k < n; ++k, w *= gamma) g_t += w * r[k];
    EXPECT_NEAR(g.advantages[t], g_t, 1e-12);
  }
}

TEST(Gae, LambdaZeroIsOneStepTd) {
  Rng rng(3);
  const Episode e = RandomEpisodes(rng, 30);
  const double gamma = 0.99;
  const GaeResult g = ComputeGae(e.r, e.v, e.done, e.bootstrap, gamma, 0.0);
  for (int t = 0; t < 30; ++t) {
    const double next = t + 1 < 30 ? e.v[t + 1] : e.bootstrap;
    const double delta = e.r[t] + gamma * (e.done[t] ? 0.0 : next) - e.v[t];
    EXPECT_EQ(g.advantages[t], delta);
  }
}

TEST(Gae, ConstantRewardApproachesGeometricLimit) {
  const int n = 5000;
  const double gamma = 0.99;
  const GaeResult g = ComputeGae(Eigen::VectorXd::Constant(n, 2.0), Eigen::VectorXd::Zero(n),
                                 std::vector<bool>(n, false), 0.0, gamma, 1.0);
  EXPECT_NEAR(g.advantages[0], 2.0 / (1.0 - gamma), 1e-9);
}

class PpoLossTest : public ::testing::Test {
 protected:
  void SetUp() override {
    cfg.hidden = {8, 8};
    Rng rng(4);
    agent = PpoAgent(3, 2, cfg, rng);
    // Non-trivial mean network so gradients are not degenerate.
    agent.policy.mean.Initialize(rng);
    const int n = 16;
    buf.observations.resize(3, n);
    buf.actions.resize(2, n);
    buf.log_probs.resize(n);
    buf.rewards = Eigen::VectorXd::Zero(n);
    buf.values = Eigen::VectorXd::Zero(n);
    buf.returns.resize(n);
    buf.advantages.resize(n);
    buf.dones.assign(n, false);
    for (int i = 0; i < n; ++i) {
      for (int k = 0; k < 3; ++k) buf.observations(k, i) = Uniform(rng, -1.0, 1.0);
      const auto s = agent.policy.Draw(buf.observations.col(i), rng);
      buf.actions.col(i) = s.action;
      buf.log_probs[i] = s.log_prob;
      buf.returns[i] = Uniform(rng, -1.0, 1.0);
      buf.advantages[i] = Uniform(rng, -1.0, 1.0);
    }
    for (int i = 0; i < n; ++i) all.push_back(i);
  }

  PpoConfig cfg;
  PpoAgent agent;
  RolloutBuffer buf;
  std::vector<Eigen::Index> all;
};

TEST_F(PpoLossTest, UnchangedPolicyHasUnitRatio) {
  const PpoLoss loss = EvaluatePpoLoss(agent, buf, all, buf.advantages, cfg, true);
  EXPECT_NEAR(loss.surrogate, buf.advantages.mean(), 1e-12);
  EXPECT_EQ(loss.clip_fraction, 0.0);
  EXPECT_NEAR(loss.approx_kl, 0.0, 1e-12);
  const Eigen::VectorXd v = agent.value.Forward(buf.observations).row(0).transpose();
  EXPECT_NEAR(loss.value_loss, (v - buf.returns).squaredNorm() / 16.0, 1e-12);
}

// Policy and value gradients against central differences of the loss.
TEST_F(PpoLossTest, GradientsMatchFiniteDifferences) {
  cfg.entropy_coef = 0.01;
  // Move away from ratio 1 so some samples sit outside the band.
  Eigen::VectorXd p = agent.PolicyParams();
  Rng rng(5);
  for (Eigen::Index i = 0; i < p.size(); ++i) p[i] += Uniform(rng, -0.05, 0.05);
  agent.SetPolicyParams(p);
  const PpoLoss loss = EvaluatePpoLoss(agent, buf, all, buf.advantages, cfg, true);
  const double h = 1e-6;
  for (Eigen::Index i = 0; i < p.size(); i += 3) {
    PpoAgent a = agent, b = agent;
    Eigen::VectorXd pa = p, pb = p;
    pa[i] += h;
    pb[i] -= h;
    a.SetPolicyParams(pa);
    b.SetPolicyParams(pb);
    const double fd = (EvaluatePpoLoss(a, buf, all, buf.advantages, cfg, false).total -
                       EvaluatePpoLoss(b, buf, all, buf.advantages, cfg, false).total) /
                      (2 * h);
    EXPECT_NEAR(loss.policy_grad[i], fd, 1e-6 + 1e-4 * std::abs(fd)) << "param " << i;
  }
  const Eigen::VectorXd v0 = agent.value.params();
  for (Eigen::Index i = 0; i < v0.size(); i += 5) {
    PpoAgent a = agent, b = agent;
    a.value.params()[i] += h;
    b.value.params()[i] -= h;
    const double fd = (EvaluatePpoLoss(a, buf, all, buf.advantages, cfg, false).total -
                       EvaluatePpoLoss(b, buf, all, buf.advantages, cfg, false).total) /
                      (2 * h);
    EXPECT_NEAR(loss.value_grad[i], fd, 1e-6 + 1e-4 * std::abs(fd)) << "value param " << i;
  }
}

TEST_F(PpoLossTest, ClipSemantics) {
  // Old log-probabilities shifted so the ratio is exactly 1.3.
  RolloutBuffer b = buf;
  b.log_probs.array() -= std::log(1.3);
  Eigen::VectorXd positive = Eigen::VectorXd::Constant(16, 0.5);
  PpoLoss loss = EvaluatePpoLoss(agent, b, all, positive, cfg, true);
  EXPECT_NEAR(loss.surrogate, 1.2 * 0.5, 1e-12);
  EXPECT_EQ(loss.clip_fraction, 1.0);
  // No incentive beyond the band: only the value term remains.
  cfg.value_coef = 0.0;
  loss = EvaluatePpoLoss(agent, b, all, positive, cfg, true);
  EXPECT_EQ(loss.policy_grad.cwiseAbs().maxCoeff(), 0.0);

  const Eigen::VectorXd negative = Eigen::VectorXd::Constant(16, -0.5);
  loss = EvaluatePpoLoss(agent, b, all, negative, cfg, true);
  EXPECT_NEAR(loss.surrogate, 1.3 * -0.5, 1e-12);
  EXPECT_GT(loss.policy_grad.cwiseAbs().maxCoeff(), 0.0);
}

TEST_F(PpoLossTest, DiagnosticsInRange) {
  Eigen::VectorXd p = agent.PolicyParams();
  Rng rng(6);
  for (int trial = 0; trial < 20; ++trial) {
    Eigen::VectorXd q = p;
    for (Eigen::Index i = 0; i < q.size(); ++i) q[i] += Uniform(rng, -0.3, 0.3);
    agent.SetPolicyParams(q);
    const PpoLoss loss = EvaluatePpoLoss(agent, buf, all, buf.advantages, cfg, false);
    EXPECT_GE(loss.clip_fraction, 0.0);
    EXPECT_LE(loss.clip_fraction, 1.0);
    EXPECT_GE(loss.approx_kl, -1e-6);
  }
}

TEST_F(PpoLossTest, UpdateDecreasesLoss) {
  cfg.epochs = 1;
  cfg.minibatch = 16;
  cfg.lr_policy = 1e-3;
  cfg.lr_value = 1e-3;
  const Eigen::VectorXd adv =
      (buf.advantages.array() - buf.advantages.mean()) /
      (std::sqrt((buf.advantages.array() - buf.advantages.mean()).square().mean()) + 1e-8);
  const double before = EvaluatePpoLoss(agent, buf, all, adv, cfg, false).total;
  Rng rng(7);
  const UpdateStats stats = PpoUpdate(agent, buf, cfg, rng);
  EXPECT_FALSE(stats.aborted);
  const double after = EvaluatePpoLoss(agent, buf, all, adv, cfg, false).total;
  EXPECT_LT(after, before);
}

TEST_F(PpoLossTest, NonFiniteLossAborts) {
  RolloutBuffer b = buf;
  b.returns[3] = std::numeric_limits<double>::quiet_NaN();
  const Eigen::VectorXd before = agent.PolicyParams();
  Rng rng(8);
  const UpdateStats stats = PpoUpdate(agent, b, cfg, rng);
  EXPECT_TRUE(stats.aborted);
  EXPECT_FALSE(stats.fault.empty());
  EXPECT_EQ(agent.PolicyParams(), before);
}

TEST(PpoConfig, ValidateRejectsBadValues) {
  PpoConfig cfg;
  EXPECT_NO_THROW(cfg.Validate());
  cfg.gamma = 1.5;
  EXPECT_THROW(cfg.Validate(), ConfigError);
  cfg = PpoConfig{};
  cfg.clip = 0.0;
  EXPECT_THROW(cfg.Validate(), ConfigError);
}

class PpoTraining : public ::testing::Test {
 protected:
  void SetUp() override {
    dir_ = std::filesystem::temp_directory_path() /
           ("gaitforge_ppo_" + std::to_string(::getpid()));
    std::filesystem::create_directories(dir_);
    cfg.hidden = {16, 16};
    cfg.rollout_length = 1024;
    cfg.epochs = 2;
    cfg.workers = 2;
    cfg.checkpoint_every = 1;
  }
  void TearDown() override { std::filesystem::remove_all(dir_); }
  std::string Dir(const std::string& name) const { return (dir_ / name).string(); }

  static std::unique_ptr<Environment> MakeToy() { return std::make_unique<ToyTrackingEnv>(); }

  TrainOptions Options(const std::string& out, long long steps) const {
    TrainOptions o;
    o.total_steps = steps;
    o.seed = 11;
    o.out_dir = out.empty() ? "" : Dir(out);
    return o;
  }

  PpoConfig cfg;
  std::filesystem::path dir_;
};

TEST_F(PpoTraining, ZeroStepsWritesInitialCheckpointOnly) {
  const PpoResult r = TrainPpo(MakeToy, cfg, Options("zero", 0));
  EXPECT_TRUE(r.log.rows.empty());
  EXPECT_TRUE(std::filesystem::exists(CheckpointPath(Dir("zero"), 0)));
  EXPECT_FALSE(std::filesystem::exists(CheckpointPath(Dir("zero"), 1)));
  EXPECT_EQ(ReadTextFile(Dir("zero") + "/log.csv"), TrainLog{}.Csv());
}

TEST_F(PpoTraining, SameSeedSameBytes) {
  TrainPpo(MakeToy, cfg, Options("a", 3072));
  TrainPpo(MakeToy, cfg, Options("b", 3072));
  EXPECT_EQ(ReadTextFile(Dir("a") + "/log.csv"), ReadTextFile(Dir("b") + "/log.csv"));
  EXPECT_EQ(ReadTextFile(CheckpointPath(Dir("a"), 3)),
            ReadTextFile(CheckpointPath(Dir("b"), 3)));
  TrainOptions other = Options("c", 3072);
  other.seed = 12;
  TrainPpo(MakeToy, cfg, other);
  EXPECT_NE(ReadTextFile(Dir("a") + "/log.csv"), ReadTextFile(Dir("c") + "/log.csv"));
}

TEST_F(PpoTraining, ThreadCountDoesNotChangeResults) {
  TrainOptions one = Options("t1", 2048);
  one.max_threads = 1;
  TrainOptions two = Options("t2", 2048);
  two.max_threads = 2;
  TrainPpo(MakeToy, cfg, one);
  TrainPpo(MakeToy, cfg, two);
  EXPECT_EQ(ReadTextFile(Dir("t1") + "/log.csv"), ReadTextFile(Dir("t2") + "/log.csv"));
}

TEST_F(PpoTraining, ResumeIsBitExact) {
  TrainPpo(MakeToy, cfg, Options("full", 4096));
  TrainPpo(MakeToy, cfg, Options("half", 2048));
  TrainOptions resume = Options("resumed", 4096);
  resume.resume_path = CheckpointPath(Dir("half"), 2);
  TrainPpo(MakeToy, cfg, resume);
  EXPECT_EQ(ReadTextFile(Dir("full") + "/log.csv"), ReadTextFile(Dir("resumed") + "/log.csv"));
  EXPECT_EQ(ReadTextFile(CheckpointPath(Dir("full"), 4)),
            ReadTextFile(CheckpointPath(Dir("resumed"), 4)));
}

TEST_F(PpoTraining, ResumeRejectsForeignDigest) {
  TrainOptions first = Options("d1", 1024);
  first.config_digest = Sha256("one");
  TrainPpo(MakeToy, cfg, first);
  TrainOptions second = Options("d2", 2048);
  second.config_digest = Sha256("two");
  second.resume_path = CheckpointPath(Dir("d1"), 1);
  EXPECT_THROW(TrainPpo(MakeToy, cfg, second), LoadError);
}

TEST_F(PpoTraining, LogRoundTripsThroughCsv) {
  const PpoResult r = TrainPpo(MakeToy, cfg, Options("", 2048));
  ASSERT_EQ(r.log.rows.size(), 2u);
  EXPECT_EQ(TrainLog::FromCsv(r.log.Csv()).Csv(), r.log.Csv());
  EXPECT_EQ(r.log.rows.back().steps, 2048);
}

}  // namespace
}  // namespace gaitforge
