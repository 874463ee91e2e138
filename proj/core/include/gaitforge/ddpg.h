#ifndef GAITFORGE_DDPG_H_
#define GAITFORGE_DDPG_H_

#include <vector>

#include <Eigen/Core>

#include "gaitforge/training.h"

namespace gaitforge {

struct DdpgConfig {
  double gamma = 0.99;
  double lr_actor = 3e-4;
  double lr_critic = 3e-3;
  int batch = 128;
  double tau = 0.001;  // soft update: target <- (1 - tau) target + tau online
  int warmup = 1000;
  int buffer_capacity = 50000;
  double ou_theta = 0.15;
  double ou_sigma = 0.2;
  std::vector<int> hidden = {512, 512};
  bool normalize_observations = true;
  int log_interval = 1000;    // environment steps per log row
  int checkpoint_every = 10;  // log rows

  void Validate() const;
};

// Defaults for an actuation mode (the discount and rates differ).
DdpgConfig DefaultDdpgConfig(ActuationMode mode);

class ReplayBuffer {
 public:
  ReplayBuffer() = default;
  ReplayBuffer(int capacity, int obs_dim, int act_dim);

  void Add(const Eigen::VectorXd& s, const Eigen::VectorXd& a, double r,
           const Eigen::VectorXd& s2, bool done);
  // Uniform indices with replacement; needs size() >= n.
  std::vector<int> SampleIndices(Rng& rng, int n) const;

  int size() const { return size_; }
  int capacity() const { return capacity_; }
  int cursor() const { return cursor_; }

  const Eigen::MatrixXd& states() const { return s_; }
  const Eigen::MatrixXd& actions() const { return a_; }
  const Eigen::VectorXd& rewards() const { return r_; }
  const Eigen::MatrixXd& next_states() const { return s2_; }
  const Eigen::VectorXd& dones() const { return d_; }

  void Save(Checkpoint& ckpt, const std::string& prefix) const;
  void Load(const Checkpoint& ckpt, const std::string& prefix);

 private:
  int capacity_ = 0;
  int size_ = 0;
  int cursor_ = 0;
  Eigen::MatrixXd s_;
  Eigen::MatrixXd a_;
  Eigen::VectorXd r_;
  Eigen::MatrixXd s2_;
  Eigen::VectorXd d_;
};

// x <- x + theta (mu - x) dt + sigma sqrt(dt) z
struct OuNoise {
  double theta = 0.15;
  double sigma = 0.2;
  double mu = 0.0;
  double dt = 0.01;
  Eigen::VectorXd x;

  OuNoise() = default;
  OuNoise(int dim, double theta, double sigma, double dt);
  void Reset();
  const Eigen::VectorXd& Sample(Rng& rng);
};

struct DdpgAgent {
  Mlp actor;
  Mlp critic;
  Mlp actor_target;
  Mlp critic_target;
  AdamState actor_adam;
  AdamState critic_adam;
  RunningNormalizer normalizer;
  Eigen::VectorXd low;
  Eigen::VectorXd high;

  DdpgAgent() = default;
  DdpgAgent(int obs_dim, const Eigen::VectorXd& low, const Eigen::VectorXd& high,
            const DdpgConfig& cfg, Rng& rng);

  // low + (tanh(y) + 1) / 2 (high - low) for actor output y.
  Eigen::MatrixXd Squash(const Eigen::MatrixXd& y) const;
  // Deterministic action for a raw observation.
  Eigen::VectorXd Act(const Eigen::VectorXd& raw_obs) const;

  void Save(Checkpoint& ckpt) const;
  void Load(const Checkpoint& ckpt);
};

// clip(mu(s) + noise, low, high); `noise` may be null (evaluation).
Eigen::VectorXd SelectAction(const DdpgAgent& agent, const Eigen::VectorXd& raw_obs,
                             OuNoise* noise, Rng& rng);

struct DdpgUpdateStats {
  double critic_loss = 0.0;
  double actor_objective = 0.0;  // mean Q(s, mu(s))
};

// One critic regression step, one actor ascent step and Polyak updates of
// both targets on a uniform minibatch.
DdpgUpdateStats DdpgUpdate(DdpgAgent& agent, const ReplayBuffer& buffer,
                           const DdpgConfig& cfg, Rng& rng);

// Polyak average: target <- (1 - tau) target + tau online.
void SoftUpdate(Mlp& target, const Mlp& online, double tau);

struct DdpgResult {
  TrainLog log;
  DdpgAgent agent;
  int max_buffer_size = 0;
};

DdpgResult TrainDdpg(const EnvFactory& make_env, const DdpgConfig& cfg,
                     const TrainOptions& options);

}  // namespace gaitforge

#endif  // GAITFORGE_DDPG_H_
