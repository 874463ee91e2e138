#ifndef GAITFORGE_PPO_H_
#define GAITFORGE_PPO_H_

#include <string>
#include <vector>

#include <Eigen/Core>

#include "gaitforge/training.h"

namespace gaitforge {

struct PpoConfig {
  double gamma = 0.995;
  double gae_lambda = 0.95;
  double clip = 0.2;
  double lr_policy = 3e-4;
  double lr_value = 1e-3;
  double value_coef = 0.5;
  double entropy_coef = 0.0;
  int epochs = 10;
  int minibatch = 128;
  int rollout_length = 4096;  // environment steps per iteration, all workers
  int workers = 4;
  std::vector<int> hidden = {512, 512};
  double log_std_init = -1.0;
  double max_grad_norm = 0.5;  // per network; <= 0 disables
  bool normalize_advantages = true;
  bool normalize_observations = true;
  int checkpoint_every = 10;  // iterations

  // Throws ConfigError on out-of-range values.
  void Validate() const;
};

struct GaeResult {
  Eigen::VectorXd advantages;
  Eigen::VectorXd returns;
};

// delta_t = r_t + gamma (1 - done_t) V_{t+1} - V_t, with V_T = `bootstrap`;
// A_t = sum_k (gamma lambda)^k delta_{t+k}, cut at episode ends; R = A + V.
GaeResult ComputeGae(const Eigen::VectorXd& rewards, const Eigen::VectorXd& values,
                     const std::vector<bool>& dones, double bootstrap, double gamma,
                     double lambda);

struct RolloutBuffer {
  Eigen::MatrixXd observations;  // normalized, one column per step
  Eigen::MatrixXd actions;
  Eigen::VectorXd log_probs;
  Eigen::VectorXd rewards;
  Eigen::VectorXd values;
  std::vector<bool> dones;
  std::vector<DoneReason> done_reasons;
  Eigen::VectorXd advantages;
  Eigen::VectorXd returns;

  Eigen::Index size() const { return rewards.size(); }
  bool finalized() const { return advantages.size() == rewards.size() && size() > 0; }
};

struct PpoAgent {
  GaussianPolicy policy;
  Mlp value;
  AdamState policy_adam;
  AdamState value_adam;
  RunningNormalizer normalizer;

  PpoAgent() = default;
  PpoAgent(int obs_dim, int act_dim, const PpoConfig& cfg, Rng& rng);

  // Policy parameters as one vector: network, then log std.
  Eigen::VectorXd PolicyParams() const;
  void SetPolicyParams(const Eigen::VectorXd& p);

  Eigen::VectorXd MeanAction(const Eigen::VectorXd& raw_obs) const;

  void Save(Checkpoint& ckpt) const;
  void Load(const Checkpoint& ckpt);
};

struct UpdateStats {
  double policy_loss = 0.0;
  double value_loss = 0.0;
  double entropy = 0.0;
  double clip_fraction = 0.0;
  double approx_kl = 0.0;
  double total_loss = 0.0;
  bool aborted = false;
  std::string fault;
};

// Losses of one minibatch and their gradients (policy params as in
// PpoAgent::PolicyParams). Exposed for tests.
struct PpoLoss {
  double surrogate = 0.0;  // mean min(r A, clip(r) A)
  double value_loss = 0.0;  // mean (V - R)^2
  double entropy = 0.0;
  double total = 0.0;      // -surrogate + c1 value_loss - c2 entropy
  double clip_fraction = 0.0;
  double approx_kl = 0.0;
  Eigen::VectorXd policy_grad;
  Eigen::VectorXd value_grad;
};

PpoLoss EvaluatePpoLoss(const PpoAgent& agent, const RolloutBuffer& buffer,
                        const std::vector<Eigen::Index>& indices,
                        const Eigen::VectorXd& advantages, const PpoConfig& cfg,
                        bool with_gradients);

// Epochs of shuffled minibatch Adam steps on a finalized buffer. Restores
// the agent and reports a fault when a loss turns non-finite.
UpdateStats PpoUpdate(PpoAgent& agent, const RolloutBuffer& buffer, const PpoConfig& cfg,
                      Rng& rng);

struct PpoResult {
  TrainLog log;
  PpoAgent agent;
};

// Alternates parallel rollouts and updates until `options.total_steps`
// environment steps have been collected. Each worker resets its
// environment at the start of every iteration.
PpoResult TrainPpo(const EnvFactory& make_env, const PpoConfig& cfg,
                   const TrainOptions& options);

}  // namespace gaitforge

#endif  // GAITFORGE_PPO_H_
