#include "gaitforge/ddpg.h"

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <numeric>

namespace gaitforge {
namespace {

std::vector<int> WithEnds(int in, const std::vector<int>& hidden, int out) {
  std::vector<int> sizes{in};
  sizes.insert(sizes.end(), hidden.begin(), hidden.end());
  sizes.push_back(out);
  return sizes;
}

Eigen::VectorXd ToVector(const std::vector<double>& v) {
  return Eigen::Map<const Eigen::VectorXd>(v.data(), static_cast<Eigen::Index>(v.size()));
}

std::vector<double> FromVector(const Eigen::VectorXd& v) {
  return {v.data(), v.data() + v.size()};
}

}  // namespace

void DdpgConfig::Validate() const {
  if (!(gamma > 0.0 && gamma <= 1.0)) throw ConfigError("ddpg.gamma must be in (0, 1]");
  if (!(lr_actor > 0.0) || !(lr_critic > 0.0)) {
    throw ConfigError("ddpg learning rates must be > 0");
  }
  if (!(tau > 0.0 && tau <= 1.0)) throw ConfigError("ddpg.tau must be in (0, 1]");
  if (batch < 1 || buffer_capacity < batch) {
    throw ConfigError("ddpg.batch must be >= 1 and <= buffer_capacity");
  }
  if (warmup < 0) throw ConfigError("ddpg.warmup must be >= 0");
  if (!(ou_theta >= 0.0) || !(ou_sigma >= 0.0)) {
    throw ConfigError("ddpg noise parameters must be >= 0");
  }
  if (log_interval < 1 || checkpoint_every < 1) {
    throw ConfigError("ddpg.log_interval and checkpoint_every must be >= 1");
  }
  for (int h : hidden) {
    if (h < 1) throw ConfigError("hidden layer sizes must be >= 1");
  }
}

DdpgConfig DefaultDdpgConfig(ActuationMode mode) {
  DdpgConfig cfg;
  if (mode == ActuationMode::kMtu) {
    cfg.gamma = 0.995;
    cfg.lr_actor = 4e-4;
    cfg.lr_critic = 4e-3;
  }
  return cfg;
}

ReplayBuffer::ReplayBuffer(int capacity, int obs_dim, int act_dim)
    : capacity_(capacity),
      s_(obs_dim, capacity),
      a_(act_dim, capacity),
      r_(capacity),
      s2_(obs_dim, capacity),
      d_(capacity) {
  if (capacity < 1) throw ConfigError("replay capacity must be >= 1");
}

void ReplayBuffer::Add(const Eigen::VectorXd& s, const Eigen::VectorXd& a, double r,
                       const Eigen::VectorXd& s2, bool done) {
  s_.col(cursor_) = s;
  a_.col(cursor_) = a;
  r_[cursor_] = r;
  s2_.col(cursor_) = s2;
  d_[cursor_] = done ? 1.0 : 0.0;
  cursor_ = (cursor_ + 1) % capacity_;
  size_ = std::min(size_ + 1, capacity_);
}

std::vector<int> ReplayBuffer::SampleIndices(Rng& rng, int n) const {
  if (size_ < n || size_ == 0) throw UsageError("replay buffer holds too few transitions");
  std::uniform_int_distribution<int> pick(0, size_ - 1);
  std::vector<int> idx(static_cast<size_t>(n));
  for (int& i : idx) i = pick(rng);
  return idx;
}

void ReplayBuffer::Save(Checkpoint& ckpt, const std::string& prefix) const {
  ckpt.PutScalar(prefix + ".size", size_);
  ckpt.PutScalar(prefix + ".cursor", cursor_);
  ckpt.PutMatrix(prefix + ".s", s_.leftCols(size_));
  ckpt.PutMatrix(prefix + ".a", a_.leftCols(size_));
  ckpt.PutVector(prefix + ".r", r_.head(size_));
  ckpt.PutMatrix(prefix + ".s2", s2_.leftCols(size_));
  ckpt.PutVector(prefix + ".d", d_.head(size_));
}

void ReplayBuffer::Load(const Checkpoint& ckpt, const std::string& prefix) {
  const int size = static_cast<int>(ckpt.GetScalar(prefix + ".size"));
  const int cursor = static_cast<int>(ckpt.GetScalar(prefix + ".cursor"));
  if (size < 0 || size > capacity_ || cursor < 0 || cursor >= capacity_) {
    throw LoadError("replay buffer state does not fit the configured capacity");
  }
  const Eigen::MatrixXd s = ckpt.GetMatrix(prefix + ".s");
  const Eigen::MatrixXd a = ckpt.GetMatrix(prefix + ".a");
  const Eigen::MatrixXd s2 = ckpt.GetMatrix(prefix + ".s2");
  if (s.rows() != s_.rows() || a.rows() != a_.rows() || s.cols() != size ||
      a.cols() != size || s2.rows() != s_.rows() || s2.cols() != size) {
    throw LoadError("replay buffer blocks have the wrong shape");
  }
  s_.leftCols(size) = s;
  a_.leftCols(size) = a;
  s2_.leftCols(size) = s2;
  r_.head(size) = ckpt.GetVector(prefix + ".r", size);
  d_.head(size) = ckpt.GetVector(prefix + ".d", size);
  size_ = size;
  cursor_ = cursor;
}

OuNoise::OuNoise(int dim, double theta_, double sigma_, double dt_)
    : theta(theta_), sigma(sigma_), dt(dt_), x(Eigen::VectorXd::Zero(dim)) {}

void OuNoise::Reset() { x.setConstant(mu); }

const Eigen::VectorXd& OuNoise::Sample(Rng& rng) {
  const double sq = std::sqrt(dt);
  for (Eigen::Index i = 0; i < x.size(); ++i) {
    x[i] += theta * (mu - x[i]) * dt + sigma * sq * StandardNormal(rng);
  }
  return x;
}

DdpgAgent::DdpgAgent(int obs_dim, const Eigen::VectorXd& low_, const Eigen::VectorXd& high_,
                     const DdpgConfig& cfg, Rng& rng)
    : actor(WithEnds(obs_dim, cfg.hidden, static_cast<int>(low_.size()))),
      critic(WithEnds(obs_dim + static_cast<int>(low_.size()), cfg.hidden, 1)),
      normalizer(obs_dim),
      low(low_),
      high(high_) {
  actor.Initialize(rng, 0.01);
  critic.Initialize(rng, 1.0);
  actor_target = actor;
  critic_target = critic;
  actor_adam.Reset(actor.num_params());
  critic_adam.Reset(critic.num_params());
}

Eigen::MatrixXd DdpgAgent::Squash(const Eigen::MatrixXd& y) const {
  const Eigen::ArrayXd half_span = 0.5 * (high - low).array();
  Eigen::MatrixXd out = (y.array().tanh() + 1.0).matrix();
  out.array().colwise() *= half_span;
  out.colwise() += low;
  return out;
}

Eigen::VectorXd DdpgAgent::Act(const Eigen::VectorXd& raw_obs) const {
  return Squash(actor.Forward(Eigen::MatrixXd(normalizer.Normalize(raw_obs)))).col(0);
}

void DdpgAgent::Save(Checkpoint& ckpt) const {
  PutMlp(ckpt, "actor", actor);
  PutMlp(ckpt, "critic", critic);
  PutMlp(ckpt, "actor_target", actor_target);
  PutMlp(ckpt, "critic_target", critic_target);
  PutAdam(ckpt, "actor_adam", actor_adam);
  PutAdam(ckpt, "critic_adam", critic_adam);
  PutNormalizer(ckpt, "obs_norm", normalizer);
}

void DdpgAgent::Load(const Checkpoint& ckpt) {
  GetMlp(ckpt, "actor", actor);
  GetMlp(ckpt, "critic", critic);
  GetMlp(ckpt, "actor_target", actor_target);
  GetMlp(ckpt, "critic_target", critic_target);
  GetAdam(ckpt, "actor_adam", actor_adam);
  GetAdam(ckpt, "critic_adam", critic_adam);
  GetNormalizer(ckpt, "obs_norm", normalizer);
}

Eigen::VectorXd SelectAction(const DdpgAgent& agent, const Eigen::VectorXd& raw_obs,
                             OuNoise* noise, Rng& rng) {
  Eigen::VectorXd a = agent.Act(raw_obs);
  if (noise) a += noise->Sample(rng);
  return a.cwiseMax(agent.low).cwiseMin(agent.high);
}

void SoftUpdate(Mlp& target, const Mlp& online, double tau) {
  target.params() = (1.0 - tau) * target.params() + tau * online.params();
}

DdpgUpdateStats DdpgUpdate(DdpgAgent& agent, const ReplayBuffer& buffer,
                           const DdpgConfig& cfg, Rng& rng) {
  const std::vector<int> idx = buffer.SampleIndices(rng, cfg.batch);
  const auto b = static_cast<Eigen::Index>(idx.size());
  const Eigen::Index od = buffer.states().rows();
  const Eigen::Index ad = buffer.actions().rows();
  Eigen::MatrixXd s(od, b), a(ad, b), s2(od, b);
  Eigen::VectorXd r(b), d(b);
  for (Eigen::Index i = 0; i < b; ++i) {
    const int k = idx[static_cast<size_t>(i)];
    s.col(i) = buffer.states().col(k);
    a.col(i) = buffer.actions().col(k);
    s2.col(i) = buffer.next_states().col(k);
    r[i] = buffer.rewards()[k];
    d[i] = buffer.dones()[k];
  }
  s = agent.normalizer.Normalize(s);
  s2 = agent.normalizer.Normalize(s2);
  const double inv_b = 1.0 / static_cast<double>(b);

  // Critic: regress Q(s, a) onto r + gamma (1 - d) Q'(s', mu'(s')).
  Eigen::MatrixXd sa2(od + ad, b);
  sa2 << s2, agent.Squash(agent.actor_target.Forward(s2));
  const Eigen::VectorXd q_next = agent.critic_target.Forward(sa2).row(0).transpose();
  const Eigen::VectorXd y =
      r.array() + cfg.gamma * (1.0 - d.array()) * q_next.array();
  Eigen::MatrixXd sa(od + ad, b);
  sa << s, a;
  Mlp::Cache ccache;
  const Eigen::VectorXd q = agent.critic.Forward(sa, &ccache).row(0).transpose();
  const Eigen::VectorXd err = q - y;
  DdpgUpdateStats stats;
  stats.critic_loss = err.squaredNorm() * inv_b;
  const Mlp::Gradients cg =
      agent.critic.Backward(ccache, (2.0 * inv_b) * err.transpose());
  agent.critic_adam.Update(agent.critic.params(), cg.params, cfg.lr_critic);

  // Actor: ascend mean Q(s, mu(s)) through the updated critic.
  Mlp::Cache acache;
  const Eigen::MatrixXd pre = agent.actor.Forward(s, &acache);
  const Eigen::MatrixXd act = agent.Squash(pre);
  Eigen::MatrixXd sa_pi(od + ad, b);
  sa_pi << s, act;
  Mlp::Cache qcache;
  const Eigen::MatrixXd q_pi = agent.critic.Forward(sa_pi, &qcache);
  stats.actor_objective = q_pi.mean();
  const Mlp::Gradients qg = agent.critic.Backward(
      qcache, Eigen::MatrixXd::Constant(1, b, -inv_b));
  Eigen::MatrixXd dpre = qg.input.bottomRows(ad);
  const Eigen::ArrayXd half_span = 0.5 * (agent.high - agent.low).array();
  dpre.array() *= (1.0 - pre.array().tanh().square()).colwise() * half_span;
  const Mlp::Gradients ag = agent.actor.Backward(acache, dpre);
  agent.actor_adam.Update(agent.actor.params(), ag.params, cfg.lr_actor);

  SoftUpdate(agent.critic_target, agent.critic, cfg.tau);
  SoftUpdate(agent.actor_target, agent.actor, cfg.tau);
  return stats;
}

DdpgResult TrainDdpg(const EnvFactory& make_env, const DdpgConfig& cfg,
                     const TrainOptions& options) {
  cfg.Validate();
  std::unique_ptr<Environment> env = make_env();
  const int od = env->obs_dim();
  const int ad = env->act_dim();
  std::seed_seq seq{options.seed};
  Rng rng(seq);
  DdpgResult result;
  result.agent = DdpgAgent(od, env->action_low(), env->action_high(), cfg, rng);
  DdpgAgent& agent = result.agent;
  ReplayBuffer buffer(cfg.buffer_capacity, od, ad);
  double control_dt = 0.01;
  if (const auto* im = dynamic_cast<const ImitationEnv*>(env.get())) {
    control_dt = im->config().control_dt();
  }
  OuNoise noise(ad, cfg.ou_theta, cfg.ou_sigma, control_dt);

  long long steps = 0;
  long long row_index = 0;
  TrainLog& log = result.log;
  Eigen::VectorXd obs;
  double ep_return = 0.0;
  int ep_length = 0;
  // Interval accumulators: rewards, terms, losses.
  std::vector<double> ep_returns;
  std::vector<int> ep_lengths;
  Eigen::Vector4d term_sums = Eigen::Vector4d::Zero();
  double critic_sum = 0.0;
  double actor_sum = 0.0;
  long long updates = 0;
  long long interval_steps = 0;

  const bool to_disk = !options.out_dir.empty();
  if (to_disk) std::filesystem::create_directories(options.out_dir);
  auto save = [&]() {
    if (!to_disk) return;
    Checkpoint ckpt;
    ckpt.config_digest = options.config_digest;
    ckpt.PutBytes("algo", "ddpg");
    agent.Save(ckpt);
    buffer.Save(ckpt, "replay");
    ckpt.PutRng("rng", rng);
    ckpt.PutVector("ou.x", noise.x);
    ckpt.PutVector("env.snapshot", ToVector(env->Snapshot()));
    ckpt.PutVector("env.obs", obs.size() ? obs : Eigen::VectorXd(0));
    ckpt.PutScalar("episode.return", ep_return);
    ckpt.PutScalar("episode.length", ep_length);
    ckpt.PutScalar("steps", static_cast<double>(steps));
    ckpt.PutScalar("row_index", static_cast<double>(row_index));
    ckpt.PutBytes("log", log.Csv());
    ckpt.Save(CheckpointPath(options.out_dir, row_index));
    WriteTextFile(options.out_dir + "/log.csv", log.Csv());
  };

  if (!options.resume_path.empty()) {
    const Checkpoint ckpt = Checkpoint::Load(options.resume_path, options.config_digest);
    if (ckpt.GetBytes("algo") != "ddpg") {
      throw LoadError(options.resume_path + ": not a ddpg checkpoint");
    }
    agent.Load(ckpt);
    buffer.Load(ckpt, "replay");
    rng = ckpt.GetRng("rng");
    noise.x = ckpt.GetVector("ou.x", ad);
    const Eigen::VectorXd snap = ckpt.GetVector("env.snapshot");
    obs = ckpt.GetVector("env.obs");
    if (obs.size() > 0) env->Restore(FromVector(snap));
    ep_return = ckpt.GetScalar("episode.return");
    ep_length = static_cast<int>(ckpt.GetScalar("episode.length"));
    steps = static_cast<long long>(ckpt.GetScalar("steps"));
    row_index = static_cast<long long>(ckpt.GetScalar("row_index"));
    log = TrainLog::FromCsv(ckpt.GetBytes("log"));
    if (to_disk) WriteTextFile(options.out_dir + "/log.csv", log.Csv());
  } else {
    save();
  }

  while (steps < options.total_steps) {
    if (obs.size() == 0) {
      obs = env->Reset(rng);
      noise.Reset();
      ep_return = 0.0;
      ep_length = 0;
    }
    Eigen::VectorXd action(ad);
    if (steps < cfg.warmup) {
      for (int i = 0; i < ad; ++i) {
        action[i] = Uniform(rng, agent.low[i], agent.high[i]);
      }
    } else {
      action = SelectAction(agent, obs, &noise, rng);
    }
    const StepResult res = env->Step(action);
    const bool terminal = res.done && res.done_reason != DoneReason::kHorizon;
    buffer.Add(obs, action, res.reward.total, res.observation, terminal);
    result.max_buffer_size = std::max(result.max_buffer_size, buffer.size());
    if (cfg.normalize_observations) agent.normalizer.Update(Eigen::MatrixXd(obs));
    ep_return += res.reward.total;
    ++ep_length;
    term_sums += Eigen::Vector4d(res.reward.r_q, res.reward.r_e, res.reward.r_c,
                                 res.reward.r_effort);
    if (res.done) {
      ep_returns.push_back(ep_return);
      ep_lengths.push_back(ep_length);
      obs.resize(0);
    } else {
      obs = res.observation;
    }
    ++steps;
    ++interval_steps;
    if (steps >= cfg.warmup && buffer.size() >= cfg.batch) {
      const DdpgUpdateStats u = DdpgUpdate(agent, buffer, cfg, rng);
      if (!std::isfinite(u.critic_loss) || !agent.actor.params().allFinite()) {
        throw std::runtime_error("ddpg update produced non-finite values");
      }
      critic_sum += u.critic_loss;
      actor_sum += u.actor_objective;
      ++updates;
    }
    if (interval_steps == cfg.log_interval || steps >= options.total_steps) {
      IterationLog row;
      row.iteration = ++row_index;
      row.steps = steps;
      row.episodes = static_cast<long long>(ep_returns.size());
      if (ep_returns.empty() && ep_length > 0) {
        ep_returns.push_back(ep_return);
        ep_lengths.push_back(ep_length);
      }
      if (!ep_returns.empty()) {
        row.mean_episode_reward =
            std::accumulate(ep_returns.begin(), ep_returns.end(), 0.0) / ep_returns.size();
        row.max_episode_reward = *std::max_element(ep_returns.begin(), ep_returns.end());
        row.mean_episode_length =
            std::accumulate(ep_lengths.begin(), ep_lengths.end(), 0.0) / ep_lengths.size();
      }
      term_sums /= static_cast<double>(interval_steps);
      row.r_q = term_sums[0];
      row.r_e = term_sums[1];
      row.r_c = term_sums[2];
      row.r_effort = term_sums[3];
      if (updates > 0) {
        row.value_loss = critic_sum / static_cast<double>(updates);
        row.policy_loss = -actor_sum / static_cast<double>(updates);
      }
      log.rows.push_back(row);
      if (options.on_log) options.on_log(row);
      ep_returns.clear();
      ep_lengths.clear();
      term_sums.setZero();
      critic_sum = actor_sum = 0.0;
      updates = 0;
      interval_steps = 0;
      if (row_index % cfg.checkpoint_every == 0 || steps >= options.total_steps) {
        save();
      } else if (to_disk) {
        WriteTextFile(options.out_dir + "/log.csv", log.Csv());
      }
    }
  }
  return result;
}

}  // namespace gaitforge
