#include "gaitforge/ppo.h"

#include <algorithm>
#include <cmath>
#include <exception>
#include <filesystem>
#include <numeric>
#include <thread>

namespace gaitforge {
namespace {

constexpr double kHalfLogTwoPi = 0.91893853320467274178;

void ClipNorm(Eigen::VectorXd& g, double max_norm) {
  if (max_norm <= 0.0) return;
  const double n = g.norm();
  if (n > max_norm) g *= max_norm / n;
}

std::vector<int> WithEnds(int in, const std::vector<int>& hidden, int out) {
  std::vector<int> sizes{in};
  sizes.insert(sizes.end(), hidden.begin(), hidden.end());
  sizes.push_back(out);
  return sizes;
}

// Everything one worker gathers in an iteration.
struct WorkerRollout {
  Eigen::MatrixXd obs;
  Eigen::MatrixXd actions;
  Eigen::VectorXd log_probs;
  Eigen::VectorXd rewards;
  std::vector<bool> dones;
  std::vector<DoneReason> reasons;
  Eigen::MatrixXd raw_obs;
  // Normalized observations after horizon-truncated steps and after the
  // last step, for bootstrapping.
  std::vector<std::pair<int, Eigen::VectorXd>> truncated;
  Eigen::VectorXd final_obs;
  std::vector<double> episode_returns;
  std::vector<int> episode_lengths;
  double partial_return = 0.0;
  int partial_length = 0;
  Eigen::Vector4d term_sums = Eigen::Vector4d::Zero();
};

WorkerRollout Collect(Environment& env, const PpoAgent& agent, bool normalize, int steps,
                      Rng& rng) {
  WorkerRollout w;
  const int od = env.obs_dim();
  const int ad = env.act_dim();
  w.obs.resize(od, steps);
  w.raw_obs.resize(od, steps);
  w.actions.resize(ad, steps);
  w.log_probs.resize(steps);
  w.rewards.resize(steps);
  w.dones.assign(static_cast<size_t>(steps), false);
  w.reasons.assign(static_cast<size_t>(steps), DoneReason::kNone);
  auto norm = [&](const Eigen::VectorXd& o) {
    return normalize ? agent.normalizer.Normalize(o) : o;
  };
  Eigen::VectorXd raw = env.Reset(rng);
  double ret = 0.0;
  int len = 0;
  for (int t = 0; t < steps; ++t) {
    const Eigen::VectorXd o = norm(raw);
    const GaussianPolicy::Sample s = agent.policy.Draw(o, rng);
    const StepResult res = env.Step(s.action);
    w.obs.col(t) = o;
    w.raw_obs.col(t) = raw;
    w.actions.col(t) = s.action;
    w.log_probs[t] = s.log_prob;
    w.rewards[t] = res.reward.total;
    w.term_sums += Eigen::Vector4d(res.reward.r_q, res.reward.r_e, res.reward.r_c,
                                   res.reward.r_effort);
    ret += res.reward.total;
    ++len;
    if (res.done) {
      w.dones[static_cast<size_t>(t)] = true;
      w.reasons[static_cast<size_t>(t)] = res.done_reason;
      if (res.done_reason == DoneReason::kHorizon) {
        w.truncated.emplace_back(t, norm(res.observation));
      }
      w.episode_returns.push_back(ret);
      w.episode_lengths.push_back(len);
      ret = 0.0;
      len = 0;
      raw = env.Reset(rng);
    } else {
      raw = res.observation;
    }
  }
  w.final_obs = norm(raw);
  w.partial_return = ret;
  w.partial_length = len;
  return w;
}

}  // namespace

void PpoConfig::Validate() const {
  if (!(gamma > 0.0 && gamma <= 1.0)) throw ConfigError("ppo.gamma must be in (0, 1]");
  if (!(gae_lambda > 0.0 && gae_lambda <= 1.0)) {
    throw ConfigError("ppo.gae_lambda must be in (0, 1]");
  }
  if (!(clip > 0.0)) throw ConfigError("ppo.clip must be > 0");
  if (!(lr_policy > 0.0) || !(lr_value > 0.0)) {
    throw ConfigError("ppo learning rates must be > 0");
  }
  if (epochs < 1 || minibatch < 1 || rollout_length < 1 || workers < 1) {
    throw ConfigError("ppo epochs, minibatch, rollout_length and workers must be >= 1");
  }
  if (rollout_length < workers) throw ConfigError("ppo.rollout_length must be >= workers");
  if (checkpoint_every < 1) throw ConfigError("ppo.checkpoint_every must be >= 1");
  for (int h : hidden) {
    if (h < 1) throw ConfigError("hidden layer sizes must be >= 1");
  }
}

GaeResult ComputeGae(const Eigen::VectorXd& rewards, const Eigen::VectorXd& values,
                     const std::vector<bool>& dones, double bootstrap, double gamma,
                     double lambda) {
  const Eigen::Index n = rewards.size();
  if (values.size() != n || static_cast<Eigen::Index>(dones.size()) != n) {
    throw UsageError("gae inputs must have equal lengths");
  }
  GaeResult out;
  out.advantages.resize(n);
  double running = 0.0;
  for (Eigen::Index t = n - 1; t >= 0; --t) {
    const double next_value = t + 1 == n ? bootstrap : values[t + 1];
    const double live = dones[static_cast<size_t>(t)] ? 0.0 : 1.0;
    const double delta = rewards[t] + gamma * live * next_value - values[t];
    running = delta + gamma * lambda * live * running;
    out.advantages[t] = running;
  }
  out.returns = out.advantages + values;
  return out;
}

PpoAgent::PpoAgent(int obs_dim, int act_dim, const PpoConfig& cfg, Rng& rng)
    : policy(WithEnds(obs_dim, cfg.hidden, act_dim), cfg.log_std_init),
      value(WithEnds(obs_dim, cfg.hidden, 1)),
      normalizer(obs_dim) {
  policy.mean.Initialize(rng, 0.01);
  value.Initialize(rng, 1.0);
  policy_adam.Reset(policy.mean.num_params() + act_dim);
  value_adam.Reset(value.num_params());
}

Eigen::VectorXd PpoAgent::PolicyParams() const {
  Eigen::VectorXd p(policy.mean.num_params() + policy.log_std.size());
  p << policy.mean.params(), policy.log_std;
  return p;
}

void PpoAgent::SetPolicyParams(const Eigen::VectorXd& p) {
  const Eigen::Index n = policy.mean.num_params();
  policy.mean.params() = p.head(n);
  policy.log_std = p.tail(policy.log_std.size());
}

Eigen::VectorXd PpoAgent::MeanAction(const Eigen::VectorXd& raw_obs) const {
  return policy.mean.Forward(normalizer.Normalize(raw_obs));
}

void PpoAgent::Save(Checkpoint& ckpt) const {
  PutMlp(ckpt, "policy", policy.mean);
  ckpt.PutVector("policy.log_std", policy.log_std);
  PutMlp(ckpt, "value", value);
  PutAdam(ckpt, "policy_adam", policy_adam);
  PutAdam(ckpt, "value_adam", value_adam);
  PutNormalizer(ckpt, "obs_norm", normalizer);
}

void PpoAgent::Load(const Checkpoint& ckpt) {
  GetMlp(ckpt, "policy", policy.mean);
  policy.log_std = ckpt.GetVector("policy.log_std", policy.log_std.size());
  GetMlp(ckpt, "value", value);
  GetAdam(ckpt, "policy_adam", policy_adam);
  GetAdam(ckpt, "value_adam", value_adam);
  GetNormalizer(ckpt, "obs_norm", normalizer);
}

PpoLoss EvaluatePpoLoss(const PpoAgent& agent, const RolloutBuffer& buffer,
                        const std::vector<Eigen::Index>& indices,
                        const Eigen::VectorXd& advantages, const PpoConfig& cfg,
                        bool with_gradients) {
  const auto b = static_cast<Eigen::Index>(indices.size());
  const Eigen::Index od = buffer.observations.rows();
  const Eigen::Index ad = buffer.actions.rows();
  Eigen::MatrixXd x(od, b);
  Eigen::MatrixXd a(ad, b);
  Eigen::VectorXd old_lp(b), adv(b), ret(b);
  for (Eigen::Index i = 0; i < b; ++i) {
    const Eigen::Index k = indices[static_cast<size_t>(i)];
    x.col(i) = buffer.observations.col(k);
    a.col(i) = buffer.actions.col(k);
    old_lp[i] = buffer.log_probs[k];
    adv[i] = advantages[k];
    ret[i] = buffer.returns[k];
  }
  const double inv_b = 1.0 / static_cast<double>(b);
  const Eigen::VectorXd& log_std = agent.policy.log_std;
  const Eigen::ArrayXd inv_std = (-log_std.array()).exp();

  Mlp::Cache pcache;
  const Eigen::MatrixXd mu = agent.policy.mean.Forward(x, with_gradients ? &pcache : nullptr);
  const Eigen::MatrixXd z = (a - mu).array().colwise() * inv_std;
  const double lp_const = log_std.sum() + kHalfLogTwoPi * static_cast<double>(ad);

  PpoLoss loss;
  Eigen::VectorXd coef = Eigen::VectorXd::Zero(b);  // d(total)/d(log prob)
  for (Eigen::Index i = 0; i < b; ++i) {
    const double lp = -0.5 * z.col(i).squaredNorm() - lp_const;
    const double r = std::exp(lp - old_lp[i]);
    const double clipped = std::clamp(r, 1.0 - cfg.clip, 1.0 + cfg.clip);
    const double unclipped_term = r * adv[i];
    const double clipped_term = clipped * adv[i];
    loss.surrogate += std::min(unclipped_term, clipped_term);
    if (unclipped_term <= clipped_term) coef[i] = -unclipped_term * inv_b;
    if (std::abs(r - 1.0) > cfg.clip) loss.clip_fraction += 1.0;
    loss.approx_kl += (r - 1.0) - std::log(r);
  }
  loss.surrogate *= inv_b;
  loss.clip_fraction *= inv_b;
  loss.approx_kl *= inv_b;
  loss.entropy = agent.policy.Entropy();

  Mlp::Cache vcache;
  const Eigen::MatrixXd v = agent.value.Forward(x, with_gradients ? &vcache : nullptr);
  const Eigen::VectorXd verr = v.row(0).transpose() - ret;
  loss.value_loss = verr.squaredNorm() * inv_b;
  loss.total = -loss.surrogate + cfg.value_coef * loss.value_loss -
               cfg.entropy_coef * loss.entropy;
  if (!with_gradients) return loss;

  // d(log prob)/d(mean) = z / sigma; d(log prob)/d(log sigma) = z^2 - 1.
  const Eigen::MatrixXd dmu = (z.array().colwise() * inv_std).rowwise() *
                              coef.transpose().array();
  Eigen::VectorXd dlog_std = (z.array().square() - 1.0).matrix() * coef;
  dlog_std.array() -= cfg.entropy_coef;
  const Mlp::Gradients pg = agent.policy.mean.Backward(pcache, dmu);
  loss.policy_grad.resize(pg.params.size() + ad);
  loss.policy_grad << pg.params, dlog_std;

  const Eigen::MatrixXd dv = (2.0 * cfg.value_coef * inv_b) * verr.transpose();
  loss.value_grad = agent.value.Backward(vcache, dv).params;
  return loss;
}

UpdateStats PpoUpdate(PpoAgent& agent, const RolloutBuffer& buffer, const PpoConfig& cfg,
                      Rng& rng) {
  if (!buffer.finalized()) throw UsageError("ppo update needs a finalized buffer");
  const Eigen::Index n = buffer.size();
  Eigen::VectorXd adv = buffer.advantages;
  if (cfg.normalize_advantages && n > 1) {
    const double mean = adv.mean();
    const double std = std::sqrt((adv.array() - mean).square().sum() / static_cast<double>(n));
    adv = (adv.array() - mean) / (std + 1e-8);
  }
  const PpoAgent saved = agent;
  UpdateStats stats;
  std::vector<Eigen::Index> order(static_cast<size_t>(n));
  std::iota(order.begin(), order.end(), Eigen::Index{0});
  int batches = 0;
  for (int epoch = 0; epoch < cfg.epochs; ++epoch) {
    for (Eigen::Index i = n - 1; i > 0; --i) {
      std::uniform_int_distribution<Eigen::Index> pick(0, i);
      std::swap(order[static_cast<size_t>(i)], order[static_cast<size_t>(pick(rng))]);
    }
    for (Eigen::Index start = 0; start < n; start += cfg.minibatch) {
      const Eigen::Index end = std::min<Eigen::Index>(n, start + cfg.minibatch);
      const std::vector<Eigen::Index> idx(order.begin() + start, order.begin() + end);
      PpoLoss loss = EvaluatePpoLoss(agent, buffer, idx, adv, cfg, true);
      if (!std::isfinite(loss.total) || !loss.policy_grad.allFinite() ||
          !loss.value_grad.allFinite()) {
        agent = saved;
        stats = UpdateStats{};
        stats.aborted = true;
        stats.fault = "non-finite ppo loss in epoch " + std::to_string(epoch);
        return stats;
      }
      ClipNorm(loss.policy_grad, cfg.max_grad_norm);
      ClipNorm(loss.value_grad, cfg.max_grad_norm);
      Eigen::VectorXd p = agent.PolicyParams();
      agent.policy_adam.Update(p, loss.policy_grad, cfg.lr_policy);
      agent.SetPolicyParams(p);
      agent.policy.ClampLogStd();
      agent.value_adam.Update(agent.value.params(), loss.value_grad, cfg.lr_value);
      stats.policy_loss += -loss.surrogate;
      stats.value_loss += loss.value_loss;
      stats.entropy += loss.entropy;
      stats.clip_fraction += loss.clip_fraction;
      stats.approx_kl += loss.approx_kl;
      stats.total_loss += loss.total;
      ++batches;
    }
  }
  if (batches > 0) {
    const double s = 1.0 / batches;
    stats.policy_loss *= s;
    stats.value_loss *= s;
    stats.entropy *= s;
    stats.clip_fraction *= s;
    stats.approx_kl *= s;
    stats.total_loss *= s;
  }
  return stats;
}

PpoResult TrainPpo(const EnvFactory& make_env, const PpoConfig& cfg,
                   const TrainOptions& options) {
  cfg.Validate();
  const int n_workers = cfg.workers;
  std::vector<std::unique_ptr<Environment>> envs;
  for (int i = 0; i < n_workers; ++i) envs.push_back(make_env());
  const int od = envs[0]->obs_dim();
  const int ad = envs[0]->act_dim();

  std::seed_seq seq{options.seed};
  Rng master(seq);
  PpoResult result;
  result.agent = PpoAgent(od, ad, cfg, master);
  PpoAgent& agent = result.agent;
  std::vector<Rng> worker_rng;
  for (int i = 0; i < n_workers; ++i) {
    worker_rng.emplace_back(options.seed ^ static_cast<unsigned long long>(i));
  }
  long long iteration = 0;
  long long steps = 0;
  TrainLog& log = result.log;

  const bool to_disk = !options.out_dir.empty();
  if (to_disk) std::filesystem::create_directories(options.out_dir);
  auto save = [&]() {
    if (!to_disk) return;
    Checkpoint ckpt;
    ckpt.config_digest = options.config_digest;
    ckpt.PutBytes("algo", "ppo");
    agent.Save(ckpt);
    ckpt.PutRng("rng.master", master);
    for (int i = 0; i < n_workers; ++i) {
      ckpt.PutRng("rng.worker." + std::to_string(i), worker_rng[static_cast<size_t>(i)]);
    }
    ckpt.PutScalar("iteration", static_cast<double>(iteration));
    ckpt.PutScalar("steps", static_cast<double>(steps));
    ckpt.PutBytes("log", log.Csv());
    ckpt.Save(CheckpointPath(options.out_dir, iteration));
    WriteTextFile(options.out_dir + "/log.csv", log.Csv());
  };

  if (!options.resume_path.empty()) {
    const Checkpoint ckpt = Checkpoint::Load(options.resume_path, options.config_digest);
    if (ckpt.GetBytes("algo") != "ppo") {
      throw LoadError(options.resume_path + ": not a ppo checkpoint");
    }
    agent.Load(ckpt);
    master = ckpt.GetRng("rng.master");
    for (int i = 0; i < n_workers; ++i) {
      worker_rng[static_cast<size_t>(i)] = ckpt.GetRng("rng.worker." + std::to_string(i));
    }
    iteration = static_cast<long long>(ckpt.GetScalar("iteration"));
    steps = static_cast<long long>(ckpt.GetScalar("steps"));
    log = TrainLog::FromCsv(ckpt.GetBytes("log"));
    if (to_disk) WriteTextFile(options.out_dir + "/log.csv", log.Csv());
  } else {
    save();
  }

  int threads = n_workers;
  if (options.max_threads > 0) threads = std::min(threads, options.max_threads);

  while (steps < options.total_steps) {
    const long long want = std::min<long long>(cfg.rollout_length, options.total_steps - steps);
    std::vector<int> counts(static_cast<size_t>(n_workers), static_cast<int>(want / n_workers));
    for (int i = 0; i < want % n_workers; ++i) ++counts[static_cast<size_t>(i)];

    std::vector<WorkerRollout> rollouts(static_cast<size_t>(n_workers));
    std::vector<std::exception_ptr> errors(static_cast<size_t>(n_workers));
    auto run = [&](int i) {
      try {
        const auto k = static_cast<size_t>(i);
        if (counts[k] > 0) {
          rollouts[k] = Collect(*envs[k], agent, cfg.normalize_observations, counts[k],
                                worker_rng[k]);
        }
      } catch (...) {
        errors[static_cast<size_t>(i)] = std::current_exception();
      }
    };
    if (threads <= 1) {
      for (int i = 0; i < n_workers; ++i) run(i);
    } else {
      std::vector<std::thread> pool;
      for (int t = 0; t < threads; ++t) {
        pool.emplace_back([&, t]() {
          for (int i = t; i < n_workers; i += threads) run(i);
        });
      }
      for (auto& th : pool) th.join();
    }
    for (const auto& e : errors) {
      if (e) std::rethrow_exception(e);
    }

    // Assemble the buffer with per-worker advantages.
    RolloutBuffer buf;
    const auto total = static_cast<Eigen::Index>(want);
    buf.observations.resize(od, total);
    buf.actions.resize(ad, total);
    buf.log_probs.resize(total);
    buf.rewards.resize(total);
    buf.values.resize(total);
    buf.advantages.resize(total);
    buf.returns.resize(total);
    Eigen::MatrixXd raw_all(od, total);
    std::vector<double> ep_returns;
    std::vector<int> ep_lengths;
    Eigen::Vector4d term_sums = Eigen::Vector4d::Zero();
    Eigen::Index off = 0;
    for (int i = 0; i < n_workers; ++i) {
      WorkerRollout& w = rollouts[static_cast<size_t>(i)];
      const Eigen::Index n = counts[static_cast<size_t>(i)];
      if (n == 0) continue;
      const Eigen::VectorXd values = agent.value.Forward(w.obs).row(0).transpose();
      Eigen::VectorXd gae_rewards = w.rewards;
      for (const auto& [t, next_obs] : w.truncated) {
        gae_rewards[t] += cfg.gamma * agent.value.Forward(next_obs)[0];
      }
      const double bootstrap = w.dones.back() ? 0.0 : agent.value.Forward(w.final_obs)[0];
      const GaeResult gae =
          ComputeGae(gae_rewards, values, w.dones, bootstrap, cfg.gamma, cfg.gae_lambda);
      buf.observations.middleCols(off, n) = w.obs;
      buf.actions.middleCols(off, n) = w.actions;
      buf.log_probs.segment(off, n) = w.log_probs;
      buf.rewards.segment(off, n) = w.rewards;
      buf.values.segment(off, n) = values;
      buf.advantages.segment(off, n) = gae.advantages;
      buf.returns.segment(off, n) = gae.returns;
      raw_all.middleCols(off, n) = w.raw_obs;
      buf.dones.insert(buf.dones.end(), w.dones.begin(), w.dones.end());
      buf.done_reasons.insert(buf.done_reasons.end(), w.reasons.begin(), w.reasons.end());
      ep_returns.insert(ep_returns.end(), w.episode_returns.begin(), w.episode_returns.end());
      ep_lengths.insert(ep_lengths.end(), w.episode_lengths.begin(), w.episode_lengths.end());
      term_sums += w.term_sums;
      off += n;
    }
    IterationLog row;
    row.episodes = static_cast<long long>(ep_returns.size());
    if (ep_returns.empty()) {
      // No episode finished: report the unfinished ones.
      for (const auto& w : rollouts) {
        if (w.partial_length > 0) {
          ep_returns.push_back(w.partial_return);
          ep_lengths.push_back(w.partial_length);
        }
      }
    }
    if (!ep_returns.empty()) {
      row.mean_episode_reward =
          std::accumulate(ep_returns.begin(), ep_returns.end(), 0.0) / ep_returns.size();
      row.max_episode_reward = *std::max_element(ep_returns.begin(), ep_returns.end());
      row.mean_episode_length =
          std::accumulate(ep_lengths.begin(), ep_lengths.end(), 0.0) / ep_lengths.size();
    }
    term_sums /= static_cast<double>(total);
    row.r_q = term_sums[0];
    row.r_e = term_sums[1];
    row.r_c = term_sums[2];
    row.r_effort = term_sums[3];

    const UpdateStats stats = PpoUpdate(agent, buf, cfg, master);
    if (stats.aborted) throw std::runtime_error("ppo update aborted: " + stats.fault);
    if (cfg.normalize_observations) agent.normalizer.Update(raw_all);

    ++iteration;
    steps += want;
    row.iteration = iteration;
    row.steps = steps;
    row.policy_loss = stats.policy_loss;
    row.value_loss = stats.value_loss;
    row.entropy = stats.entropy;
    row.clip_fraction = stats.clip_fraction;
    row.approx_kl = stats.approx_kl;
    log.rows.push_back(row);
    if (options.on_log) options.on_log(row);
    if (iteration % cfg.checkpoint_every == 0 || steps >= options.total_steps) {
      save();
    } else if (to_disk) {
      WriteTextFile(options.out_dir + "/log.csv", log.Csv());
    }
  }
  return result;
}

}  // namespace gaitforge
