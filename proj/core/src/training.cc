#include "gaitforge/training.h"

#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <sstream>

#include "gaitforge/csv.h"

namespace gaitforge {

std::vector<std::string> TrainLog::Header() {
  return {"iteration",      "steps",        "episodes",      "mean_episode_reward",
          "max_episode_reward", "mean_episode_length", "r_q", "r_e", "r_c",
          "r_effort",       "policy_loss",  "value_loss",    "entropy",
          "clip_fraction",  "approx_kl"};
}

std::string TrainLog::Csv() const {
  std::ostringstream out;
  CsvWriter w(out, Header());
  for (const auto& r : rows) {
    w.Add(r.iteration).Add(r.steps).Add(r.episodes);
    w.Add(r.mean_episode_reward).Add(r.max_episode_reward).Add(r.mean_episode_length);
    w.Add(r.r_q).Add(r.r_e).Add(r.r_c).Add(r.r_effort);
    w.Add(r.policy_loss).Add(r.value_loss).Add(r.entropy);
    w.Add(r.clip_fraction).Add(r.approx_kl);
    w.EndRow();
  }
  return out.str();
}

TrainLog TrainLog::FromCsv(std::string_view text) {
  const CsvTable table = ParseCsv(text, "training log");
  TrainLog log;
  const auto header = Header();
  std::vector<int> cols;
  for (const auto& h : header) {
    const int c = table.Column(h);
    if (c < 0) throw LoadError("training log: missing column '" + h + "'");
    cols.push_back(c);
  }
  for (size_t r = 0; r < table.rows.size(); ++r) {
    auto num = [&](int i) { return table.Number(r, cols[static_cast<size_t>(i)]); };
    IterationLog row;
    row.iteration = static_cast<long long>(num(0));
    row.steps = static_cast<long long>(num(1));
    row.episodes = static_cast<long long>(num(2));
    row.mean_episode_reward = num(3);
    row.max_episode_reward = num(4);
    row.mean_episode_length = num(5);
    row.r_q = num(6);
    row.r_e = num(7);
    row.r_c = num(8);
    row.r_effort = num(9);
    row.policy_loss = num(10);
    row.value_loss = num(11);
    row.entropy = num(12);
    row.clip_fraction = num(13);
    row.approx_kl = num(14);
    log.rows.push_back(row);
  }
  return log;
}

EpisodeStats RunEpisodes(Environment& env, const PolicyFn& policy, int episodes,
                         Rng& rng) {
  EpisodeStats stats;
  for (int e = 0; e < episodes; ++e) {
    Eigen::VectorXd obs = env.Reset(rng);
    double ret = 0.0;
    int len = 0;
    while (true) {
      const StepResult res = env.Step(policy(obs));
      ret += res.reward.total;
      ++len;
      obs = res.observation;
      if (res.done) {
        stats.reasons.push_back(res.done_reason);
        break;
      }
    }
    stats.returns.push_back(ret);
    stats.lengths.push_back(len);
  }
  if (episodes > 0) {
    for (size_t i = 0; i < stats.returns.size(); ++i) {
      stats.mean_return += stats.returns[i];
      stats.mean_length += stats.lengths[i];
    }
    stats.mean_return /= episodes;
    stats.mean_length /= episodes;
  }
  return stats;
}

EpisodeStats RandomBaseline(Environment& env, int episodes, Rng& rng) {
  const Eigen::VectorXd low = env.action_low();
  const Eigen::VectorXd high = env.action_high();
  return RunEpisodes(
      env,
      [&](const Eigen::VectorXd&) {
        Eigen::VectorXd a(low.size());
        for (Eigen::Index i = 0; i < a.size(); ++i) a[i] = Uniform(rng, low[i], high[i]);
        return a;
      },
      episodes, rng);
}

int ThreadLimitFromEnv() {
  const char* text = std::getenv("GAITFORGE_THREADS");
  if (!text) return 0;
  char* end = nullptr;
  const long v = std::strtol(text, &end, 10);
  if (end == text || *end != '\0' || v < 1) return 0;
  return static_cast<int>(v);
}

void WriteTextFile(const std::string& path, const std::string& text) {
  const std::string tmp = path + ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw std::runtime_error("cannot write " + tmp);
    out << text;
    if (!out) throw std::runtime_error("write failed for " + tmp);
  }
  if (std::rename(tmp.c_str(), path.c_str()) != 0) {
    throw std::runtime_error("cannot rename " + tmp + " to " + path);
  }
}

std::string ReadTextFile(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw LoadError("cannot open " + path);
  std::ostringstream buf;
  buf << in.rdbuf();
  return buf.str();
}

std::string CheckpointPath(const std::string& dir, long long index) {
  char name[32];
  std::snprintf(name, sizeof(name), "ckpt_%06lld.bin", index);
  return dir + "/" + name;
}

}  // namespace gaitforge
