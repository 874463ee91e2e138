#ifndef GAITFORGE_TRAINING_H_
#define GAITFORGE_TRAINING_H_

#include <functional>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include <Eigen/Core>

#include "gaitforge/env.h"
#include "gaitforge/nn.h"

namespace gaitforge {

using EnvFactory = std::function<std::unique_ptr<Environment>()>;

// One row of the training log.
struct IterationLog {
  long long iteration = 0;
  long long steps = 0;  // cumulative environment steps
  long long episodes = 0;
  double mean_episode_reward = 0.0;
  double max_episode_reward = 0.0;
  double mean_episode_length = 0.0;
  double r_q = 0.0;
  double r_e = 0.0;
  double r_c = 0.0;
  double r_effort = 0.0;
  double policy_loss = 0.0;
  double value_loss = 0.0;
  double entropy = 0.0;
  double clip_fraction = 0.0;
  double approx_kl = 0.0;
};

struct TrainLog {
  std::vector<IterationLog> rows;

  static std::vector<std::string> Header();
  std::string Csv() const;
  static TrainLog FromCsv(std::string_view text);
};

// Run-time options shared by both trainers.
struct TrainOptions {
  long long total_steps = 0;
  unsigned long long seed = 0;
  // Directory for log.csv and ckpt_*.bin; empty keeps everything in memory.
  std::string out_dir;
  // Checkpoint to continue from.
  std::string resume_path;
  Digest config_digest{};
  // Upper bound on threads used for rollout workers (0 = one per worker).
  int max_threads = 0;
  // Called after each log row (progress reporting).
  std::function<void(const IterationLog&)> on_log;
};

// Rewards accumulated over a set of finished episodes.
struct EpisodeStats {
  std::vector<double> returns;
  std::vector<int> lengths;
  double mean_return = 0.0;
  double mean_length = 0.0;
  std::vector<DoneReason> reasons;
};

// Runs `episodes` episodes with `policy` mapping observations to actions.
using PolicyFn = std::function<Eigen::VectorXd(const Eigen::VectorXd&)>;
EpisodeStats RunEpisodes(Environment& env, const PolicyFn& policy, int episodes,
                         Rng& rng);

// Uniform random actions within the environment bounds.
EpisodeStats RandomBaseline(Environment& env, int episodes, Rng& rng);

// Threads allowed by GAITFORGE_THREADS (0 when unset or invalid).
int ThreadLimitFromEnv();

// Whole-file text I/O and the ckpt_NNNNNN.bin naming scheme.
void WriteTextFile(const std::string& path, const std::string& text);
std::string ReadTextFile(const std::string& path);
std::string CheckpointPath(const std::string& dir, long long index);

}  // namespace gaitforge

#endif  // GAITFORGE_TRAINING_H_
