#ifndef GAITFORGE_NN_H_
#define GAITFORGE_NN_H_

#include <array>
#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include <Eigen/Core>

#include "gaitforge/types.h"

namespace gaitforge {

// Dense network with tanh hidden layers and a linear output layer. All
// parameters live in one flat vector; layer l stores its weight matrix
// (out x in, column-major) followed by its bias.
class Mlp {
 public:
  Mlp() = default;
  // `sizes` = {input, hidden..., output}; parameters start at zero.
  explicit Mlp(std::vector<int> sizes);

  // Fan-in scaled uniform init, U(-s, s) with s = sqrt(6 / (in + out));
  // the last layer's weights are multiplied by `final_scale`. Biases are 0.
  void Initialize(Rng& rng, double final_scale = 1.0);

  const std::vector<int>& sizes() const { return sizes_; }
  int input_dim() const { return sizes_.front(); }
  int output_dim() const { return sizes_.back(); }
  int num_layers() const { return static_cast<int>(sizes_.size()) - 1; }
  Eigen::Index num_params() const { return params_.size(); }

  Eigen::VectorXd& params() { return params_; }
  const Eigen::VectorXd& params() const { return params_; }

  Eigen::Map<Eigen::MatrixXd> weight(int layer);
  Eigen::Map<const Eigen::MatrixXd> weight(int layer) const;
  Eigen::Map<Eigen::VectorXd> bias(int layer);
  Eigen::Map<const Eigen::VectorXd> bias(int layer) const;

  // Intermediate activations of a batched forward pass (one column per
  // sample); activations[0] is the input.
  struct Cache {
    std::vector<Eigen::MatrixXd> activations;
  };

  Eigen::MatrixXd Forward(const Eigen::MatrixXd& input, Cache* cache = nullptr) const;
  Eigen::VectorXd Forward(const Eigen::VectorXd& input) const;

  struct Gradients {
    Eigen::VectorXd params;
    Eigen::MatrixXd input;
  };
  // Reverse pass for d(loss)/d(output) = `output_grad`, summed over the batch.
  Gradients Backward(const Cache& cache, const Eigen::MatrixXd& output_grad) const;

 private:
  std::vector<int> sizes_;
  std::vector<Eigen::Index> weight_offset_;
  std::vector<Eigen::Index> bias_offset_;
  Eigen::VectorXd params_;
};

struct AdamState {
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
  long long step = 0;
  Eigen::VectorXd m;
  Eigen::VectorXd v;

  void Reset(Eigen::Index n);
  // Bias-corrected step of `params` against `grad` (descent direction).
  void Update(Eigen::VectorXd& params, const Eigen::VectorXd& grad, double lr);
};

inline constexpr double kLogStdMin = -20.0;
inline constexpr double kLogStdMax = 2.0;

// Diagonal Gaussian with a network mean and a state-independent log std.
struct GaussianPolicy {
  Mlp mean;
  Eigen::VectorXd log_std;

  GaussianPolicy() = default;
  GaussianPolicy(std::vector<int> sizes, double log_std_init);

  void ClampLogStd();

  struct Sample {
    Eigen::VectorXd action;
    Eigen::VectorXd mean;
    double log_prob = 0.0;
  };
  // a = mean + sigma * z with z drawn from `rng`.
  Sample Draw(const Eigen::VectorXd& obs, Rng& rng) const;
  double LogProb(const Eigen::VectorXd& mean_out, const Eigen::VectorXd& action) const;
  double Entropy() const;
};

// Running mean / variance of observations (parallel Welford merge).
struct RunningNormalizer {
  Eigen::VectorXd mean;
  Eigen::VectorXd m2;
  double count = 0.0;
  double clip = 10.0;

  RunningNormalizer() = default;
  explicit RunningNormalizer(int dim);

  void Update(const Eigen::MatrixXd& batch);  // one column per sample
  Eigen::VectorXd Normalize(const Eigen::VectorXd& x) const;
  Eigen::MatrixXd Normalize(const Eigen::MatrixXd& x) const;
  Eigen::VectorXd Std() const;
};

using Digest = std::array<std::uint8_t, 32>;

Digest Sha256(std::string_view data);
std::string ToHex(const Digest& digest);

inline constexpr std::string_view kCheckpointMagic = "GAITFORGE-CKPT";
inline constexpr std::uint32_t kCheckpointVersion = 1;

struct CheckpointBlock {
  enum class Kind : std::uint8_t { kFloat64 = 0, kBytes = 1 };
  std::string name;
  Kind kind = Kind::kFloat64;
  std::vector<std::uint64_t> shape;
  std::vector<double> values;
  std::string bytes;
};

// Versioned container: magic, version, config digest, named blocks, then a
// SHA-256 of everything before it. Integers and floats are little-endian.
class Checkpoint {
 public:
  Digest config_digest{};

  void PutVector(const std::string& name, const Eigen::VectorXd& v);
  void PutMatrix(const std::string& name, const Eigen::MatrixXd& m);
  void PutScalar(const std::string& name, double v);
  void PutBytes(const std::string& name, std::string bytes);
  void PutRng(const std::string& name, const Rng& rng);

  bool Has(const std::string& name) const;
  // Lookups throw LoadError on a missing name or a wrong kind / length.
  Eigen::VectorXd GetVector(const std::string& name, Eigen::Index expected_size = -1) const;
  Eigen::MatrixXd GetMatrix(const std::string& name) const;
  double GetScalar(const std::string& name) const;
  const std::string& GetBytes(const std::string& name) const;
  Rng GetRng(const std::string& name) const;

  std::string Serialize() const;
  static Checkpoint Deserialize(std::string_view data, const std::string& origin);

  void Save(const std::string& path) const;
  // Verifies magic, version, trailing hash and, when given, the config
  // digest.
  static Checkpoint Load(const std::string& path,
                         const std::optional<Digest>& expected_digest = std::nullopt);

  const std::vector<CheckpointBlock>& blocks() const { return blocks_; }

 private:
  const CheckpointBlock& Find(const std::string& name) const;
  CheckpointBlock& Upsert(const std::string& name);
  std::vector<CheckpointBlock> blocks_;
};

// Helpers storing networks and optimizer state under a name prefix.
void PutMlp(Checkpoint& ckpt, const std::string& prefix, const Mlp& net);
void GetMlp(const Checkpoint& ckpt, const std::string& prefix, Mlp& net);
void PutAdam(Checkpoint& ckpt, const std::string& prefix, const AdamState& adam);
void GetAdam(const Checkpoint& ckpt, const std::string& prefix, AdamState& adam);
void PutNormalizer(Checkpoint& ckpt, const std::string& prefix,
                   const RunningNormalizer& norm);
void GetNormalizer(const Checkpoint& ckpt, const std::string& prefix,
                   RunningNormalizer& norm);

// Serializes the engine state as text (portable across runs of one build).
std::string SerializeRng(const Rng& rng);
Rng DeserializeRng(std::string_view text);

}  // namespace gaitforge

#endif  // GAITFORGE_NN_H_
