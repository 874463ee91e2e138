#include "gaitforge/nn.h"

#include <algorithm>
#include <bit>
#include <cmath>
#include <fstream>
#include <numbers>
#include <sstream>

#include <openssl/sha.h>

namespace gaitforge {
namespace {

void PutU8(std::string& out, std::uint8_t v) { out.push_back(static_cast<char>(v)); }

void PutU32(std::string& out, std::uint32_t v) {
  for (int i = 0; i < 4; ++i) out.push_back(static_cast<char>((v >> (8 * i)) & 0xff));
}

void PutU64(std::string& out, std::uint64_t v) {
  for (int i = 0; i < 8; ++i) out.push_back(static_cast<char>((v >> (8 * i)) & 0xff));
}

class Reader {
 public:
  Reader(std::string_view data, std::string origin)
      : data_(data), origin_(std::move(origin)) {}

  std::string_view Take(size_t n) {
    if (data_.size() - pos_ < n) Fail("truncated file");
    std::string_view out = data_.substr(pos_, n);
    pos_ += n;
    return out;
  }
  std::uint64_t Uint(int bytes) {
    const std::string_view b = Take(static_cast<size_t>(bytes));
    std::uint64_t v = 0;
    for (int i = bytes - 1; i >= 0; --i) {
      v = (v << 8) | static_cast<std::uint8_t>(b[static_cast<size_t>(i)]);
    }
    return v;
  }
  size_t remaining() const { return data_.size() - pos_; }
  [[noreturn]] void Fail(const std::string& what) const {
    throw LoadError(origin_ + ": " + what);
  }

 private:
  std::string_view data_;
  std::string origin_;
  size_t pos_ = 0;
};

}  // namespace

Mlp::Mlp(std::vector<int> sizes) : sizes_(std::move(sizes)) {
  if (sizes_.size() < 2) throw ConfigError("network needs input and output sizes");
  Eigen::Index offset = 0;
  for (size_t l = 0; l + 1 < sizes_.size(); ++l) {
    if (sizes_[l] < 1 || sizes_[l + 1] < 1) throw ConfigError("layer sizes must be >= 1");
    weight_offset_.push_back(offset);
    offset += static_cast<Eigen::Index>(sizes_[l]) * sizes_[l + 1];
    bias_offset_.push_back(offset);
    offset += sizes_[l + 1];
  }
  params_ = Eigen::VectorXd::Zero(offset);
}

void Mlp::Initialize(Rng& rng, double final_scale) {
  params_.setZero();
  for (int l = 0; l < num_layers(); ++l) {
    const double s = std::sqrt(6.0 / (sizes_[l] + sizes_[l + 1]));
    const double scale = l + 1 == num_layers() ? final_scale : 1.0;
    auto w = weight(l);
    for (Eigen::Index j = 0; j < w.cols(); ++j) {
      for (Eigen::Index i = 0; i < w.rows(); ++i) w(i, j) = scale * Uniform(rng, -s, s);
    }
  }
}

Eigen::Map<Eigen::MatrixXd> Mlp::weight(int l) {
  return {params_.data() + weight_offset_[l], sizes_[l + 1], sizes_[l]};
}
Eigen::Map<const Eigen::MatrixXd> Mlp::weight(int l) const {
  return {params_.data() + weight_offset_[l], sizes_[l + 1], sizes_[l]};
}
Eigen::Map<Eigen::VectorXd> Mlp::bias(int l) {
  return {params_.data() + bias_offset_[l], sizes_[l + 1]};
}
Eigen::Map<const Eigen::VectorXd> Mlp::bias(int l) const {
  return {params_.data() + bias_offset_[l], sizes_[l + 1]};
}

Eigen::MatrixXd Mlp::Forward(const Eigen::MatrixXd& input, Cache* cache) const {
  if (input.rows() != input_dim()) {
    throw UsageError("network input has " + std::to_string(input.rows()) +
                     " rows, expected " + std::to_string(input_dim()));
  }
  if (cache) {
    cache->activations.clear();
    cache->activations.push_back(input);
  }
  Eigen::MatrixXd a = input;
  for (int l = 0; l < num_layers(); ++l) {
    Eigen::MatrixXd z = weight(l) * a;
    z.colwise() += bias(l);
    if (l + 1 < num_layers()) z = z.array().tanh().matrix();
    a = std::move(z);
    if (cache) cache->activations.push_back(a);
  }
  return a;
}

Eigen::VectorXd Mlp::Forward(const Eigen::VectorXd& input) const {
  return Forward(Eigen::MatrixXd(input), nullptr).col(0);
}

Mlp::Gradients Mlp::Backward(const Cache& cache,
                             const Eigen::MatrixXd& output_grad) const {
  if (cache.activations.size() != static_cast<size_t>(num_layers() + 1)) {
    throw UsageError("backward needs the cache of a forward pass");
  }
  Gradients g;
  g.params = Eigen::VectorXd::Zero(num_params());
  Eigen::MatrixXd delta = output_grad;
  for (int l = num_layers() - 1; l >= 0; --l) {
    const Eigen::MatrixXd& a_in = cache.activations[l];
    Eigen::Map<Eigen::MatrixXd>(g.params.data() + weight_offset_[l], sizes_[l + 1],
                                sizes_[l]) = delta * a_in.transpose();
    Eigen::Map<Eigen::VectorXd>(g.params.data() + bias_offset_[l], sizes_[l + 1]) =
        delta.rowwise().sum();
    Eigen::MatrixXd back = weight(l).transpose() * delta;
    if (l > 0) {
      back.array() *= 1.0 - a_in.array().square();
      delta = std::move(back);
    } else {
      g.input = std::move(back);
    }
  }
  return g;
}

void AdamState::Reset(Eigen::Index n) {
  step = 0;
  m = Eigen::VectorXd::Zero(n);
  v = Eigen::VectorXd::Zero(n);
}

void AdamState::Update(Eigen::VectorXd& params, const Eigen::VectorXd& grad, double lr) {
  if (grad.size() != params.size()) throw UsageError("adam: gradient size mismatch");
  if (m.size() != params.size()) Reset(params.size());
  ++step;
  m = beta1 * m + (1.0 - beta1) * grad;
  v = beta2 * v + (1.0 - beta2) * grad.cwiseAbs2();
  const double c1 = 1.0 - std::pow(beta1, static_cast<double>(step));
  const double c2 = 1.0 - std::pow(beta2, static_cast<double>(step));
  params.array() -= lr * (m.array() / c1) / ((v.array() / c2).sqrt() + eps);
}

GaussianPolicy::GaussianPolicy(std::vector<int> sizes, double log_std_init)
    : mean(std::move(sizes)),
      log_std(Eigen::VectorXd::Constant(mean.output_dim(), log_std_init)) {
  ClampLogStd();
}

void GaussianPolicy::ClampLogStd() {
  log_std = log_std.cwiseMax(kLogStdMin).cwiseMin(kLogStdMax);
}

GaussianPolicy::Sample GaussianPolicy::Draw(const Eigen::VectorXd& obs, Rng& rng) const {
  Sample s;
  s.mean = mean.Forward(obs);
  s.action.resize(s.mean.size());
  for (Eigen::Index i = 0; i < s.mean.size(); ++i) {
    s.action[i] = s.mean[i] + std::exp(log_std[i]) * StandardNormal(rng);
  }
  s.log_prob = LogProb(s.mean, s.action);
  return s;
}

double GaussianPolicy::LogProb(const Eigen::VectorXd& mean_out,
                               const Eigen::VectorXd& action) const {
  const double half_log_two_pi = 0.5 * std::log(2.0 * std::numbers::pi);
  double lp = 0.0;
  for (Eigen::Index i = 0; i < action.size(); ++i) {
    const double z = (action[i] - mean_out[i]) * std::exp(-log_std[i]);
    lp -= 0.5 * z * z + log_std[i] + half_log_two_pi;
  }
  return lp;
}

double GaussianPolicy::Entropy() const {
  const double c = 0.5 * (1.0 + std::log(2.0 * std::numbers::pi));
  return log_std.sum() + c * static_cast<double>(log_std.size());
}

RunningNormalizer::RunningNormalizer(int dim)
    : mean(Eigen::VectorXd::Zero(dim)), m2(Eigen::VectorXd::Zero(dim)) {}

void RunningNormalizer::Update(const Eigen::MatrixXd& batch) {
  if (batch.cols() == 0) return;
  const double n = static_cast<double>(batch.cols());
  const Eigen::VectorXd batch_mean = batch.rowwise().mean();
  const Eigen::VectorXd batch_m2 =
      (batch.colwise() - batch_mean).array().square().rowwise().sum();
  const double total = count + n;
  const Eigen::VectorXd delta = batch_mean - mean;
  mean += delta * (n / total);
  m2 += batch_m2 + delta.cwiseAbs2() * (count * n / total);
  count = total;
}

Eigen::VectorXd RunningNormalizer::Std() const {
  if (count < 2.0) return Eigen::VectorXd::Ones(mean.size());
  return (m2 / count).cwiseSqrt().cwiseMax(1e-8);
}

Eigen::VectorXd RunningNormalizer::Normalize(const Eigen::VectorXd& x) const {
  if (count < 2.0) return x;
  const Eigen::VectorXd s = Std();
  return ((x - mean).array() / s.array()).cwiseMax(-clip).cwiseMin(clip).matrix();
}

Eigen::MatrixXd RunningNormalizer::Normalize(const Eigen::MatrixXd& x) const {
  if (count < 2.0) return x;
  const Eigen::VectorXd s = Std();
  Eigen::MatrixXd out = x.colwise() - mean;
  out.array().colwise() /= s.array();
  return out.cwiseMax(-clip).cwiseMin(clip);
}

Digest Sha256(std::string_view data) {
  Digest d{};
  SHA256(reinterpret_cast<const unsigned char*>(data.data()), data.size(), d.data());
  return d;
}

std::string ToHex(const Digest& digest) {
  static constexpr char kHex[] = "0123456789abcdef";
  std::string out;
  for (std::uint8_t b : digest) {
    out.push_back(kHex[b >> 4]);
    out.push_back(kHex[b & 0xf]);
  }
  return out;
}

std::string SerializeRng(const Rng& rng) {
  std::ostringstream out;
  out << rng;
  return out.str();
}

Rng DeserializeRng(std::string_view text) {
  Rng rng;
  std::istringstream in{std::string(text)};
  in >> rng;
  if (!in) throw LoadError("invalid random engine state");
  return rng;
}

CheckpointBlock& Checkpoint::Upsert(const std::string& name) {
  for (auto& b : blocks_) {
    if (b.name == name) {
      b = CheckpointBlock{};
      b.name = name;
      return b;
    }
  }
  blocks_.push_back(CheckpointBlock{});
  blocks_.back().name = name;
  return blocks_.back();
}

void Checkpoint::PutVector(const std::string& name, const Eigen::VectorXd& v) {
  CheckpointBlock& b = Upsert(name);
  b.shape = {static_cast<std::uint64_t>(v.size())};
  b.values.assign(v.data(), v.data() + v.size());
}

void Checkpoint::PutMatrix(const std::string& name, const Eigen::MatrixXd& m) {
  CheckpointBlock& b = Upsert(name);
  b.shape = {static_cast<std::uint64_t>(m.rows()), static_cast<std::uint64_t>(m.cols())};
  b.values.assign(m.data(), m.data() + m.size());
}

void Checkpoint::PutScalar(const std::string& name, double v) {
  CheckpointBlock& b = Upsert(name);
  b.values = {v};
}

void Checkpoint::PutBytes(const std::string& name, std::string bytes) {
  CheckpointBlock& b = Upsert(name);
  b.kind = CheckpointBlock::Kind::kBytes;
  b.shape = {static_cast<std::uint64_t>(bytes.size())};
  b.bytes = std::move(bytes);
}

void Checkpoint::PutRng(const std::string& name, const Rng& rng) {
  PutBytes(name, SerializeRng(rng));
}

bool Checkpoint::Has(const std::string& name) const {
  return std::any_of(blocks_.begin(), blocks_.end(),
                     [&](const CheckpointBlock& b) { return b.name == name; });
}

const CheckpointBlock& Checkpoint::Find(const std::string& name) const {
  for (const auto& b : blocks_) {
    if (b.name == name) return b;
  }
  throw LoadError("checkpoint has no block '" + name + "'");
}

Eigen::VectorXd Checkpoint::GetVector(const std::string& name,
                                      Eigen::Index expected_size) const {
  const CheckpointBlock& b = Find(name);
  if (b.kind != CheckpointBlock::Kind::kFloat64 || b.shape.size() != 1) {
    throw LoadError("checkpoint block '" + name + "' is not a vector");
  }
  if (expected_size >= 0 && b.values.size() != static_cast<size_t>(expected_size)) {
    throw LoadError("checkpoint block '" + name + "' has " +
                    std::to_string(b.values.size()) + " entries, expected " +
                    std::to_string(expected_size));
  }
  return Eigen::Map<const Eigen::VectorXd>(b.values.data(),
                                           static_cast<Eigen::Index>(b.values.size()));
}

Eigen::MatrixXd Checkpoint::GetMatrix(const std::string& name) const {
  const CheckpointBlock& b = Find(name);
  if (b.kind != CheckpointBlock::Kind::kFloat64 || b.shape.size() != 2) {
    throw LoadError("checkpoint block '" + name + "' is not a matrix");
  }
  return Eigen::Map<const Eigen::MatrixXd>(b.values.data(),
                                           static_cast<Eigen::Index>(b.shape[0]),
                                           static_cast<Eigen::Index>(b.shape[1]));
}

double Checkpoint::GetScalar(const std::string& name) const {
  const CheckpointBlock& b = Find(name);
  if (b.kind != CheckpointBlock::Kind::kFloat64 || !b.shape.empty() ||
      b.values.size() != 1) {
    throw LoadError("checkpoint block '" + name + "' is not a scalar");
  }
  return b.values[0];
}

const std::string& Checkpoint::GetBytes(const std::string& name) const {
  const CheckpointBlock& b = Find(name);
  if (b.kind != CheckpointBlock::Kind::kBytes) {
    throw LoadError("checkpoint block '" + name + "' is not a byte block");
  }
  return b.bytes;
}

Rng Checkpoint::GetRng(const std::string& name) const {
  return DeserializeRng(GetBytes(name));
}

std::string Checkpoint::Serialize() const {
  std::string out(kCheckpointMagic);
  PutU32(out, kCheckpointVersion);
  out.append(reinterpret_cast<const char*>(config_digest.data()), config_digest.size());
  PutU64(out, blocks_.size());
  for (const auto& b : blocks_) {
    PutU32(out, static_cast<std::uint32_t>(b.name.size()));
    out += b.name;
    PutU8(out, static_cast<std::uint8_t>(b.kind));
    PutU32(out, static_cast<std::uint32_t>(b.shape.size()));
    for (std::uint64_t d : b.shape) PutU64(out, d);
    if (b.kind == CheckpointBlock::Kind::kBytes) {
      out += b.bytes;
    } else {
      for (double v : b.values) PutU64(out, std::bit_cast<std::uint64_t>(v));
    }
  }
  const Digest hash = Sha256(out);
  out.append(reinterpret_cast<const char*>(hash.data()), hash.size());
  return out;
}

Checkpoint Checkpoint::Deserialize(std::string_view data, const std::string& origin) {
  Reader r(data, origin);
  if (r.Take(kCheckpointMagic.size()) != kCheckpointMagic) r.Fail("not a checkpoint file");
  const auto version = static_cast<std::uint32_t>(r.Uint(4));
  if (version != kCheckpointVersion) {
    r.Fail("unsupported checkpoint version " + std::to_string(version));
  }
  if (data.size() < kCheckpointMagic.size() + 4 + 64) r.Fail("truncated file");
  const std::string_view body = data.substr(0, data.size() - 32);
  const Digest hash = Sha256(body);
  if (!std::equal(hash.begin(), hash.end(),
                  reinterpret_cast<const std::uint8_t*>(data.data() + body.size()))) {
    r.Fail("content hash mismatch (file corrupted or modified)");
  }
  Checkpoint ckpt;
  const std::string_view digest = r.Take(32);
  std::copy(digest.begin(), digest.end(), ckpt.config_digest.begin());
  const std::uint64_t n = r.Uint(8);
  for (std::uint64_t i = 0; i < n; ++i) {
    CheckpointBlock b;
    b.name = std::string(r.Take(r.Uint(4)));
    const auto kind = r.Uint(1);
    if (kind > 1) r.Fail("block '" + b.name + "' has unknown kind");
    b.kind = static_cast<CheckpointBlock::Kind>(kind);
    const std::uint64_t ndim = r.Uint(4);
    std::uint64_t count = 1;
    for (std::uint64_t d = 0; d < ndim; ++d) {
      b.shape.push_back(r.Uint(8));
      count *= b.shape.back();
    }
    if (b.kind == CheckpointBlock::Kind::kBytes) {
      if (ndim != 1) r.Fail("byte block '" + b.name + "' must be one-dimensional");
      b.bytes = std::string(r.Take(b.shape[0]));
    } else {
      if (count > (r.remaining() / 8)) r.Fail("block '" + b.name + "' is truncated");
      b.values.resize(count);
      for (auto& v : b.values) v = std::bit_cast<double>(r.Uint(8));
    }
    ckpt.blocks_.push_back(std::move(b));
  }
  if (r.remaining() != 32) r.Fail("unexpected trailing data");
  return ckpt;
}

void Checkpoint::Save(const std::string& path) const {
  const std::string data = Serialize();
  const std::string tmp = path + ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw std::runtime_error("cannot write " + tmp);
    out.write(data.data(), static_cast<std::streamsize>(data.size()));
    if (!out) throw std::runtime_error("write failed for " + tmp);
  }
  if (std::rename(tmp.c_str(), path.c_str()) != 0) {
    throw std::runtime_error("cannot rename " + tmp + " to " + path);
  }
}

Checkpoint Checkpoint::Load(const std::string& path,
                            const std::optional<Digest>& expected_digest) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw LoadError("cannot open " + path);
  std::ostringstream buf;
  buf << in.rdbuf();
  Checkpoint ckpt = Deserialize(buf.str(), path);
  if (expected_digest && ckpt.config_digest != *expected_digest) {
    throw LoadError(path + ": config digest mismatch (checkpoint " +
                    ToHex(ckpt.config_digest) + ", config " +
                    ToHex(*expected_digest) + ")");
  }
  return ckpt;
}

void PutMlp(Checkpoint& ckpt, const std::string& prefix, const Mlp& net) {
  Eigen::VectorXd sizes(static_cast<Eigen::Index>(net.sizes().size()));
  for (size_t i = 0; i < net.sizes().size(); ++i) {
    sizes[static_cast<Eigen::Index>(i)] = net.sizes()[i];
  }
  ckpt.PutVector(prefix + ".sizes", sizes);
  ckpt.PutVector(prefix + ".params", net.params());
}

void GetMlp(const Checkpoint& ckpt, const std::string& prefix, Mlp& net) {
  const Eigen::VectorXd sizes = ckpt.GetVector(prefix + ".sizes");
  bool same = sizes.size() == static_cast<Eigen::Index>(net.sizes().size());
  for (Eigen::Index i = 0; same && i < sizes.size(); ++i) {
    same = sizes[i] == net.sizes()[static_cast<size_t>(i)];
  }
  if (!same) throw LoadError("checkpoint network '" + prefix + "' has a different shape");
  net.params() = ckpt.GetVector(prefix + ".params", net.num_params());
}

void PutAdam(Checkpoint& ckpt, const std::string& prefix, const AdamState& adam) {
  ckpt.PutScalar(prefix + ".step", static_cast<double>(adam.step));
  ckpt.PutVector(prefix + ".m", adam.m);
  ckpt.PutVector(prefix + ".v", adam.v);
}

void GetAdam(const Checkpoint& ckpt, const std::string& prefix, AdamState& adam) {
  adam.step = static_cast<long long>(ckpt.GetScalar(prefix + ".step"));
  adam.m = ckpt.GetVector(prefix + ".m");
  adam.v = ckpt.GetVector(prefix + ".v", adam.m.size());
}

void PutNormalizer(Checkpoint& ckpt, const std::string& prefix,
                   const RunningNormalizer& norm) {
  ckpt.PutVector(prefix + ".mean", norm.mean);
  ckpt.PutVector(prefix + ".m2", norm.m2);
  ckpt.PutScalar(prefix + ".count", norm.count);
  ckpt.PutScalar(prefix + ".clip", norm.clip);
}

void GetNormalizer(const Checkpoint& ckpt, const std::string& prefix,
                   RunningNormalizer& norm) {
  norm.mean = ckpt.GetVector(prefix + ".mean", norm.mean.size());
  norm.m2 = ckpt.GetVector(prefix + ".m2", norm.mean.size());
  norm.count = ckpt.GetScalar(prefix + ".count");
  norm.clip = ckpt.GetScalar(prefix + ".clip");
}

}  // namespace gaitforge
