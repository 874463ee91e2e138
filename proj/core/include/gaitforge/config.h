#ifndef GAITFORGE_CONFIG_H_
#define GAITFORGE_CONFIG_H_

#include <optional>
#include <set>
#include <string>
#include <vector>

#include "gaitforge/ddpg.h"
#include "gaitforge/env.h"
#include "gaitforge/ppo.h"

namespace gaitforge {

enum class Algorithm { kPpo, kDdpg };

std::string_view ToString(Algorithm algo);
Algorithm ParseAlgorithm(std::string_view text);

// Everything a run needs besides the reference clip. YAML sections:
// algo, model, env, network, ppo, ddpg, eval.
struct RunConfig {
  Algorithm algo = Algorithm::kPpo;
  ActuationMode mode = ActuationMode::kTorque;
  std::set<std::string> locked_joints;
  // Physical parameters. The muscle table is kept in both modes and only
  // used by mtu models.
  ModelSpec model = BuildDefaultModel(ActuationMode::kMtu);
  EnvConfig env;
  std::vector<int> hidden = {512, 512};
  PpoConfig ppo;
  DdpgConfig ddpg;
  int eval_episodes = 5;

  // Copies shared settings (mode, hidden sizes) into the sub-configs and
  // validates them. Throws ConfigError.
  void Resolve();

  // The model for `mode` with locks applied.
  ModelSpec BuildModel() const;
};

RunConfig DefaultRunConfig(ActuationMode mode = ActuationMode::kTorque);

// Unknown keys and ill-typed values raise ConfigError naming the key.
// `mode_override`, when set, replaces model.mode before mode-dependent
// defaults are applied.
RunConfig ParseRunConfig(const std::string& yaml_text, const std::string& origin,
                         const std::optional<ActuationMode>& mode_override = std::nullopt);
RunConfig LoadRunConfig(const std::string& path,
                        const std::optional<ActuationMode>& mode_override = std::nullopt);

// Complete YAML rendering; ParseRunConfig(EmitRunConfig(c)) == c.
std::string EmitRunConfig(const RunConfig& cfg);

// SHA-256 over the canonical model, env and network sections: the parts a
// trained network depends on.
Digest ConfigDigest(const RunConfig& cfg);

}  // namespace gaitforge

#endif  // GAITFORGE_CONFIG_H_
