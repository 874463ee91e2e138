#include "gaitforge/config.h"

#include <algorithm>
#include <functional>
#include <sstream>

#include <yaml-cpp/yaml.h>

#include "gaitforge/csv.h"

namespace gaitforge {
namespace {

// One scalar setting: how to print it and how to read it from YAML.
struct Field {
  std::string key;
  std::function<std::string()> emit;
  std::function<void(const YAML::Node&)> read;
};

std::string Where(const std::string& origin, const YAML::Node& node) {
  const YAML::Mark m = node.Mark();
  if (m.line < 0) return origin;
  return origin + ":" + std::to_string(m.line + 1);
}

template <typename T>
T As(const YAML::Node& node, const std::string& key, const std::string& origin) {
  try {
    return node.as<T>();
  } catch (const YAML::Exception&) {
    throw ConfigError(Where(origin, node) + ": bad value for '" + key + "'");
  }
}

Field Real(const std::string& key, double& v, const std::string& origin) {
  return {key, [&v] { return FormatDouble(v); },
          [&v, key, origin](const YAML::Node& n) { v = As<double>(n, key, origin); }};
}

Field Int(const std::string& key, int& v, const std::string& origin) {
  return {key, [&v] { return std::to_string(v); },
          [&v, key, origin](const YAML::Node& n) { v = As<int>(n, key, origin); }};
}

Field Bool(const std::string& key, bool& v, const std::string& origin) {
  return {key, [&v] { return std::string(v ? "true" : "false"); },
          [&v, key, origin](const YAML::Node& n) { v = As<bool>(n, key, origin); }};
}

Field IntList(const std::string& key, std::vector<int>& v, const std::string& origin) {
  return {key,
          [&v] {
            std::string s = "[";
            for (size_t i = 0; i < v.size(); ++i) s += (i ? ", " : "") + std::to_string(v[i]);
            return s + "]";
          },
          [&v, key, origin](const YAML::Node& n) {
            if (!n.IsSequence()) throw ConfigError(Where(origin, n) + ": '" + key + "' must be a list");
            v.clear();
            for (const auto& e : n) v.push_back(As<int>(e, key, origin));
          }};
}

Field Vec2Field(const std::string& key, Vec2& v, const std::string& origin) {
  return {key, [&v] { return "[" + FormatDouble(v.x()) + ", " + FormatDouble(v.y()) + "]"; },
          [&v, key, origin](const YAML::Node& n) {
            if (!n.IsSequence() || n.size() != 2) {
              throw ConfigError(Where(origin, n) + ": '" + key + "' must be a 2-element list");
            }
            v = Vec2(As<double>(n[0], key, origin), As<double>(n[1], key, origin));
          }};
}

std::vector<Field> ContactFields(ContactParams& c, const std::string& origin) {
  return {Real("stiffness", c.stiffness, origin),   Real("exponent", c.exponent, origin),
          Real("damping", c.damping, origin),       Real("mu_static", c.mu_static, origin),
          Real("mu_dynamic", c.mu_dynamic, origin), Real("v_transition", c.v_transition, origin)};
}

std::vector<Field> MetabolicFields(MetabolicParams& m, const std::string& origin) {
  return {Real("g_offset", m.g_offset, origin),
          Real("g_slope", m.g_slope, origin),
          Real("g_min", m.g_min, origin),
          Real("g_max", m.g_max, origin),
          Real("muscle_density", m.muscle_density, origin),
          Real("specific_tension", m.specific_tension, origin)};
}

std::vector<Field> SegmentFields(SegmentSpec& s, const std::string& origin) {
  return {Real("mass", s.mass, origin), Real("length", s.length, origin),
          Vec2Field("com_offset", s.com_offset, origin),
          Real("inertia_zz", s.inertia_zz, origin)};
}

std::vector<Field> JointFields(JointSpec& j, const std::string& origin) {
  return {Real("range_min", j.range_min, origin), Real("range_max", j.range_max, origin),
          Real("kp", j.kp, origin),               Real("kd", j.kd, origin),
          Real("max_torque", j.max_torque, origin)};
}

std::string EmitAttachments(const std::vector<MuscleAttachment>& atts) {
  std::string s = "[";
  for (size_t i = 0; i < atts.size(); ++i) {
    const auto& a = atts[i];
    s += (i ? ", " : "") + std::string("{joint: ") + a.joint + ", r: " + FormatDouble(a.r) +
         ", phi: " + FormatDouble(a.phi) + ", sign: " + std::to_string(a.sign) +
         ", constant_arm: " + (a.constant_arm ? "true" : "false") + "}";
  }
  return s + "]";
}

std::vector<Field> MuscleFields(MuscleSpec& m, const std::string& origin) {
  return {Real("f_max", m.f_max, origin),
          Real("l_opt", m.l_opt, origin),
          Real("v_max", m.v_max, origin),
          Real("t_act", m.t_act, origin),
          Real("t_deact", m.t_deact, origin),
          Real("type1_fraction", m.type1_fraction, origin),
          Real("muscle_mass", m.muscle_mass, origin),
          Real("tendon_slack", m.tendon_slack, origin),
          Real("reference_length", m.reference_length, origin),
          {"attachments", [&m] { return EmitAttachments(m.attachments); },
           [&m, origin](const YAML::Node& n) {
             if (!n.IsSequence()) throw ConfigError(Where(origin, n) + ": 'attachments' must be a list");
             m.attachments.clear();
             for (const auto& e : n) {
               if (!e.IsMap()) throw ConfigError(Where(origin, e) + ": attachment must be a map");
               MuscleAttachment a;
               for (const auto& kv : e) {
                 const std::string k = kv.first.as<std::string>();
                 if (k == "joint") a.joint = As<std::string>(kv.second, k, origin);
                 else if (k == "r") a.r = As<double>(kv.second, k, origin);
                 else if (k == "phi") a.phi = As<double>(kv.second, k, origin);
                 else if (k == "sign") a.sign = As<int>(kv.second, k, origin);
                 else if (k == "constant_arm") a.constant_arm = As<bool>(kv.second, k, origin);
                 else throw ConfigError(Where(origin, kv.first) + ": unknown attachment key '" + k + "'");
               }
               if (JointIndex(a.joint) < 0) {
                 throw ConfigError(Where(origin, e) + ": unknown joint '" + a.joint + "'");
               }
               if (a.sign != 1 && a.sign != -1) {
                 throw ConfigError(Where(origin, e) + ": attachment sign must be +1 or -1");
               }
               m.attachments.push_back(a);
             }
           }}};
}

std::vector<Field> EnvFields(EnvConfig& e, const std::string& origin) {
  return {Real("control_hz", e.control_hz, origin),
          Real("physics_hz", e.physics_hz, origin),
          Int("horizon", e.horizon, origin),
          Real("sigma_q", e.sigma_q, origin),
          Real("sigma_e", e.sigma_e, origin),
          Real("sigma_c", e.sigma_c, origin),
          Real("sigma_a", e.sigma_a, origin),
          Real("sigma_tau", e.sigma_tau, origin),
          {"start_phase",
           [&e] { return e.start_phase ? FormatDouble(*e.start_phase) : std::string("random"); },
           [&e, origin](const YAML::Node& n) {
             if (n.IsScalar() && n.Scalar() == "random") {
               e.start_phase.reset();
             } else {
               e.start_phase = As<double>(n, "start_phase", origin);
             }
           }},
          Real("initial_activation", e.initial_activation, origin),
          Real("fall_height", e.fall_height, origin),
          Real("max_limit_force", e.max_limit_force, origin),
          Real("max_acceleration", e.max_acceleration, origin),
          Bool("absolute_work", e.absolute_work, origin)};
}

std::vector<Field> PpoFields(PpoConfig& p, const std::string& origin) {
  return {Real("gamma", p.gamma, origin),
          Real("gae_lambda", p.gae_lambda, origin),
          Real("clip", p.clip, origin),
          Real("lr_policy", p.lr_policy, origin),
          Real("lr_value", p.lr_value, origin),
          Real("value_coef", p.value_coef, origin),
          Real("entropy_coef", p.entropy_coef, origin),
          Int("epochs", p.epochs, origin),
          Int("minibatch", p.minibatch, origin),
          Int("rollout_length", p.rollout_length, origin),
          Int("workers", p.workers, origin),
          Real("log_std_init", p.log_std_init, origin),
          Real("max_grad_norm", p.max_grad_norm, origin),
          Bool("normalize_advantages", p.normalize_advantages, origin),
          Bool("normalize_observations", p.normalize_observations, origin),
          Int("checkpoint_every", p.checkpoint_every, origin)};
}

std::vector<Field> DdpgFields(DdpgConfig& d, const std::string& origin) {
  return {Real("gamma", d.gamma, origin),
          Real("lr_actor", d.lr_actor, origin),
          Real("lr_critic", d.lr_critic, origin),
          Int("batch", d.batch, origin),
          Real("tau", d.tau, origin),
          Int("warmup", d.warmup, origin),
          Int("buffer_capacity", d.buffer_capacity, origin),
          Real("ou_theta", d.ou_theta, origin),
          Real("ou_sigma", d.ou_sigma, origin),
          Bool("normalize_observations", d.normalize_observations, origin),
          Int("log_interval", d.log_interval, origin),
          Int("checkpoint_every", d.checkpoint_every, origin)};
}

void ReadMap(const YAML::Node& node, const std::string& section,
             const std::vector<Field>& fields, const std::string& origin) {
  if (!node.IsMap()) throw ConfigError(Where(origin, node) + ": '" + section + "' must be a map");
  for (const auto& kv : node) {
    const std::string key = kv.first.as<std::string>();
    bool found = false;
    for (const auto& f : fields) {
      if (f.key == key) {
        f.read(kv.second);
        found = true;
        break;
      }
    }
    if (!found) {
      throw ConfigError(Where(origin, kv.first) + ": unknown key '" + section + "." + key + "'");
    }
  }
}

void ReadSection(const YAML::Node& root, const std::string& section,
                 const std::vector<Field>& fields, const std::string& origin) {
  if (const YAML::Node node = root[section]) ReadMap(node, section, fields, origin);
}

// Map of named entries, each a map of fields; names must already exist.
template <typename T, typename FieldsFn>
void ReadNamed(const YAML::Node& node, const std::string& section, std::vector<T>& items,
               FieldsFn fields_fn, const std::string& origin) {
  if (!node.IsMap()) throw ConfigError(Where(origin, node) + ": '" + section + "' must be a map");
  for (const auto& kv : node) {
    const std::string name = kv.first.as<std::string>();
    auto it = std::find_if(items.begin(), items.end(), [&](const T& x) { return x.name == name; });
    if (it == items.end()) {
      throw ConfigError(Where(origin, kv.first) + ": unknown entry '" + section + "." + name + "'");
    }
    ReadMap(kv.second, section + "." + name, fields_fn(*it, origin), origin);
  }
}

void ReadSpheres(const YAML::Node& node, ModelSpec& spec, const std::string& origin) {
  if (!node.IsSequence()) {
    throw ConfigError(Where(origin, node) + ": 'contact_spheres' must be a list");
  }
  spec.contact_spheres.clear();
  for (const auto& e : node) {
    ContactSphere sphere;
    ReadMap(e, "contact_spheres",
            {{"segment", [] { return std::string(); },
              [&](const YAML::Node& n) { sphere.segment = As<std::string>(n, "segment", origin); }},
             Vec2Field("center", sphere.center, origin), Real("radius", sphere.radius, origin)},
            origin);
    if (spec.SegmentIndex(sphere.segment) < 0) {
      throw ConfigError(Where(origin, e) + ": unknown segment '" + sphere.segment + "'");
    }
    spec.contact_spheres.push_back(sphere);
  }
}

void EmitSection(std::ostream& out, const std::string& section,
                 const std::vector<Field>& fields, int indent = 0) {
  const std::string pad(static_cast<size_t>(indent), ' ');
  out << pad << section << ":\n";
  for (const auto& f : fields) out << pad << "  " << f.key << ": " << f.emit() << "\n";
}

std::string FlowMap(const std::vector<Field>& fields) {
  std::string s = "{";
  for (size_t i = 0; i < fields.size(); ++i) {
    s += (i ? ", " : "") + fields[i].key + ": " + fields[i].emit();
  }
  return s + "}";
}

std::vector<Field> ModelScalars(ModelSpec& m, const std::string& origin) {
  return {Real("total_mass", m.total_mass, origin), Real("total_height", m.total_height, origin),
          Real("gravity", m.gravity, origin), Real("limit_stiffness", m.limit_stiffness, origin),
          Real("limit_damping", m.limit_damping, origin)};
}

std::string ModelSection(const RunConfig& cfg_in) {
  RunConfig cfg = cfg_in;
  ModelSpec& m = cfg.model;
  std::ostringstream out;
  out << "model:\n  mode: " << ToString(cfg.mode) << "\n  locked_joints: [";
  bool first = true;
  for (const auto& j : cfg.locked_joints) {
    out << (first ? "" : ", ") << j;
    first = false;
  }
  out << "]\n";
  for (const auto& f : ModelScalars(m, "")) out << "  " << f.key << ": " << f.emit() << "\n";
  EmitSection(out, "contact", ContactFields(m.contact_params, ""), 2);
  EmitSection(out, "metabolic", MetabolicFields(m.metabolic, ""), 2);
  out << "  segments:\n";
  for (auto& seg : m.segments) out << "    " << seg.name << ": " << FlowMap(SegmentFields(seg, "")) << "\n";
  out << "  joints:\n";
  for (auto& j : m.joints) out << "    " << j.name << ": " << FlowMap(JointFields(j, "")) << "\n";
  out << "  contact_spheres:\n";
  for (auto& sp : m.contact_spheres) {
    out << "    - {segment: " << sp.segment << ", center: [" << FormatDouble(sp.center.x()) << ", "
        << FormatDouble(sp.center.y()) << "], radius: " << FormatDouble(sp.radius) << "}\n";
  }
  out << "  muscles:\n";
  for (auto& mu : m.muscles) {
    out << "    " << mu.name << ":\n";
    for (const auto& f : MuscleFields(mu, "")) out << "      " << f.key << ": " << f.emit() << "\n";
  }
  return out.str();
}

}  // namespace

std::string_view ToString(Algorithm algo) {
  return algo == Algorithm::kPpo ? "ppo" : "ddpg";
}

Algorithm ParseAlgorithm(std::string_view text) {
  if (text == "ppo") return Algorithm::kPpo;
  if (text == "ddpg") return Algorithm::kDdpg;
  throw ConfigError("unknown algorithm '" + std::string(text) + "' (expected ppo or ddpg)");
}

void RunConfig::Resolve() {
  env.mode = mode;
  env.locked_joints = locked_joints;
  ppo.hidden = hidden;
  ddpg.hidden = hidden;
  env.substeps();
  if (env.horizon < 1) throw ConfigError("env.horizon must be >= 1");
  if (env.start_phase && !(*env.start_phase >= 0.0 && *env.start_phase < 1.0)) {
    throw ConfigError("env.start_phase must be in [0, 1) or 'random'");
  }
  if (!(env.initial_activation >= 0.0 && env.initial_activation <= 1.0)) {
    throw ConfigError("env.initial_activation must be in [0, 1]");
  }
  for (double s : {env.sigma_q, env.sigma_e, env.sigma_c, env.sigma_a, env.sigma_tau}) {
    if (!(s >= 0.0)) throw ConfigError("env reward weights must be >= 0");
  }
  for (const auto& j : locked_joints) {
    if (JointIndex(j) < 0) throw ConfigError("unknown joint name '" + j + "'");
  }
  if (eval_episodes < 1) throw ConfigError("eval.episodes must be >= 1");
  const auto violations = Validate(BuildModel());
  if (!violations.empty()) throw ConfigError("model: " + violations.front());
  ppo.Validate();
  ddpg.Validate();
}

ModelSpec RunConfig::BuildModel() const {
  ModelSpec spec = model;
  spec.actuation_mode = mode;
  if (mode == ActuationMode::kTorque) spec.muscles.clear();
  for (auto& j : spec.joints) j.locked = false;
  LockJoints(spec, locked_joints);
  return spec;
}

RunConfig DefaultRunConfig(ActuationMode mode) {
  RunConfig cfg;
  cfg.mode = mode;
  cfg.ddpg = DefaultDdpgConfig(mode);
  cfg.Resolve();
  return cfg;
}

RunConfig ParseRunConfig(const std::string& yaml_text, const std::string& origin,
                         const std::optional<ActuationMode>& mode_override) {
  YAML::Node root;
  try {
    root = YAML::Load(yaml_text);
  } catch (const YAML::Exception& e) {
    throw ConfigError(origin + ":" + std::to_string(e.mark.line + 1) + ": " + e.msg);
  }
  if (root.IsNull()) root = YAML::Node(YAML::NodeType::Map);
  if (!root.IsMap()) throw ConfigError(origin + ": top level must be a map");
  static const std::set<std::string> kSections = {"algo", "model", "env", "network",
                                                  "ppo",  "ddpg",  "eval"};
  for (const auto& kv : root) {
    const std::string key = kv.first.as<std::string>();
    if (!kSections.count(key)) {
      throw ConfigError(Where(origin, kv.first) + ": unknown section '" + key + "'");
    }
  }

  static const std::set<std::string> kModelKeys = {
      "total_mass", "total_height", "gravity",  "limit_stiffness", "limit_damping",
      "contact",    "metabolic",    "segments", "joints",          "contact_spheres",
      "muscles"};
  ActuationMode mode = ActuationMode::kTorque;
  std::set<std::string> locked;
  if (const YAML::Node model = root["model"]) {
    if (!model.IsMap()) throw ConfigError(Where(origin, model) + ": 'model' must be a map");
    for (const auto& kv : model) {
      const std::string key = kv.first.as<std::string>();
      if (key == "mode") {
        try {
          mode = ParseActuationMode(As<std::string>(kv.second, key, origin));
        } catch (const ConfigError& e) {
          throw ConfigError(Where(origin, kv.second) + ": " + e.what());
        }
      } else if (key == "locked_joints") {
        if (!kv.second.IsSequence()) {
          throw ConfigError(Where(origin, kv.second) + ": 'locked_joints' must be a list");
        }
        for (const auto& j : kv.second) locked.insert(As<std::string>(j, key, origin));
      } else if (kModelKeys.count(key)) {
        continue;
      } else {
        throw ConfigError(Where(origin, kv.first) + ": unknown key 'model." + key + "'");
      }
    }
  }
  if (mode_override) mode = *mode_override;

  RunConfig cfg = DefaultRunConfig(mode);
  cfg.locked_joints = locked;
  if (const YAML::Node model = root["model"]) {
    ModelSpec& m = cfg.model;
    for (const auto& kv : model) {
      const std::string key = kv.first.as<std::string>();
      const YAML::Node& v = kv.second;
      if (key == "contact") {
        ReadMap(v, "model.contact", ContactFields(m.contact_params, origin), origin);
      } else if (key == "metabolic") {
        ReadMap(v, "model.metabolic", MetabolicFields(m.metabolic, origin), origin);
      } else if (key == "segments") {
        ReadNamed(v, "model.segments", m.segments, SegmentFields, origin);
      } else if (key == "joints") {
        ReadNamed(v, "model.joints", m.joints, JointFields, origin);
      } else if (key == "muscles") {
        ReadNamed(v, "model.muscles", m.muscles, MuscleFields, origin);
      } else if (key == "contact_spheres") {
        ReadSpheres(v, m, origin);
      } else if (key != "mode" && key != "locked_joints") {
        for (const auto& f : ModelScalars(m, origin)) {
          if (f.key == key) f.read(v);
        }
      }
    }
  }
  if (const YAML::Node algo = root["algo"]) {
    try {
      cfg.algo = ParseAlgorithm(As<std::string>(algo, "algo", origin));
    } catch (const ConfigError& e) {
      throw ConfigError(Where(origin, algo) + ": " + e.what());
    }
  }
  ReadSection(root, "env", EnvFields(cfg.env, origin), origin);
  ReadSection(root, "network", {IntList("hidden", cfg.hidden, origin)}, origin);
  ReadSection(root, "ppo", PpoFields(cfg.ppo, origin), origin);
  ReadSection(root, "ddpg", DdpgFields(cfg.ddpg, origin), origin);
  ReadSection(root, "eval", {Int("episodes", cfg.eval_episodes, origin)}, origin);
  try {
    cfg.Resolve();
  } catch (const ConfigError& e) {
    throw ConfigError(origin + ": " + e.what());
  }
  return cfg;
}

RunConfig LoadRunConfig(const std::string& path,
                        const std::optional<ActuationMode>& mode_override) {
  std::string text;
  try {
    text = ReadTextFile(path);
  } catch (const LoadError& e) {
    throw ConfigError(e.what());
  }
  return ParseRunConfig(text, path, mode_override);
}

std::string EmitRunConfig(const RunConfig& cfg_in) {
  RunConfig cfg = cfg_in;
  std::ostringstream out;
  out << "algo: " << ToString(cfg.algo) << "\n";
  out << ModelSection(cfg);
  EmitSection(out, "env", EnvFields(cfg.env, ""));
  EmitSection(out, "network", {IntList("hidden", cfg.hidden, "")});
  EmitSection(out, "ppo", PpoFields(cfg.ppo, ""));
  EmitSection(out, "ddpg", DdpgFields(cfg.ddpg, ""));
  EmitSection(out, "eval", {Int("episodes", cfg.eval_episodes, "")});
  return out.str();
}

Digest ConfigDigest(const RunConfig& cfg_in) {
  RunConfig cfg = cfg_in;
  std::ostringstream out;
  out << ModelSection(cfg);
  EmitSection(out, "env", EnvFields(cfg.env, ""));
  EmitSection(out, "network", {IntList("hidden", cfg.hidden, "")});
  return Sha256(out.str());
}

}  // namespace gaitforge
