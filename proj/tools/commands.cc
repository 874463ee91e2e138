#include <algorithm>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <map>
#include <memory>
#include <set>
#include <sstream>

#include <CLI11.hpp>
#include <yaml-cpp/yaml.h>

#include "cli.h"
#include "gaitforge/csv.h"
#include "gaitforge/ddpg.h"
#include "gaitforge/ppo.h"
#include "gaitforge/training.h"

namespace gaitforge::cli {
namespace {

namespace fs = std::filesystem;

struct TrainArgs {
  std::string algo;
  std::string mode;
  std::string ref;
  std::string config;
  std::string out;
  std::string resume;
  long long steps = 0;
  unsigned long long seed = 0;
  bool quiet = false;
};

struct EvalArgs {
  std::string ckpt;
  std::string ref;
  std::string config;
  std::string mode;
  std::string out;
  std::string action_source = "policy";
  int episodes = 0;
  std::optional<double> start_phase;
};

struct ExportArgs {
  std::vector<std::string> evals;
  std::string config;
  std::string out;
};

struct RefArgs {
  std::string ref;
  std::string config;
  std::string out;
  unsigned long seed = 0;
  int frames = 130;
  double dt = 0.01;
};

std::optional<ActuationMode> ModeFlag(const std::string& text) {
  if (text.empty()) return std::nullopt;
  try {
    return ParseActuationMode(text);
  } catch (const std::exception& e) {
    throw ConfigError(std::string("--mode: ") + e.what());
  }
}

std::string FileDigest(const std::string& path) { return ToHex(Sha256(ReadTextFile(path))); }

EnvFactory MakeFactory(const RunConfig& cfg, const GaitClip& clip) {
  auto model = std::make_shared<const ModelSpec>(cfg.BuildModel());
  auto shared_clip = std::make_shared<const GaitClip>(clip);
  const EnvConfig env = cfg.env;
  return [model, shared_clip, env] {
    return std::unique_ptr<Environment>(new ImitationEnv(*model, *shared_clip, env));
  };
}

void WriteManifest(const TrainArgs& a, const RunConfig& cfg, bool complete) {
  YAML::Node m;
  m["command"] = "train";
  m["algo"] = std::string(ToString(cfg.algo));
  m["mode"] = std::string(ToString(cfg.mode));
  m["seed"] = a.seed;
  m["steps"] = a.steps;
  m["ref"] = a.ref;
  m["ref_sha256"] = FileDigest(a.ref);
  m["config_sha256"] = ToHex(ConfigDigest(cfg));
  m["resume"] = a.resume;
  m["status"] = complete ? "complete" : "running";
  YAML::Node outputs(YAML::NodeType::Map);
  if (complete) {
    std::vector<std::string> names;
    for (const auto& entry : fs::directory_iterator(a.out)) {
      const std::string name = entry.path().filename().string();
      if (name == "log.csv" || (name.rfind("ckpt_", 0) == 0 && entry.path().extension() == ".bin")) {
        names.push_back(name);
      }
    }
    std::sort(names.begin(), names.end());
    for (const auto& n : names) outputs[n] = FileDigest(a.out + "/" + n);
  }
  m["outputs"] = outputs;
  m["config"] = YAML::Load(EmitRunConfig(cfg));
  YAML::Emitter e;
  e << m;
  WriteTextFile(a.out + "/manifest.yaml", std::string(e.c_str()) + "\n");
}

int CmdTrain(TrainArgs a, std::ostream& out) {
  if (a.steps < 0) throw UsageError("--steps must be >= 0");
  RunConfig cfg = LoadConfigOrManifest(a.config, ModeFlag(a.mode));
  if (!a.algo.empty()) cfg.algo = ParseAlgorithm(a.algo);
  cfg.Resolve();
  const ModelSpec model = cfg.BuildModel();
  const GaitClip clip = LoadClip(a.ref, Dynamics(model));
  fs::create_directories(a.out);
  WriteManifest(a, cfg, false);

  TrainOptions o;
  o.total_steps = a.steps;
  o.seed = a.seed;
  o.out_dir = a.out;
  o.resume_path = a.resume;
  o.config_digest = ConfigDigest(cfg);
  o.max_threads = ThreadLimitFromEnv();
  if (!a.quiet) {
    o.on_log = [&out](const IterationLog& row) {
      out << "iteration " << row.iteration << " steps " << row.steps << " mean_reward "
          << FormatDouble(row.mean_episode_reward) << " mean_length "
          << FormatDouble(row.mean_episode_length) << "\n"
          << std::flush;
    };
  }
  const EnvFactory factory = MakeFactory(cfg, clip);
  if (cfg.algo == Algorithm::kPpo) {
    TrainPpo(factory, cfg.ppo, o);
  } else {
    TrainDdpg(factory, cfg.ddpg, o);
  }
  WriteManifest(a, cfg, true);
  out << "wrote " << a.out << "\n";
  return kExitOk;
}

std::vector<std::string> EvalHeader(const ModelSpec& spec) {
  std::vector<std::string> h = {"step", "time", "phase", "wraps"};
  for (auto c : kCoordNames) h.push_back("q_" + std::string(c));
  for (auto c : kCoordNames) h.push_back("qdot_" + std::string(c));
  for (auto j : kJointNames) h.push_back("ref_" + std::string(j));
  for (auto j : kJointNames) h.push_back("tau_" + std::string(j));
  for (const char* kind : {"exc_", "act_", "force_"}) {
    for (const auto& m : spec.muscles) h.push_back(kind + m.name);
  }
  for (const char* side : {"r", "l"}) {
    for (const char* c : {"fx", "fy", "mz"}) h.push_back(std::string("grf_") + side + "_" + c);
  }
  for (const char* r : {"r_q", "r_e", "r_c", "r_effort", "reward", "metabolic_rate", "work",
                        "done_reason"}) {
    h.push_back(r);
  }
  return h;
}

struct EpisodeSummary {
  double start_phase = 0.0;
  int steps = 0;
  double episode_return = 0.0;
  double distance = 0.0;
  double work = 0.0;
  double metabolic = 0.0;
  double tracking_sq = 0.0;
  double tracking_sq_short = 0.0;
  int short_steps = 0;
  std::string done_reason;
};

int CmdEval(const EvalArgs& a, std::ostream& out) {
  RunConfig cfg = LoadConfigOrManifest(a.config, ModeFlag(a.mode));
  const ModelSpec model = cfg.BuildModel();
  const Dynamics dyn(model);
  const GaitClip clip = LoadClip(a.ref, dyn);
  ImitationEnv env(model, clip, cfg.env);
  const int episodes = a.episodes > 0 ? a.episodes : cfg.eval_episodes;

  PolicyFn policy;
  std::unique_ptr<PpoAgent> ppo;
  std::unique_ptr<DdpgAgent> ddpg;
  if (a.action_source == "reference") {
    policy = [&env](const Eigen::VectorXd&) { return env.ReferenceAction(); };
  } else {
    if (a.ckpt.empty()) throw UsageError("--ckpt is required unless --action-source reference");
    const Checkpoint ckpt = Checkpoint::Load(a.ckpt, ConfigDigest(cfg));
    const std::string algo = ckpt.Has("algo") ? ckpt.GetBytes("algo") : "";
    Rng init(0);
    if (algo == "ppo") {
      ppo = std::make_unique<PpoAgent>(env.obs_dim(), env.act_dim(), cfg.ppo, init);
      ppo->Load(ckpt);
      policy = [&ppo](const Eigen::VectorXd& obs) { return ppo->MeanAction(obs); };
    } else if (algo == "ddpg") {
      ddpg = std::make_unique<DdpgAgent>(env.obs_dim(), env.action_low(), env.action_high(),
                                         cfg.ddpg, init);
      ddpg->Load(ckpt);
      policy = [&ddpg](const Eigen::VectorXd& obs) { return ddpg->Act(obs); };
    } else {
      throw LoadError(a.ckpt + ": unknown algorithm '" + algo + "'");
    }
  }

  fs::create_directories(a.out);
  const std::vector<std::string> header = EvalHeader(model);
  const int short_limit = static_cast<int>(std::lround(0.5 / cfg.env.control_dt()));
  const bool mtu = cfg.mode == ActuationMode::kMtu;
  std::vector<EpisodeSummary> summaries;
  for (int k = 0; k < episodes; ++k) {
    EpisodeSummary s;
    s.start_phase = a.start_phase ? *a.start_phase
                    : cfg.env.start_phase ? *cfg.env.start_phase
                                          : static_cast<double>(k) / episodes;
    Eigen::VectorXd obs = env.ResetToPhase(s.start_phase);
    const double x0 = env.state().q[kPelvisTx];
    std::ofstream file(a.out + "/episode_" + std::to_string(k) + ".csv", std::ios::trunc);
    if (!file) throw LoadError("cannot write to " + a.out);
    CsvWriter w(file, header);
    while (!env.done()) {
      const StepResult r = env.Step(policy(obs));
      obs = r.observation;
      const SimState& st = env.state();
      const Vec7 ref = Sample(clip, dyn, r.info.phase, r.info.wraps).q.segment<kNumJoints>(kFirstJointCoord);
      const Vec7 err = st.q.segment<kNumJoints>(kFirstJointCoord) - ref;
      ++s.steps;
      s.episode_return += r.reward.total;
      s.work += r.reward.energy.cost_of_transport_step;
      s.metabolic += r.reward.energy.total;
      s.tracking_sq += err.squaredNorm();
      if (s.steps <= short_limit) {
        s.tracking_sq_short += err.squaredNorm();
        ++s.short_steps;
      }

      w.Add(s.steps).Add(st.time).Add(r.info.phase).Add(static_cast<long long>(r.info.wraps));
      for (int c = 0; c < kNumCoords; ++c) w.Add(st.q[c]);
      for (int c = 0; c < kNumCoords; ++c) w.Add(st.qdot[c]);
      for (int j = 0; j < kNumJoints; ++j) w.Add(ref[j]);
      for (int j = 0; j < kNumJoints; ++j) w.Add(r.info.joint_torque[j]);
      if (mtu) {
        const Vec7 qj = st.q.segment<kNumJoints>(kFirstJointCoord);
        const Vec7 qdj = st.qdot.segment<kNumJoints>(kFirstJointCoord);
        for (size_t m = 0; m < model.muscles.size(); ++m) w.Add(r.info.excitation[static_cast<Eigen::Index>(m)]);
        for (size_t m = 0; m < model.muscles.size(); ++m) w.Add(st.activations[static_cast<Eigen::Index>(m)]);
        for (size_t m = 0; m < model.muscles.size(); ++m) {
          const double act = st.activations[static_cast<Eigen::Index>(m)];
          w.Add(ComputeMuscleForce(model.muscles[m],
                                   ComputeMuscleState(model.muscles[m], qj, qdj, act))
                    .total);
        }
      }
      for (int c = 0; c < 3; ++c) w.Add(r.info.grf_right[c]);
      for (int c = 0; c < 3; ++c) w.Add(r.info.grf_left[c]);
      w.Add(r.reward.r_q).Add(r.reward.r_e).Add(r.reward.r_c).Add(r.reward.r_effort);
      w.Add(r.reward.total).Add(r.reward.energy.total).Add(r.reward.energy.cost_of_transport_step);
      w.Add(ToString(r.done_reason));
      w.EndRow();
      if (r.done) s.done_reason = std::string(ToString(r.done_reason));
    }
    s.distance = env.state().q[kPelvisTx] - x0;
    summaries.push_back(s);
  }

  std::ofstream sum_file(a.out + "/summary.csv", std::ios::trunc);
  CsvWriter sw(sum_file, {"episode", "start_phase", "steps", "return", "done_reason",
                          "distance", "work", "cost_of_transport_per_m", "mean_metabolic_rate",
                          "rms_tracking_error", "rms_tracking_error_0p5s"});
  double mean_return = 0.0, mean_length = 0.0, total_work = 0.0, total_distance = 0.0;
  double metabolic = 0.0;
  long long total_steps = 0;
  for (size_t k = 0; k < summaries.size(); ++k) {
    const EpisodeSummary& s = summaries[k];
    const double n = std::max(s.steps, 1);
    sw.Add(static_cast<long long>(k)).Add(s.start_phase).Add(s.steps).Add(s.episode_return);
    sw.Add(s.done_reason).Add(s.distance).Add(s.work);
    sw.Add(s.distance > 0.0 ? s.work / s.distance : std::nan(""));
    sw.Add(s.metabolic / n);
    sw.Add(std::sqrt(s.tracking_sq / (n * kNumJoints)));
    sw.Add(std::sqrt(s.tracking_sq_short / (std::max(s.short_steps, 1) * kNumJoints)));
    sw.EndRow();
    mean_return += s.episode_return / summaries.size();
    mean_length += static_cast<double>(s.steps) / summaries.size();
    total_work += s.work;
    total_distance += s.distance;
    metabolic += s.metabolic;
    total_steps += s.steps;
  }
  out << "episodes: " << summaries.size() << "\n";
  out << "mean_reward: " << FormatDouble(mean_return) << "\n";
  out << "mean_episode_length: " << FormatDouble(mean_length) << "\n";
  out << "cost_of_transport_per_m: "
      << FormatDouble(total_distance > 0.0 ? total_work / total_distance : std::nan("")) << "\n";
  out << "mean_metabolic_rate: "
      << FormatDouble(metabolic / static_cast<double>(std::max<long long>(total_steps, 1))) << "\n";
  if (!summaries.empty()) {
    const EpisodeSummary& s = summaries.front();
    out << "rms_tracking_error_0p5s: "
        << FormatDouble(std::sqrt(s.tracking_sq_short / (std::max(s.short_steps, 1) * kNumJoints)))
        << "\n";
  }
  return kExitOk;
}

// Names after a column prefix, in header order.
std::vector<std::string> Suffixes(const CsvTable& t, const std::string& prefix) {
  std::vector<std::string> names;
  for (const auto& h : t.header) {
    if (h.rfind(prefix, 0) == 0) names.push_back(h.substr(prefix.size()));
  }
  return names;
}

struct EvalRun {
  std::string label;
  CsvTable table;
  bool mtu = false;
  std::vector<std::string> joints;
};

std::vector<double> Column(const CsvTable& t, const std::string& name) {
  if (t.Column(name) < 0) throw LoadError("eval file lacks column '" + name + "'");
  return t.NumericColumn(name);
}

// Torques per step and joint: recorded ones for torque runs, rebuilt from
// muscle forces for mtu runs.
std::vector<Vec7> RunTorques(const EvalRun& run, const ModelSpec& mtu_model) {
  const CsvTable& t = run.table;
  std::vector<Vec7> out(t.rows.size(), Vec7::Zero());
  if (!run.mtu) {
    for (int j = 0; j < kNumJoints; ++j) {
      const auto col = Column(t, "tau_" + std::string(kJointNames[j]));
      for (size_t i = 0; i < col.size(); ++i) out[i][j] = col[i];
    }
    return out;
  }
  std::vector<std::vector<double>> q, f;
  for (auto c : kCoordNames) q.push_back(Column(t, "q_" + std::string(c)));
  for (const auto& m : mtu_model.muscles) f.push_back(Column(t, "force_" + m.name));
  for (size_t i = 0; i < t.rows.size(); ++i) {
    Vec9 qi;
    for (int c = 0; c < kNumCoords; ++c) qi[c] = q[static_cast<size_t>(c)][i];
    Eigen::VectorXd fi(static_cast<Eigen::Index>(f.size()));
    for (size_t m = 0; m < f.size(); ++m) fi[static_cast<Eigen::Index>(m)] = f[m][i];
    out[i] = ReconstructJointTorques(mtu_model, qi, fi);
  }
  return out;
}

int CmdExportPlots(const ExportArgs& a, std::ostream& out) {
  if (a.evals.empty() || a.evals.size() > 2) throw UsageError("--eval takes one or two files");
  RunConfig cfg = LoadConfigOrManifest(a.config, ActuationMode::kMtu);
  const ModelSpec mtu_model = cfg.BuildModel();

  std::vector<EvalRun> runs;
  for (size_t i = 0; i < a.evals.size(); ++i) {
    EvalRun run;
    run.table = ReadCsv(a.evals[i]);
    run.mtu = !Suffixes(run.table, "exc_").empty();
    run.joints = Suffixes(run.table, "ref_");
    if (run.joints.empty()) throw LoadError(a.evals[i] + ": not an eval file");
    run.label = "run" + std::to_string(i) + (run.mtu ? "_mtu" : "_torque");
    runs.push_back(std::move(run));
  }
  if (runs.size() == 2 && runs[0].joints != runs[1].joints) {
    throw UsageError("eval files cover different joint sets");
  }

  for (const EvalRun& run : runs) {
    const std::string dir = a.out + "/" + run.label;
    fs::create_directories(dir);
    const CsvTable& t = run.table;
    const auto time = Column(t, "time");
    const auto phase = Column(t, "phase");

    std::ofstream track(dir + "/tracking.csv", std::ios::trunc);
    CsvWriter tw(track, {"time", "phase", "joint", "q", "q_ref", "error"});
    for (const auto& j : run.joints) {
      const auto q = Column(t, "q_" + j);
      const auto ref = Column(t, "ref_" + j);
      for (size_t i = 0; i < q.size(); ++i) {
        tw.Add(time[i]).Add(phase[i]).Add(j).Add(q[i]).Add(ref[i]).Add(q[i] - ref[i]);
        tw.EndRow();
      }
    }

    for (const auto& j : run.joints) {
      const auto q = Column(t, "q_" + j);
      const auto qd = Column(t, "qdot_" + j);
      std::ofstream lc(dir + "/limit_cycle_" + j + ".csv", std::ios::trunc);
      CsvWriter lw(lc, {"phase", "q", "qdot"});
      for (size_t i = 0; i < q.size(); ++i) {
        lw.Add(phase[i]).Add(q[i]).Add(qd[i]);
        lw.EndRow();
      }
    }

    if (run.mtu) {
      std::ofstream act(dir + "/activations.csv", std::ios::trunc);
      CsvWriter aw(act, {"phase", "muscle", "excitation", "activation"});
      for (const auto& m : Suffixes(t, "exc_")) {
        const auto u = Column(t, "exc_" + m);
        const auto act_col = Column(t, "act_" + m);
        for (size_t i = 0; i < u.size(); ++i) {
          aw.Add(phase[i]).Add(m).Add(u[i]).Add(act_col[i]);
          aw.EndRow();
        }
      }
    }
  }

  std::ofstream cmp(a.out + "/torque_comparison.csv", std::ios::trunc);
  CsvWriter cw(cmp, {"run", "phase", "joint", "tau"});
  for (const EvalRun& run : runs) {
    const auto phase = Column(run.table, "phase");
    const std::vector<Vec7> tau = RunTorques(run, mtu_model);
    for (int j = 0; j < kNumJoints; ++j) {
      for (size_t i = 0; i < tau.size(); ++i) {
        cw.Add(run.label).Add(phase[i]).Add(kJointNames[j]).Add(tau[i][j]);
        cw.EndRow();
      }
    }
  }
  out << "wrote " << a.out << "\n";
  return kExitOk;
}

int CmdInspectRef(const RefArgs& a, std::ostream& out) {
  const RunConfig cfg = LoadConfigOrManifest(a.config, std::nullopt);
  const GaitClip clip = LoadClip(a.ref, Dynamics(cfg.BuildModel()));
  const ClipSummary s = Summarize(clip);
  out << "frames: " << s.frames << "\n";
  out << "dt: " << FormatDouble(s.dt) << "\n";
  out << "duration: " << FormatDouble(s.duration) << "\n";
  out << "stride_displacement: " << FormatDouble(s.stride_displacement) << "\n";
  out << "periodicity_residual: " << FormatDouble(s.periodicity_residual) << "\n";
  out << "ranges:\n";
  for (int c = 0; c < kNumCoords; ++c) {
    out << "  " << kCoordNames[c] << ": [" << FormatDouble(s.min[c]) << ", "
        << FormatDouble(s.max[c]) << "]\n";
  }
  return kExitOk;
}

int CmdMakeSyntheticRef(const RefArgs& a, std::ostream& out) {
  if (a.frames < 2) throw UsageError("--frames must be >= 2");
  if (!(a.dt > 0.0)) throw UsageError("--dt must be > 0");
  const RunConfig cfg = LoadConfigOrManifest(a.config, std::nullopt);
  const GaitClip clip = MakeSyntheticClip(Dynamics(cfg.BuildModel()), a.frames, a.dt, a.seed);
  std::ostringstream text;
  WriteClipCsv(text, clip);
  const fs::path parent = fs::path(a.out).parent_path();
  if (!parent.empty()) fs::create_directories(parent);
  WriteTextFile(a.out, text.str());
  out << "wrote " << a.out << " (" << clip.size() << " frames)\n";
  return kExitOk;
}

}  // namespace

RunConfig LoadConfigOrManifest(const std::string& path, const std::optional<ActuationMode>& mode) {
  if (path.empty()) return ParseRunConfig("", "<defaults>", mode);
  std::string text;
  try {
    text = ReadTextFile(path);
  } catch (const LoadError& e) {
    throw ConfigError(e.what());
  }
  YAML::Node root;
  try {
    root = YAML::Load(text);
  } catch (const YAML::Exception&) {
    return ParseRunConfig(text, path, mode);  // reports the location
  }
  if (root.IsMap() && root["command"] && root["config"]) {
    return ParseRunConfig(YAML::Dump(root["config"]), path + "#config", mode);
  }
  return ParseRunConfig(text, path, mode);
}

Vec7 ReconstructJointTorques(const ModelSpec& spec, const Vec9& q, const Eigen::VectorXd& forces) {
  return MusclesToGeneralizedTorques(spec, q, forces).segment<kNumJoints>(kFirstJointCoord);
}

int Run(int argc, const char* const* argv, std::ostream& out, std::ostream& err) {
  CLI::App app{"Planar biped gait imitation with PPO and DDPG", "gaitforge"};
  app.require_subcommand(1);

  TrainArgs train;
  auto* t = app.add_subcommand("train", "Train a policy and write checkpoints");
  t->add_option("--algo", train.algo, "ppo or ddpg (default: config)")
      ->check(CLI::IsMember({"ppo", "ddpg"}));
  t->add_option("--mode", train.mode, "torque or mtu (default: config)")
      ->check(CLI::IsMember({"torque", "mtu"}));
  t->add_option("--ref", train.ref, "Reference clip CSV")->required();
  t->add_option("--config", train.config, "Config YAML or run manifest");
  t->add_option("--steps", train.steps, "Environment steps")->required();
  t->add_option("--seed", train.seed, "Master seed");
  t->add_option("--out", train.out, "Run directory")->required();
  t->add_option("--resume", train.resume, "Checkpoint to continue from");
  t->add_flag("--quiet", train.quiet, "No per-iteration progress");

  EvalArgs eval;
  auto* e = app.add_subcommand("eval", "Roll out deterministic episodes");
  e->add_option("--ckpt", eval.ckpt, "Checkpoint");
  e->add_option("--ref", eval.ref, "Reference clip CSV")->required();
  e->add_option("--config", eval.config, "Config YAML or run manifest");
  e->add_option("--mode", eval.mode, "torque or mtu (default: config)")
      ->check(CLI::IsMember({"torque", "mtu"}));
  e->add_option("--out", eval.out, "Output directory")->required();
  e->add_option("--episodes", eval.episodes, "Episodes (default: config)")
      ->check(CLI::PositiveNumber);
  e->add_option("--action-source", eval.action_source, "policy or reference")
      ->check(CLI::IsMember({"policy", "reference"}));
  e->add_option("--start-phase", eval.start_phase, "Start phase for every episode")
      ->check(CLI::Range(0.0, 1.0));

  ExportArgs exp;
  auto* x = app.add_subcommand("export-plots", "Write plot-ready CSVs from eval episodes");
  x->add_option("--eval", exp.evals, "Eval episode CSV (one or two)")->required();
  x->add_option("--config", exp.config, "Config for the muscle table");
  x->add_option("--out", exp.out, "Output directory")->required();

  RefArgs inspect;
  auto* i = app.add_subcommand("inspect-ref", "Print reference clip statistics");
  i->add_option("--ref", inspect.ref, "Reference clip CSV")->required();
  i->add_option("--config", inspect.config, "Config YAML");

  RefArgs synth;
  auto* s = app.add_subcommand("make-synthetic-ref", "Write the synthetic gait clip");
  s->add_option("--out", synth.out, "Output CSV")->required();
  s->add_option("--seed", synth.seed, "Amplitude perturbation seed (0 = nominal)");
  s->add_option("--frames", synth.frames, "Frame count");
  s->add_option("--dt", synth.dt, "Frame spacing (s)");
  s->add_option("--config", synth.config, "Config YAML");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& ex) {
    const int code = app.exit(ex, out, err);
    return code == 0 ? kExitOk : kExitUsage;
  }

  try {
    if (t->parsed()) return CmdTrain(train, out);
    if (e->parsed()) return CmdEval(eval, out);
    if (x->parsed()) return CmdExportPlots(exp, out);
    if (i->parsed()) return CmdInspectRef(inspect, out);
    if (s->parsed()) return CmdMakeSyntheticRef(synth, out);
  } catch (const ConfigError& ex) {
    err << "error: " << ex.what() << "\n";
    return kExitUsage;
  } catch (const UsageError& ex) {
    err << "error: " << ex.what() << "\n";
    return kExitUsage;
  } catch (const ModeError& ex) {
    err << "error: " << ex.what() << "\n";
    return kExitUsage;
  } catch (const std::exception& ex) {
    err << "error: " << ex.what() << "\n";
    return kExitRuntime;
  }
  return kExitUsage;
}

}  // namespace gaitforge::cli
