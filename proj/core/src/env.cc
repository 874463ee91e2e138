#include "gaitforge/env.h"

#include <algorithm>
#include <cmath>
#include <numbers>

#include "gaitforge/contact.h"

namespace gaitforge {
namespace {

constexpr std::array<std::string_view, 4> kEndEffectors = {"toes_r", "toes_l",
                                                           "calcn_r", "calcn_l"};

Vec7 Joints(const Vec9& v) { return v.segment<kNumJoints>(kFirstJointCoord); }

double MeanSquare(const Eigen::VectorXd& v) {
  return v.size() == 0 ? 0.0 : v.squaredNorm() / static_cast<double>(v.size());
}

}  // namespace

std::string_view ToString(DoneReason reason) {
  switch (reason) {
    case DoneReason::kNone: return "none";
    case DoneReason::kFall: return "fall";
    case DoneReason::kLimitForce: return "limit_force";
    case DoneReason::kAcceleration: return "acceleration";
    case DoneReason::kHorizon: return "horizon";
  }
  return "unknown";
}

int EnvConfig::substeps() const {
  if (!(control_hz > 0.0) || !(physics_hz > 0.0)) {
    throw ConfigError("control_hz and physics_hz must be > 0");
  }
  const double ratio = physics_hz / control_hz;
  const long n = std::lround(ratio);
  if (n < 1 || std::abs(ratio - static_cast<double>(n)) > 1e-9) {
    throw ConfigError("physics_hz must be an integer multiple of control_hz");
  }
  return static_cast<int>(n);
}

ImitationEnv::ImitationEnv(ModelSpec model, GaitClip clip, EnvConfig config)
    : config_(std::move(config)) {
  if (model.actuation_mode != config_.mode) {
    throw ConfigError("model actuation mode '" +
                      std::string(ToString(model.actuation_mode)) +
                      "' does not match environment mode '" +
                      std::string(ToString(config_.mode)) + "'");
  }
  config_.substeps();
  if (config_.physics_dt() > 0.01) throw ConfigError("physics_hz must be >= 100");
  if (config_.horizon < 1) throw ConfigError("horizon must be >= 1");
  if (clip.size() < 2 || !(clip.duration > 0.0)) {
    throw ConfigError("reference clip needs >= 2 frames");
  }
  LockJoints(model, config_.locked_joints);
  if (const auto problems = Validate(model); !problems.empty()) {
    throw ConfigError(problems.front());
  }
  dynamics_ = std::make_shared<const Dynamics>(std::move(model));
  clip_ = std::make_shared<const GaitClip>(std::move(clip));

  const ModelSpec& spec = dynamics_->spec();
  if (config_.mode == ActuationMode::kTorque) {
    low_.resize(kNumJoints);
    high_.resize(kNumJoints);
    for (int j = 0; j < kNumJoints; ++j) {
      low_[j] = spec.joints[j].range_min;
      high_[j] = spec.joints[j].range_max;
    }
  } else {
    low_ = Eigen::VectorXd::Zero(static_cast<Eigen::Index>(spec.muscles.size()));
    high_ = Eigen::VectorXd::Ones(static_cast<Eigen::Index>(spec.muscles.size()));
  }
  const auto landmarks = CollectLandmarks(spec);
  if (landmarks.size() + 1 != kNumObsLandmarks) {
    throw ConfigError("model must define " + std::to_string(kNumObsLandmarks - 1) +
                      " landmarks");
  }
  for (auto name : kEndEffectors) {
    const auto it = std::find_if(landmarks.begin(), landmarks.end(),
                                 [&](const LandmarkRef& l) { return l.name == name; });
    if (it == landmarks.end()) {
      throw ConfigError("model lacks landmark " + std::string(name));
    }
    end_effectors_.push_back(static_cast<int>(it - landmarks.begin()));
  }
}

int ImitationEnv::obs_dim() const {
  return config_.mode == ActuationMode::kTorque ? kTorqueObsDim : kMtuObsDim;
}

int ImitationEnv::act_dim() const { return static_cast<int>(low_.size()); }

Eigen::VectorXd ImitationEnv::Reset(Rng& rng) {
  if (config_.start_phase) return ResetToPhase(*config_.start_phase);
  const size_t n = clip_->size();
  std::uniform_int_distribution<size_t> pick(0, n - 2);
  const size_t i = pick(rng);
  return ResetToPhase(static_cast<double>(i) / static_cast<double>(n - 1));
}

Eigen::VectorXd ImitationEnv::ResetToPhase(double phase) {
  if (!(phase >= 0.0 && phase < 1.0)) {
    throw UsageError("start phase must lie in [0, 1)");
  }
  const ReferenceTargets ref = Sample(*clip_, *dynamics_, phase, 0);
  SimState s;
  s.q = ref.q;
  s.qdot = ref.qdot;
  s.time = phase * clip_->duration;
  return ResetToState(s);
}

Eigen::VectorXd ImitationEnv::ResetToState(const SimState& state) {
  state_ = state;
  state_.activations = Eigen::VectorXd::Constant(
      static_cast<Eigen::Index>(dynamics_->spec().muscles.size()),
      config_.initial_activation);
  if (state.activations.size() == state_.activations.size()) {
    state_.activations = state.activations;
  }
  dynamics_->EnforceLocks(state_);
  // Populate the acceleration and contact caches the observation reads.
  SimState probe = state_;
  GeneralizedForces forces;
  forces.external = dynamics_->ExternalForces(probe);
  dynamics_->ForwardDynamics(probe, forces);
  state_.qddot = probe.qddot;
  state_.grf = probe.grf;
  state_.limit_force_max_abs = 0.0;
  step_index_ = 0;
  done_ = false;
  return Observation();
}

Vec7 ImitationEnv::ApplyActionTorque(const Eigen::VectorXd& targets) const {
  if (config_.mode != ActuationMode::kTorque) {
    throw ModeError("torque action applied in mtu mode");
  }
  if (targets.size() != kNumJoints) {
    throw UsageError("torque action needs 7 entries");
  }
  Vec7 tau;
  for (int j = 0; j < kNumJoints; ++j) {
    const auto& joint = dynamics_->spec().joints[j];
    if (joint.locked) {
      tau[j] = 0.0;
      continue;
    }
    const int c = JointCoord(j);
    const double target = std::clamp(targets[j], joint.range_min, joint.range_max);
    const double t = joint.kp * (target - state_.q[c]) - joint.kd * state_.qdot[c];
    tau[j] = std::clamp(t, -joint.max_torque, joint.max_torque);
  }
  return tau;
}

Eigen::VectorXd ImitationEnv::ReferenceAction() const {
  const double t = state_.time + config_.control_dt();
  const double T = clip_->duration;
  const double phase = std::min(std::fmod(t, T) / T, std::nextafter(1.0, 0.0));
  const ReferenceTargets ref =
      Sample(*clip_, *dynamics_, phase, static_cast<long>(std::floor(t / T)));
  const Eigen::VectorXd targets = ref.q.segment<kNumJoints>(kFirstJointCoord);
  if (config_.mode == ActuationMode::kTorque) return targets;

  Vec7 tau;
  for (int j = 0; j < kNumJoints; ++j) {
    const auto& joint = dynamics_->spec().joints[j];
    const int c = JointCoord(j);
    tau[j] = joint.locked ? 0.0
                          : joint.kp * (targets[j] - state_.q[c]) - joint.kd * state_.qdot[c];
  }
  return StaticOptimization(dynamics_->spec(), state_.q, tau).activations;
}

Eigen::VectorXd ImitationEnv::ApplyActionMtu(const Eigen::VectorXd& excitations) const {
  if (config_.mode != ActuationMode::kMtu) {
    throw ModeError("muscle excitations applied in torque mode");
  }
  if (excitations.size() != act_dim()) {
    throw UsageError("mtu action needs " + std::to_string(act_dim()) + " entries");
  }
  return excitations.cwiseMax(0.0).cwiseMin(1.0);
}

RewardBreakdown ImitationEnv::ComputeReward(const SimState& state, double phase,
                                            long wraps,
                                            const Eigen::VectorXd& effort_terms) const {
  const ReferenceTargets ref = Sample(*clip_, *dynamics_, phase, wraps);
  const TaskSpace task = ComputeTaskSpace(*dynamics_, state.q, state.qdot);
  RewardBreakdown r;
  r.q_error = (Joints(state.q) - Joints(ref.q)).squaredNorm();
  for (int i : end_effectors_) {
    r.e_error += (task.landmark_pos[i] - ref.task.landmark_pos[i]).squaredNorm();
  }
  r.c_error = (task.com - ref.task.com).squaredNorm();
  r.effort = MeanSquare(effort_terms);
  const double sigma_effort =
      config_.mode == ActuationMode::kMtu ? config_.sigma_a : config_.sigma_tau;
  r.r_q = std::exp(-config_.sigma_q * r.q_error);
  r.r_e = std::exp(-config_.sigma_e * r.e_error);
  r.r_c = std::exp(-config_.sigma_c * r.c_error);
  r.r_effort = std::exp(-sigma_effort * r.effort);
  r.total = r.r_q * r.r_e * r.r_c * r.r_effort;
  return r;
}

DoneReason ImitationEnv::CheckTermination(const SimState& state, int step_index,
                                          double max_abs_qddot) const {
  if (state.q[kPelvisTy] < config_.fall_height) return DoneReason::kFall;
  if (state.limit_force_max_abs > config_.max_limit_force) {
    return DoneReason::kLimitForce;
  }
  if (max_abs_qddot > config_.max_acceleration) return DoneReason::kAcceleration;
  if (step_index >= config_.horizon) return DoneReason::kHorizon;
  return DoneReason::kNone;
}

double ImitationEnv::Phase() const {
  const double period = clip_->duration;
  double t = std::fmod(state_.time, period);
  if (t < 0.0) t += period;
  return std::min(t / period, std::nextafter(1.0, 0.0));
}

long ImitationEnv::Wraps() const {
  return static_cast<long>(std::floor(state_.time / clip_->duration));
}

Eigen::VectorXd ImitationEnv::Observation() const {
  Eigen::VectorXd obs = Eigen::VectorXd::Zero(obs_dim());
  obs[0] = Phase();
  obs.segment<kNumJoints>(1) = Joints(state_.q);
  obs.segment<kNumJoints>(1 + kNumJoints) = Joints(state_.qdot);
  obs.segment<kNumJoints>(1 + 2 * kNumJoints) = Joints(state_.qddot);

  const TaskSpace task = ComputeTaskSpace(*dynamics_, state_.q, state_.qdot);
  const KinematicState kin = dynamics_->Kinematics(state_.q, state_.qdot);
  const int pos0 = 1 + 3 * kNumJoints;
  const int vel0 = pos0 + 3 * kNumObsLandmarks;
  for (int i = 0; i + 1 < kNumObsLandmarks; ++i) {
    obs.segment<2>(pos0 + 3 * i) = task.landmark_pos[i];
    obs.segment<2>(vel0 + 3 * i) = task.landmark_vel[i];
  }
  const int com = kNumObsLandmarks - 1;
  obs.segment<2>(pos0 + 3 * com) = task.com - kin.origin(0);
  obs.segment<2>(vel0 + 3 * com) = task.com_vel - kin.origin_velocity(0);

  if (config_.mode == ActuationMode::kMtu) {
    const auto& muscles = dynamics_->spec().muscles;
    const int m = static_cast<int>(muscles.size());
    const int a0 = kTorqueObsDim;
    for (int i = 0; i < m; ++i) {
      const MuscleState st = ComputeMuscleState(
          muscles[i], Joints(state_.q), Joints(state_.qdot), state_.activations[i]);
      obs[a0 + i] = state_.activations[i];
      obs[a0 + m + i] = st.fiber_length / muscles[i].l_opt;
      obs[a0 + 2 * m + i] = st.fiber_velocity / (muscles[i].v_max * muscles[i].l_opt);
    }
  }
  return obs;
}

StepResult ImitationEnv::Step(const Eigen::VectorXd& action) {
  if (done_) throw UsageError("step called on a finished episode");
  const ModelSpec& spec = dynamics_->spec();
  const bool mtu = config_.mode == ActuationMode::kMtu;
  const int substeps = config_.substeps();
  const double dt = config_.physics_dt();

  StepResult out;
  Vec7 torque = Vec7::Zero();
  Eigen::VectorXd excitation;
  if (mtu) {
    excitation = ApplyActionMtu(action);
  } else {
    torque = ApplyActionTorque(action);
  }

  const Vec9 q_start = state_.q;
  EnergyReport energy;
  Vec7 muscle_torque_sum = Vec7::Zero();
  double max_abs_qddot = 0.0;
  double max_limit = 0.0;
  bool fault = false;
  int completed = 0;
  for (int k = 0; k < substeps; ++k) {
    const SimState before = state_;
    Vec9 tau = Vec9::Zero();
    if (mtu) {
      const Vec7 angles = Joints(state_.q);
      const Vec7 rates = Joints(state_.qdot);
      Eigen::VectorXd forces(static_cast<Eigen::Index>(spec.muscles.size()));
      for (size_t i = 0; i < spec.muscles.size(); ++i) {
        const auto& muscle = spec.muscles[i];
        const auto idx = static_cast<Eigen::Index>(i);
        state_.activations[idx] = ActivationStep(
            state_.activations[idx], excitation[idx], dt, muscle.t_act, muscle.t_deact);
        const MuscleState st =
            ComputeMuscleState(muscle, angles, rates, state_.activations[idx]);
        const MuscleForce f = ComputeMuscleForce(muscle, st);
        forces[idx] = f.total;
        energy += MetabolicRate(muscle, st, excitation[idx], f, spec.metabolic);
      }
      tau = MusclesToGeneralizedTorques(spec, state_.q, forces);
      for (int j = 0; j < kNumJoints; ++j) {
        if (spec.joints[j].locked) tau[JointCoord(j)] = 0.0;
      }
    } else {
      tau.segment<kNumJoints>(kFirstJointCoord) = torque;
    }
    try {
      dynamics_->Step(state_, tau, dt);
      dynamics_->EnforceLocks(state_);
    } catch (const SimulationFault& e) {
      state_ = before;
      out.info.fault = e.what();
      fault = true;
      break;
    }
    const Vec7 joint_tau = Joints(tau);
    if (mtu) {
      muscle_torque_sum += joint_tau;
      energy.cost_of_transport_step += CostOfTransportStep(
          joint_tau, Joints(state_.q) - Joints(before.q), config_.absolute_work);
    }
    max_abs_qddot = std::max(max_abs_qddot, state_.qddot.cwiseAbs().maxCoeff());
    max_limit = std::max(max_limit, state_.limit_force_max_abs);
    ++completed;
  }
  if (mtu) {
    // Rates become means over the control period.
    const double scale = completed > 0 ? 1.0 / completed : 0.0;
    energy.a_dot *= scale;
    energy.m_dot *= scale;
    energy.s_dot *= scale;
    energy.w_dot *= scale;
    energy.total *= scale;
    out.info.joint_torque = muscle_torque_sum * scale;
  } else {
    out.info.joint_torque = torque;
  }
  state_.limit_force_max_abs = max_limit;
  ++step_index_;

  const double phase = Phase();
  const long wraps = Wraps();
  Eigen::VectorXd effort;
  if (mtu) {
    effort = excitation;
  } else {
    effort.resize(kNumJoints);
    for (int j = 0; j < kNumJoints; ++j) {
      effort[j] = torque[j] / spec.joints[j].max_torque;
    }
  }
  out.reward = ComputeReward(state_, phase, wraps, effort);
  if (!mtu) {
    energy.cost_of_transport_step = CostOfTransportStep(
        torque, Joints(state_.q) - Joints(q_start), config_.absolute_work);
  }
  out.reward.energy = energy;

  out.done_reason = fault ? DoneReason::kAcceleration
                          : CheckTermination(state_, step_index_, max_abs_qddot);
  out.done = out.done_reason != DoneReason::kNone;
  done_ = out.done;

  out.observation = Observation();
  out.info.excitation = excitation;
  out.info.phase = phase;
  out.info.wraps = wraps;
  out.info.step_index = step_index_;
  const KinematicState kin = dynamics_->Kinematics(state_.q, state_.qdot);
  out.info.grf_right = NormalizedFootWrench(spec, kin, state_.grf, "foot_r");
  out.info.grf_left = NormalizedFootWrench(spec, kin, state_.grf, "foot_l");
  return out;
}

std::vector<double> ImitationEnv::Snapshot() const {
  std::vector<double> s;
  auto append = [&](const auto& v) {
    for (Eigen::Index i = 0; i < v.size(); ++i) s.push_back(v[i]);
  };
  append(state_.q);
  append(state_.qdot);
  append(state_.qddot);
  s.push_back(state_.time);
  s.push_back(state_.limit_force_max_abs);
  s.push_back(static_cast<double>(step_index_));
  s.push_back(done_ ? 1.0 : 0.0);
  append(state_.activations);
  return s;
}

void ImitationEnv::Restore(const std::vector<double>& snapshot) {
  const size_t m = dynamics_->spec().muscles.size();
  if (snapshot.size() != 3 * kNumCoords + 4 + m) {
    throw UsageError("environment snapshot has the wrong length");
  }
  size_t k = 0;
  SimState s;
  for (int i = 0; i < kNumCoords; ++i) s.q[i] = snapshot[k++];
  for (int i = 0; i < kNumCoords; ++i) s.qdot[i] = snapshot[k++];
  for (int i = 0; i < kNumCoords; ++i) s.qddot[i] = snapshot[k++];
  s.time = snapshot[k++];
  s.limit_force_max_abs = snapshot[k++];
  const int step_index = static_cast<int>(snapshot[k++]);
  const bool done = snapshot[k++] != 0.0;
  s.activations.resize(static_cast<Eigen::Index>(m));
  for (size_t i = 0; i < m; ++i) s.activations[static_cast<Eigen::Index>(i)] = snapshot[k++];
  // Contact caches are rebuilt from the restored state.
  SimState probe = s;
  dynamics_->ExternalForces(probe);
  s.grf = probe.grf;
  state_ = s;
  step_index_ = step_index;
  done_ = done;
}

std::unique_ptr<Environment> ImitationEnv::Clone() const {
  return std::make_unique<ImitationEnv>(*this);
}

ToyTrackingEnv::ToyTrackingEnv() : ToyTrackingEnv(Params{}) {}

ToyTrackingEnv::ToyTrackingEnv(Params params)
    : params_(params),
      low_(Eigen::VectorXd::Constant(1, -1.0)),
      high_(Eigen::VectorXd::Constant(1, 1.0)) {
  if (!(params_.period > 0.0) || !(params_.control_dt > 0.0) ||
      params_.substeps < 1 || params_.horizon < 1) {
    throw ConfigError("invalid toy environment parameters");
  }
}

double ToyTrackingEnv::Reference(double t) const {
  return params_.amplitude * std::sin(2.0 * std::numbers::pi * t / params_.period);
}

double ToyTrackingEnv::ReferenceVelocity(double t) const {
  const double w = 2.0 * std::numbers::pi / params_.period;
  return params_.amplitude * w * std::cos(w * t);
}

Eigen::VectorXd ToyTrackingEnv::Observation() const {
  Eigen::VectorXd obs(3);
  double phase = std::fmod(time_, params_.period) / params_.period;
  obs << std::min(phase, std::nextafter(1.0, 0.0)), x_, xdot_;
  return obs;
}

Eigen::VectorXd ToyTrackingEnv::Reset(Rng& rng) {
  time_ = Uniform(rng, 0.0, 1.0) * params_.period;
  x_ = Reference(time_);
  xdot_ = ReferenceVelocity(time_);
  step_index_ = 0;
  done_ = false;
  return Observation();
}

StepResult ToyTrackingEnv::Step(const Eigen::VectorXd& action) {
  if (done_) throw UsageError("step called on a finished episode");
  if (action.size() != 1) throw UsageError("toy action needs 1 entry");
  const double target = std::clamp(action[0], -1.0, 1.0);
  const double h = params_.control_dt / params_.substeps;
  for (int k = 0; k < params_.substeps; ++k) {
    const double acc = params_.kp * (target - x_) - params_.kd * xdot_;
    xdot_ += acc * h;
    x_ += xdot_ * h;
  }
  ++step_index_;
  time_ += params_.control_dt;
  const double e = x_ - Reference(time_);
  StepResult out;
  out.reward.q_error = e * e;
  out.reward.r_q = std::exp(-params_.sigma * e * e);
  out.reward.total = out.reward.r_q;
  if (std::abs(e) > params_.max_error) {
    out.done_reason = DoneReason::kFall;
  } else if (step_index_ >= params_.horizon) {
    out.done_reason = DoneReason::kHorizon;
  }
  out.done = out.done_reason != DoneReason::kNone;
  done_ = out.done;
  out.observation = Observation();
  out.info.phase = out.observation[0];
  out.info.step_index = step_index_;
  return out;
}

std::vector<double> ToyTrackingEnv::Snapshot() const {
  return {x_, xdot_, time_, static_cast<double>(step_index_), done_ ? 1.0 : 0.0};
}

void ToyTrackingEnv::Restore(const std::vector<double>& snapshot) {
  if (snapshot.size() != 5) throw UsageError("toy snapshot has the wrong length");
  x_ = snapshot[0];
  xdot_ = snapshot[1];
  time_ = snapshot[2];
  step_index_ = static_cast<int>(snapshot[3]);
  done_ = snapshot[4] != 0.0;
}

std::unique_ptr<Environment> ToyTrackingEnv::Clone() const {
  return std::make_unique<ToyTrackingEnv>(*this);
}

}  // namespace gaitforge
