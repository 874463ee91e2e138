#ifndef GAITFORGE_ENV_H_
#define GAITFORGE_ENV_H_

#include <memory>
#include <optional>
#include <set>
#include <string>
#include <vector>

#include <Eigen/Core>

#include "gaitforge/dynamics.h"
#include "gaitforge/mtu.h"
#include "gaitforge/refdata.h"

namespace gaitforge {

enum class DoneReason { kNone, kFall, kLimitForce, kAcceleration, kHorizon };

std::string_view ToString(DoneReason reason);

struct RewardBreakdown {
  double r_q = 1.0;
  double r_e = 1.0;
  double r_c = 1.0;
  double r_effort = 1.0;
  double total = 1.0;
  // Squared-deviation sums behind each factor.
  double q_error = 0.0;
  double e_error = 0.0;
  double c_error = 0.0;
  double effort = 0.0;
  EnergyReport energy;
};

struct StepInfo {
  Vec7 joint_torque = Vec7::Zero();  // applied (torque mode) or muscle-made
  Eigen::VectorXd excitation;        // mtu mode
  Eigen::Vector3d grf_right = Eigen::Vector3d::Zero();  // normalized
  Eigen::Vector3d grf_left = Eigen::Vector3d::Zero();
  double phase = 0.0;
  long wraps = 0;
  int step_index = 0;
  std::string fault;  // simulation fault message, if any
};

struct StepResult {
  Eigen::VectorXd observation;
  RewardBreakdown reward;
  bool done = false;
  DoneReason done_reason = DoneReason::kNone;
  StepInfo info;
};

// Common interface for the imitation environment and the toy task.
class Environment {
 public:
  virtual ~Environment() = default;

  virtual int obs_dim() const = 0;
  virtual int act_dim() const = 0;
  virtual const Eigen::VectorXd& action_low() const = 0;
  virtual const Eigen::VectorXd& action_high() const = 0;

  // Starts an episode; `rng` supplies any random start state.
  virtual Eigen::VectorXd Reset(Rng& rng) = 0;
  virtual StepResult Step(const Eigen::VectorXd& action) = 0;
  virtual bool done() const = 0;

  // Complete dynamic state, for bit-exact resume.
  virtual std::vector<double> Snapshot() const = 0;
  virtual void Restore(const std::vector<double>& snapshot) = 0;

  virtual std::unique_ptr<Environment> Clone() const = 0;
};

struct EnvConfig {
  ActuationMode mode = ActuationMode::kTorque;
  double control_hz = 100.0;
  double physics_hz = 500.0;
  int horizon = 300;  // control steps
  double sigma_q = 10.0;
  double sigma_e = 20.0;
  double sigma_c = 15.0;
  double sigma_a = 0.5;
  double sigma_tau = 0.1;
  // Fixed start phase in [0, 1); unset means uniform over clip frames.
  std::optional<double> start_phase;
  std::set<std::string> locked_joints;
  double initial_activation = 0.05;
  double fall_height = 0.75;           // m, pelvis_ty
  double max_limit_force = 1000.0;     // N m
  double max_acceleration = 10000.0;   // |qddot|
  // Torque-mode work counts |tau dtheta| instead of tau dtheta.
  bool absolute_work = false;

  int substeps() const;
  double control_dt() const { return 1.0 / control_hz; }
  double physics_dt() const { return 1.0 / physics_hz; }
};

// Observation layout (torque mode, 88 entries):
//   [0] phase, [1..7] joint angles, [8..14] joint velocities,
//   [15..21] joint accelerations, [22..54] landmark + COM positions relative
//   to the pelvis as (x, y, 0), [55..87] their velocities.
// MTU mode appends activations, l_ce / l_opt and v_ce / (v_max l_opt).
inline constexpr int kNumObsLandmarks = 11;
inline constexpr int kTorqueObsDim = 1 + 3 * kNumJoints + 2 * 3 * kNumObsLandmarks;
inline constexpr int kMtuObsDim = kTorqueObsDim + 3 * kNumMuscles;

// Planar biped imitating a gait clip.
class ImitationEnv : public Environment {
 public:
  // `model` must match config.mode; locks in config are applied on top.
  ImitationEnv(ModelSpec model, GaitClip clip, EnvConfig config);

  int obs_dim() const override;
  int act_dim() const override;
  const Eigen::VectorXd& action_low() const override { return low_; }
  const Eigen::VectorXd& action_high() const override { return high_; }

  Eigen::VectorXd Reset(Rng& rng) override;
  StepResult Step(const Eigen::VectorXd& action) override;
  bool done() const override { return done_; }

  std::vector<double> Snapshot() const override;
  void Restore(const std::vector<double>& snapshot) override;
  std::unique_ptr<Environment> Clone() const override;

  // Starts an episode at a given phase.
  Eigen::VectorXd ResetToPhase(double phase);
  // Starts an episode from an explicit state (tests and mirroring checks).
  Eigen::VectorXd ResetToState(const SimState& state);

  // PD law of the torque mode; clamps targets to the joint ranges and the
  // result to +/- max_torque. Throws ModeError in mtu mode.
  Vec7 ApplyActionTorque(const Eigen::VectorXd& targets) const;
  // Clamps excitations to [0, 1]. Throws ModeError in torque mode.
  Eigen::VectorXd ApplyActionMtu(const Eigen::VectorXd& excitations) const;

  RewardBreakdown ComputeReward(const SimState& state, double phase, long wraps,
                                const Eigen::VectorXd& effort_terms) const;
  DoneReason CheckTermination(const SimState& state, int step_index,
                              double max_abs_qddot) const;

  // Action that replays the clip: the reference joint angles one control
  // period ahead in torque mode; in mtu mode, the minimum-effort activations
  // producing the PD torque toward those angles.
  Eigen::VectorXd ReferenceAction() const;

  Eigen::VectorXd Observation() const;
  double Phase() const;
  long Wraps() const;

  const SimState& state() const { return state_; }
  const Dynamics& dynamics() const { return *dynamics_; }
  const GaitClip& clip() const { return *clip_; }
  const EnvConfig& config() const { return config_; }
  int step_index() const { return step_index_; }

 private:
  std::shared_ptr<const Dynamics> dynamics_;
  std::shared_ptr<const GaitClip> clip_;
  EnvConfig config_;
  Eigen::VectorXd low_;
  Eigen::VectorXd high_;
  std::vector<int> end_effectors_;  // landmark indices used by r_e
  SimState state_;
  int step_index_ = 0;
  bool done_ = true;
};

// One-dimensional PD-driven point tracking a sinusoid. Observation
// [phase, x, xdot]; action is the PD target in [-1, 1]; reward
// exp(-10 e^2); the episode ends when |e| > 0.5 or after 200 steps.
class ToyTrackingEnv : public Environment {
 public:
  struct Params {
    double amplitude = 0.8;
    double period = 1.0;  // s
    double kp = 100.0;
    double kd = 10.0;
    double control_dt = 0.01;
    int substeps = 5;
    int horizon = 200;
    double sigma = 10.0;
    double max_error = 0.5;
  };

  ToyTrackingEnv();
  explicit ToyTrackingEnv(Params params);

  int obs_dim() const override { return 3; }
  int act_dim() const override { return 1; }
  const Eigen::VectorXd& action_low() const override { return low_; }
  const Eigen::VectorXd& action_high() const override { return high_; }

  Eigen::VectorXd Reset(Rng& rng) override;
  StepResult Step(const Eigen::VectorXd& action) override;
  bool done() const override { return done_; }

  std::vector<double> Snapshot() const override;
  void Restore(const std::vector<double>& snapshot) override;
  std::unique_ptr<Environment> Clone() const override;

  double Reference(double t) const;
  double ReferenceVelocity(double t) const;

 private:
  Eigen::VectorXd Observation() const;

  Params params_;
  Eigen::VectorXd low_;
  Eigen::VectorXd high_;
  double x_ = 0.0;
  double xdot_ = 0.0;
  double time_ = 0.0;
  int step_index_ = 0;
  bool done_ = true;
};

}  // namespace gaitforge

#endif  // GAITFORGE_ENV_H_
