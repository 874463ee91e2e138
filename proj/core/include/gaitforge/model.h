#ifndef GAITFORGE_MODEL_H_
#define GAITFORGE_MODEL_H_

#include <set>
#include <string>
#include <vector>

#include "gaitforge/types.h"

namespace gaitforge {

enum class ActuationMode { kTorque, kMtu };

std::string_view ToString(ActuationMode mode);
ActuationMode ParseActuationMode(std::string_view text);

struct Landmark {
  std::string name;
  Vec2 position = Vec2::Zero();  // segment frame
};

// Rigid planar segment. The segment frame origin is its proximal joint; with
// zero joint angles the segment hangs along -y.
struct SegmentSpec {
  std::string name;
  double mass = 0.0;                // kg
  Vec2 com_offset = Vec2::Zero();   // m, segment frame
  double inertia_zz = 0.0;          // kg m^2 about the COM
  double length = 0.0;              // m
  std::vector<Landmark> landmarks;
};

// Revolute joint. `axis` is the rotation direction about +z: +1 means a
// positive coordinate rotates the child counter-clockwise (x forward, y up).
struct JointSpec {
  std::string name;
  std::string parent;  // "ground" for the base tilt joint
  std::string child;
  Vec2 location = Vec2::Zero();  // joint position in the parent frame
  int axis = 1;
  double range_min = 0.0;  // rad
  double range_max = 0.0;
  double kp = 0.0;           // N m / rad
  double kd = 0.0;           // N m s / rad
  double max_torque = 0.0;   // N m
  bool locked = false;
  double lock_angle = 0.0;
};

struct MuscleAttachment {
  std::string joint;
  double r = 0.0;    // peak moment arm, m
  double phi = 0.0;  // joint angle of the peak moment arm, rad
  int sign = 1;
  bool constant_arm = false;
};

struct MuscleSpec {
  std::string name;  // e.g. "HAM_r"
  double f_max = 0.0;           // N
  double l_opt = 0.0;           // m
  double v_max = 10.0;          // l_opt / s
  double t_act = 0.01;          // s
  double t_deact = 0.04;        // s
  double type1_fraction = 0.5;  // lambda in the heat-rate model
  double muscle_mass = 0.0;     // kg
  double tendon_slack = 0.0;    // m, rigid tendon
  double reference_length = 0.0;  // MTU length with all joint angles at 0
  std::vector<MuscleAttachment> attachments;
};

struct ContactSphere {
  std::string segment;
  Vec2 center = Vec2::Zero();  // segment frame
  double radius = 0.0;
};

struct ContactParams {
  double stiffness = 2.5e6;   // k, N / m^n
  double exponent = 1.5;      // n
  double damping = 1.0e6;     // lambda, N s / m^(n+1)
  double mu_static = 0.9;
  double mu_dynamic = 0.8;
  double v_transition = 0.1;  // m/s
};

// Maintenance-heat length dependence g(l) = clamp(offset + slope * l, lo, hi)
// and the specific-tension muscle mass estimate.
struct MetabolicParams {
  double g_offset = 0.5;
  double g_slope = 0.5;
  double g_min = 0.5;
  double g_max = 1.5;
  double muscle_density = 1059.7;    // kg / m^3
  double specific_tension = 0.25e6;  // N / m^2
};

struct ModelSpec {
  std::vector<SegmentSpec> segments;
  std::vector<JointSpec> joints;  // canonical kJointNames order
  std::vector<MuscleSpec> muscles;
  ActuationMode actuation_mode = ActuationMode::kTorque;
  std::vector<ContactSphere> contact_spheres;
  ContactParams contact_params;
  MetabolicParams metabolic;
  double total_mass = 0.0;
  double total_height = 0.0;

  double gravity = 9.80665;
  double limit_stiffness = 500.0;  // N m / rad
  double limit_damping = 5.0;      // N m s / rad
  bool base_fixed = false;         // locks pelvis_tx / pelvis_ty (test rigs)
  bool contact_enabled = true;
  bool limits_enabled = true;

  int SegmentIndex(std::string_view name) const;
  int MuscleIndex(std::string_view name) const;
  // True if coordinate c takes no part in the dynamics.
  bool CoordLocked(int c) const;
};

// Default muscle table (14 entries, right leg then left leg).
std::vector<MuscleSpec> DefaultMuscles();

// The planar 7-DoF biped. Throws ConfigError on unknown joint names.
ModelSpec BuildDefaultModel(ActuationMode mode,
                            const std::set<std::string>& locked_joints = {});

// Applies joint locks by name. Throws ConfigError on unknown names.
void LockJoints(ModelSpec& spec, const std::set<std::string>& locked_joints);

// Report-only invariant check; empty when the model is valid.
std::vector<std::string> Validate(const ModelSpec& spec);

// Specific-tension muscle mass estimate F_max * l_opt * rho / sigma.
double EstimateMuscleMass(double f_max, double l_opt,
                          const MetabolicParams& params);

}  // namespace gaitforge

#endif  // GAITFORGE_MODEL_H_
