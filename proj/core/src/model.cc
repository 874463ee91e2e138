#include "gaitforge/model.h"

#include <cmath>
#include <numbers>
#include <sstream>

namespace gaitforge {
namespace {

constexpr double kTotalMass = 75.164;
constexpr double kTotalHeight = 1.80;

// Mass fractions: head-arms-trunk lumped with the pelvis, then per-leg.
constexpr double kHatFraction = 0.64;
constexpr double kFemurFraction = 0.10;
constexpr double kTibiaFraction = 0.06;
constexpr double kFootFraction = 0.02;

// Joint ranges, rad.
constexpr double kPelvisRange = 1.57079633;
constexpr double kHipRange = 2.0943951;
constexpr double kKneeMin = -2.0943951;
constexpr double kKneeMax = 0.17453293;
constexpr double kAnkleRangeR = 1.57079633;
constexpr double kAnkleRangeL = 1.04719755;

SegmentSpec Leg(std::string name, double fraction, double length,
                double com_ratio, double gyration_ratio) {
  SegmentSpec s;
  s.name = std::move(name);
  s.mass = fraction * kTotalMass;
  s.length = length;
  s.com_offset = Vec2(0.0, -com_ratio * length);
  const double k = gyration_ratio * length;
  s.inertia_zz = s.mass * k * k;
  return s;
}

SegmentSpec Foot(const std::string& side) {
  SegmentSpec s;
  s.name = "foot_" + side;
  s.mass = kFootFraction * kTotalMass;
  s.length = 0.152 * kTotalHeight;
  s.com_offset = Vec2(0.05, -0.04);
  s.inertia_zz = s.mass * 0.067 * 0.067;
  s.landmarks = {{"talus_" + side, Vec2(0.0, 0.0)},
                 {"calcn_" + side, Vec2(-0.05, -0.04)},
                 {"toes_" + side, Vec2(0.15, -0.05)}};
  return s;
}

JointSpec Joint(std::string name, std::string parent, std::string child,
                Vec2 location, int axis, double lo, double hi, double kp,
                double kd) {
  JointSpec j;
  j.name = std::move(name);
  j.parent = std::move(parent);
  j.child = std::move(child);
  j.location = location;
  j.axis = axis;
  j.range_min = lo;
  j.range_max = hi;
  j.kp = kp;
  j.kd = kd;
  j.max_torque = 200.0;
  return j;
}

MuscleSpec Muscle(std::string name, double f_max, double l_opt,
                  double type1_fraction,
                  std::vector<MuscleAttachment> attachments) {
  MuscleSpec m;
  m.name = std::move(name);
  m.f_max = f_max;
  m.l_opt = l_opt;
  m.type1_fraction = type1_fraction;
  m.muscle_mass = EstimateMuscleMass(f_max, l_opt, MetabolicParams{});
  // Fiber at optimal length in the zero pose.
  m.tendon_slack = 2.0 * l_opt;
  m.reference_length = m.tendon_slack + l_opt;
  m.attachments = std::move(attachments);
  return m;
}

MuscleAttachment Hip(const std::string& side, double r, int sign) {
  return {"hip_" + side, r, 0.0, sign, true};
}

MuscleAttachment Var(const std::string& joint, double r, double phi,
                     int sign) {
  return {joint, r, phi, sign, false};
}

}  // namespace

std::string_view ToString(ActuationMode mode) {
  return mode == ActuationMode::kTorque ? "torque" : "mtu";
}

ActuationMode ParseActuationMode(std::string_view text) {
  if (text == "torque") return ActuationMode::kTorque;
  if (text == "mtu") return ActuationMode::kMtu;
  throw ConfigError("unknown actuation mode '" + std::string(text) +
                    "' (expected torque or mtu)");
}

int ModelSpec::SegmentIndex(std::string_view name) const {
  for (int i = 0; i < static_cast<int>(segments.size()); ++i) {
    if (segments[i].name == name) return i;
  }
  return -1;
}

int ModelSpec::MuscleIndex(std::string_view name) const {
  for (int i = 0; i < static_cast<int>(muscles.size()); ++i) {
    if (muscles[i].name == name) return i;
  }
  return -1;
}

bool ModelSpec::CoordLocked(int c) const {
  if (c < kFirstJointCoord) return base_fixed;
  return joints[c - kFirstJointCoord].locked;
}

double EstimateMuscleMass(double f_max, double l_opt,
                          const MetabolicParams& params) {
  return f_max * l_opt * params.muscle_density / params.specific_tension;
}

std::vector<MuscleSpec> DefaultMuscles() {
  std::vector<MuscleSpec> out;
  for (const std::string side : {"r", "l"}) {
    const std::string knee = "knee_" + side;
    const std::string ankle = "ankle_" + side;
    out.push_back(Muscle("HAM_" + side, 3000.0, 0.10, 0.44,
                         {Hip(side, 0.07, +1), Var(knee, 0.04, 0.0, -1)}));
    out.push_back(Muscle("GLU_" + side, 1500.0, 0.11, 0.50,
                         {Hip(side, 0.07, +1)}));
    out.push_back(Muscle("ILI_" + side, 2000.0, 0.11, 0.50,
                         {Hip(side, 0.06, -1)}));
    out.push_back(Muscle("VAS_" + side, 6000.0, 0.09, 0.50,
                         {Var(knee, 0.04, -0.26, +1)}));
    out.push_back(Muscle("GAS_" + side, 1500.0, 0.07, 0.54,
                         {Var(knee, 0.04, -0.70, -1),
                          Var(ankle, 0.05, 0.17, +1)}));
    out.push_back(Muscle("SOL_" + side, 4000.0, 0.06, 0.80,
                         {Var(ankle, 0.05, 0.17, +1)}));
    out.push_back(Muscle("TIA_" + side, 800.0, 0.08, 0.70,
                         {Var(ankle, 0.04, -0.17, -1)}));
  }
  return out;
}

void LockJoints(ModelSpec& spec, const std::set<std::string>& locked_joints) {
  for (const auto& name : locked_joints) {
    bool found = false;
    for (auto& joint : spec.joints) {
      if (joint.name == name) {
        joint.locked = true;
        joint.lock_angle = 0.0;
        found = true;
      }
    }
    if (!found) throw ConfigError("unknown joint name '" + name + "'");
  }
}

ModelSpec BuildDefaultModel(ActuationMode mode,
                            const std::set<std::string>& locked_joints) {
  ModelSpec spec;
  spec.actuation_mode = mode;
  spec.total_mass = kTotalMass;
  spec.total_height = kTotalHeight;

  SegmentSpec pelvis;
  pelvis.name = "pelvis";
  pelvis.mass = kHatFraction * kTotalMass;
  pelvis.length = 0.288 * kTotalHeight;
  pelvis.com_offset = Vec2(0.0, 0.32);
  pelvis.inertia_zz = pelvis.mass * 0.25 * 0.25;
  spec.segments.push_back(pelvis);

  const Vec2 hip_location(-0.07, -0.066);
  for (const std::string side : {"r", "l"}) {
    SegmentSpec femur = Leg("femur_" + side, kFemurFraction,
                            0.245 * kTotalHeight, 0.433, 0.323);
    femur.landmarks = {{"femur_" + side, Vec2::Zero()}};
    SegmentSpec tibia = Leg("tibia_" + side, kTibiaFraction,
                            0.246 * kTotalHeight, 0.433, 0.302);
    tibia.landmarks = {{"tibia_" + side, Vec2::Zero()}};
    spec.segments.push_back(femur);
    spec.segments.push_back(tibia);
    spec.segments.push_back(Foot(side));
  }
  // Masses are fractions of the total; remove rounding so the sum is exact.
  double sum = 0.0;
  for (size_t i = 1; i < spec.segments.size(); ++i) {
    sum += spec.segments[i].mass;
  }
  spec.segments[0].mass = kTotalMass - sum;

  const double femur_len = spec.segments[1].length;
  const double tibia_len = spec.segments[2].length;
  spec.joints.push_back(Joint("pelvis_tilt", "ground", "pelvis", Vec2::Zero(),
                              +1, -kPelvisRange, kPelvisRange, 100.0, 5.0));
  for (const std::string side : {"r", "l"}) {
    const double ankle_range = side == "r" ? kAnkleRangeR : kAnkleRangeL;
    spec.joints.push_back(Joint("hip_" + side, "pelvis", "femur_" + side,
                                hip_location, -1, -kHipRange, kHipRange,
                                100.0, 5.0));
    spec.joints.push_back(Joint("knee_" + side, "femur_" + side,
                                "tibia_" + side, Vec2(0.0, -femur_len), +1,
                                kKneeMin, kKneeMax, 100.0, 5.0));
    spec.joints.push_back(Joint("ankle_" + side, "tibia_" + side,
                                "foot_" + side, Vec2(0.0, -tibia_len), -1,
                                -ankle_range, ankle_range, 50.0, 2.0));
  }

  for (const std::string side : {"r", "l"}) {
    spec.contact_spheres.push_back({"foot_" + side, Vec2(-0.04, -0.035), 0.035});
    spec.contact_spheres.push_back({"foot_" + side, Vec2(0.15, -0.045), 0.025});
  }

  if (mode == ActuationMode::kMtu) spec.muscles = DefaultMuscles();
  LockJoints(spec, locked_joints);
  return spec;
}

std::vector<std::string> Validate(const ModelSpec& spec) {
  std::vector<std::string> out;
  auto fail = [&out](const std::string& msg) { out.push_back(msg); };

  double mass_sum = 0.0;
  for (const auto& s : spec.segments) {
    if (!(s.mass > 0.0)) fail("segment " + s.name + ": mass must be > 0");
    if (!(s.inertia_zz > 0.0)) {
      fail("segment " + s.name + ": inertia_zz must be > 0");
    }
    if (!(s.length > 0.0)) fail("segment " + s.name + ": length must be > 0");
    mass_sum += s.mass;
  }
  if (std::abs(mass_sum - spec.total_mass) > 1e-9) {
    std::ostringstream msg;
    msg.precision(17);
    msg << "segment masses sum to " << mass_sum << " but total_mass is "
        << spec.total_mass;
    fail(msg.str());
  }

  if (spec.joints.size() != static_cast<size_t>(kNumJoints)) {
    fail("expected 7 joints, found " + std::to_string(spec.joints.size()));
  } else {
    for (int j = 0; j < kNumJoints; ++j) {
      const auto& joint = spec.joints[j];
      if (joint.name != kJointNames[j]) {
        fail("joint " + std::to_string(j) + " must be " +
             std::string(kJointNames[j]) + ", found " + joint.name);
      }
      if (!(joint.range_min < joint.range_max)) {
        fail("joint " + joint.name + ": range min must be < max");
      }
      if (joint.kp < 0.0 || joint.kd < 0.0) {
        fail("joint " + joint.name + ": gains must be >= 0");
      }
      if (!(joint.max_torque > 0.0)) {
        fail("joint " + joint.name + ": max_torque must be > 0");
      }
      if (joint.axis != 1 && joint.axis != -1) {
        fail("joint " + joint.name + ": axis must be +1 or -1");
      }
      if (spec.SegmentIndex(joint.child) < 0) {
        fail("joint " + joint.name + ": unknown child segment " + joint.child);
      }
      if (joint.parent != "ground" && spec.SegmentIndex(joint.parent) < 0) {
        fail("joint " + joint.name + ": unknown parent segment " +
             joint.parent);
      }
    }
  }

  const size_t muscle_count = spec.muscles.size();
  if (spec.actuation_mode == ActuationMode::kMtu &&
      muscle_count != static_cast<size_t>(kNumMuscles)) {
    fail("mtu mode requires 14 muscles, found " +
         std::to_string(muscle_count));
  }
  if (spec.actuation_mode == ActuationMode::kTorque && muscle_count != 0) {
    fail("torque mode requires 0 muscles, found " +
         std::to_string(muscle_count));
  }
  for (const auto& m : spec.muscles) {
    if (!(m.f_max > 0.0)) fail("muscle " + m.name + ": f_max must be > 0");
    if (!(m.l_opt > 0.0)) fail("muscle " + m.name + ": l_opt must be > 0");
    if (!(m.t_act > 0.0) || !(m.t_deact > 0.0)) {
      fail("muscle " + m.name + ": time constants must be > 0");
    }
    if (m.type1_fraction < 0.0 || m.type1_fraction > 1.0) {
      fail("muscle " + m.name + ": type1_fraction must be in [0,1]");
    }
    const bool biarticular =
        m.name.starts_with("HAM") || m.name.starts_with("GAS");
    const size_t expected = biarticular ? 2 : 1;
    if (m.attachments.size() != expected) {
      fail("muscle " + m.name + ": expected " + std::to_string(expected) +
           " attachments");
    }
    for (const auto& a : m.attachments) {
      if (JointIndex(a.joint) < 0) {
        fail("muscle " + m.name + ": unknown joint " + a.joint);
      }
      if (a.sign != 1 && a.sign != -1) {
        fail("muscle " + m.name + ": attachment sign must be +1 or -1");
      }
    }
  }

  for (const std::string side : {"r", "l"}) {
    int count = 0;
    for (const auto& sphere : spec.contact_spheres) {
      if (sphere.segment == "foot_" + side) ++count;
    }
    if (count < 2) fail("foot_" + side + " needs at least 2 contact spheres");
  }
  for (const auto& sphere : spec.contact_spheres) {
    if (spec.SegmentIndex(sphere.segment) < 0) {
      fail("contact sphere on unknown segment " + sphere.segment);
    }
    if (!(sphere.radius > 0.0)) fail("contact sphere radius must be > 0");
  }
  return out;
}

}  // namespace gaitforge
