#include "gaitforge/kinematics.h"

#include <cmath>

namespace gaitforge {

Eigen::Matrix2d Rotation(double angle) {
  const double c = std::cos(angle);
  const double s = std::sin(angle);
  Eigen::Matrix2d r;
  r << c, -s, s, c;
  return r;
}

Topology Topology::FromSpec(const ModelSpec& spec) {
  const int n = static_cast<int>(spec.segments.size());
  Topology topo;
  topo.bodies.resize(n);
  topo.coord_body.fill(-1);
  std::vector<bool> has_joint(n, false);
  for (int j = 0; j < static_cast<int>(spec.joints.size()); ++j) {
    const auto& joint = spec.joints[j];
    const int child = spec.SegmentIndex(joint.child);
    if (child < 0) throw ConfigError("joint " + joint.name + ": bad child");
    Body& body = topo.bodies[child];
    body.parent = joint.parent == "ground" ? -1 : spec.SegmentIndex(joint.parent);
    if (joint.parent != "ground" && body.parent < 0) {
      throw ConfigError("joint " + joint.name + ": bad parent");
    }
    body.coord = JointCoord(j);
    body.axis = joint.axis;
    body.location = joint.location;
    topo.coord_body[body.coord] = child;
    has_joint[child] = true;
  }
  for (int s = 0; s < n; ++s) {
    if (!has_joint[s]) {
      throw ConfigError("segment " + spec.segments[s].name + " has no joint");
    }
  }
  // Topological order and per-segment coordinate chains.
  std::vector<bool> placed(n, false);
  topo.chain_coords.resize(n);
  while (static_cast<int>(topo.order.size()) < n) {
    bool progress = false;
    for (int s = 0; s < n; ++s) {
      if (placed[s]) continue;
      const int p = topo.bodies[s].parent;
      if (p >= 0 && !placed[p]) continue;
      if (p >= 0) topo.chain_coords[s] = topo.chain_coords[p];
      topo.chain_coords[s].push_back(topo.bodies[s].coord);
      topo.order.push_back(s);
      placed[s] = true;
      progress = true;
    }
    if (!progress) throw ConfigError("segment tree has a cycle");
  }
  return topo;
}

KinematicState::KinematicState(const ModelSpec& spec, const Topology& topo,
                               const Vec9& q, const Vec9& qdot)
    : spec_(&spec), topo_(&topo), qdot_(qdot) {
  const size_t n = topo.bodies.size();
  angle_.assign(n, 0.0);
  omega_.assign(n, 0.0);
  origin_.assign(n, Vec2::Zero());
  origin_vel_.assign(n, Vec2::Zero());
  const Vec2 base(q[kPelvisTx], q[kPelvisTy]);
  const Vec2 base_vel(qdot[kPelvisTx], qdot[kPelvisTy]);
  for (int s : topo.order) {
    const auto& body = topo.bodies[s];
    double parent_angle = 0.0;
    double parent_omega = 0.0;
    Vec2 joint_pos = base + body.location;
    Vec2 joint_vel = base_vel;
    if (body.parent >= 0) {
      const int p = body.parent;
      parent_angle = angle_[p];
      parent_omega = omega_[p];
      const Vec2 arm = Rotation(parent_angle) * body.location;
      joint_pos = origin_[p] + arm;
      joint_vel = origin_vel_[p] + parent_omega * Perp(arm);
    }
    angle_[s] = parent_angle + body.axis * q[body.coord];
    omega_[s] = parent_omega + body.axis * qdot[body.coord];
    origin_[s] = joint_pos;
    origin_vel_[s] = joint_vel;
    pivot_[body.coord] = joint_pos;
    pivot_vel_[body.coord] = joint_vel;
  }
}

Vec2 KinematicState::PointPosition(int s, const Vec2& local) const {
  return origin_[s] + Rotation(angle_[s]) * local;
}

Vec2 KinematicState::PointVelocity(int s, const Vec2& local) const {
  return origin_vel_[s] + omega_[s] * Perp(Rotation(angle_[s]) * local);
}

Vec2 KinematicState::WorldPointVelocity(int s, const Vec2& world) const {
  return origin_vel_[s] + omega_[s] * Perp(world - origin_[s]);
}

Jac2x9 KinematicState::PointJacobian(int s, const Vec2& world) const {
  Jac2x9 jac = Jac2x9::Zero();
  jac(0, kPelvisTx) = 1.0;
  jac(1, kPelvisTy) = 1.0;
  for (int c : topo_->chain_coords[s]) {
    const int axis = topo_->bodies[topo_->coord_body[c]].axis;
    jac.col(c) = axis * Perp(world - pivot_[c]);
  }
  return jac;
}

Jac2x9 KinematicState::PointJacobianDot(int s, const Vec2& world) const {
  Jac2x9 jdot = Jac2x9::Zero();
  const Vec2 v = WorldPointVelocity(s, world);
  for (int c : topo_->chain_coords[s]) {
    const int axis = topo_->bodies[topo_->coord_body[c]].axis;
    jdot.col(c) = axis * Perp(v - pivot_vel_[c]);
  }
  return jdot;
}

Vec2 KinematicState::PointBiasAcceleration(int s, const Vec2& world) const {
  return PointJacobianDot(s, world) * qdot_;
}

Vec2 KinematicState::CenterOfMass() const {
  Vec2 sum = Vec2::Zero();
  double mass = 0.0;
  for (size_t s = 0; s < spec_->segments.size(); ++s) {
    const auto& seg = spec_->segments[s];
    sum += seg.mass * PointPosition(static_cast<int>(s), seg.com_offset);
    mass += seg.mass;
  }
  return sum / mass;
}

Vec2 KinematicState::CenterOfMassVelocity() const {
  Vec2 sum = Vec2::Zero();
  double mass = 0.0;
  for (size_t s = 0; s < spec_->segments.size(); ++s) {
    const auto& seg = spec_->segments[s];
    sum += seg.mass * PointVelocity(static_cast<int>(s), seg.com_offset);
    mass += seg.mass;
  }
  return sum / mass;
}

std::vector<LandmarkRef> CollectLandmarks(const ModelSpec& spec) {
  std::vector<LandmarkRef> out;
  for (int s = 0; s < static_cast<int>(spec.segments.size()); ++s) {
    for (const auto& lm : spec.segments[s].landmarks) {
      out.push_back({lm.name, s, lm.position});
    }
  }
  return out;
}

}  // namespace gaitforge
