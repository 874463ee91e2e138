#ifndef GAITFORGE_KINEMATICS_H_
#define GAITFORGE_KINEMATICS_H_

#include <string>
#include <vector>

#include "gaitforge/model.h"

namespace gaitforge {

// Tree topology resolved from a ModelSpec once; cheap to copy.
struct Topology {
  struct Body {
    int parent = -1;        // segment index, -1 for the base
    int coord = -1;         // coordinate index of the joint driving it
    int axis = 1;
    Vec2 location = Vec2::Zero();  // joint position in the parent frame
  };
  std::vector<Body> bodies;  // indexed like ModelSpec::segments
  std::vector<int> order;    // parents before children
  // ancestors[s] lists coordinates whose rotation moves segment s.
  std::vector<std::vector<int>> chain_coords;
  // Segment a joint coordinate belongs to (its child), -1 for translations.
  std::array<int, kNumCoords> coord_body{};

  static Topology FromSpec(const ModelSpec& spec);
};

// World-frame pose and velocity of every segment for one (q, qdot).
class KinematicState {
 public:
  KinematicState(const ModelSpec& spec, const Topology& topo, const Vec9& q,
                 const Vec9& qdot);

  double angle(int s) const { return angle_[s]; }
  double omega(int s) const { return omega_[s]; }
  const Vec2& origin(int s) const { return origin_[s]; }
  const Vec2& origin_velocity(int s) const { return origin_vel_[s]; }

  // World position / velocity of a point fixed in segment s.
  Vec2 PointPosition(int s, const Vec2& local) const;
  Vec2 PointVelocity(int s, const Vec2& local) const;
  // World velocity of a material point of s given its world position.
  Vec2 WorldPointVelocity(int s, const Vec2& world) const;

  // d(point)/dq for a material point of s at world position `world`.
  Jac2x9 PointJacobian(int s, const Vec2& world) const;
  // Jdot * qdot for the same point (acceleration with qddot = 0).
  Vec2 PointBiasAcceleration(int s, const Vec2& world) const;
  // dJ/dt for the same point.
  Jac2x9 PointJacobianDot(int s, const Vec2& world) const;

  Vec2 CenterOfMass() const;
  Vec2 CenterOfMassVelocity() const;

  const ModelSpec& spec() const { return *spec_; }
  const Topology& topology() const { return *topo_; }

 private:
  const ModelSpec* spec_;
  const Topology* topo_;
  Vec9 qdot_;
  std::vector<double> angle_;
  std::vector<double> omega_;
  std::vector<Vec2> origin_;
  std::vector<Vec2> origin_vel_;
  // World position/velocity of each coordinate's rotation center.
  std::array<Vec2, kNumCoords> pivot_{};
  std::array<Vec2, kNumCoords> pivot_vel_{};
};

Eigen::Matrix2d Rotation(double angle);

// Perpendicular (z cross v) in the plane.
inline Vec2 Perp(const Vec2& v) { return Vec2(-v.y(), v.x()); }

struct LandmarkRef {
  std::string name;
  int segment = -1;
  Vec2 local = Vec2::Zero();
};

// All segment landmarks in segment order, e.g. femur_r, tibia_r, talus_r,
// calcn_r, toes_r, femur_l, ... for the default model.
std::vector<LandmarkRef> CollectLandmarks(const ModelSpec& spec);

}  // namespace gaitforge

#endif  // GAITFORGE_KINEMATICS_H_
