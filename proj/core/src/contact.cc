#include "gaitforge/contact.h"

#include <algorithm>
#include <cmath>

namespace gaitforge {

double FrictionCoefficient(const ContactParams& params, double slip_speed) {
  const double s = std::abs(slip_speed) / params.v_transition;
  return std::min(s, 1.0) *
         (params.mu_dynamic +
          2.0 * (params.mu_static - params.mu_dynamic) / (1.0 + s * s));
}

ContactWrench ContactForce(const ContactParams& params, double radius,
                           const Vec2& center, const Vec2& point_velocity) {
  ContactWrench w;
  w.cop = Vec2(center.x(), center.y() - radius);
  const double x = std::max(0.0, radius - center.y());
  if (x <= 0.0) return w;
  const double xdot = -point_velocity.y();
  const double xn = std::pow(x, params.exponent);
  w.penetration = x;
  w.penetration_rate = xdot;
  w.normal_force =
      std::max(0.0, params.stiffness * xn + params.damping * xn * xdot);
  const double slip = point_velocity.x();
  if (slip != 0.0) {
    w.friction_force = -std::copysign(
        FrictionCoefficient(params, slip) * w.normal_force, slip);
  }
  return w;
}

std::pair<Vec9, std::vector<ContactWrench>> AccumulateGrf(
    const ModelSpec& spec, const KinematicState& kin) {
  Vec9 gen = Vec9::Zero();
  std::vector<ContactWrench> wrenches;
  wrenches.reserve(spec.contact_spheres.size());
  for (int i = 0; i < static_cast<int>(spec.contact_spheres.size()); ++i) {
    const auto& sphere = spec.contact_spheres[i];
    const int s = spec.SegmentIndex(sphere.segment);
    const Vec2 center = kin.PointPosition(s, sphere.center);
    const Vec2 point(center.x(), center.y() - sphere.radius);
    const Vec2 vel = kin.WorldPointVelocity(s, point);
    ContactWrench w = ContactForce(spec.contact_params, sphere.radius, center,
                                   vel);
    w.sphere = i;
    if (w.normal_force > 0.0 || w.friction_force != 0.0) {
      gen += kin.PointJacobian(s, point).transpose() *
             Vec2(w.friction_force, w.normal_force);
    }
    wrenches.push_back(w);
  }
  return {gen, wrenches};
}

Eigen::Vector3d NormalizedFootWrench(const ModelSpec& spec,
                                     const KinematicState& kin,
                                     const std::vector<ContactWrench>& grf,
                                     const std::string& foot) {
  const int s = spec.SegmentIndex(foot);
  const Vec2 ankle = kin.origin(s);
  Eigen::Vector3d out = Eigen::Vector3d::Zero();
  for (const auto& w : grf) {
    if (w.sphere < 0 || spec.contact_spheres[w.sphere].segment != foot) {
      continue;
    }
    const Vec2 f(w.friction_force, w.normal_force);
    const Vec2 arm = w.cop - ankle;
    out[0] += f.x();
    out[1] += f.y();
    out[2] += arm.x() * f.y() - arm.y() * f.x();
  }
  const double weight = spec.total_mass * spec.gravity;
  out[0] /= weight;
  out[1] /= weight;
  out[2] /= weight * spec.total_height;
  return out;
}

}  // namespace gaitforge
