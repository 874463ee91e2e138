#ifndef GAITFORGE_CONTACT_H_
#define GAITFORGE_CONTACT_H_

#include <utility>
#include <vector>

#include "gaitforge/kinematics.h"
#include "gaitforge/model.h"
#include "gaitforge/sim_state.h"

namespace gaitforge {

// Hunt-Crossley sphere against the ground plane y = 0:
//   N = k x^n + lambda x^n xdot   (clamped >= 0)
// with regularized Coulomb friction opposing the slip velocity:
//   mu(s) = min(s, 1) (mu_d + 2 (mu_s - mu_d) / (1 + s^2)),  s = |v| / v_t,
// which rises from 0, peaks at mu_s at s = 1 and settles to mu_d.
// `point_velocity` is the velocity of the sphere's lowest material point.
ContactWrench ContactForce(const ContactParams& params, double radius,
                           const Vec2& center, const Vec2& point_velocity);

// Friction coefficient for a slip speed.
double FrictionCoefficient(const ContactParams& params, double slip_speed);

// Sum of J^T F over all contact spheres.
std::pair<Vec9, std::vector<ContactWrench>> AccumulateGrf(
    const ModelSpec& spec, const KinematicState& kin);

// Foot-level wrench normalized by body weight (forces) and weight * height
// (moment about the talus origin): (Fx, Fy, Mz).
Eigen::Vector3d NormalizedFootWrench(const ModelSpec& spec,
                                     const KinematicState& kin,
                                     const std::vector<ContactWrench>& grf,
                                     const std::string& foot);

}  // namespace gaitforge

#endif  // GAITFORGE_CONTACT_H_
