#ifndef GAITFORGE_DYNAMICS_H_
#define GAITFORGE_DYNAMICS_H_

#include "gaitforge/kinematics.h"
#include "gaitforge/model.h"
#include "gaitforge/sim_state.h"

namespace gaitforge {

// Generalized forces acting on the nine coordinates. `tau` is actuation and
// must be zero on the base translation rows.
struct GeneralizedForces {
  Vec9 tau = Vec9::Zero();
  Vec9 external = Vec9::Zero();
};

// Planar articulated-body dynamics for one ModelSpec. Mass and Coriolis
// terms are assembled from per-segment COM Jacobians:
//   M = sum m J_c^T J_c + I J_w^T J_w,   C = sum m J_c^T dJ_c/dt
// (J_w is constant in the plane, so rotation adds no velocity-product term).
class Dynamics {
 public:
  explicit Dynamics(ModelSpec spec);

  const ModelSpec& spec() const { return spec_; }
  const Topology& topology() const { return topo_; }

  KinematicState Kinematics(const Vec9& q, const Vec9& qdot) const;

  Mat9 MassMatrix(const Vec9& q) const;
  Mat9 CoriolisMatrix(const Vec9& q, const Vec9& qdot) const;
  // Generalized gravity force (external side of the equation of motion).
  Vec9 GravityForces(const Vec9& q) const;

  // Unilateral joint-limit springs; caches the largest magnitude in state.
  Vec9 LimitForces(SimState& state) const;

  // qddot = M^-1 (tau + external - C qdot). Locked coordinates get zero
  // acceleration and are removed from the solve. Caches state.qddot.
  Vec9 ForwardDynamics(SimState& state, const GeneralizedForces& forces) const;

  // Gravity + (optional) contact + (optional) limit forces at `state`;
  // refreshes the contact and limit caches.
  Vec9 ExternalForces(SimState& state) const;

  // Semi-implicit Euler: qdot += qddot dt, then q += qdot dt. Contact forces
  // are evaluated at the end-of-step contact velocity and the penetration it
  // implies, which keeps stiff foot contacts stable at millisecond steps.
  // Throws std::invalid_argument for dt outside (0, 0.01] or base actuation,
  // SimulationFault for non-finite results.
  void Step(SimState& state, const Vec9& tau, double dt) const;

  // Kinetic + gravitational potential energy.
  double KineticEnergy(const Vec9& q, const Vec9& qdot) const;
  double PotentialEnergy(const Vec9& q) const;

  // Puts locked coordinates at their lock angle with zero velocity.
  void EnforceLocks(SimState& state) const;

 private:
  // Change in qddot from evaluating contact forces at the end of the step.
  // Updates state.grf with the forces actually applied.
  Vec9 ImplicitContactCorrection(SimState& state, const Vec9& qddot,
                                  double dt) const;

  ModelSpec spec_;
  Topology topo_;
};

// Free-function forms operating on a spec directly.
Mat9 MassMatrix(const ModelSpec& spec, const Vec9& q);
Vec9 ForwardDynamics(const ModelSpec& spec, SimState& state,
                     const GeneralizedForces& forces);
Vec9 LimitForces(const ModelSpec& spec, SimState& state);
void Step(const ModelSpec& spec, SimState& state, const Vec9& tau, double dt);

}  // namespace gaitforge

#endif  // GAITFORGE_DYNAMICS_H_
