#ifndef GAITFORGE_MTU_H_
#define GAITFORGE_MTU_H_

#include <vector>

#include <Eigen/Core>

#include "gaitforge/model.h"

namespace gaitforge {

struct MuscleState {
  double activation = 0.0;
  double fiber_length = 0.0;    // m
  double fiber_velocity = 0.0;  // m/s, lengthening positive
  double mtu_length = 0.0;      // m
};

struct MuscleForce {
  double total = 0.0;    // active + passive, >= 0
  double active = 0.0;
  double passive = 0.0;
};

// Heat and work rates of one muscle (W), or the cost-of-transport work (J)
// for torque-actuated steps.
struct EnergyReport {
  double a_dot = 0.0;  // activation heat
  double m_dot = 0.0;  // maintenance heat
  double s_dot = 0.0;  // shortening heat
  double w_dot = 0.0;  // mechanical work of the contractile element
  double total = 0.0;
  double cost_of_transport_step = 0.0;

  EnergyReport& operator+=(const EnergyReport& other);
};

struct MtuKinematics {
  double mtu_length = 0.0;
  std::vector<double> moment_arms;  // one per attachment, unsigned
};

// da/dt = (u - a) / b(a, u) with b = t_act (0.5 + 1.5 a) when u > a and
// t_deact / (0.5 + 1.5 a) otherwise. Integrated with explicit midpoint
// substeps no longer than 1% of the fastest time constant, then clamped.
double ActivationStep(double a, double u, double dt, double t_act,
                      double t_deact);
double ActivationRate(double a, double u, double t_act, double t_deact);

// rho(theta) = r cos(theta - phi), or r for constant-arm attachments.
double MomentArm(const MuscleAttachment& att, double theta);

// MTU length and moment arms at joint angles q (7 joint coordinates).
MtuKinematics ComputeMtuKinematics(const MuscleSpec& spec, const Vec7& q);

// d(mtu length)/dt for joint velocities qdot.
double MtuVelocity(const MuscleSpec& spec, const Vec7& q, const Vec7& qdot);

// Rigid tendon: fiber length = MTU length - tendon slack.
MuscleState ComputeMuscleState(const MuscleSpec& spec, const Vec7& q,
                               const Vec7& qdot, double activation);

// Normalized Hill curves.
double ForceLength(double l_norm);
double ForceVelocity(double w);  // w = v_ce / (v_max l_opt)
double PassiveForceLength(double l_norm);

MuscleForce ComputeMuscleForce(const MuscleSpec& spec, const MuscleState& st);

// 7 x M signed moment-arm matrix R(q): R(j, m) = sign * rho.
Eigen::MatrixXd MomentArmMatrix(const std::vector<MuscleSpec>& muscles,
                                const Vec7& q);

// Per-muscle joint torques sign * rho * f, summed into generalized
// coordinates. Throws ModeError for torque-actuated models.
Vec9 MusclesToGeneralizedTorques(const ModelSpec& spec, const Vec9& q,
                                 const Eigen::VectorXd& forces);

struct StaticOptimizationResult {
  Eigen::VectorXd activations;
  double objective = 0.0;
  double residual = 0.0;  // |R F a - tau|, N m
  bool feasible = false;
  int iterations = 0;
};

inline constexpr double kStaticOptTolerance = 1e-3;  // N m

// min (1/m) sum a^p  s.t.  A a = tau, 0 <= a <= 1, where column m of A is
// muscle m's torque per unit activation. Solved by semismooth Newton on the
// dual; returns the last iterate with the smallest residual when the torque
// lies outside the reachable set.
StaticOptimizationResult SolveMinEffort(const Eigen::MatrixXd& torque_per_activation,
                                        const Eigen::VectorXd& tau, double p);

// Builds A = R(q) diag(F_max f_l) at the fiber lengths implied by q
// (f_v = 1) and solves for the 7 joint torques.
StaticOptimizationResult StaticOptimization(const ModelSpec& spec,
                                            const Vec9& q,
                                            const Vec7& tau_desired,
                                            double p = 2.0);

// f_A(u) and f_M(a) heat-rate shapes (W/kg).
double ActivationHeatShape(double u, double type1_fraction);
double MaintenanceHeatShape(double a, double type1_fraction);
double MaintenanceLengthFactor(double l_norm, const MetabolicParams& params);

EnergyReport MetabolicRate(const MuscleSpec& spec, const MuscleState& st,
                           double excitation, const MuscleForce& force,
                           const MetabolicParams& params);

// Mechanical work of the joint actuators over one step: sum tau * dtheta,
// or sum |tau * dtheta| when `absolute`.
double CostOfTransportStep(const Vec7& tau, const Vec7& dtheta,
                           bool absolute = false);

}  // namespace gaitforge

#endif  // GAITFORGE_MTU_H_
