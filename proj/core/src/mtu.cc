#include "gaitforge/mtu.h"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>
#include <utility>

#include <Eigen/Cholesky>

namespace gaitforge {
namespace {

constexpr double kHalfPi = std::numbers::pi / 2.0;

// Fraction of the fastest activation time constant used as the RK2 substep.
constexpr double kActivationSubstepRatio = 0.01;

Vec7 JointAngles(const Vec9& q) { return q.segment<kNumJoints>(kFirstJointCoord); }

}  // namespace

EnergyReport& EnergyReport::operator+=(const EnergyReport& other) {
  a_dot += other.a_dot;
  m_dot += other.m_dot;
  s_dot += other.s_dot;
  w_dot += other.w_dot;
  total += other.total;
  cost_of_transport_step += other.cost_of_transport_step;
  return *this;
}

double ActivationRate(double a, double u, double t_act, double t_deact) {
  if (u == a) return 0.0;
  const double b = u > a ? t_act * (0.5 + 1.5 * a) : t_deact / (0.5 + 1.5 * a);
  return (u - a) / b;
}

double ActivationStep(double a, double u, double dt, double t_act,
                      double t_deact) {
  const double fastest = 0.5 * std::min(t_act, t_deact);
  const int n = std::max(
      1, static_cast<int>(std::ceil(dt / (kActivationSubstepRatio * fastest))));
  const double h = dt / n;
  for (int i = 0; i < n; ++i) {
    const double k1 = ActivationRate(a, u, t_act, t_deact);
    const double mid = std::clamp(a + 0.5 * h * k1, 0.0, 1.0);
    a = std::clamp(a + h * ActivationRate(mid, u, t_act, t_deact), 0.0, 1.0);
  }
  return a;
}

double MomentArm(const MuscleAttachment& att, double theta) {
  return att.constant_arm ? att.r : att.r * std::cos(theta - att.phi);
}

MtuKinematics ComputeMtuKinematics(const MuscleSpec& spec, const Vec7& q) {
  MtuKinematics out;
  out.mtu_length = spec.reference_length;
  out.moment_arms.reserve(spec.attachments.size());
  for (const auto& att : spec.attachments) {
    const double theta = q[JointIndex(att.joint)];
    const double excursion =
        att.constant_arm
            ? att.r * theta
            : att.r * (std::sin(theta - att.phi) - std::sin(-att.phi));
    out.mtu_length -= att.sign * excursion;
    out.moment_arms.push_back(MomentArm(att, theta));
  }
  return out;
}

double MtuVelocity(const MuscleSpec& spec, const Vec7& q, const Vec7& qdot) {
  double v = 0.0;
  for (const auto& att : spec.attachments) {
    const int j = JointIndex(att.joint);
    v -= att.sign * MomentArm(att, q[j]) * qdot[j];
  }
  return v;
}

MuscleState ComputeMuscleState(const MuscleSpec& spec, const Vec7& q,
                               const Vec7& qdot, double activation) {
  MuscleState st;
  st.activation = activation;
  st.mtu_length = ComputeMtuKinematics(spec, q).mtu_length;
  st.fiber_length = st.mtu_length - spec.tendon_slack;
  st.fiber_velocity = MtuVelocity(spec, q, qdot);
  return st;
}

double ForceLength(double l_norm) {
  const double x = (l_norm - 1.0) / 0.45;
  return std::exp(-x * x);
}

double ForceVelocity(double w) {
  if (w < 0.0) return std::max(0.0, (1.0 + w) / (1.0 - 5.0 * w));
  return 1.0 + 0.5 * (5.0 * w) / (5.0 * w + 1.0);
}

double PassiveForceLength(double l_norm) {
  if (l_norm <= 1.0) return 0.0;
  return (std::exp(4.0 * (l_norm - 1.0) / 0.6) - 1.0) / (std::exp(4.0) - 1.0);
}

MuscleForce ComputeMuscleForce(const MuscleSpec& spec, const MuscleState& st) {
  const double l_norm = st.fiber_length / spec.l_opt;
  const double w = st.fiber_velocity / (spec.v_max * spec.l_opt);
  MuscleForce f;
  f.active = spec.f_max * st.activation * ForceLength(l_norm) * ForceVelocity(w);
  f.passive = spec.f_max * PassiveForceLength(l_norm);
  f.total = std::max(0.0, f.active + f.passive);
  return f;
}

Eigen::MatrixXd MomentArmMatrix(const std::vector<MuscleSpec>& muscles,
                                const Vec7& q) {
  Eigen::MatrixXd r = Eigen::MatrixXd::Zero(kNumJoints, muscles.size());
  for (size_t m = 0; m < muscles.size(); ++m) {
    for (const auto& att : muscles[m].attachments) {
      const int j = JointIndex(att.joint);
      r(j, static_cast<Eigen::Index>(m)) += att.sign * MomentArm(att, q[j]);
    }
  }
  return r;
}

Vec9 MusclesToGeneralizedTorques(const ModelSpec& spec, const Vec9& q,
                                 const Eigen::VectorXd& forces) {
  if (spec.actuation_mode != ActuationMode::kMtu) {
    throw ModeError("muscle torques requested for a torque-actuated model");
  }
  if (forces.size() != static_cast<Eigen::Index>(spec.muscles.size())) {
    throw UsageError("muscle force vector has the wrong length");
  }
  Vec9 tau = Vec9::Zero();
  tau.segment<kNumJoints>(kFirstJointCoord) =
      MomentArmMatrix(spec.muscles, JointAngles(q)) * forces;
  return tau;
}

StaticOptimizationResult SolveMinEffort(const Eigen::MatrixXd& a_mat,
                                        const Eigen::VectorXd& tau,
                                        double p) {
  const Eigen::Index n_muscles = a_mat.cols();
  const double m = static_cast<double>(n_muscles);
  const double c = m / p;

  // Rows no muscle can influence are excluded from the dual.
  std::vector<Eigen::Index> rows;
  for (Eigen::Index j = 0; j < a_mat.rows(); ++j) {
    if (a_mat.row(j).cwiseAbs().maxCoeff() > 0.0) rows.push_back(j);
  }
  const Eigen::Index k = static_cast<Eigen::Index>(rows.size());
  Eigen::MatrixXd a_red(k, n_muscles);
  Eigen::VectorXd tau_red(k);
  for (Eigen::Index i = 0; i < k; ++i) {
    a_red.row(i) = a_mat.row(rows[i]);
    tau_red[i] = tau[rows[i]];
  }

  auto primal = [&](const Eigen::VectorXd& z, Eigen::VectorXd* deriv) {
    Eigen::VectorXd act(n_muscles);
    for (Eigen::Index i = 0; i < n_muscles; ++i) {
      if (z[i] <= 0.0) {
        act[i] = 0.0;
        // Right derivative at the boundary keeps Newton moving off a = 0.
        if (deriv) (*deriv)[i] = (z[i] == 0.0 && p == 2.0) ? c : 0.0;
        continue;
      }
      const double base = c * z[i];
      const double val = std::pow(base, 1.0 / (p - 1.0));
      if (val >= 1.0) {
        act[i] = 1.0;
        if (deriv) (*deriv)[i] = 0.0;
      } else {
        act[i] = val;
        if (deriv) {
          (*deriv)[i] = c / (p - 1.0) * std::pow(base, (2.0 - p) / (p - 1.0));
        }
      }
    }
    return act;
  };
  auto dual_value = [&](const Eigen::VectorXd& y) {
    const Eigen::VectorXd z = a_red.transpose() * y;
    const Eigen::VectorXd act = primal(z, nullptr);
    double g = y.dot(tau_red);
    for (Eigen::Index i = 0; i < n_muscles; ++i) {
      g += std::pow(act[i], p) / m - z[i] * act[i];
    }
    return g;
  };

  StaticOptimizationResult best;
  best.activations = Eigen::VectorXd::Zero(n_muscles);
  best.residual = std::numeric_limits<double>::infinity();
  const double scale = std::max(1.0, a_red.size() ? a_red.squaredNorm() : 1.0);
  const double tol = 1e-11 * (1.0 + tau.norm());

  Eigen::VectorXd y = Eigen::VectorXd::Zero(k);
  int iter = 0;
  for (; iter < 300; ++iter) {
    const Eigen::VectorXd z = a_red.transpose() * y;
    Eigen::VectorXd deriv(n_muscles);
    const Eigen::VectorXd act = primal(z, &deriv);
    const Eigen::VectorXd grad = tau_red - a_red * act;
    const double res = grad.norm();
    if (res < best.residual) {
      best.residual = res;
      best.activations = act;
    }
    if (res <= tol || k == 0) break;
    Eigen::MatrixXd h = a_red * deriv.asDiagonal() * a_red.transpose();
    h.diagonal().array() += 1e-12 * scale + 1e-12 * h.diagonal().maxCoeff();
    const Eigen::VectorXd step = h.ldlt().solve(grad);
    const double slope = grad.dot(step);
    if (!(slope > 0.0)) break;
    const double g0 = dual_value(y);
    double t = 1.0;
    bool accepted = false;
    for (int ls = 0; ls < 80; ++ls) {
      const Eigen::VectorXd trial = y + t * step;
      if (dual_value(trial) >= g0 + 1e-4 * t * slope) {
        y = trial;
        accepted = true;
        break;
      }
      t *= 0.5;
    }
    if (!accepted) break;
  }
  best.iterations = iter;

  // Torque rows outside the muscles' reach count toward the residual.
  Eigen::VectorXd full_res = tau - a_mat * best.activations;
  best.residual = full_res.norm();
  best.objective = best.activations.array().pow(p).sum() / m;
  best.feasible = best.residual <= kStaticOptTolerance;
  return best;
}

StaticOptimizationResult StaticOptimization(const ModelSpec& spec,
                                            const Vec9& q,
                                            const Vec7& tau_desired,
                                            double p) {
  if (spec.actuation_mode != ActuationMode::kMtu) {
    throw ModeError("static optimization requires an mtu model");
  }
  if (p < 2.0) throw std::invalid_argument("static optimization needs p >= 2");
  const Vec7 angles = JointAngles(q);
  Eigen::MatrixXd a_mat = MomentArmMatrix(spec.muscles, angles);
  for (size_t i = 0; i < spec.muscles.size(); ++i) {
    const auto& muscle = spec.muscles[i];
    const MuscleState st =
        ComputeMuscleState(muscle, angles, Vec7::Zero(), 0.0);
    a_mat.col(static_cast<Eigen::Index>(i)) *=
        muscle.f_max * ForceLength(st.fiber_length / muscle.l_opt);
  }
  return SolveMinEffort(a_mat, tau_desired, p);
}

namespace {

// sin and 1 - cos of pi/2 x, exact at x = 1.
std::pair<double, double> QuarterWave(double x) {
  if (x >= 1.0) return {1.0, 1.0};
  return {std::sin(kHalfPi * x), 1.0 - std::cos(kHalfPi * x)};
}

}  // namespace

double ActivationHeatShape(double u, double type1_fraction) {
  const auto [s, c] = QuarterWave(u);
  return 40.0 * type1_fraction * s + 133.0 * (1.0 - type1_fraction) * c;
}

double MaintenanceHeatShape(double a, double type1_fraction) {
  const auto [s, c] = QuarterWave(a);
  return 74.0 * type1_fraction * s + 111.0 * (1.0 - type1_fraction) * c;
}

double MaintenanceLengthFactor(double l_norm, const MetabolicParams& params) {
  return std::clamp(params.g_offset + params.g_slope * l_norm, params.g_min,
                    params.g_max);
}

EnergyReport MetabolicRate(const MuscleSpec& spec, const MuscleState& st,
                           double excitation, const MuscleForce& force,
                           const MetabolicParams& params) {
  EnergyReport r;
  const double shortening = std::max(0.0, -st.fiber_velocity);
  r.a_dot = spec.muscle_mass *
            ActivationHeatShape(excitation, spec.type1_fraction);
  r.m_dot = spec.muscle_mass *
            MaintenanceLengthFactor(st.fiber_length / spec.l_opt, params) *
            MaintenanceHeatShape(st.activation, spec.type1_fraction);
  r.s_dot = 0.25 * force.total * shortening;
  r.w_dot = force.active * shortening;
  r.total = r.a_dot + r.m_dot + r.s_dot + r.w_dot;
  return r;
}

double CostOfTransportStep(const Vec7& tau, const Vec7& dtheta, bool absolute) {
  if (absolute) return (tau.array() * dtheta.array()).abs().sum();
  return tau.dot(dtheta);
}

}  // namespace gaitforge
