#include "gaitforge/dynamics.h"

#include <algorithm>
#include <cmath>
#include <vector>
#include <stdexcept>
#include <string>

#include <Eigen/Cholesky>
#include <Eigen/LU>

#include "gaitforge/contact.h"

namespace gaitforge {
namespace {

void RequireFinite(const Vec9& v, const char* what) {
  for (int i = 0; i < kNumCoords; ++i) {
    if (!std::isfinite(v[i])) {
      throw SimulationFault(std::string("non-finite ") + what + " at " +
                                std::string(kCoordNames[i]),
                            i);
    }
  }
}

// Solves M x = rhs over the unlocked coordinates; locked rows of x are 0.
Eigen::Matrix<double, kNumCoords, Eigen::Dynamic> SolveFree(
    const ModelSpec& spec, const Mat9& m,
    const Eigen::Matrix<double, kNumCoords, Eigen::Dynamic>& rhs) {
  std::array<int, kNumCoords> free_index{};
  int n_free = 0;
  for (int c = 0; c < kNumCoords; ++c) {
    if (!spec.CoordLocked(c)) free_index[n_free++] = c;
  }
  Eigen::Matrix<double, kNumCoords, Eigen::Dynamic> x =
      Eigen::Matrix<double, kNumCoords, Eigen::Dynamic>::Zero(kNumCoords,
                                                              rhs.cols());
  if (n_free == kNumCoords) {
    x = m.ldlt().solve(rhs);
  } else if (n_free > 0) {
    Eigen::MatrixXd m_free(n_free, n_free);
    Eigen::MatrixXd rhs_free(n_free, rhs.cols());
    for (int i = 0; i < n_free; ++i) {
      rhs_free.row(i) = rhs.row(free_index[i]);
      for (int k = 0; k < n_free; ++k) {
        m_free(i, k) = m(free_index[i], free_index[k]);
      }
    }
    const Eigen::MatrixXd sol = m_free.ldlt().solve(rhs_free);
    for (int i = 0; i < n_free; ++i) x.row(free_index[i]) = sol.row(i);
  }
  return x;
}

// d(friction)/d(slip velocity), restricted to its dissipative part (<= 0).
double FrictionSlope(const ContactParams& p, double normal, double slip) {
  const double s = std::abs(slip) / p.v_transition;
  const double delta = p.mu_static - p.mu_dynamic;
  const double g = p.mu_dynamic + 2.0 * delta / (1.0 + s * s);
  const double dg = -4.0 * delta * s / ((1.0 + s * s) * (1.0 + s * s));
  const double dmu = s < 1.0 ? g + s * dg : dg;
  return std::min(0.0, -normal * dmu / p.v_transition);
}

}  // namespace

Dynamics::Dynamics(ModelSpec spec)
    : spec_(std::move(spec)), topo_(Topology::FromSpec(spec_)) {}

KinematicState Dynamics::Kinematics(const Vec9& q, const Vec9& qdot) const {
  return KinematicState(spec_, topo_, q, qdot);
}

Mat9 Dynamics::MassMatrix(const Vec9& q) const {
  const KinematicState kin = Kinematics(q, Vec9::Zero());
  Mat9 m = Mat9::Zero();
  for (size_t s = 0; s < spec_.segments.size(); ++s) {
    const auto& seg = spec_.segments[s];
    const int si = static_cast<int>(s);
    const Vec2 com = kin.PointPosition(si, seg.com_offset);
    const Jac2x9 jc = kin.PointJacobian(si, com);
    Eigen::Matrix<double, 1, kNumCoords> jw =
        Eigen::Matrix<double, 1, kNumCoords>::Zero();
    for (int c : topo_.chain_coords[s]) {
      jw(c) = topo_.bodies[topo_.coord_body[c]].axis;
    }
    m.noalias() += seg.mass * jc.transpose() * jc;
    m.noalias() += seg.inertia_zz * jw.transpose() * jw;
  }
  return m;
}

Mat9 Dynamics::CoriolisMatrix(const Vec9& q, const Vec9& qdot) const {
  const KinematicState kin = Kinematics(q, qdot);
  Mat9 c = Mat9::Zero();
  for (size_t s = 0; s < spec_.segments.size(); ++s) {
    const auto& seg = spec_.segments[s];
    const int si = static_cast<int>(s);
    const Vec2 com = kin.PointPosition(si, seg.com_offset);
    c.noalias() += seg.mass * kin.PointJacobian(si, com).transpose() *
                   kin.PointJacobianDot(si, com);
  }
  return c;
}

Vec9 Dynamics::GravityForces(const Vec9& q) const {
  const KinematicState kin = Kinematics(q, Vec9::Zero());
  Vec9 g = Vec9::Zero();
  for (size_t s = 0; s < spec_.segments.size(); ++s) {
    const auto& seg = spec_.segments[s];
    const int si = static_cast<int>(s);
    const Vec2 com = kin.PointPosition(si, seg.com_offset);
    g.noalias() += kin.PointJacobian(si, com).transpose() *
                   Vec2(0.0, -seg.mass * spec_.gravity);
  }
  return g;
}

Vec9 Dynamics::LimitForces(SimState& state) const {
  Vec9 f = Vec9::Zero();
  double max_abs = 0.0;
  for (int j = 0; j < kNumJoints; ++j) {
    const auto& joint = spec_.joints[j];
    if (joint.locked) continue;
    const int c = JointCoord(j);
    const double q = state.q[c];
    const double qd = state.qdot[c];
    double force = 0.0;
    if (q > joint.range_max) {
      const double delta = q - joint.range_max;
      force = std::min(0.0, -spec_.limit_stiffness * delta -
                                spec_.limit_damping * qd);
    } else if (q < joint.range_min) {
      const double delta = joint.range_min - q;
      force = std::max(0.0, spec_.limit_stiffness * delta -
                                spec_.limit_damping * qd);
    }
    f[c] = force;
    max_abs = std::max(max_abs, std::abs(force));
  }
  state.limit_force_max_abs = max_abs;
  return f;
}

Vec9 Dynamics::ForwardDynamics(SimState& state,
                               const GeneralizedForces& forces) const {
  RequireFinite(state.q, "position");
  RequireFinite(state.qdot, "velocity");
  RequireFinite(forces.tau, "actuation");
  RequireFinite(forces.external, "external force");

  const Mat9 m = MassMatrix(state.q);
  const Vec9 bias = CoriolisMatrix(state.q, state.qdot) * state.qdot;
  const Vec9 rhs = forces.tau + forces.external - bias;

  const Vec9 qddot = SolveFree(spec_, m, rhs);
  state.qddot = qddot;
  return qddot;
}

Vec9 Dynamics::ImplicitContactCorrection(SimState& state, const Vec9& qddot,
                                         double dt) const {
  const ContactParams& params = spec_.contact_params;
  const int k = static_cast<int>(state.grf.size());
  if (k == 0) return Vec9::Zero();
  const KinematicState kin = Kinematics(state.q, state.qdot);
  // Rows 2a (tangential) and 2a+1 (normal) belong to sphere a.
  Eigen::Matrix<double, Eigen::Dynamic, kNumCoords> jac(2 * k, kNumCoords);
  Eigen::VectorXd vel(2 * k);
  Eigen::VectorXd bias(2 * k);
  Eigen::VectorXd f_old(2 * k);
  Eigen::VectorXd depth(k);
  for (int a = 0; a < k; ++a) {
    const ContactWrench& w = state.grf[a];
    const auto& sphere = spec_.contact_spheres[w.sphere];
    const int s = spec_.SegmentIndex(sphere.segment);
    const Vec2 center = kin.PointPosition(s, sphere.center);
    jac.middleRows<2>(2 * a) = kin.PointJacobian(s, w.cop);
    bias.segment<2>(2 * a) = kin.PointBiasAcceleration(s, w.cop);
    vel.segment<2>(2 * a) = kin.WorldPointVelocity(s, w.cop);
    f_old.segment<2>(2 * a) = Vec2(w.friction_force, w.normal_force);
    depth[a] = sphere.radius - center.y();
  }
  const Eigen::VectorXd v_free = vel + dt * (jac * qddot + bias);
  // Spheres that neither touch now nor reach the ground this step are left
  // out of the solve.
  std::vector<int> rows;
  for (int a = 0; a < k; ++a) {
    if (depth[a] > 0.0 || depth[a] - dt * v_free[2 * a + 1] > 0.0) {
      rows.push_back(2 * a);
      rows.push_back(2 * a + 1);
    }
  }
  if (rows.empty()) return Vec9::Zero();
  const int n = static_cast<int>(rows.size());
  const int na = n / 2;
  Eigen::Matrix<double, Eigen::Dynamic, kNumCoords> ja(n, kNumCoords);
  Eigen::VectorXd va(n);
  Eigen::VectorXd fa_old(n);
  Eigen::VectorXd da(na);
  for (int i = 0; i < n; ++i) {
    ja.row(i) = jac.row(rows[i]);
    va[i] = v_free[rows[i]];
    fa_old[i] = f_old[rows[i]];
  }
  for (int i = 0; i < na; ++i) da[i] = depth[rows[2 * i] / 2];

  const Eigen::Matrix<double, kNumCoords, Eigen::Dynamic> minv_jt =
      SolveFree(spec_, MassMatrix(state.q), ja.transpose());
  const Eigen::MatrixXd g = ja * minv_jt;

  // Forces at the end-of-step point velocity v+ and the penetration it
  // implies; the Jacobian block is filled when `d` is given.
  auto forces = [&](const Eigen::VectorXd& v, Eigen::MatrixXd* d) {
    Eigen::VectorXd f = Eigen::VectorXd::Zero(n);
    if (d) d->setZero(n, n);
    for (int i = 0; i < na; ++i) {
      const double vt = v[2 * i];
      const double vn = v[2 * i + 1];
      const double x = da[i] - dt * vn;
      if (x <= 0.0) continue;
      const double xn = std::pow(x, params.exponent);
      const double rate = -vn;
      const double normal = params.stiffness * xn + params.damping * xn * rate;
      if (normal <= 0.0) continue;
      const double mu = FrictionCoefficient(params, vt);
      const double sign = vt > 0.0 ? 1.0 : (vt < 0.0 ? -1.0 : 0.0);
      f[2 * i] = -sign * mu * normal;
      f[2 * i + 1] = normal;
      if (d) {
        const double dn_dx = params.exponent * xn / x *
                             (params.stiffness + params.damping * rate);
        const double dn_dv = std::min(0.0, -dt * dn_dx - params.damping * xn);
        (*d)(2 * i + 1, 2 * i + 1) = dn_dv;
        (*d)(2 * i, 2 * i + 1) = -sign * mu * dn_dv;
        (*d)(2 * i, 2 * i) = FrictionSlope(params, normal, vt);
      }
    }
    return f;
  };
  auto residual = [&](const Eigen::VectorXd& v) {
    return Eigen::VectorXd(v - va - dt * g * (forces(v, nullptr) - fa_old));
  };

  // Damped Newton on v+ = v_free + dt G (F(v+) - F_old). The Jacobian keeps
  // only dissipative slopes, which makes I - dt G D nonsingular.
  Eigen::VectorXd v = va;
  Eigen::VectorXd r = residual(v);
  Eigen::MatrixXd d;
  for (int iter = 0; iter < 50 && r.lpNorm<Eigen::Infinity>() > 1e-12; ++iter) {
    forces(v, &d);
    Eigen::MatrixXd newton = -dt * g * d;
    newton.diagonal().array() += 1.0;
    const Eigen::VectorXd step = newton.partialPivLu().solve(r);
    double alpha = 1.0;
    Eigen::VectorXd v_try = v - step;
    Eigen::VectorXd r_try = residual(v_try);
    while (r_try.norm() >= r.norm() && alpha > 1e-6) {
      alpha *= 0.5;
      v_try = v - alpha * step;
      r_try = residual(v_try);
    }
    if (r_try.norm() >= r.norm()) break;
    v = v_try;
    r = r_try;
  }
  const Eigen::VectorXd f_new = forces(v, nullptr);
  for (int i = 0; i < na; ++i) {
    ContactWrench& w = state.grf[rows[2 * i] / 2];
    w.friction_force = f_new[2 * i];
    w.normal_force = f_new[2 * i + 1];
  }
  return minv_jt * (f_new - fa_old);
}

Vec9 Dynamics::ExternalForces(SimState& state) const {
  Vec9 ext = GravityForces(state.q);
  if (spec_.contact_enabled) {
    const KinematicState kin = Kinematics(state.q, state.qdot);
    auto [gen, wrenches] = AccumulateGrf(spec_, kin);
    ext += gen;
    state.grf = std::move(wrenches);
  } else {
    state.grf.clear();
  }
  if (spec_.limits_enabled) {
    ext += LimitForces(state);
  } else {
    state.limit_force_max_abs = 0.0;
  }
  return ext;
}

void Dynamics::Step(SimState& state, const Vec9& tau, double dt) const {
  if (!(dt > 0.0 && dt <= 0.01)) {
    throw std::invalid_argument("step: dt must be in (0, 0.01], got " +
                                std::to_string(dt));
  }
  if (tau[kPelvisTx] != 0.0 || tau[kPelvisTy] != 0.0) {
    throw std::invalid_argument(
        "step: base translation coordinates cannot be actuated");
  }
  GeneralizedForces forces;
  forces.tau = tau;
  forces.external = ExternalForces(state);
  Vec9 qddot = ForwardDynamics(state, forces);
  if (spec_.contact_enabled) {
    qddot += ImplicitContactCorrection(state, qddot, dt);
    state.qddot = qddot;
  }
  state.qdot += qddot * dt;
  state.q += state.qdot * dt;
  state.time += dt;
  RequireFinite(state.qdot, "velocity");
  RequireFinite(state.q, "position");
}

double Dynamics::KineticEnergy(const Vec9& q, const Vec9& qdot) const {
  return 0.5 * qdot.dot(MassMatrix(q) * qdot);
}

double Dynamics::PotentialEnergy(const Vec9& q) const {
  const KinematicState kin = Kinematics(q, Vec9::Zero());
  double pe = 0.0;
  for (size_t s = 0; s < spec_.segments.size(); ++s) {
    const auto& seg = spec_.segments[s];
    pe += seg.mass * spec_.gravity *
          kin.PointPosition(static_cast<int>(s), seg.com_offset).y();
  }
  return pe;
}

void Dynamics::EnforceLocks(SimState& state) const {
  if (spec_.base_fixed) {
    state.qdot[kPelvisTx] = 0.0;
    state.qdot[kPelvisTy] = 0.0;
  }
  for (int j = 0; j < kNumJoints; ++j) {
    if (!spec_.joints[j].locked) continue;
    state.q[JointCoord(j)] = spec_.joints[j].lock_angle;
    state.qdot[JointCoord(j)] = 0.0;
  }
}

Mat9 MassMatrix(const ModelSpec& spec, const Vec9& q) {
  return Dynamics(spec).MassMatrix(q);
}

Vec9 ForwardDynamics(const ModelSpec& spec, SimState& state,
                     const GeneralizedForces& forces) {
  return Dynamics(spec).ForwardDynamics(state, forces);
}

Vec9 LimitForces(const ModelSpec& spec, SimState& state) {
  return Dynamics(spec).LimitForces(state);
}

void Step(const ModelSpec& spec, SimState& state, const Vec9& tau, double dt) {
  Dynamics(spec).Step(state, tau, dt);
}

}  // namespace gaitforge
