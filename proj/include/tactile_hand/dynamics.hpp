#ifndef TACTILE_HAND_DYNAMICS_HPP_
#define TACTILE_HAND_DYNAMICS_HPP_

// Forward dynamics of the hand-plus-stick system.
//
// Generalized velocity (15): six actuated gear rates, three backlash offset
// rates (one per worm-gear joint), stick linear velocity, stick angular
// velocity (world frame). Finger inertia is diagonal armature on the gear
// coordinate plus a link inertia on the link angle (gear + offset).
//
// Integration is a linearly implicit trapezoidal scheme at the 1 ms inner
// step: positions advance with the mean of old and new velocities, PD and
// passive joint terms are treated with the trapezoidal (Crank-Nicolson) rule,
// contact damping and viscous friction implicitly at the new velocity. This
// keeps the stiff penalty contacts stable at dt = 1 ms and integrates a free
// fall exactly. A backlash offset that would leave its gap is held at the
// edge inside the solve, so link loads reach the gear. After the velocity
// solve the kinematic corrections run in order: backlash gap clamp, worm-gear
// self-lock, joint limits. A self-locking gear that the solve would move
// against its commanded direction is likewise held inside the solve.

#include <array>
#include <optional>

#include <Eigen/Cholesky>

#include "tactile_hand/common.hpp"
#include "tactile_hand/hand_model.hpp"
#include "tactile_hand/tactile.hpp"

namespace tactile_hand {

inline constexpr int kDof = 15;
inline constexpr int kBacklashDof = 6;  // first backlash slot
inline constexpr int kStickLinear = 9;
inline constexpr int kStickAngular = 12;

struct BacklashState {
  double offset = 0.0;
  double offset_velocity = 0.0;
};

using JointVector = std::array<double, kNumActive>;

struct SimState {
  JointVector q{};
  JointVector qdot{};
  std::array<BacklashState, kNumBacklash> backlash{};
  StickPose stick;
  Vec3 linear_velocity = Vec3::Zero();
  Vec3 angular_velocity = Vec3::Zero();
  double t = 0.0;

  bool is_finite() const {
    for (int a = 0; a < kNumActive; ++a) {
      if (!std::isfinite(q[a]) || !std::isfinite(qdot[a])) return false;
    }
    for (const auto& b : backlash) {
      if (!std::isfinite(b.offset) || !std::isfinite(b.offset_velocity)) {
        return false;
      }
    }
    return stick.position.allFinite() && stick.orientation.coeffs().allFinite() &&
           linear_velocity.allFinite() && angular_velocity.allFinite();
  }
};

// tau = kp (q_d - q) - kd qdot, unsaturated.
inline double pd_torque(const JointSpec& spec, double q_desired, double q,
                        double qdot) {
  return spec.kp * (q_desired - q) - spec.kd * qdot;
}

inline double effective_joint_angle(double q_actuated,
                                    const BacklashState& backlash) {
  return q_actuated + backlash.offset;
}

inline int sign_of(double x) { return (x > 0.0) - (x < 0.0); }

// Worm-gear self-lock: the gear coordinate may only move in the commanded
// direction. A step that moved it the other way (or at all, when no direction
// is commanded) is undone and the opposing velocity removed. The backlash
// offset is not touched.
inline void apply_self_lock(const JointSpec& spec, double q_before, double& q,
                            double& qdot, int commanded_direction) {
  if (!spec.self_lock) return;
  const double moved = q - q_before;
  if ((commanded_direction == 0 && moved != 0.0) ||
      moved * commanded_direction < 0.0) {
    q = q_before;
  }
  if (commanded_direction == 0 || qdot * commanded_direction < 0.0) {
    qdot = 0.0;
  }
}

// Keeps the backlash offset inside its gap. Hitting an edge while moving
// outward is an inelastic impact between link and gear: the offset rate goes
// to zero and the momentum moves to the gear coordinate.
inline void clamp_backlash(const JointSpec& spec, double& qdot,
                           BacklashState& b) {
  const bool low = b.offset < spec.backlash_lo;
  const bool high = b.offset > spec.backlash_hi;
  if (!low && !high) return;
  b.offset = low ? spec.backlash_lo : spec.backlash_hi;
  if ((low && b.offset_velocity < 0.0) || (high && b.offset_velocity > 0.0)) {
    qdot += spec.link_inertia * b.offset_velocity /
            (spec.armature + spec.link_inertia);
    b.offset_velocity = 0.0;
  }
}

inline void clamp_joint_limit(const JointSpec& spec, double& q, double& qdot) {
  if (q < spec.lower) {
    q = spec.lower;
    if (qdot < 0.0) qdot = 0.0;
  } else if (q > spec.upper) {
    q = spec.upper;
    if (qdot > 0.0) qdot = 0.0;
  }
}

inline std::array<double, kNumJoints> effective_angles(const HandModel& model,
                                                       const SimState& s) {
  std::array<double, kNumJoints> angles{};
  for (int j = 0; j < kNumJoints; ++j) {
    if (model.joints[j].fixed) angles[j] = model.joints[j].fixed_value;
  }
  for (int a = 0; a < kNumActive; ++a) {
    double angle = s.q[a];
    if (is_proximal_active(a)) {
      angle = effective_joint_angle(angle, s.backlash[finger_of_active(a)]);
    }
    angles[kActiveJoints[a]] = angle;
  }
  return angles;
}

inline HandPose forward_kinematics(const HandModel& model, const SimState& s) {
  return forward_kinematics(model, effective_angles(model, s));
}

struct PhysicsOptions {
  double dt = 1e-3;
  bool gravity = true;
  bool stick_fixed = false;  // stick held in place against all forces
  ContactParams contact;
};

// Sensible defaults for the stick pose: hanging vertically at `center`.
inline StickPose vertical_stick(const Vec3& center) {
  return StickPose{center, Quat::Identity()};
}

// Generalized force/Jacobian bookkeeping for one contact. Returns the relative
// velocity map J (3 x 15): v_taxel - v_stick_point = J u.
inline Eigen::Matrix<double, 3, kDof> contact_jacobian(
    const HandPose& pose, const Contact& c, const Vec3& taxel_world,
    const Vec3& stick_center) {
  Eigen::Matrix<double, 3, kDof> jac = Eigen::Matrix<double, 3, kDof>::Zero();
  const int f = TaxelLayout::finger_of(c.taxel);
  const FingerFrames& ff = pose.fingers[f];
  const Vec3 w = ff.flex_axis;
  const Vec3 col_prox = w.cross(taxel_world - ff.proximal_origin);
  jac.col(2 * f) = col_prox;
  jac.col(kBacklashDof + f) = col_prox;
  jac.col(2 * f + 1) = w.cross(taxel_world - ff.distal_origin);
  jac.block<3, 3>(0, kStickLinear) = -Mat3::Identity();
  jac.block<3, 3>(0, kStickAngular) = skew(c.point - stick_center);
  return jac;
}

inline Eigen::Matrix<double, kDof, 1> pack_velocity(const SimState& s) {
  Eigen::Matrix<double, kDof, 1> u;
  for (int a = 0; a < kNumActive; ++a) u[a] = s.qdot[a];
  for (int k = 0; k < kNumBacklash; ++k) {
    u[kBacklashDof + k] = s.backlash[k].offset_velocity;
  }
  u.segment<3>(kStickLinear) = s.linear_velocity;
  u.segment<3>(kStickAngular) = s.angular_velocity;
  return u;
}

// Solves lhs * du = rhs with du[i] = -u[i] (coordinate ends at rest) for the
// locked coordinates; returns u + du.
template <int N>
Eigen::Matrix<double, N, 1> solve_locked(
    const Eigen::Matrix<double, N, N>& lhs,
    const Eigen::Matrix<double, N, 1>& rhs,
    const Eigen::Matrix<double, N, 1>& u, const std::array<bool, N>& locked) {
  std::array<int, N> free_idx{};
  int n_free = 0;
  for (int i = 0; i < N; ++i) {
    if (!locked[i]) free_idx[n_free++] = i;
  }
  Eigen::Matrix<double, N, 1> du = Eigen::Matrix<double, N, 1>::Zero();
  for (int i = 0; i < N; ++i) {
    if (locked[i]) du[i] = -u[i];
  }
  if (n_free == 0) return u + du;
  Eigen::MatrixXd a(n_free, n_free);
  Eigen::VectorXd b(n_free);
  for (int r = 0; r < n_free; ++r) {
    b[r] = rhs[free_idx[r]];
    for (int i = 0; i < N; ++i) {
      if (locked[i]) b[r] -= lhs(free_idx[r], i) * du[i];
    }
    for (int c = 0; c < n_free; ++c) a(r, c) = lhs(free_idx[r], free_idx[c]);
  }
  const Eigen::VectorXd x = a.llt().solve(b);
  for (int r = 0; r < n_free; ++r) du[free_idx[r]] = x[r];
  return u + du;
}

// One inner physics step. Returns the contact set (with the forces applied
// during the step) evaluated at the start-of-step configuration.
inline ContactSet step(const HandModel& model, const StickModel& stick,
                       SimState& s, const JointVector& q_target_in,
                       const PhysicsOptions& opt) {
  using MatD = Eigen::Matrix<double, kDof, kDof>;
  using VecD = Eigen::Matrix<double, kDof, 1>;
  const double dt = opt.dt;

  JointVector q_target = q_target_in;
  for (int a = 0; a < kNumActive; ++a) {
    const JointSpec& j = model.active(a);
    q_target[a] = clamp(q_target[a], j.lower, j.upper);
  }

  const HandPose pose = forward_kinematics(model, s);
  ContactSet contacts = detect_contacts(model.layout, pose, s.stick, stick);

  MatD mass = MatD::Zero();
  MatD damp_cn = MatD::Zero();  // trapezoidal
  MatD damp_be = MatD::Zero();  // backward
  MatD stiff = MatD::Zero();
  VecD force = VecD::Zero();
  const VecD u = pack_velocity(s);

  const double cap = model.torque_cap();
  for (int a = 0; a < kNumActive; ++a) {
    const JointSpec& j = model.active(a);
    if (is_proximal_active(a)) {
      const int b = kBacklashDof + finger_of_active(a);
      const BacklashState& bs = s.backlash[finger_of_active(a)];
      mass(a, a) += j.armature + j.link_inertia;
      mass(a, b) += j.link_inertia;
      mass(b, a) += j.link_inertia;
      mass(b, b) += j.link_inertia;
      const double link_rate = s.qdot[a] + bs.offset_velocity;
      force[a] -= j.damping * link_rate;
      force[b] -= j.damping * link_rate;
      damp_cn(a, a) += j.damping;
      damp_cn(a, b) += j.damping;
      damp_cn(b, a) += j.damping;
      damp_cn(b, b) += j.damping;
      force[b] -= j.backlash_stiffness * bs.offset +
                  j.backlash_damping * bs.offset_velocity;
      stiff(b, b) += j.backlash_stiffness;
      damp_cn(b, b) += j.backlash_damping;
    } else {
      mass(a, a) += j.armature + j.link_inertia;
      force[a] -= j.damping * s.qdot[a];
      damp_cn(a, a) += j.damping;
    }
    const double tau = pd_torque(j, q_target[a], s.q[a], s.qdot[a]);
    if (std::abs(tau) <= cap) {
      force[a] += tau;
      stiff(a, a) += j.kp;
      damp_cn(a, a) += j.kd;
    } else {
      force[a] += tau > 0.0 ? cap : -cap;
    }
  }

  const Mat3 rot = s.stick.orientation.toRotationMatrix();
  const Vec3 principal = stick.principal_inertia();
  const Mat3 inertia_world = rot * principal.asDiagonal() * rot.transpose();
  mass.block<3, 3>(kStickLinear, kStickLinear) =
      stick.mass * Mat3::Identity();
  mass.block<3, 3>(kStickAngular, kStickAngular) = inertia_world;
  if (opt.gravity) force[kStickLinear + 2] -= stick.mass * kGravity;
  force.segment<3>(kStickAngular) -=
      s.angular_velocity.cross(inertia_world * s.angular_velocity);

  const ContactParams& cp = opt.contact;
  for (Contact& c : contacts) {
    const Vec3 p = pose.taxel_world(model.layout, c.taxel);
    const auto jac = contact_jacobian(pose, c, p, s.stick.position);
    const Vec3 v_rel = jac * u;
    const double vn = c.normal.dot(v_rel);
    const Vec3 v_t = v_rel - vn * c.normal;
    const PenaltyForce pf =
        penalty_force(c.penetration, -vn, v_t, cp, stick.friction_mu);
    c.normal_force = pf.normal;
    c.tangential_force = pf.tangential;
    force += jac.transpose() * c.force();

    const VecD gn = jac.transpose() * c.normal;
    stiff += cp.stiffness * gn * gn.transpose();
    if (-vn > 0.0) damp_be += cp.damping * gn * gn.transpose();
    // Friction is integrated implicitly in both regimes; sliding uses the
    // equivalent viscosity mu N / |v_t|. Explicit sliding friction chatters on
    // the small axial inertia of the stick.
    const double speed = v_t.norm();
    const double viscosity =
        speed > 0.0 ? pf.tangential.norm() / speed : cp.friction_viscosity;
    if (viscosity > 0.0) {
      const Mat3 proj = Mat3::Identity() - c.normal * c.normal.transpose();
      damp_be += viscosity * jac.transpose() * proj * jac;
    }
  }

  const MatD lhs =
      mass + 0.5 * dt * damp_cn + dt * damp_be + 0.25 * dt * dt * stiff;
  const VecD rhs = dt * (force - 0.5 * dt * stiff * u);

  // Locked coordinates end the step at rest: the stick when held, and a
  // backlash offset that would leave its gap (gear and link engaged, so the
  // link load reaches the gear inside the solve).
  std::array<bool, kDof> locked{};
  if (opt.stick_fixed) {
    for (int i = kStickLinear; i < kDof; ++i) locked[i] = true;
  }
  VecD u_new = solve_locked<kDof>(lhs, rhs, u, locked);
  // A self-locking gear that would be back-driven is held in the solve too.
  for (int pass = 0; pass < kNumBacklash + kNumActive; ++pass) {
    bool changed = false;
    for (int k = 0; k < kNumBacklash; ++k) {
      const int i = kBacklashDof + k;
      if (locked[i]) continue;
      const JointSpec& j = model.active(kBacklashActive[k]);
      const double predicted =
          s.backlash[k].offset + 0.5 * dt * (u[i] + u_new[i]);
      if (predicted < j.backlash_lo || predicted > j.backlash_hi) {
        locked[i] = true;
        changed = true;
      }
    }
    for (int a = 0; a < kNumActive; ++a) {
      if (locked[a] || !model.active(a).self_lock) continue;
      const int dir = sign_of(q_target[a] - s.q[a]);
      if ((dir == 0 && u_new[a] != 0.0) || u_new[a] * dir < 0.0) {
        locked[a] = true;
        changed = true;
      }
    }
    if (!changed) break;
    u_new = solve_locked<kDof>(lhs, rhs, u, locked);
  }

  // Positions: trapezoidal.
  const SimState before = s;
  for (int a = 0; a < kNumActive; ++a) {
    s.q[a] += 0.5 * dt * (u[a] + u_new[a]);
    s.qdot[a] = u_new[a];
  }
  for (int k = 0; k < kNumBacklash; ++k) {
    auto& b = s.backlash[k];
    const JointSpec& j = model.active(kBacklashActive[k]);
    if (locked[kBacklashDof + k]) {
      const double predicted =
          b.offset + 0.5 * dt * (u[kBacklashDof + k] + u_new[kBacklashDof + k]);
      b.offset = predicted < 0.5 * (j.backlash_lo + j.backlash_hi)
                     ? j.backlash_lo
                     : j.backlash_hi;
    } else {
      b.offset += 0.5 * dt * (u[kBacklashDof + k] + u_new[kBacklashDof + k]);
    }
    b.offset_velocity = u_new[kBacklashDof + k];
  }
  if (opt.stick_fixed) {
    s.linear_velocity.setZero();
    s.angular_velocity.setZero();
  } else {
    const Vec3 v_new = u_new.segment<3>(kStickLinear);
    const Vec3 w_new = u_new.segment<3>(kStickAngular);
    s.stick.position += 0.5 * dt * (s.linear_velocity + v_new);
    const Vec3 w_mid = 0.5 * (s.angular_velocity + w_new);
    s.stick.orientation = (quat_exp(w_mid * dt) * s.stick.orientation);
    s.stick.orientation.normalize();
    s.linear_velocity = v_new;
    s.angular_velocity = w_new;
  }

  for (int a = 0; a < kNumActive; ++a) {
    const JointSpec& j = model.active(a);
    if (is_proximal_active(a)) {
      clamp_backlash(j, s.qdot[a], s.backlash[finger_of_active(a)]);
      apply_self_lock(j, before.q[a], s.q[a], s.qdot[a],
                      sign_of(q_target[a] - before.q[a]));
    }
    clamp_joint_limit(j, s.q[a], s.qdot[a]);
  }

  s.t += dt;
  if (!s.is_finite()) {
    throw NonFiniteState("simulation state became non-finite at t = " +
                         std::to_string(s.t));
  }
  return contacts;
}

// Mechanical energy: stick kinetic + potential, joint kinetic, PD and backlash
// spring potentials for the given held targets.
inline double mechanical_energy(const HandModel& model, const StickModel& stick,
                                const SimState& s, const JointVector& q_target,
                                bool gravity = true) {
  double e = 0.0;
  e += 0.5 * stick.mass * s.linear_velocity.squaredNorm();
  const Mat3 rot = s.stick.orientation.toRotationMatrix();
  const Mat3 inertia =
      rot * stick.principal_inertia().asDiagonal() * rot.transpose();
  e += 0.5 * s.angular_velocity.dot(inertia * s.angular_velocity);
  if (gravity) e += stick.mass * kGravity * s.stick.position.z();
  for (int a = 0; a < kNumActive; ++a) {
    const JointSpec& j = model.active(a);
    const double err = q_target[a] - s.q[a];
    e += 0.5 * j.kp * err * err;
    e += 0.5 * j.armature * s.qdot[a] * s.qdot[a];
    if (is_proximal_active(a)) {
      const auto& b = s.backlash[finger_of_active(a)];
      const double link_rate = s.qdot[a] + b.offset_velocity;
      e += 0.5 * j.link_inertia * link_rate * link_rate;
      e += 0.5 * j.backlash_stiffness * b.offset * b.offset;
    } else {
      e += 0.5 * j.link_inertia * s.qdot[a] * s.qdot[a];
    }
  }
  return e;
}

// ---------------------------------------------------------------------------
// Single joint bench: one actuated joint (optionally with a backlash sub-joint)
// isolated from the hand, driven by its PD controller and an optional external
// torque on the link. Same integration rule as step(). Used for calibration
// and for characterizing backlash.

struct JointBenchState {
  double q = 0.0;
  double qdot = 0.0;
  BacklashState backlash;
  double t = 0.0;

  double link_angle() const { return effective_joint_angle(q, backlash); }
};

inline void bench_step(const JointSpec& j, JointBenchState& s,
                       double q_target, double link_torque, double dt,
                       double torque_cap = 1e300) {
  q_target = clamp(q_target, j.lower, j.upper);
  const bool bl = j.has_backlash();
  Eigen::Matrix2d mass = Eigen::Matrix2d::Zero();
  Eigen::Matrix2d damp = Eigen::Matrix2d::Zero();
  Eigen::Matrix2d stiff = Eigen::Matrix2d::Zero();
  Eigen::Vector2d force = Eigen::Vector2d::Zero();
  const Eigen::Vector2d u(s.qdot, s.backlash.offset_velocity);

  mass(0, 0) = j.armature + j.link_inertia;
  const double link_rate = s.qdot + (bl ? s.backlash.offset_velocity : 0.0);
  force[0] += link_torque - j.damping * link_rate;
  damp(0, 0) += j.damping;
  if (bl) {
    mass(0, 1) = mass(1, 0) = mass(1, 1) = j.link_inertia;
    force[1] += link_torque - j.damping * link_rate -
                j.backlash_stiffness * s.backlash.offset -
                j.backlash_damping * s.backlash.offset_velocity;
    damp(0, 1) += j.damping;
    damp(1, 0) += j.damping;
    damp(1, 1) += j.damping + j.backlash_damping;
    stiff(1, 1) += j.backlash_stiffness;
  } else {
    mass(1, 1) = 1.0;  // inert placeholder row
  }
  const double tau = pd_torque(j, q_target, s.q, s.qdot);
  if (std::abs(tau) <= torque_cap) {
    force[0] += tau;
    stiff(0, 0) += j.kp;
    damp(0, 0) += j.kd;
  } else {
    force[0] += tau > 0.0 ? torque_cap : -torque_cap;
  }
  const Eigen::Matrix2d lhs = mass + 0.5 * dt * damp + 0.25 * dt * dt * stiff;
  const Eigen::Vector2d rhs = dt * (force - 0.5 * dt * stiff * u);
  std::array<bool, 2> locked{false, !bl};
  Eigen::Vector2d u_new = solve_locked<2>(lhs, rhs, u, locked);
  const int dir = sign_of(q_target - s.q);
  double edge = 0.0;
  for (int pass = 0; pass < 2; ++pass) {
    bool changed = false;
    const double p = s.backlash.offset + 0.5 * dt * (u[1] + u_new[1]);
    if (!locked[1] && (p < j.backlash_lo || p > j.backlash_hi)) {
      locked[1] = true;
      edge = p < 0.5 * (j.backlash_lo + j.backlash_hi) ? j.backlash_lo
                                                        : j.backlash_hi;
      changed = true;
    }
    if (bl && j.self_lock && !locked[0] &&
        ((dir == 0 && u_new[0] != 0.0) || u_new[0] * dir < 0.0)) {
      locked[0] = true;
      changed = true;
    }
    if (!changed) break;
    u_new = solve_locked<2>(lhs, rhs, u, locked);
  }
  double predicted = s.backlash.offset + 0.5 * dt * (u[1] + u_new[1]);
  if (bl && locked[1]) predicted = edge;
  if (!bl) u_new[1] = 0.0;

  const double q_before = s.q;
  s.q += 0.5 * dt * (u[0] + u_new[0]);
  s.qdot = u_new[0];
  if (bl) {
    s.backlash.offset = predicted;
    s.backlash.offset_velocity = u_new[1];
    clamp_backlash(j, s.qdot, s.backlash);
    apply_self_lock(j, q_before, s.q, s.qdot, sign_of(q_target - q_before));
  }
  clamp_joint_limit(j, s.q, s.qdot);
  s.t += dt;
  if (!std::isfinite(s.q) || !std::isfinite(s.qdot) ||
      !std::isfinite(s.backlash.offset)) {
    throw NonFiniteState("joint bench state became non-finite");
  }
}

}  // namespace tactile_hand

#endif  // TACTILE_HAND_DYNAMICS_HPP_
