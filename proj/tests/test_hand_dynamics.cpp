#include <cmath>
#include <cstring>
#include <fstream>
#include <sstream>

#include <gtest/gtest.h>

#include "tactile_hand/calibration.hpp"
#include "tactile_hand/dynamics.hpp"
#include "tactile_hand/hand_model.hpp"

using namespace tactile_hand;

namespace {

JointSpec plain_joint(double kp, double kd) {
  JointSpec j;
  j.name = "bench";
  j.kp = kp;
  j.kd = kd;
  j.lower = -2.0;
  j.upper = 2.0;
  return j;
}

JointSpec worm_joint() {
  JointSpec j = plain_joint(2.0, 0.05);
  j.backlash_lo = -0.02;
  j.backlash_hi = 0.02;
  j.self_lock = true;
  return j;
}

// Stick well away from the fingers.
SimState free_state(const Vec3& at) {
  SimState s;
  s.stick = vertical_stick(at);
  return s;
}

}  // namespace

TEST(PdTorque, Examples) {
  JointSpec j;
  j.kp = 10.0;
  j.kd = 1.0;
  EXPECT_DOUBLE_EQ(pd_torque(j, 1.0, 0.5, 0.0), 5.0);
  EXPECT_DOUBLE_EQ(pd_torque(j, 0.3, 0.3, 0.0), 0.0);
  j.kd = 2.0;
  EXPECT_DOUBLE_EQ(pd_torque(j, 0.0, 0.0, 1.0), -2.0);
}

TEST(EffectiveAngle, Examples) {
  EXPECT_DOUBLE_EQ(effective_joint_angle(0.50, {0.03, 0.0}), 0.53);
  EXPECT_DOUBLE_EQ(effective_joint_angle(0.50, {0.0, 0.0}), 0.50);
  EXPECT_DOUBLE_EQ(effective_joint_angle(0.2, {0.05, 0.0}), 0.25);
}

TEST(SelfLock, ReverseMotionUndone) {
  const JointSpec j = worm_joint();
  double q = 0.49, qd = -1.0;
  apply_self_lock(j, 0.5, q, qd, 0);
  EXPECT_EQ(q, 0.5);
  EXPECT_EQ(qd, 0.0);
  q = 0.49;
  qd = -1.0;
  apply_self_lock(j, 0.5, q, qd, +1);
  EXPECT_EQ(q, 0.5);
  EXPECT_EQ(qd, 0.0);
}

TEST(SelfLock, ForwardMotionKept) {
  const JointSpec j = worm_joint();
  double q = 0.51, qd = 1.0;
  apply_self_lock(j, 0.5, q, qd, +1);
  EXPECT_EQ(q, 0.51);
  EXPECT_EQ(qd, 1.0);
}

TEST(SelfLock, LoadCannotBackDriveHeldJoint) {
  const JointSpec j = worm_joint();
  JointBenchState s;
  s.q = 0.5;
  for (int i = 0; i < 2000; ++i) {
    bench_step(j, s, 0.5, -0.5, 1e-3);
    ASSERT_EQ(s.q, 0.5);
  }
  EXPECT_DOUBLE_EQ(s.backlash.offset, j.backlash_lo);
}

TEST(SelfLock, AssistingLoadDoesNotBlockForwardDrive) {
  const JointSpec j = worm_joint();
  JointBenchState s;
  s.q = 0.5;
  double prev = s.q;
  for (int i = 0; i < 1000; ++i) {
    bench_step(j, s, 0.6, 0.01, 1e-3);
    ASSERT_GE(s.q, prev);
    prev = s.q;
  }
  EXPECT_NEAR(s.q, 0.6, 5e-3);
}

TEST(SelfLock, PushInsideGapMovesOnlyTheOffset) {
  // The offset settles where the passive spring balances the push, clamped
  // to the gap; the gear does not move.
  const JointSpec j = worm_joint();
  for (double push : {0.001, -0.0015, 0.5}) {
    JointBenchState s;
    s.q = 0.3;
    for (int i = 0; i < 4000; ++i) bench_step(j, s, 0.3, push, 1e-3);
    const double expect =
        clamp(push / j.backlash_stiffness, j.backlash_lo, j.backlash_hi);
    EXPECT_EQ(s.q, 0.3) << push;
    EXPECT_NEAR(s.backlash.offset, expect, 1e-6) << push;
  }
}

TEST(ForwardKinematics, ZeroPoseMatchesGolden) {
  const HandModel m = HandModel::make_default();
  const HandPose pose = forward_kinematics(m, std::array<double, kNumJoints>{});
  std::ifstream in(std::string(TEST_DATA_DIR) + "/taxels_zero_pose.csv");
  ASSERT_TRUE(in.good());
  const auto golden = read_taxel_csv(in);
  ASSERT_EQ(golden.size(), static_cast<std::size_t>(kNumTaxels));
  for (int i = 0; i < kNumTaxels; ++i) {
    EXPECT_LT((pose.taxel_world(m.layout, i) - golden[i]).norm(), 1e-12) << i;
  }
}

TEST(ForwardKinematics, LocalLayoutMatchesGolden) {
  const TaxelLayout layout = TaxelLayout::make();
  std::ifstream in(std::string(TEST_DATA_DIR) + "/taxels_local.csv");
  const auto golden = read_taxel_csv(in);
  ASSERT_EQ(golden.size(), static_cast<std::size_t>(kTaxelsPerFinger));
  for (int i = 0; i < kTaxelsPerFinger; ++i) {
    EXPECT_LT((layout.positions[i] - golden[i]).norm(), 1e-15);
    EXPECT_NEAR(layout.normals[i].norm(), 1.0, 1e-15);
  }
}

TEST(ForwardKinematics, PlanarChainAtRandomAngles) {
  // Each finger moves in a horizontal plane: the pad center is
  // base + Lp (c1, s1) + pad (c12, s12) + s R (-s12, c12) with flex sign s.
  const HandModel m = HandModel::make_default();
  const auto& g = m.geometry;
  Rng rng(5);
  for (int trial = 0; trial < 50; ++trial) {
    std::array<double, kNumJoints> ang{};
    for (int j : kActiveJoints) ang[j] = uniform(rng, -0.4, 1.2);
    const HandPose pose = forward_kinematics(m, ang);
    for (int f = 0; f < kNumFingers; ++f) {
      const auto& fs = m.fingers[f];
      const double sg = fs.flex_sign;
      const double a1 = sg * ang[fs.proximal];
      const double a12 = a1 + sg * ang[fs.distal];
      const Vec3 expect =
          fs.base + g.proximal_length * Vec3(std::cos(a1), std::sin(a1), 0) +
          g.pad_offset * Vec3(std::cos(a12), std::sin(a12), 0) +
          sg * m.layout.pad_radius * Vec3(-std::sin(a12), std::cos(a12), 0);
      EXPECT_LT((pose.fingers[f].tip_origin - expect).norm(), 1e-14);
    }
  }
}

TEST(ForwardKinematics, FingersAreRigidWithTheBase) {
  const HandModel m0 = HandModel::make_default();
  HandModel m1 = m0;
  m1.base_rotation =
      Eigen::AngleAxisd(0.7, Vec3(1, 2, 3).normalized()).toRotationMatrix();
  m1.base_position = Vec3(0.1, -0.2, 0.3);
  std::array<double, kNumJoints> ang{};
  ang[0] = 0.3;
  ang[4] = -0.2;
  const HandPose p0 = forward_kinematics(m0, ang);
  const HandPose p1 = forward_kinematics(m1, ang);
  for (int i = 0; i < kNumTaxels; ++i) {
    const Vec3 rel = m1.base_rotation.transpose() *
                     (p1.taxel_world(m1.layout, i) - m1.base_position);
    EXPECT_LT((rel - p0.taxel_world(m0.layout, i)).norm(), 1e-14);
  }
}

TEST(ForwardKinematics, Deterministic) {
  const HandModel m = HandModel::make_default();
  SimState s;
  s.q = {0.1, 0.2, 0.3, 0.4, 0.5, 0.6};
  s.backlash[1].offset = 0.01;
  const auto a = forward_kinematics(m, s).taxel_positions(m.layout);
  const auto b = forward_kinematics(m, s).taxel_positions(m.layout);
  EXPECT_EQ(std::memcmp(a.data(), b.data(), a.size() * sizeof(Vec3)), 0);
}

TEST(Step, FreeFall) {
  const HandModel m = HandModel::make_default();
  const StickModel stick;
  SimState s = free_state(Vec3(1, 1, 1));
  PhysicsOptions opt;
  opt.dt = 1e-3;
  for (int i = 0; i < 100; ++i) step(m, stick, s, {}, opt);
  const double expect = -0.5 * kGravity * 0.1 * 0.1;
  EXPECT_NEAR(s.stick.position.z() - 1.0, expect, 0.01 * std::abs(expect));
}

TEST(Step, GravityCompensationLeavesUntouchedStickAtRest) {
  const HandModel m = HandModel::make_default();
  const StickModel stick;
  SimState s = free_state(Vec3(1, 1, 1));
  PhysicsOptions opt;
  opt.gravity = false;
  for (int i = 0; i < 100; ++i) step(m, stick, s, {}, opt);
  EXPECT_EQ(s.stick.position, Vec3(1, 1, 1));
  EXPECT_EQ(s.linear_velocity, Vec3::Zero());
}

TEST(Step, OverdampedJointFollowsClosedForm) {
  // M q'' + c q' + k (q - qd) = 0 from rest, c = kd + passive damping.
  const JointSpec j = plain_joint(2.0, 0.2);
  const double mass = j.armature + j.link_inertia;
  const double c = j.kd + j.damping, k = j.kp;
  const double disc = std::sqrt(c * c - 4.0 * k * mass);
  ASSERT_GT(c * c, 4.0 * k * mass);
  const double r1 = (-c + disc) / (2.0 * mass), r2 = (-c - disc) / (2.0 * mass);
  const double q0 = 0.0, qd = 0.5;
  const double A = -(q0 - qd) * r2 / (r1 - r2), B = (q0 - qd) * r1 / (r1 - r2);
  JointBenchState s;
  s.q = q0;
  double prev = s.q, worst = 0.0;
  for (int i = 1; i <= 1000; ++i) {
    bench_step(j, s, qd, 0.0, 1e-3);
    const double t = i * 1e-3;
    const double exact = qd + A * std::exp(r1 * t) + B * std::exp(r2 * t);
    worst = std::max(worst, std::abs(s.q - exact));
    ASSERT_GE(s.q, prev - 1e-15);
    ASSERT_LE(s.q, qd + 1e-12);
    prev = s.q;
  }
  EXPECT_LT(worst, 2e-3 * std::abs(qd - q0));
}

TEST(Step, EnergyNonIncreasingWithoutContact) {
  const HandModel m = HandModel::make_default();
  const StickModel stick;
  SimState s = free_state(Vec3(0.5, 0.5, 0.5));
  s.angular_velocity = Vec3(0.0, 0.0, 3.0);
  s.q = {0.2, 0.1, -0.1, 0.4, 0.3, 0.0};
  const JointVector target = {0.5, 0.6, 0.3, 0.1, 0.8, 0.2};
  PhysicsOptions opt;
  double e = mechanical_energy(m, stick, s, target);
  double worst = 0.0;
  for (int i = 0; i < 2000; ++i) {
    step(m, stick, s, target, opt);
    const double e1 = mechanical_energy(m, stick, s, target);
    worst = std::max(worst, e1 - e);
    e = e1;
  }
  EXPECT_LE(worst, 1e-6);
}

TEST(Step, QuaternionStaysNormalized) {
  const HandModel m = HandModel::make_default();
  const StickModel stick;
  SimState s = free_state(Vec3(0.5, 0.5, 0.5));
  s.angular_velocity = Vec3(7.0, -3.0, 11.0);
  PhysicsOptions opt;
  for (int i = 0; i < 1000; ++i) {
    step(m, stick, s, {}, opt);
    ASSERT_LT(std::abs(s.stick.orientation.norm() - 1.0), 1e-9);
  }
}

TEST(Step, JointLimitsNeverExceeded) {
  const HandModel m = HandModel::make_default();
  const StickModel stick;
  const NominalGrasp ng = nominal_grasp(m, stick);
  Rng rng(9);
  SimState s;
  s.q = ng.q;
  s.stick = vertical_stick(ng.center);
  PhysicsOptions opt;
  for (int k = 0; k < 40; ++k) {
    JointVector target;
    for (double& t : target) t = uniform(rng, -3.0, 3.0);
    for (int i = 0; i < 25; ++i) {
      step(m, stick, s, target, opt);
      for (int a = 0; a < kNumActive; ++a) {
        ASSERT_GE(s.q[a], m.active(a).lower);
        ASSERT_LE(s.q[a], m.active(a).upper);
      }
      for (int f = 0; f < kNumBacklash; ++f) {
        const JointSpec& j = m.active(kBacklashActive[f]);
        ASSERT_GE(s.backlash[f].offset, j.backlash_lo);
        ASSERT_LE(s.backlash[f].offset, j.backlash_hi);
      }
    }
  }
}

TEST(Step, DeterministicTrajectories) {
  const HandModel m = HandModel::make_default();
  const StickModel stick;
  const NominalGrasp ng = nominal_grasp(m, stick);
  auto run = [&] {
    SimState s;
    s.q = ng.q;
    s.stick = vertical_stick(ng.center + Vec3(0.001, 0.0, 0.0));
    JointVector target = ng.q;
    for (double& t : target) t += 0.05;
    PhysicsOptions opt;
    for (int i = 0; i < 300; ++i) step(m, stick, s, target, opt);
    return s;
  };
  const SimState a = run(), b = run();
  EXPECT_EQ(std::memcmp(a.q.data(), b.q.data(), sizeof(a.q)), 0);
  EXPECT_EQ(a.stick.position, b.stick.position);
  EXPECT_EQ(a.stick.orientation.coeffs(), b.stick.orientation.coeffs());
}

TEST(Step, NonFiniteStateThrows) {
  const HandModel m = HandModel::make_default();
  const StickModel stick;
  SimState s = free_state(Vec3(1, 1, 1));
  s.linear_velocity.x() = std::numeric_limits<double>::quiet_NaN();
  EXPECT_THROW(step(m, stick, s, {}, PhysicsOptions{}), NonFiniteState);
}

TEST(Backlash, TriangleLoopWidthEqualsGap) {
  // Fast enough that link drag beats the backlash spring at both edges and
  // the gap is crossed before the measurement window.
  for (auto [lo, hi] : {std::pair{-0.02, 0.02}, std::pair{-0.03, 0.05}}) {
    JointSpec j = worm_joint();
    j.backlash_lo = lo;
    j.backlash_hi = hi;
    const auto tr = backlash_triangle(j, 0.4, 0.4, 2.0, 3, 1e300);
    EXPECT_NEAR(hysteresis_width(tr, 0.4, 0.4), hi - lo, 1e-6);
  }
}

TEST(HandModel, ConfigRoundTrip) {
  HandModel m = HandModel::make_default();
  m.joints[3].kp = 3.25;
  m.joints[0].backlash_lo = -0.011;
  m.geometry.distal_length = 0.045;
  Config cfg;
  m.write_config(cfg);
  std::stringstream ss;
  cfg.write(ss);
  const HandModel r = HandModel::from_config(Config::parse(ss));
  Config cfg2;
  r.write_config(cfg2);
  std::stringstream s2;
  cfg2.write(s2);
  std::stringstream s1;
  cfg.write(s1);
  EXPECT_EQ(s1.str(), s2.str());
}

TEST(HandModel, ValidationRejectsBadJoints) {
  HandModel m = HandModel::make_default();
  m.joints[1].kp = 0.0;
  EXPECT_THROW(m.validate(), ConfigError);
  m = HandModel::make_default();
  m.joints[0].backlash_lo = 0.01;
  EXPECT_THROW(m.validate(), ConfigError);
  StickModel st;
  st.radius = 0.05;
  EXPECT_THROW(st.validate(), ConfigError);
}
