#include <algorithm>
#include <cmath>
#include <sstream>
#include <vector>

#include <gtest/gtest.h>

#include "tactile_hand/dynamics.hpp"
#include "tactile_hand/tactile.hpp"

using namespace tactile_hand;

namespace {

// Distance from p to segment ab by ternary search on the segment parameter.
double naive_segment_distance(const Vec3& p, const Vec3& a, const Vec3& b) {
  double lo = 0.0, hi = 1.0;
  auto d = [&](double t) { return (a + t * (b - a) - p).norm(); };
  for (int i = 0; i < 200; ++i) {
    const double m1 = lo + (hi - lo) / 3.0, m2 = hi - (hi - lo) / 3.0;
    if (d(m1) < d(m2)) {
      hi = m2;
    } else {
      lo = m1;
    }
  }
  return d(0.5 * (lo + hi));
}

Quat axis_to(const Vec3& dir) {
  return Quat::FromTwoVectors(Vec3::UnitZ(), dir.normalized());
}

Contact contact_at(int taxel, double normal_force) {
  Contact c;
  c.taxel = taxel;
  c.normal_force = normal_force;
  return c;
}

SensorModel quiet_sensor() {
  SensorModel s;
  s.noise_std = 0.0;
  s.crosstalk_amplitude = 0.0;
  return s;
}

}  // namespace

TEST(TaxelLayout, GridInvariants) {
  const TaxelLayout l = TaxelLayout::make();
  ASSERT_EQ(static_cast<int>(l.positions.size()), 128);
  ASSERT_EQ(static_cast<int>(l.normals.size()), 128);
  for (int i = 0; i < 128; ++i) {
    EXPECT_NEAR(l.normals[i].norm(), 1.0, 1e-15);
    EXPECT_LE(std::abs(l.positions[i].x()), 0.5 * l.pad_length + 1e-15);
    EXPECT_LE(l.positions[i].z(), 1e-15);
    // On the pad cylinder around local x at depth pad_radius.
    const double r = std::hypot(l.positions[i].y(), l.positions[i].z() + l.pad_radius);
    EXPECT_NEAR(r, l.pad_radius, 1e-15);
  }
  EXPECT_THROW(TaxelLayout::make(8, 15), ConfigError);
}

TEST(TaxelLayout, CsvRoundTrip) {
  const TaxelLayout l = TaxelLayout::make();
  std::stringstream ss;
  write_taxel_csv(ss, l.positions);
  const auto back = read_taxel_csv(ss);
  ASSERT_EQ(back.size(), l.positions.size());
  for (std::size_t i = 0; i < back.size(); ++i) EXPECT_EQ(back[i], l.positions[i]);
}

TEST(DetectContacts, AxisThroughRingsGivesEqualPenetration) {
  // Stick axis on the pad cylinder axis: every site of finger 0 is one pad
  // radius away from it.
  const HandModel m = HandModel::make_default();
  const HandPose pose = forward_kinematics(m, std::array<double, kNumJoints>{});
  const auto& f = pose.fingers[0];
  StickModel stick;
  stick.radius = m.layout.pad_radius - m.layout.sensing_radius + 0.001;
  StickPose sp;
  sp.position = f.tip_origin + f.tip_rotation * Vec3(0, 0, -m.layout.pad_radius);
  sp.orientation = axis_to(f.tip_rotation.col(0));
  const ContactSet cs = detect_contacts(m.layout, pose, sp, stick);
  ASSERT_EQ(static_cast<int>(cs.size()), kTaxelsPerFinger);
  for (const auto& c : cs) {
    EXPECT_EQ(TaxelLayout::finger_of(c.taxel), 0);
    EXPECT_NEAR(c.penetration, 0.001, 1e-12);
  }
}

TEST(DetectContacts, FarStickGivesNoContacts) {
  const HandModel m = HandModel::make_default();
  const HandPose pose = forward_kinematics(m, std::array<double, kNumJoints>{});
  const StickPose sp = vertical_stick(Vec3(1.0, 1.0, 0.0));
  EXPECT_TRUE(detect_contacts(m.layout, pose, sp, StickModel{}).empty());
}

TEST(DetectContacts, MatchesBruteForceOracle) {
  const HandModel m = HandModel::make_default();
  const StickModel stick;
  const NominalGrasp ng = nominal_grasp(m, stick);
  const double reach = stick.radius + m.layout.sensing_radius;
  Rng rng(21);
  int total = 0;
  for (int trial = 0; trial < 1000; ++trial) {
    SimState s;
    for (int a = 0; a < kNumActive; ++a) s.q[a] = ng.q[a] + uniform(rng, -0.1, 0.1);
    s.stick.position = ng.center + Vec3(uniform(rng, -0.01, 0.01),
                                        uniform(rng, -0.01, 0.01),
                                        uniform(rng, -0.05, 0.05));
    s.stick.orientation =
        axis_to(Vec3(uniform(rng, -0.3, 0.3), uniform(rng, -0.3, 0.3), 1.0));
    const HandPose pose = forward_kinematics(m, s);
    const ContactSet cs = detect_contacts(m.layout, pose, s.stick, stick);
    const Vec3 a = s.stick.lower_end(stick.length), b = s.stick.upper_end(stick.length);
    std::vector<double> expect(kNumTaxels, -1.0);
    for (int i = 0; i < kNumTaxels; ++i) {
      const double d = naive_segment_distance(pose.taxel_world(m.layout, i), a, b);
      if (d < reach) expect[i] = reach - d;
    }
    std::vector<double> got(kNumTaxels, -1.0);
    for (const auto& c : cs) {
      got[c.taxel] = c.penetration;
      EXPECT_GE(c.penetration, 0.0);
      EXPECT_NEAR(c.normal.norm(), 1.0, 1e-12);
    }
    for (int i = 0; i < kNumTaxels; ++i) {
      // Sites within 1e-9 of the boundary may fall either way.
      if (std::abs(expect[i]) < 1e-9 || std::abs(got[i]) < 1e-9) continue;
      ASSERT_EQ(expect[i] >= 0.0, got[i] >= 0.0) << trial << ' ' << i;
      if (got[i] >= 0.0) {
        EXPECT_NEAR(got[i], expect[i], 1e-9);
      }
    }
    total += static_cast<int>(cs.size());
  }
  EXPECT_GT(total, 1000);
}

TEST(PenaltyForce, Examples) {
  const ContactParams p;  // 5000 N/m, 50 N s/m
  const auto f = penalty_force(0.001, 0.0, Vec3::Zero(), p, 1.0);
  EXPECT_DOUBLE_EQ(f.normal, 5.0);
  EXPECT_EQ(f.tangential, Vec3::Zero());
  const auto z = penalty_force(0.0, 1.0, Vec3(1, 0, 0), p, 1.0);
  EXPECT_EQ(z.normal, 0.0);
  EXPECT_EQ(z.tangential, Vec3::Zero());
  const auto slip = penalty_force(0.001, 0.0, Vec3(0.5, 0, 0), p, 0.8);
  EXPECT_DOUBLE_EQ(slip.tangential.norm(), 0.8 * 5.0);
  EXPECT_LT(slip.tangential.x(), 0.0);
  // Damping only while penetration grows.
  EXPECT_DOUBLE_EQ(penalty_force(0.001, 0.1, Vec3::Zero(), p, 1.0).normal, 10.0);
  EXPECT_DOUBLE_EQ(penalty_force(0.001, -0.1, Vec3::Zero(), p, 1.0).normal, 5.0);
}

TEST(PenaltyForce, ConeFeasibility) {
  const ContactParams p;
  Rng rng(4);
  for (int i = 0; i < 10000; ++i) {
    const double mu = uniform(rng, 0.1, 2.0);
    const auto f = penalty_force(uniform(rng, 0.0, 0.003), uniform(rng, -1, 1),
                                 Vec3(uniform(rng, -1, 1), uniform(rng, -1, 1), 0.0) *
                                     std::pow(10.0, uniform(rng, -6, 0)),
                                 p, mu);
    EXPECT_GE(f.normal, 0.0);
    EXPECT_LE(f.tangential.norm(), mu * f.normal + 1e-9);
  }
}

TEST(SynthesizeRaw, Proportional) {
  const TaxelLayout l = TaxelLayout::make();
  const auto raw = synthesize_raw({contact_at(5, 2.0)}, l, quiet_sensor(), {}, nullptr);
  for (int i = 0; i < kNumTaxels; ++i) EXPECT_EQ(raw[i], i == 5 ? 20.0 : 0.0);
}

TEST(SynthesizeRaw, DriftOnIdleTaxel) {
  const TaxelLayout l = TaxelLayout::make();
  std::vector<double> drift(kNumTaxels, 0.0);
  drift[200] = 3.0;
  const auto raw = synthesize_raw({}, l, quiet_sensor(), drift, nullptr);
  EXPECT_EQ(raw[200], 3.0);
  EXPECT_EQ(raw[201], 0.0);
}

TEST(SynthesizeRaw, CrosstalkKernelByHand) {
  // Corner site (row 0, column 0): its only neighbor within 2.5 mm is the
  // next column, one column pitch away. Choosing sigma so the Gaussian is 1/2
  // there, the neighbor reads 0.5 * 10 * 2.
  const TaxelLayout l = TaxelLayout::make();
  const double pitch = l.column_pitch();
  SensorModel s = quiet_sensor();
  s.crosstalk_amplitude = 1.0;
  s.crosstalk_radius = 0.0025;
  s.crosstalk_sigma = pitch / std::sqrt(2.0 * std::log(2.0));
  const auto raw = synthesize_raw({contact_at(0, 2.0)}, l, s, {}, nullptr);
  EXPECT_DOUBLE_EQ(raw[0], 20.0);
  EXPECT_NEAR(raw[1], 10.0, 1e-12);
  int lit = 0;
  for (double v : raw) lit += v > 0.0;
  EXPECT_EQ(lit, 2);
}

TEST(SynthesizeRaw, FlooredAtZero) {
  const TaxelLayout l = TaxelLayout::make();
  SensorModel s;
  s.noise_std = 5.0;
  Rng rng(3);
  std::vector<double> drift(kNumTaxels, -2.0);
  const auto raw = synthesize_raw({}, l, s, drift, &rng);
  for (double v : raw) EXPECT_GE(v, 0.0);
}

TEST(CalibrateOffsets, Examples) {
  std::vector<TaxelArray> frames(2);
  frames[0].fill(0.0);
  frames[1].fill(0.0);
  frames[0][7] = 2.0;
  frames[1][7] = 4.0;
  EXPECT_EQ(calibrate_offsets(frames)[7], 3.0);
  std::vector<TaxelArray> one(1);
  one[0].fill(1.25);
  EXPECT_EQ(calibrate_offsets(one)[100], 1.25);
  std::vector<TaxelArray> zeros(5);
  for (auto& f : zeros) f.fill(0.0);
  for (double o : calibrate_offsets(zeros)) EXPECT_EQ(o, 0.0);
  EXPECT_THROW(calibrate_offsets(std::span<const TaxelArray>{}), EmptyWindow);
}

TEST(Binarize, Examples) {
  TactileFrame f;
  f.threshold = 1.0;
  f.raw[0] = 5.0;
  f.offsets[0] = 2.0;
  f.raw[1] = 1.0;
  f.offsets[1] = 2.0;
  f.raw[2] = 3.0;
  f.offsets[2] = 2.0;
  binarize(f);
  EXPECT_EQ(f.calibrated[0], 3.0);
  EXPECT_TRUE(f.active[0]);
  EXPECT_EQ(f.calibrated[1], 0.0);
  EXPECT_FALSE(f.active[1]);
  EXPECT_EQ(f.calibrated[2], 1.0);
  EXPECT_FALSE(f.active[2]);  // strict inequality
  const auto mask = f.active;
  binarize(f);
  EXPECT_EQ(mask, f.active);
}

TEST(Binarize, RandomPairsAreExact) {
  Rng rng(8);
  for (int k = 0; k < 100; ++k) {
    TactileFrame f;
    for (int i = 0; i < kNumTaxels; ++i) {
      f.raw[i] = uniform(rng, 0.0, 30.0);
      f.offsets[i] = uniform(rng, 0.0, 30.0);
    }
    binarize(f);
    for (int i = 0; i < kNumTaxels; ++i) {
      ASSERT_EQ(f.calibrated[i], std::max(f.raw[i] - f.offsets[i], 0.0));
      ASSERT_GE(f.calibrated[i], 0.0);
      ASSERT_EQ(f.active[i], f.calibrated[i] > f.threshold);
    }
  }
}

TEST(Binarize, DriftFilteredAfterCalibration) {
  const TaxelLayout l = TaxelLayout::make();
  const SensorModel s = quiet_sensor();
  Rng rng(2);
  std::vector<double> drift(kNumTaxels);
  for (double& d : drift) d = uniform(rng, 0.0, 20.0);
  std::vector<TaxelArray> rest(10);
  for (auto& r : rest) r = synthesize_raw({}, l, s, drift, nullptr);
  TactileFrame f;
  f.offsets = calibrate_offsets(rest);
  f.threshold = 1e-9;
  f.raw = synthesize_raw({}, l, s, drift, nullptr);
  binarize(f);
  for (bool a : f.active) EXPECT_FALSE(a);
}

TEST(ContactCenter, Examples) {
  TaxelLayout l = TaxelLayout::make();
  l.positions[0] = Vec3(0, 0, 0);
  l.positions[1] = Vec3(0.02, 0, 0);
  TactileFrame f;
  f.active[0] = f.active[1] = true;
  EXPECT_LT((*contact_center(f, l, 0) - Vec3(0.01, 0, 0)).norm(), 1e-15);
  EXPECT_LT((*contact_center(f, l, 0, 2.0) - Vec3(0.02, 0, 0)).norm(), 1e-15);
  f.active[1] = false;
  EXPECT_EQ(*contact_center(f, l, 0), l.positions[0]);
  EXPECT_FALSE(contact_center(f, l, 1).has_value());
}

TEST(ContactCenter, NaiveMeanAndContainment) {
  const TaxelLayout l = TaxelLayout::make();
  Rng rng(17);
  for (int k = 0; k < 1000; ++k) {
    TactileFrame f;
    const int n = 1 + static_cast<int>(uniform01(rng) * 20);
    for (int j = 0; j < n; ++j) {
      const int id = static_cast<int>(uniform01(rng) * kTaxelsPerFinger);
      f.active[128 + id] = true;
    }
    Vec3 sum = Vec3::Zero(), lo = Vec3::Constant(1e9), hi = Vec3::Constant(-1e9);
    int count = 0;
    for (int i = 0; i < kTaxelsPerFinger; ++i) {
      if (!f.active[128 + i]) continue;
      sum += l.positions[i];
      lo = lo.cwiseMin(l.positions[i]);
      hi = hi.cwiseMax(l.positions[i]);
      ++count;
    }
    const auto c = contact_center(f, l, 1);
    ASSERT_TRUE(c.has_value());
    EXPECT_LE((*c - sum / count).norm(), 1e-12);
    EXPECT_TRUE(((*c).array() >= lo.array() - 1e-15).all());
    EXPECT_TRUE(((*c).array() <= hi.array() + 1e-15).all());
  }
}

TEST(FrameDump, Rows) {
  TactileFrame f;
  f.t = 0.5;
  f.raw[130] = 4.0;
  f.threshold = 1.0;
  binarize(f);
  std::stringstream ss;
  write_frame_header(ss);
  write_frame_rows(ss, f);
  EXPECT_EQ(ss.str(), "t,finger,taxel,raw,calibrated,active\n0.5,1,2,4,4,1\n");
}
