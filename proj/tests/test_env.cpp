#include <cmath>
#include <memory>
#include <sstream>

#include <gtest/gtest.h>

#include "tactile_hand/env.hpp"

using namespace tactile_hand;

namespace {

const InitialStateSet& shared_states() {
  static const InitialStateSet set = [] {
    InitialStateOptions o;
    o.count = 10;
    o.seed = 21;
    return generate_initial_states(HandModel::make_default(), StickModel{},
                                   InitialStateRanges{}, o, SensorModel{},
                                   ContactParams{});
  }();
  return set;
}

HandEnv make_env(std::uint64_t seed, EnvConfig cfg = {},
                 std::shared_ptr<const InitialStateSet> states = nullptr) {
  const HandModel m = HandModel::make_default();
  const StickModel st;
  if (!states) states = std::make_shared<InitialStateSet>(shared_states());
  return HandEnv(m, st, cfg, RandomizationSpec::from_model(m, st), states, seed);
}

}  // namespace

TEST(Reward, Examples) {
  const RewardWeights w;
  const Vec3 z = Vec3::UnitZ(), x = Vec3::UnitX(), o = Vec3::Zero();
  EXPECT_NEAR(reward(w, z, z, o, o, o, o, 0.0), 0.5, 1e-15);
  EXPECT_NEAR(reward(w, z, x, o, o, o, o, 0.0), 0.5 - 1.5 * std::sqrt(2.0), 1e-12);
  EXPECT_NEAR(reward(w, z, z, o, Vec3(0.01, 0, 0), o, Vec3(0, 0.02, 0), 0.0),
              0.5 - 2.0 * 0.03, 1e-12);
  EXPECT_NEAR(reward(w, z, z, o, o, o, o, 100.0), 0.0, 1e-12);
}

TEST(Reward, NeverAboveConstant) {
  const RewardWeights w;
  Rng rng(3);
  for (int i = 0; i < 1000; ++i) {
    auto v = [&] { return Vec3(uniform(rng, -1, 1), uniform(rng, -1, 1), uniform(rng, -1, 1)); };
    const double r = reward(w, v().normalized(), v().normalized(), v(), v(), v(), v(),
                            uniform(rng, 0.0, 50.0));
    EXPECT_LE(r, w.c);
  }
  RewardWeights bad;
  bad.c = 0.0;
  EXPECT_THROW(bad.validate(), ConfigError);
}

TEST(DesiredAxis, Examples) {
  const Vec3 u = desired_axis(Vec3(0, 0, 1), Vec3::Zero());
  EXPECT_NEAR((u - Vec3::UnitZ()).norm(), 0.0, 1e-15);
  const Vec3 t = desired_axis(Vec3(1, 0, 1), Vec3::Zero());
  EXPECT_NEAR((t - Vec3(1, 0, 1) / std::sqrt(2.0)).norm(), 0.0, 1e-15);
  EXPECT_THROW(desired_axis(Vec3(1, 2, 3), Vec3(1, 2, 3)), DegeneratePoints);
}

TEST(Terminate, Boundary) {
  StickPose s = vertical_stick(Vec3(0, 0, 0.1));
  EXPECT_FALSE(terminate(s, 0.1));
  EXPECT_TRUE(terminate(s, 0.1 + 1e-12));
  EXPECT_FALSE(terminate(s, 0.05));
}

TEST(ApplyAction, Examples) {
  const HandModel m = HandModel::make_default();
  JointVector prev{};
  for (int a = 0; a < kNumActive; ++a) prev[a] = 0.2;
  const JointVector same = apply_action(m, prev, VecX::Zero(kNumActive), 0.05);
  EXPECT_EQ(same, prev);
  const JointVector clipped = apply_action(m, prev, VecX::Constant(kNumActive, 1.0), 0.05);
  for (int a = 0; a < kNumActive; ++a) EXPECT_NEAR(clipped[a], 0.25, 1e-15);
  JointVector edge{};
  for (int a = 0; a < kNumActive; ++a) edge[a] = m.active(a).upper - 0.01;
  const JointVector capped = apply_action(m, edge, VecX::Constant(kNumActive, 0.05), 0.05);
  for (int a = 0; a < kNumActive; ++a) EXPECT_EQ(capped[a], m.active(a).upper);
  EXPECT_THROW(apply_action(m, prev, VecX::Zero(3), 0.05), ShapeMismatch);
}

TEST(Observation, DimensionsAndBounds) {
  for (auto v : {ObsVariant::kContactCenters, ObsVariant::kObjectPose,
                 ObsVariant::kPosePlusCenters, ObsVariant::kRawTactile,
                 ObsVariant::kPosePlusBinary}) {
    EnvConfig cfg;
    cfg.obs = v;
    HandEnv env = make_env(5, cfg);
    const VecX o = env.reset();
    ASSERT_EQ(o.size(), obs_dim(v)) << to_string(v);
    ASSERT_EQ(obs_variant_from_string(to_string(v)), v);
    Rng rng(2);
    for (int s = 0; s < 5; ++s) {
      VecX a(kNumActive);
      for (int i = 0; i < kNumActive; ++i) a[i] = uniform(rng, -3, 3);
      const VecX obs = env.step(a).obs;
      for (int i = 0; i < kNumActive; ++i) {
        EXPECT_GE(obs[i], 0.0);
        EXPECT_LE(obs[i], 1.0);
      }
      EXPECT_NEAR(obs.segment<3>(kNumActive).norm(), 1.0, 1e-12);
    }
  }
  EXPECT_EQ(obs_dim(ObsVariant::kContactCenters), 21);
  EXPECT_EQ(obs_dim(ObsVariant::kRawTactile), 393);
  EXPECT_THROW(obs_variant_from_string("pixels"), UnknownKind);
}

TEST(Observation, NormalizeJoint) {
  JointSpec j;
  j.lower = -0.5;
  j.upper = 1.5;
  EXPECT_EQ(normalize_joint(j, -0.5), 0.0);
  EXPECT_EQ(normalize_joint(j, 1.5), 1.0);
  EXPECT_EQ(normalize_joint(j, 0.5), 0.5);
}

TEST(Observation, MissingContactUsesSentinelAndBit) {
  const HandModel m = HandModel::make_default();
  JointVector q{};
  TactileFrame f;
  for (int i = 0; i < kTaxelsPerFinger; ++i) f.active[kTaxelsPerFinger + i] = i == 5;
  StickPose sp = vertical_stick(Vec3::Zero());
  ObservationInputs in;
  in.model = &m;
  in.q = &q;
  in.frame = &f;
  in.stick = &sp;
  const VecX o = build_observation(ObsVariant::kContactCenters, in);
  const int c0 = kNumActive + 3;
  for (int i = 0; i < 3; ++i) EXPECT_EQ(o[c0 + i], 0.0);
  const Vec3 expect = m.layout.positions[5] / 0.03;
  for (int i = 0; i < 3; ++i) EXPECT_NEAR(o[c0 + 3 + i], expect[i], 1e-12);
  EXPECT_EQ(o[c0 + 9], 0.0);
  EXPECT_EQ(o[c0 + 10], 1.0);
  EXPECT_EQ(o[c0 + 11], 0.0);
}

TEST(Reference, CircleQuarterTurnAndPeriod) {
  ReferenceParams p;
  p.kind = TrajectoryKind::kCircle;
  const Vec3 g(0.05, 0.0, 0.3);
  const auto s0 = sample_reference(p, g, 0.2, 0.0);
  const auto s1 = sample_reference(p, g, 0.2, 0.5);
  const auto s2 = sample_reference(p, g, 0.2, 2.0);
  EXPECT_NEAR((s0.p2 - (g + Vec3(0.02, 0, -0.1))).norm(), 0.0, 1e-15);
  EXPECT_NEAR((s1.p2 - (g + Vec3(0.0, 0.02, -0.1))).norm(), 0.0, 1e-15);
  EXPECT_NEAR((s2.p2 - s0.p2).norm(), 0.0, 1e-15);
  // The axis passes through the pivot and the upper end sits a stick length above.
  EXPECT_NEAR((s1.p1 - s1.p2).norm(), 0.2, 1e-15);
  EXPECT_NEAR(s1.u.cross(g - s1.p2).norm(), 0.0, 1e-15);
}

TEST(Reference, LineParameterization) {
  ReferenceParams p;
  p.kind = TrajectoryKind::kLine;
  Rng rng(8);
  for (int k = 0; k < 50; ++k) {
    p.line_direction = uniform(rng, 0.0, 2.0 * kPi);
    const Eigen::Vector2d d(std::cos(p.line_direction), std::sin(p.line_direction));
    const double t = uniform(rng, 0.0, 1.0);
    EXPECT_NEAR((reference_offset(p, t) - 0.02 * t * d).norm(), 0.0, 1e-15);
    for (double tt : {1.0, 1.5, 3.0, 7.3}) {
      EXPECT_LE(reference_offset(p, tt).norm(), 0.02 + 1e-15);
    }
    EXPECT_NEAR((reference_offset(p, 1.0) - 0.02 * d).norm(), 0.0, 1e-15);
    EXPECT_NEAR(reference_offset(p, 2.0).norm(), 0.0, 1e-15);
  }
}

TEST(Reference, ContinuityWithinSpeedBound) {
  const Vec3 g(0.0, 0.0, 0.3);
  for (const char* kind : {"line", "circle", "spiral", "eight"}) {
    ReferenceParams p;
    p.kind = trajectory_kind_from_string(kind);
    EXPECT_EQ(to_string(p.kind), kind);
    const double L = reference_speed_bound(p);
    const double dt = 1e-3;
    for (double t = 0.0; t < 20.0; t += 0.0137) {
      const double d = (sample_reference(p, g, 0.2, t + dt).p2 -
                        sample_reference(p, g, 0.2, t).p2).norm();
      EXPECT_LE(d, L * dt * (1.0 + 1e-9)) << kind << " t=" << t;
    }
  }
  EXPECT_THROW(trajectory_kind_from_string("square"), UnknownKind);
}

TEST(Reference, SpiralRadiusBounds) {
  ReferenceParams p;
  p.kind = TrajectoryKind::kSpiral;
  double rmin = 1.0, rmax = 0.0;
  for (double t = 0.0; t < 12.0; t += 0.001) {
    const double r = reference_offset(p, t).norm();
    rmin = std::min(rmin, r);
    rmax = std::max(rmax, r);
  }
  EXPECT_NEAR(rmin, 0.005, 1e-6);
  EXPECT_NEAR(rmax, 0.02, 1e-6);
  EXPECT_NEAR(reference_offset(p, 6.0).norm(), 0.02, 1e-12);  // 3 laps at pi rad/s
}

TEST(InitialStates, EveryRecordReverifies) {
  const HandModel m = HandModel::make_default();
  const SensorModel sensor;
  const auto& set = shared_states();
  ASSERT_EQ(set.records.size(), 10u);
  std::stringstream ss;
  write_initial_states(ss, set);
  const InitialStateSet back = read_initial_states(ss);
  ASSERT_EQ(back.records.size(), set.records.size());
  for (const auto& r : back.records) {
    EXPECT_TRUE(all_fingers(fingers_in_contact(m, StickModel{}, r.q, r.stick, sensor,
                                               ContactParams{},
                                               sensor.default_threshold())));
  }
  for (std::size_t i = 0; i < set.records.size(); ++i) {
    EXPECT_EQ(back.records[i].q, set.records[i].q);
    EXPECT_EQ(back.records[i].stick.position, set.records[i].stick.position);
  }
}

TEST(InitialStates, Deterministic) {
  InitialStateOptions o;
  o.count = 10;
  o.seed = 21;
  const auto again = generate_initial_states(HandModel::make_default(), StickModel{},
                                             InitialStateRanges{}, o, SensorModel{},
                                             ContactParams{});
  const auto& set = shared_states();
  ASSERT_EQ(again.attempts, set.attempts);
  for (std::size_t i = 0; i < set.records.size(); ++i) {
    EXPECT_EQ(again.records[i].q, set.records[i].q);
    EXPECT_EQ(again.records[i].stick.orientation.coeffs(),
              set.records[i].stick.orientation.coeffs());
  }
}

TEST(InitialStates, SymmetricPairOfFingersClosesAlike) {
  // Vertical stick a few millimetres toward the palm from the nominal grasp
  // and no joint spread: fingers 1 and 2 mirror each other across z = 0.
  InitialStateRanges r;
  r.joint = 0.0;
  r.lateral = 0.0;
  r.vertical = 0.0;
  r.tilt = 0.0;
  r.center_offset = Vec3(-0.003, 0.0, 0.0);
  InitialStateOptions o;
  o.count = 1;
  const auto set = generate_initial_states(HandModel::make_default(), StickModel{}, r, o,
                                           SensorModel{}, ContactParams{});
  const auto& q = set.records[0].q;
  const double step = o.close_speed * o.dt;
  EXPECT_LE(std::abs(q[2] - q[4]), step + 1e-12);
  EXPECT_LE(std::abs(q[3] - q[5]), step + 1e-12);
}

TEST(InitialStates, BadDistributionsExhaust) {
  InitialStateRanges r;
  r.center_offset = Vec3(0.05, 0.0, 0.0);
  r.lateral = 0.0;
  InitialStateOptions o;
  o.count = 5;
  o.attempt_window = 50;
  EXPECT_THROW(generate_initial_states(HandModel::make_default(), StickModel{}, r, o,
                                       SensorModel{}, ContactParams{}),
               ExhaustedSampling);
}

TEST(InitialStates, MalformedCsvRejected) {
  std::stringstream ss("record_id,q0\n0,1,2\n");
  EXPECT_THROW(read_initial_states(ss), ConfigError);
}

TEST(Reset, DegenerateSpecGivesIdenticalResets) {
  auto one = std::make_shared<InitialStateSet>();
  one->records.push_back(shared_states().records[0]);
  HandEnv env = make_env(4, {}, one);
  env.reset();
  const SimState a = env.state();
  env.reset();
  const SimState b = env.state();
  EXPECT_EQ(a.q, b.q);
  EXPECT_EQ(a.stick.position, b.stick.position);
  EXPECT_EQ(a.stick.orientation.coeffs(), b.stick.orientation.coeffs());
}

TEST(Reset, AnchorIsSettledStickCenter) {
  HandEnv env = make_env(6);
  env.reset();
  EXPECT_EQ(env.anchor(), env.state().stick.position);
  const auto ref = env.reference_at(0.0);
  EXPECT_NEAR((ref.p2 - (env.anchor() + Vec3(0.02, 0.0, -0.1))).norm(), 0.0, 1e-15);
  EnvConfig nominal;
  nominal.anchor_at_start = false;
  HandEnv env2 = make_env(6, nominal);
  env2.reset();
  EXPECT_EQ(env2.anchor(), env2.grasp().center);
}

TEST(Reset, SameSeedSameEpisodePrefix) {
  HandEnv a = make_env(17), b = make_env(17);
  VecX oa = a.reset(), ob = b.reset();
  EXPECT_EQ(oa, ob);
  Rng rng(1);
  for (int s = 0; s < 20; ++s) {
    VecX act(kNumActive);
    for (int i = 0; i < kNumActive; ++i) act[i] = uniform(rng, -1, 1);
    const StepResult ra = a.step(act), rb = b.step(act);
    ASSERT_EQ(ra.obs, rb.obs) << s;
    ASSERT_EQ(ra.reward, rb.reward);
    ASSERT_EQ(ra.terminated, rb.terminated);
  }
}

TEST(Reset, ZeroActionKeepsTarget) {
  HandEnv env = make_env(9);
  env.reset();
  const JointVector before = env.target();
  env.step(VecX::Zero(kNumActive));
  EXPECT_EQ(env.target(), before);
}

TEST(Reset, TruncatesAtHorizon) {
  EnvConfig cfg;
  cfg.horizon = 3;
  HandEnv env = make_env(2, cfg);
  env.reset();
  EXPECT_FALSE(env.step(VecX::Zero(kNumActive)).truncated);
  EXPECT_FALSE(env.step(VecX::Zero(kNumActive)).truncated);
  const StepResult r = env.step(VecX::Zero(kNumActive));
  EXPECT_TRUE(r.truncated || r.terminated);
}

TEST(Randomization, SampledStatistics) {
  const HandModel m = HandModel::make_default();
  const StickModel st;
  RandomizationSpec spec = RandomizationSpec::from_model(m, st);
  spec.stick_mass = {0.03, 0.006, 0.0};
  spec.friction_mu = {0.8, 0.1, 0.0};
  spec.joints[1].kp = {m.active(1).kp, 0.1 * m.active(1).kp, 0.0};
  const int n = 10000;
  Rng rng(5);
  double mass = 0.0, mu = 0.0, kp = 0.0;
  for (int i = 0; i < n; ++i) {
    const SampledParams p = sample_params(spec, m, st, rng);
    ASSERT_GT(p.stick.mass, 0.0);
    mass += p.stick.mass / n;
    mu += p.stick.friction_mu / n;
    kp += p.model.active(1).kp / n;
  }
  EXPECT_NEAR(mass, 0.03, 0.02 * 0.03);
  EXPECT_NEAR(mu, 0.8, 0.02 * 0.8);
  EXPECT_NEAR(kp, m.active(1).kp, 0.02 * m.active(1).kp);
}

TEST(EnvConfig, RoundTrip) {
  EnvConfig c;
  c.reference.kind = TrajectoryKind::kSpiral;
  c.obs = ObsVariant::kPosePlusBinary;
  c.horizon = 250;
  c.anchor_at_start = false;
  c.weights.w_force = 0.01;
  Config cfg;
  c.write_config(cfg);
  std::stringstream ss;
  cfg.write(ss);
  const EnvConfig b = EnvConfig::from_config(Config::parse(ss));
  EXPECT_EQ(b.reference.kind, c.reference.kind);
  EXPECT_EQ(b.obs, c.obs);
  EXPECT_EQ(b.horizon, 250);
  EXPECT_FALSE(b.anchor_at_start);
  EXPECT_EQ(b.weights.w_force, 0.01);
}

TEST(EpisodeLog, RowsMatchHeader) {
  HandEnv env = make_env(3);
  env.reset();
  EpisodeLog log;
  log.steps.push_back(log_step(env, env.step(VecX::Zero(kNumActive))));
  std::stringstream ss;
  write_episode_header(ss);
  write_episode_rows(ss, 0, log);
  std::string header, row;
  std::getline(ss, header);
  std::getline(ss, row);
  EXPECT_EQ(std::count(header.begin(), header.end(), ','),
            std::count(row.begin(), row.end(), ','));
}
