#ifndef TACTILE_HAND_ENV_HPP_
#define TACTILE_HAND_ENV_HPP_

// The stick-steering task: reward, termination, observations, actions,
// initial-state generation, episode reset and the environment itself.

#include <fstream>
#include <iomanip>
#include <memory>
#include <ostream>
#include <sstream>
#include <string>
#include <vector>

#include "tactile_hand/common.hpp"
#include "tactile_hand/config.hpp"
#include "tactile_hand/dynamics.hpp"
#include "tactile_hand/environment.hpp"
#include "tactile_hand/hand_model.hpp"
#include "tactile_hand/randomization.hpp"
#include "tactile_hand/reference.hpp"
#include "tactile_hand/tactile.hpp"

namespace tactile_hand {

// ---------------------------------------------------------------------------
// Reward and termination.

struct RewardWeights {
  double c = 0.5;
  double w_axis = 1.5;
  double w_pos = 2.0;
  double w_force = 0.005;

  void validate() const {
    if (!(c > 0.0) || w_axis < 0.0 || w_pos < 0.0 || w_force < 0.0) {
      throw ConfigError("reward weights: need C > 0 and non-negative weights");
    }
  }
};

// C - w0 |ud - uc| - w1 (|P1d - P1c| + |P2d - P2c|) - w2 sum f.
inline double reward(const RewardWeights& w, const Vec3& u_d, const Vec3& u_c,
                     const Vec3& p1_d, const Vec3& p1_c, const Vec3& p2_d,
                     const Vec3& p2_c, double total_force) {
  return w.c - w.w_axis * (u_d - u_c).norm() -
         w.w_pos * ((p1_d - p1_c).norm() + (p2_d - p2_c).norm()) -
         w.w_force * total_force;
}

inline double total_contact_force(const ContactSet& contacts) {
  double f = 0.0;
  for (const auto& c : contacts) f += c.force_magnitude();
  return f;
}

inline bool terminate(const StickPose& stick, double threshold_height) {
  return stick.position.z() < threshold_height;
}

// Angle between two unit vectors, radians.
inline double axis_angle(const Vec3& a, const Vec3& b) {
  return std::atan2(a.cross(b).norm(), a.dot(b));
}

// ---------------------------------------------------------------------------
// Observations.

enum class ObsVariant {
  kContactCenters,
  kObjectPose,
  kPosePlusCenters,
  kRawTactile,
  kPosePlusBinary
};

inline ObsVariant obs_variant_from_string(const std::string& s) {
  if (s == "contact_centers") return ObsVariant::kContactCenters;
  if (s == "object_pose") return ObsVariant::kObjectPose;
  if (s == "pose_plus_centers") return ObsVariant::kPosePlusCenters;
  if (s == "raw_tactile") return ObsVariant::kRawTactile;
  if (s == "pose_plus_binary") return ObsVariant::kPosePlusBinary;
  throw UnknownKind("unknown observation variant: " + s);
}

inline std::string to_string(ObsVariant v) {
  switch (v) {
    case ObsVariant::kContactCenters: return "contact_centers";
    case ObsVariant::kObjectPose: return "object_pose";
    case ObsVariant::kPosePlusCenters: return "pose_plus_centers";
    case ObsVariant::kRawTactile: return "raw_tactile";
    case ObsVariant::kPosePlusBinary: return "pose_plus_binary";
  }
  return "unknown";
}

// 6 normalized joints + 3 reference axis, then the payload:
//   centers: 3 x (x, y, z) scaled, then 3 validity bits      -> 12
//   pose: (position - grasp center) / pose_scale, axis        -> 6
//   raw: 384 binarized taxels
//   binary: 3 per-finger contact flags
inline int obs_dim(ObsVariant v) {
  const int base = kNumActive + 3;
  switch (v) {
    case ObsVariant::kContactCenters: return base + 12;
    case ObsVariant::kObjectPose: return base + 6;
    case ObsVariant::kPosePlusCenters: return base + 18;
    case ObsVariant::kRawTactile: return base + kNumTaxels;
    case ObsVariant::kPosePlusBinary: return base + 6 + 3;
  }
  return base;
}

struct ObservationInputs {
  const HandModel* model = nullptr;
  const JointVector* q = nullptr;
  const TactileFrame* frame = nullptr;
  const StickPose* stick = nullptr;
  Vec3 u_d = Vec3::UnitZ();
  Vec3 grasp_center = Vec3::Zero();
  double center_scale = 1.0 / 0.03;
  double pose_scale = 1.0 / 0.03;
};

inline double normalize_joint(const JointSpec& j, double q) {
  return (q - j.lower) / (j.upper - j.lower);
}

inline VecX build_observation(ObsVariant v, const ObservationInputs& in) {
  VecX obs(obs_dim(v));
  int k = 0;
  for (int a = 0; a < kNumActive; ++a) {
    obs[k++] = clamp(normalize_joint(in.model->active(a), (*in.q)[a]), 0.0, 1.0);
  }
  for (int i = 0; i < 3; ++i) obs[k++] = in.u_d[i];

  auto put_centers = [&] {
    std::array<bool, kNumFingers> valid{};
    for (int f = 0; f < kNumFingers; ++f) {
      const auto c =
          contact_center(*in.frame, in.model->layout, f, in.center_scale);
      valid[f] = c.has_value();
      const Vec3 p = c.value_or(Vec3::Zero());
      for (int i = 0; i < 3; ++i) obs[k++] = p[i];
    }
    for (int f = 0; f < kNumFingers; ++f) obs[k++] = valid[f] ? 1.0 : 0.0;
  };
  auto put_pose = [&] {
    const Vec3 p = (in.stick->position - in.grasp_center) * in.pose_scale;
    const Vec3 u = in.stick->axis();
    for (int i = 0; i < 3; ++i) obs[k++] = p[i];
    for (int i = 0; i < 3; ++i) obs[k++] = u[i];
  };

  switch (v) {
    case ObsVariant::kContactCenters:
      put_centers();
      break;
    case ObsVariant::kObjectPose:
      put_pose();
      break;
    case ObsVariant::kPosePlusCenters:
      put_pose();
      put_centers();
      break;
    case ObsVariant::kRawTactile:
      for (int i = 0; i < kNumTaxels; ++i) {
        obs[k++] = in.frame->active[i] ? 1.0 : 0.0;
      }
      break;
    case ObsVariant::kPosePlusBinary:
      put_pose();
      for (int f = 0; f < kNumFingers; ++f) {
        obs[k++] = in.frame->active_count(f) > 0 ? 1.0 : 0.0;
      }
      break;
  }
  return obs;
}

// ---------------------------------------------------------------------------
// Actions.

// The displacement is added to the previously commanded target (not the
// measured position), so a zero action keeps the grasp preload.
inline JointVector apply_action(const HandModel& model,
                                const JointVector& previous_target,
                                const VecX& action, double delta_max) {
  if (action.size() != kNumActive) {
    throw ShapeMismatch("apply_action: expected 6 displacements");
  }
  JointVector target{};
  for (int a = 0; a < kNumActive; ++a) {
    const JointSpec& j = model.active(a);
    const double d = clamp(action[a], -delta_max, delta_max);
    target[a] = clamp(previous_target[a] + d, j.lower, j.upper);
  }
  return target;
}

// ---------------------------------------------------------------------------
// Initial states.

struct InitialState {
  JointVector q{};
  StickPose stick;
};

struct InitialStateRanges {
  double joint = 0.3;        // +/- rad around the nominal grasp
  double lateral = 0.01;     // +/- m in x and y
  double vertical = 0.02;    // +/- m in z
  double tilt = 15.0 * kPi / 180.0;  // max axis tilt from vertical
  Vec3 center_offset = Vec3::Zero();  // shifts the object box
};

struct InitialStateSet {
  std::vector<InitialState> records;
  InitialStateRanges ranges;
  std::uint64_t seed = 0;
  int attempts = 0;
};

inline void write_initial_states(std::ostream& out, const InitialStateSet& s) {
  out << "# initial states: joint=" << s.ranges.joint
      << " lateral=" << s.ranges.lateral << " vertical=" << s.ranges.vertical
      << " tilt=" << s.ranges.tilt << " seed=" << s.seed
      << " attempts=" << s.attempts << '\n';
  out << "record_id,q0,q1,q2,q3,q4,q5,x,y,z,qw,qx,qy,qz\n";
  out << std::setprecision(17);
  for (std::size_t i = 0; i < s.records.size(); ++i) {
    const auto& r = s.records[i];
    out << i;
    for (double q : r.q) out << ',' << q;
    const auto& p = r.stick.position;
    const auto& o = r.stick.orientation;
    out << ',' << p.x() << ',' << p.y() << ',' << p.z() << ',' << o.w() << ','
        << o.x() << ',' << o.y() << ',' << o.z() << '\n';
  }
}

inline InitialStateSet read_initial_states(std::istream& in) {
  InitialStateSet s;
  std::string line;
  bool header = false;
  int line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty() || line[0] == '#') continue;
    if (!header) {
      header = true;
      continue;
    }
    std::stringstream ss(line);
    std::string cell;
    std::vector<double> v;
    try {
      while (std::getline(ss, cell, ',')) v.push_back(std::stod(cell));
    } catch (const std::exception&) {
      throw ConfigError("initial states line " + std::to_string(line_no) +
                        ": not a number");
    }
    if (v.size() != 14) {
      throw ConfigError("initial states line " + std::to_string(line_no) +
                        ": expected 14 columns");
    }
    InitialState r;
    for (int a = 0; a < kNumActive; ++a) r.q[a] = v[1 + a];
    r.stick.position = Vec3(v[7], v[8], v[9]);
    r.stick.orientation = Quat(v[10], v[11], v[12], v[13]).normalized();
    s.records.push_back(r);
  }
  return s;
}

// Noise-free tactile activity of a static configuration: a finger registers
// contact when some taxel's calibrated signal (gain * k * penetration)
// exceeds the threshold.
inline std::array<bool, kNumFingers> fingers_in_contact(
    const HandModel& model, const StickModel& stick, const JointVector& q,
    const StickPose& pose, const SensorModel& sensor,
    const ContactParams& params, double threshold) {
  SimState s;
  s.q = q;
  s.stick = pose;
  const HandPose hp = forward_kinematics(model, s);
  const ContactSet cs = detect_contacts(model.layout, hp, pose, stick);
  std::array<bool, kNumFingers> out{};
  for (const auto& c : cs) {
    if (sensor.gain * params.stiffness * c.penetration > threshold) {
      out[TaxelLayout::finger_of(c.taxel)] = true;
    }
  }
  return out;
}

inline bool all_fingers(const std::array<bool, kNumFingers>& a) {
  return a[0] && a[1] && a[2];
}

struct InitialStateOptions {
  int count = 100;
  double close_speed = 0.5;  // rad/s on every joint
  double dt = 1e-3;
  double max_close_time = 3.0;
  std::uint64_t seed = 0;
  int attempt_window = 1000;  // acceptance is checked over this many tries
  double min_acceptance = 0.01;
};

// Samples a joint posture and a stick pose, holds the stick, and closes each
// finger at constant speed until it registers contact. Samples that start in
// contact or do not reach three-finger contact are discarded.
inline InitialStateSet generate_initial_states(
    const HandModel& model, const StickModel& stick,
    const InitialStateRanges& ranges, const InitialStateOptions& opt,
    const SensorModel& sensor, const ContactParams& params,
    std::ostream* log = nullptr) {
  InitialStateSet set;
  set.ranges = ranges;
  set.seed = opt.seed;
  if (opt.count <= 0) return set;
  const NominalGrasp ng = nominal_grasp(model, stick);
  const double threshold = sensor.default_threshold();
  Rng rng(opt.seed);
  const int max_steps = static_cast<int>(opt.max_close_time / opt.dt);
  int accepted = 0;
  int rejected_start = 0, rejected_close = 0;
  while (accepted < opt.count) {
    ++set.attempts;
    InitialState r;
    for (int a = 0; a < kNumActive; ++a) {
      const JointSpec& j = model.active(a);
      r.q[a] = clamp(ng.q[a] + uniform(rng, -ranges.joint, ranges.joint),
                     j.lower, j.upper);
    }
    r.stick.position =
        ng.center + ranges.center_offset +
        Vec3(uniform(rng, -ranges.lateral, ranges.lateral),
             uniform(rng, -ranges.lateral, ranges.lateral),
             uniform(rng, -ranges.vertical, ranges.vertical));
    // Tilt uniform in [0, max] about a uniformly random horizontal axis.
    const double tilt = uniform(rng, 0.0, ranges.tilt);
    const double az = uniform(rng, 0.0, 2.0 * kPi);
    r.stick.orientation =
        Quat(Eigen::AngleAxisd(tilt, Vec3(std::cos(az), std::sin(az), 0.0)));

    const auto start =
        fingers_in_contact(model, stick, r.q, r.stick, sensor, params, 0.0);
    const bool started_in_contact = start[0] || start[1] || start[2];
    bool ok = !started_in_contact;
    std::array<bool, kNumFingers> done{};
    for (int step = 0; ok && step < max_steps && !all_fingers(done); ++step) {
      const auto touch = fingers_in_contact(model, stick, r.q, r.stick, sensor,
                                            params, threshold);
      for (int f = 0; f < kNumFingers; ++f) {
        if (done[f]) continue;
        if (touch[f]) {
          done[f] = true;
          continue;
        }
        for (int a = 2 * f; a < 2 * f + 2; ++a) {
          const JointSpec& j = model.active(a);
          r.q[a] += opt.close_speed * opt.dt;
          if (r.q[a] > j.upper) ok = false;
        }
      }
    }
    if (ok && all_fingers(done)) {
      set.records.push_back(r);
      ++accepted;
    } else if (started_in_contact) {
      ++rejected_start;
    } else {
      ++rejected_close;
    }
    if (set.attempts % opt.attempt_window == 0 &&
        accepted < opt.min_acceptance * set.attempts) {
      throw ExhaustedSampling(
          "initial states: acceptance " + std::to_string(accepted) + "/" +
          std::to_string(set.attempts) + " is below " +
          std::to_string(100.0 * opt.min_acceptance) + "%");
    }
  }
  if (log) {
    *log << "initial states: accepted " << accepted << " of " << set.attempts
         << " (in contact at start: " << rejected_start
         << ", no three-finger contact: " << rejected_close << ")\n";
  }
  return set;
}

// ---------------------------------------------------------------------------
// Environment.

struct EnvConfig {
  ReferenceParams reference;
  bool random_line_direction = true;
  ObsVariant obs = ObsVariant::kContactCenters;
  RewardWeights weights;
  double delta_max = 0.05;   // rad per policy step
  double action_scale = 0.05;  // policy output units -> rad
  int inner_steps = 20;
  double dt = 1e-3;
  int horizon = 500;
  double settle_time = 0.1;   // gravity compensated
  double preload = 0.05;      // rad added to every target during settle
  // Reference pivot: the stick center after the settle (true) or the nominal
  // grasp center (false).
  bool anchor_at_start = true;
  double drop_threshold = 0.05;
  double center_scale = 1.0 / 0.03;
  double pose_scale = 1.0 / 0.03;
  int offset_frames = 20;  // no-contact frames used for the offsets
  SensorModel sensor;
  double threshold = 1.5;
  ContactParams contact;

  void write_config(Config& cfg) const {
    cfg.set("task", "trajectory", to_string(reference.kind));
    cfg.set("task", "omega", reference.omega);
    cfg.set("task", "radius", reference.radius);
    cfg.set("task", "line_speed", reference.line_speed);
    cfg.set("task", "line_half_length", reference.line_half_length);
    cfg.set("task", "line_direction", reference.line_direction);
    cfg.set("task", "random_line_direction", random_line_direction);
    cfg.set("task", "spiral_r0", reference.spiral_r0);
    cfg.set("task", "spiral_r_end", reference.spiral_r_end);
    cfg.set("task", "spiral_laps", reference.spiral_laps);
    cfg.set("task", "eight_half_width", reference.eight_half_width);
    cfg.set("task", "eight_period", reference.eight_period);
    cfg.set("task", "observation", to_string(obs));
    cfg.set("task", "delta_max", delta_max);
    cfg.set("task", "action_scale", action_scale);
    cfg.set("task", "inner_steps", inner_steps);
    cfg.set("task", "dt", dt);
    cfg.set("task", "horizon", horizon);
    cfg.set("task", "settle_time", settle_time);
    cfg.set("task", "preload", preload);
    cfg.set("task", "anchor_at_start", anchor_at_start);
    cfg.set("task", "drop_threshold", drop_threshold);
    cfg.set("task", "center_scale", center_scale);
    cfg.set("task", "pose_scale", pose_scale);
    cfg.set("task", "offset_frames", offset_frames);
    cfg.set("task", "sensor_gain", sensor.gain);
    cfg.set("task", "sensor_noise", sensor.noise_std);
    cfg.set("task", "crosstalk_amplitude", sensor.crosstalk_amplitude);
    cfg.set("task", "crosstalk_sigma", sensor.crosstalk_sigma);
    cfg.set("task", "crosstalk_radius", sensor.crosstalk_radius);
    cfg.set("task", "threshold", threshold);
    cfg.set("task", "contact_stiffness", contact.stiffness);
    cfg.set("task", "contact_damping", contact.damping);
    cfg.set("task", "friction_viscosity", contact.friction_viscosity);
    cfg.set("reward", "c", weights.c);
    cfg.set("reward", "w_axis", weights.w_axis);
    cfg.set("reward", "w_pos", weights.w_pos);
    cfg.set("reward", "w_force", weights.w_force);
  }

  static EnvConfig from_config(const Config& cfg) {
    EnvConfig e;
    auto& r = e.reference;
    r.kind = trajectory_kind_from_string(
        cfg.get_string("task", "trajectory", to_string(r.kind)));
    r.omega = cfg.get_double("task", "omega", r.omega);
    r.radius = cfg.get_double("task", "radius", r.radius);
    r.line_speed = cfg.get_double("task", "line_speed", r.line_speed);
    r.line_half_length =
        cfg.get_double("task", "line_half_length", r.line_half_length);
    r.line_direction =
        cfg.get_double("task", "line_direction", r.line_direction);
    e.random_line_direction = cfg.get_bool("task", "random_line_direction",
                                           e.random_line_direction);
    r.spiral_r0 = cfg.get_double("task", "spiral_r0", r.spiral_r0);
    r.spiral_r_end = cfg.get_double("task", "spiral_r_end", r.spiral_r_end);
    r.spiral_laps = cfg.get_double("task", "spiral_laps", r.spiral_laps);
    r.eight_half_width =
        cfg.get_double("task", "eight_half_width", r.eight_half_width);
    r.eight_period = cfg.get_double("task", "eight_period", r.eight_period);
    e.obs = obs_variant_from_string(
        cfg.get_string("task", "observation", to_string(e.obs)));
    e.delta_max = cfg.get_double("task", "delta_max", e.delta_max);
    e.action_scale = cfg.get_double("task", "action_scale", e.action_scale);
    e.inner_steps =
        static_cast<int>(cfg.get_int("task", "inner_steps", e.inner_steps));
    e.dt = cfg.get_double("task", "dt", e.dt);
    e.horizon = static_cast<int>(cfg.get_int("task", "horizon", e.horizon));
    e.settle_time = cfg.get_double("task", "settle_time", e.settle_time);
    e.preload = cfg.get_double("task", "preload", e.preload);
    e.anchor_at_start =
        cfg.get_bool("task", "anchor_at_start", e.anchor_at_start);
    e.drop_threshold =
        cfg.get_double("task", "drop_threshold", e.drop_threshold);
    e.center_scale = cfg.get_double("task", "center_scale", e.center_scale);
    e.pose_scale = cfg.get_double("task", "pose_scale", e.pose_scale);
    e.offset_frames =
        static_cast<int>(cfg.get_int("task", "offset_frames", e.offset_frames));
    e.sensor.gain = cfg.get_double("task", "sensor_gain", e.sensor.gain);
    e.sensor.noise_std =
        cfg.get_double("task", "sensor_noise", e.sensor.noise_std);
    e.sensor.crosstalk_amplitude = cfg.get_double(
        "task", "crosstalk_amplitude", e.sensor.crosstalk_amplitude);
    e.sensor.crosstalk_sigma =
        cfg.get_double("task", "crosstalk_sigma", e.sensor.crosstalk_sigma);
    e.sensor.crosstalk_radius =
        cfg.get_double("task", "crosstalk_radius", e.sensor.crosstalk_radius);
    e.threshold = cfg.get_double("task", "threshold",
                                 3.0 * e.sensor.noise_std);
    e.contact.stiffness =
        cfg.get_double("task", "contact_stiffness", e.contact.stiffness);
    e.contact.damping =
        cfg.get_double("task", "contact_damping", e.contact.damping);
    e.contact.friction_viscosity = cfg.get_double(
        "task", "friction_viscosity", e.contact.friction_viscosity);
    e.weights.c = cfg.get_double("reward", "c", e.weights.c);
    e.weights.w_axis = cfg.get_double("reward", "w_axis", e.weights.w_axis);
    e.weights.w_pos = cfg.get_double("reward", "w_pos", e.weights.w_pos);
    e.weights.w_force = cfg.get_double("reward", "w_force", e.weights.w_force);
    e.weights.validate();
    if (e.inner_steps < 1 || e.horizon < 1 || !(e.dt > 0.0)) {
      throw ConfigError("task: inner_steps, horizon and dt must be positive");
    }
    return e;
  }
};

// Per-step record for logs and plots.
struct EpisodeStep {
  double t = 0.0;
  double reward = 0.0;
  double p_err_lower = 0.0;
  double p_err_upper = 0.0;
  double q_err = 0.0;  // rad
  double total_force = 0.0;
  std::array<double, 9> centers{};  // NaN when absent, meters (unscaled)
  std::array<double, kNumActive> action{};
  std::array<double, kNumActive> q{};
  Vec3 p2_desired = Vec3::Zero();
  Vec3 p2_actual = Vec3::Zero();
};

struct EpisodeLog {
  std::vector<EpisodeStep> steps;
  bool dropped = false;
  bool failed = false;  // numerical failure
};

inline void write_episode_header(std::ostream& out) {
  out << "episode,t,reward,p_err_lower,p_err_upper,q_err,total_force";
  for (int f = 0; f < kNumFingers; ++f) {
    out << ",c" << f << "_x,c" << f << "_y,c" << f << "_z";
  }
  for (int a = 0; a < kNumActive; ++a) out << ",a" << a;
  for (int a = 0; a < kNumActive; ++a) out << ",q" << a;
  out << ",p2d_x,p2d_y,p2d_z,p2_x,p2_y,p2_z\n";
}

inline void write_episode_rows(std::ostream& out, int episode,
                               const EpisodeLog& log) {
  out << std::setprecision(10);
  for (const auto& s : log.steps) {
    out << episode << ',' << s.t << ',' << s.reward << ',' << s.p_err_lower
        << ',' << s.p_err_upper << ',' << s.q_err << ',' << s.total_force;
    for (double c : s.centers) out << ',' << c;
    for (double a : s.action) out << ',' << a;
    for (double q : s.q) out << ',' << q;
    for (int i = 0; i < 3; ++i) out << ',' << s.p2_desired[i];
    for (int i = 0; i < 3; ++i) out << ',' << s.p2_actual[i];
    out << '\n';
  }
}

class HandEnv : public Environment {
 public:
  HandEnv(HandModel model, StickModel stick, EnvConfig config,
          RandomizationSpec randomization,
          std::shared_ptr<const InitialStateSet> states, std::uint64_t seed)
      : base_model_(std::move(model)),
        base_stick_(stick),
        cfg_(std::move(config)),
        spec_(std::move(randomization)),
        states_(std::move(states)),
        rng_(seed) {
    if (!states_ || states_->records.empty()) {
      throw ConfigError("HandEnv: empty initial state set");
    }
    grasp_ = nominal_grasp(base_model_, base_stick_);
    anchor_ = grasp_.center;
    params_ = {base_model_, base_stick_, {}};
    physics_.dt = cfg_.dt;
    physics_.contact = cfg_.contact;
  }

  int obs_dim() const override { return tactile_hand::obs_dim(cfg_.obs); }
  int act_dim() const override { return kNumActive; }

  VecX reset() override {
    params_ = sample_params(spec_, base_model_, base_stick_, rng_);
    const auto& recs = states_->records;
    const auto idx = static_cast<std::size_t>(uniform01(rng_) * recs.size());
    const InitialState& r = recs[std::min(idx, recs.size() - 1)];
    reference_ = cfg_.reference;
    if (reference_.kind == TrajectoryKind::kLine && cfg_.random_line_direction) {
      reference_.line_direction = uniform(rng_, 0.0, 2.0 * kPi);
    }

    // Offsets from frames without contact.
    std::vector<TaxelArray> rest(std::max(1, cfg_.offset_frames));
    for (auto& f : rest) {
      f = synthesize_raw({}, params_.model.layout, cfg_.sensor, params_.drift,
                         &rng_);
    }
    offsets_ = calibrate_offsets(rest);

    state_ = SimState{};
    state_.q = r.q;
    state_.stick = r.stick;
    for (int a = 0; a < kNumActive; ++a) {
      const JointSpec& j = params_.model.active(a);
      target_[a] = clamp(r.q[a] + cfg_.preload, j.lower, j.upper);
    }
    PhysicsOptions settle = physics_;
    settle.gravity = false;
    const int n = static_cast<int>(std::lround(cfg_.settle_time / cfg_.dt));
    failed_ = false;
    try {
      for (int i = 0; i < n; ++i) {
        contacts_ = tactile_hand::step(params_.model, params_.stick, state_,
                                       target_, settle);
      }
    } catch (const NonFiniteState&) {
      failed_ = true;
    }
    state_.t = 0.0;
    steps_ = 0;
    anchor_ = cfg_.anchor_at_start && state_.is_finite() ? state_.stick.position
                                                         : grasp_.center;
    update_frame();
    return observe();
  }

  StepResult step(const VecX& action) override {
    VecX scaled = action * cfg_.action_scale;
    target_ = apply_action(params_.model, target_, scaled, cfg_.delta_max);
    last_action_ = scaled;
    StepResult res;
    bool numerical_failure = failed_;
    if (!numerical_failure) {
      try {
        for (int i = 0; i < cfg_.inner_steps; ++i) {
          contacts_ =
              tactile_hand::step(params_.model, params_.stick, state_, target_,
                                 physics_);
        }
      } catch (const NonFiniteState&) {
        numerical_failure = true;
        failed_ = true;
      }
    }
    ++steps_;
    if (numerical_failure) {
      res.obs = VecX::Zero(obs_dim());
      res.reward = 0.0;
      res.terminated = true;
      return res;
    }
    update_frame();
    const ReferenceSample ref = reference_at(state_.t);
    const StickPose& sp = state_.stick;
    const double L = params_.stick.length;
    const Vec3 p1 = sp.upper_end(L), p2 = sp.lower_end(L);
    force_ = total_contact_force(contacts_);
    res.reward = reward(cfg_.weights, ref.u, sp.axis(), ref.p1, p1, ref.p2, p2,
                        force_);
    res.p_err = (ref.p2 - p2).norm();
    res.q_err = axis_angle(ref.u, sp.axis());
    p_err_upper_ = (ref.p1 - p1).norm();
    res.terminated = terminate(sp, grasp_.center.z() - cfg_.drop_threshold);
    res.truncated = !res.terminated && steps_ >= cfg_.horizon;
    res.obs = observe();
    return res;
  }

  // Accessors for logging and tests.
  const SimState& state() const { return state_; }
  SimState& mutable_state() { return state_; }
  const TactileFrame& frame() const { return frame_; }
  const ContactSet& contacts() const { return contacts_; }
  const JointVector& target() const { return target_; }
  const SampledParams& params() const { return params_; }
  const EnvConfig& config() const { return cfg_; }
  const NominalGrasp& grasp() const { return grasp_; }
  const Vec3& anchor() const { return anchor_; }
  const VecX& last_action() const { return last_action_; }
  double last_force() const { return force_; }
  double last_p_err_upper() const { return p_err_upper_; }
  ReferenceSample reference_at(double t) const {
    return sample_reference(reference_, anchor_, params_.stick.length, t);
  }

 private:
  void update_frame() {
    frame_.t = state_.t;
    frame_.raw = synthesize_raw(contacts_, params_.model.layout, cfg_.sensor,
                                params_.drift, &rng_);
    frame_.offsets = offsets_;
    frame_.threshold = cfg_.threshold;
    binarize(frame_);
  }

  // The reference axis in the observation is the one the next reward uses.
  VecX observe() const {
    ObservationInputs in;
    in.model = &params_.model;
    in.q = &state_.q;
    in.frame = &frame_;
    in.stick = &state_.stick;
    in.u_d = reference_at(state_.t + cfg_.inner_steps * cfg_.dt).u;
    in.grasp_center = anchor_;
    in.center_scale = cfg_.center_scale;
    in.pose_scale = cfg_.pose_scale;
    return build_observation(cfg_.obs, in);
  }

  HandModel base_model_;
  StickModel base_stick_;
  EnvConfig cfg_;
  RandomizationSpec spec_;
  std::shared_ptr<const InitialStateSet> states_;
  Rng rng_;
  NominalGrasp grasp_;
  Vec3 anchor_ = Vec3::Zero();
  SampledParams params_;
  PhysicsOptions physics_;
  ReferenceParams reference_;
  SimState state_;
  JointVector target_{};
  ContactSet contacts_;
  TaxelArray offsets_{};
  TactileFrame frame_;
  VecX last_action_ = VecX::Zero(kNumActive);
  double force_ = 0.0;
  double p_err_upper_ = 0.0;
  int steps_ = 0;
  bool failed_ = false;
};

// Builds the per-step log entry from the environment after a step.
inline EpisodeStep log_step(const HandEnv& env, const StepResult& r) {
  EpisodeStep s;
  s.t = env.state().t;
  s.reward = r.reward;
  s.p_err_lower = r.p_err;
  s.p_err_upper = env.last_p_err_upper();
  s.q_err = r.q_err;
  s.total_force = env.last_force();
  for (int f = 0; f < kNumFingers; ++f) {
    const auto c = contact_center(env.frame(), env.params().model.layout, f);
    for (int i = 0; i < 3; ++i) {
      s.centers[3 * f + i] =
          c ? (*c)[i] : std::numeric_limits<double>::quiet_NaN();
    }
  }
  for (int a = 0; a < kNumActive; ++a) {
    s.action[a] = env.last_action()[a];
    s.q[a] = env.state().q[a];
  }
  const ReferenceSample ref = env.reference_at(env.state().t);
  s.p2_desired = ref.p2;
  s.p2_actual = env.state().stick.lower_end(env.params().stick.length);
  return s;
}

}  // namespace tactile_hand

#endif  // TACTILE_HAND_ENV_HPP_
