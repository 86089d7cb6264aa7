#ifndef TACTILE_HAND_RANDOMIZATION_HPP_
#define TACTILE_HAND_RANDOMIZATION_HPP_

// Per-episode physical parameter distributions. Each parameter is a normal
// distribution truncated from below (resampled until above the bound).

#include <string>

#include "tactile_hand/common.hpp"
#include "tactile_hand/config.hpp"
#include "tactile_hand/hand_model.hpp"

namespace tactile_hand {

struct TruncatedNormal {
  double mean = 1.0;
  double std = 0.0;
  double lower = 0.0;  // samples are strictly greater

  double sample(Rng& rng) const {
    if (std <= 0.0) return mean;
    for (int i = 0; i < 10000; ++i) {
      const double v = mean + std * standard_normal(rng);
      if (v > lower) return v;
    }
    throw ExhaustedSampling("truncated normal: no sample above the bound");
  }

  bool operator==(const TruncatedNormal&) const = default;
};

struct JointRandomization {
  TruncatedNormal kp{2.0, 0.0, 0.0};
  TruncatedNormal kd{0.05, 0.0, 0.0};
  bool operator==(const JointRandomization&) const = default;
};

struct RandomizationSpec {
  std::array<JointRandomization, kNumActive> joints;
  TruncatedNormal backlash_stiffness{0.1, 0.0, 0.0};
  TruncatedNormal backlash_damping{0.01, 0.0, 0.0};
  // Backlash gap per worm-gear joint, not randomized (calibrated).
  std::array<double, kNumBacklash> backlash_lo{-0.02, -0.02, -0.02};
  std::array<double, kNumBacklash> backlash_hi{0.02, 0.02, 0.02};
  TruncatedNormal stick_mass{0.03, 0.0, 0.0};
  TruncatedNormal stick_radius{0.005, 0.0, 0.0};
  TruncatedNormal friction_mu{1.0, 0.0, 0.0};
  double drift_max = 0.0;  // per-episode taxel drift ~ U(0, drift_max)
  std::string initial_states;  // path, may be empty
  int episode_length = 500;
  double drop_threshold = 0.05;  // m below the nominal grasp center

  bool operator==(const RandomizationSpec&) const = default;

  // Mean-only spec matching a model.
  static RandomizationSpec from_model(const HandModel& model,
                                      const StickModel& stick) {
    RandomizationSpec s;
    for (int a = 0; a < kNumActive; ++a) {
      s.joints[a].kp = {model.active(a).kp, 0.0, 0.0};
      s.joints[a].kd = {model.active(a).kd, 0.0, 0.0};
    }
    const JointSpec& w = model.active(kBacklashActive[0]);
    s.backlash_stiffness = {w.backlash_stiffness, 0.0, 0.0};
    s.backlash_damping = {w.backlash_damping, 0.0, 0.0};
    for (int k = 0; k < kNumBacklash; ++k) {
      s.backlash_lo[k] = model.active(kBacklashActive[k]).backlash_lo;
      s.backlash_hi[k] = model.active(kBacklashActive[k]).backlash_hi;
    }
    s.stick_mass = {stick.mass, 0.0, 0.0};
    s.stick_radius = {stick.radius, 0.0, 0.0};
    s.friction_mu = {stick.friction_mu, 0.0, 0.0};
    return s;
  }

  static void write_normal(Config& cfg, const std::string& section,
                           const std::string& key, const TruncatedNormal& n) {
    cfg.set(section, key + "_mean", n.mean);
    cfg.set(section, key + "_std", n.std);
    cfg.set(section, key + "_min", n.lower);
  }

  static TruncatedNormal read_normal(const Config& cfg,
                                     const std::string& section,
                                     const std::string& key,
                                     const TruncatedNormal& fallback) {
    TruncatedNormal n;
    n.mean = cfg.get_double(section, key + "_mean", fallback.mean);
    n.std = cfg.get_double(section, key + "_std", fallback.std);
    n.lower = cfg.get_double(section, key + "_min", fallback.lower);
    if (n.std < 0.0) throw ConfigError(key + ": negative std");
    if (n.std == 0.0 && !(n.mean > n.lower)) {
      throw ConfigError(key + ": degenerate distribution below its bound");
    }
    return n;
  }

  void write_config(Config& cfg) const {
    const std::string sec = "randomization";
    for (int a = 0; a < kNumActive; ++a) {
      const std::string js =
          sec + ".J" + std::to_string(kActiveJoints[a]);
      write_normal(cfg, js, "kp", joints[a].kp);
      write_normal(cfg, js, "kd", joints[a].kd);
    }
    for (int k = 0; k < kNumBacklash; ++k) {
      const std::string js =
          sec + ".J" + std::to_string(kActiveJoints[kBacklashActive[k]]);
      cfg.set(js, "backlash_lo", backlash_lo[k]);
      cfg.set(js, "backlash_hi", backlash_hi[k]);
    }
    write_normal(cfg, sec, "backlash_stiffness", backlash_stiffness);
    write_normal(cfg, sec, "backlash_damping", backlash_damping);
    write_normal(cfg, sec, "stick_mass", stick_mass);
    write_normal(cfg, sec, "stick_radius", stick_radius);
    write_normal(cfg, sec, "friction_mu", friction_mu);
    cfg.set(sec, "drift_max", drift_max);
    cfg.set(sec, "initial_states", initial_states);
    cfg.set(sec, "episode_length", episode_length);
    cfg.set(sec, "drop_threshold", drop_threshold);
  }

  static RandomizationSpec from_config(const Config& cfg,
                                       const RandomizationSpec& base) {
    RandomizationSpec s = base;
    const std::string sec = "randomization";
    for (int a = 0; a < kNumActive; ++a) {
      const std::string js =
          sec + ".J" + std::to_string(kActiveJoints[a]);
      s.joints[a].kp = read_normal(cfg, js, "kp", base.joints[a].kp);
      s.joints[a].kd = read_normal(cfg, js, "kd", base.joints[a].kd);
    }
    for (int k = 0; k < kNumBacklash; ++k) {
      const std::string js =
          sec + ".J" + std::to_string(kActiveJoints[kBacklashActive[k]]);
      s.backlash_lo[k] = cfg.get_double(js, "backlash_lo", base.backlash_lo[k]);
      s.backlash_hi[k] = cfg.get_double(js, "backlash_hi", base.backlash_hi[k]);
      if (s.backlash_lo[k] > 0.0 || s.backlash_hi[k] < 0.0) {
        throw ConfigError(js + ": backlash range must contain 0");
      }
    }
    s.backlash_stiffness = read_normal(cfg, sec, "backlash_stiffness",
                                       base.backlash_stiffness);
    s.backlash_damping =
        read_normal(cfg, sec, "backlash_damping", base.backlash_damping);
    s.stick_mass = read_normal(cfg, sec, "stick_mass", base.stick_mass);
    s.stick_radius = read_normal(cfg, sec, "stick_radius", base.stick_radius);
    s.friction_mu = read_normal(cfg, sec, "friction_mu", base.friction_mu);
    s.drift_max = cfg.get_double(sec, "drift_max", base.drift_max);
    s.initial_states = cfg.get_string(sec, "initial_states", base.initial_states);
    s.episode_length =
        static_cast<int>(cfg.get_int(sec, "episode_length", base.episode_length));
    s.drop_threshold = cfg.get_double(sec, "drop_threshold", base.drop_threshold);
    return s;
  }
};

// Physical parameters drawn for one episode.
struct SampledParams {
  HandModel model;
  StickModel stick;
  std::array<double, kNumTaxels> drift{};
};

inline SampledParams sample_params(const RandomizationSpec& spec,
                                   const HandModel& base_model,
                                   const StickModel& base_stick, Rng& rng) {
  SampledParams out{base_model, base_stick, {}};
  for (int a = 0; a < kNumActive; ++a) {
    out.model.active(a).kp = spec.joints[a].kp.sample(rng);
    out.model.active(a).kd = spec.joints[a].kd.sample(rng);
  }
  const double ks = spec.backlash_stiffness.sample(rng);
  const double kb = spec.backlash_damping.sample(rng);
  for (int k = 0; k < kNumBacklash; ++k) {
    JointSpec& j = out.model.active(kBacklashActive[k]);
    j.backlash_stiffness = ks;
    j.backlash_damping = kb;
    j.backlash_lo = spec.backlash_lo[k];
    j.backlash_hi = spec.backlash_hi[k];
  }
  out.stick.mass = spec.stick_mass.sample(rng);
  out.stick.radius = spec.stick_radius.sample(rng);
  out.stick.friction_mu = spec.friction_mu.sample(rng);
  for (double& d : out.drift) {
    d = spec.drift_max > 0.0 ? uniform(rng, 0.0, spec.drift_max) : 0.0;
  }
  return out;
}

}  // namespace tactile_hand

#endif  // TACTILE_HAND_RANDOMIZATION_HPP_
