#ifndef TACTILE_HAND_EXPERIMENT_HPP_
#define TACTILE_HAND_EXPERIMENT_HPP_

// Everything a run needs, resolved from one configuration: the hand, the
// stick, the task, the randomization, the initial-state sampler and the
// trainer. Defaults are written first and the user file is merged on top, so
// the resolved Config is a complete snapshot.

#include <fstream>
#include <memory>
#include <string>

#include "tactile_hand/config.hpp"
#include "tactile_hand/env.hpp"
#include "tactile_hand/hand_model.hpp"
#include "tactile_hand/ppo.hpp"
#include "tactile_hand/randomization.hpp"

namespace tactile_hand {

struct ExperimentSetup {
  HandModel model = HandModel::make_default();
  StickModel stick;
  EnvConfig env;
  RandomizationSpec randomization =
      RandomizationSpec::from_model(HandModel::make_default(), StickModel{});
  InitialStateRanges ranges;
  InitialStateOptions states;
  TrainConfig train;
  std::uint64_t seed = 0;

  void write_config(Config& cfg) const {
    cfg.set("run", "seed", static_cast<long long>(seed));
    model.write_config(cfg);
    write_stick_config(cfg, stick);
    env.write_config(cfg);
    randomization.write_config(cfg);
    cfg.set("states", "count", states.count);
    cfg.set("states", "close_speed", states.close_speed);
    cfg.set("states", "max_close_time", states.max_close_time);
    cfg.set("states", "attempt_window", states.attempt_window);
    cfg.set("states", "min_acceptance", states.min_acceptance);
    cfg.set("states", "joint_range", ranges.joint);
    cfg.set("states", "lateral_range", ranges.lateral);
    cfg.set("states", "vertical_range", ranges.vertical);
    cfg.set("states", "tilt_deg", ranges.tilt * 180.0 / kPi);
    cfg.set_list("states", "center_offset",
                 {ranges.center_offset.x(), ranges.center_offset.y(),
                  ranges.center_offset.z()});
    train.write_config(cfg);
  }

  static ExperimentSetup from_config(const Config& cfg) {
    ExperimentSetup s;
    s.seed = static_cast<std::uint64_t>(cfg.get_int("run", "seed", 0));
    s.model = HandModel::from_config(cfg);
    s.stick = stick_from_config(cfg);
    s.env = EnvConfig::from_config(cfg);
    s.randomization = RandomizationSpec::from_config(
        cfg, RandomizationSpec::from_model(s.model, s.stick));
    s.env.drop_threshold = s.randomization.drop_threshold;
    s.env.horizon = s.randomization.episode_length;
    s.states.count = static_cast<int>(cfg.get_int("states", "count", s.states.count));
    s.states.close_speed = cfg.get_double("states", "close_speed", s.states.close_speed);
    s.states.max_close_time =
        cfg.get_double("states", "max_close_time", s.states.max_close_time);
    s.states.attempt_window = static_cast<int>(
        cfg.get_int("states", "attempt_window", s.states.attempt_window));
    s.states.min_acceptance =
        cfg.get_double("states", "min_acceptance", s.states.min_acceptance);
    s.states.seed = derive_seed(s.seed, stream::kInitialStates);
    s.ranges.joint = cfg.get_double("states", "joint_range", s.ranges.joint);
    s.ranges.lateral = cfg.get_double("states", "lateral_range", s.ranges.lateral);
    s.ranges.vertical = cfg.get_double("states", "vertical_range", s.ranges.vertical);
    s.ranges.tilt = cfg.get_double("states", "tilt_deg", s.ranges.tilt * 180.0 / kPi) *
                    kPi / 180.0;
    const auto off = cfg.get_list("states", "center_offset", {0.0, 0.0, 0.0});
    if (off.size() != 3) throw ConfigError("states.center_offset needs 3 values");
    s.ranges.center_offset = Vec3(off[0], off[1], off[2]);
    if (s.states.count < 0) throw ConfigError("states.count must be >= 0");
    if (!(s.states.close_speed > 0.0)) throw ConfigError("states.close_speed must be > 0");
    s.train = TrainConfig::from_config(cfg, s.train);
    s.train.seed = s.seed;
    return s;
  }

  // Defaults with `user` merged on top.
  static Config resolve(const Config& user) {
    Config cfg;
    ExperimentSetup{}.write_config(cfg);
    cfg.merge(user);
    return cfg;
  }

  InitialStateSet generate_states(std::ostream* log = nullptr) const {
    return generate_initial_states(model, stick, ranges, states, env.sensor,
                                   env.contact, log);
  }

  EnvFactory factory(std::shared_ptr<const InitialStateSet> set) const {
    return [setup = *this, set](std::uint64_t s, int) -> std::unique_ptr<Environment> {
      return std::make_unique<HandEnv>(setup.model, setup.stick, setup.env,
                                       setup.randomization, set, s);
    };
  }
};

inline InitialStateSet load_initial_states(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open initial state file " + path);
  return read_initial_states(in);
}

}  // namespace tactile_hand

#endif  // TACTILE_HAND_EXPERIMENT_HPP_
