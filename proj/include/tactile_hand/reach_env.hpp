#ifndef TACTILE_HAND_REACH_ENV_HPP_
#define TACTILE_HAND_REACH_ENV_HPP_

// One PD-servoed joint that has to hold a goal angle. Used to check that the
// learner works end to end on a problem with a known good controller.
//
// obs = (q, qdot, goal), action = joint target (rad), reward 1 - (q - goal)^2.

#include "tactile_hand/common.hpp"
#include "tactile_hand/environment.hpp"

namespace tactile_hand {

struct ReachConfig {
  double kp = 100.0;   // unit inertia, critically damped with kd = 20
  double kd = 20.0;
  double dt = 0.005;
  int inner_steps = 10;  // 50 ms per action
  int horizon = 50;
  double range = 1.0;         // q0 and goal ~ U(-range, range)
  double target_limit = 1.5;  // commanded target is clamped to this
};

class ReachEnv : public Environment {
 public:
  explicit ReachEnv(std::uint64_t seed, ReachConfig cfg = {})
      : cfg_(cfg), rng_(seed) {}

  int obs_dim() const override { return 3; }
  int act_dim() const override { return 1; }

  VecX reset() override {
    q_ = uniform(rng_, -cfg_.range, cfg_.range);
    qd_ = 0.0;
    goal_ = uniform(rng_, -cfg_.range, cfg_.range);
    steps_ = 0;
    return observe();
  }

  StepResult step(const VecX& action) override {
    if (action.size() != 1) throw ShapeMismatch("ReachEnv: action size");
    const double target = clamp(action[0], -cfg_.target_limit, cfg_.target_limit);
    for (int i = 0; i < cfg_.inner_steps; ++i) {
      // Semi-implicit Euler.
      qd_ += cfg_.dt * (cfg_.kp * (target - q_) - cfg_.kd * qd_);
      q_ += cfg_.dt * qd_;
    }
    ++steps_;
    StepResult r;
    const double e = q_ - goal_;
    r.reward = 1.0 - e * e;
    r.truncated = steps_ >= cfg_.horizon;
    r.obs = observe();
    return r;
  }

  double goal() const { return goal_; }

 private:
  VecX observe() const {
    VecX o(3);
    o << q_, 0.1 * qd_, goal_;
    return o;
  }

  ReachConfig cfg_;
  Rng rng_;
  double q_ = 0.0, qd_ = 0.0, goal_ = 0.0;
  int steps_ = 0;
};

// The PD oracle commands the goal directly.
inline VecX reach_oracle_action(const VecX& obs) {
  VecX a(1);
  a[0] = obs[2];
  return a;
}

}  // namespace tactile_hand

#endif  // TACTILE_HAND_REACH_ENV_HPP_
