#ifndef TACTILE_HAND_ENVIRONMENT_HPP_
#define TACTILE_HAND_ENVIRONMENT_HPP_

#include <cstdint>
#include <functional>
#include <limits>
#include <memory>

#include "tactile_hand/common.hpp"

namespace tactile_hand {

struct StepResult {
  VecX obs;
  double reward = 0.0;
  bool terminated = false;  // failure / absorbing state
  bool truncated = false;   // horizon reached
  // Tracking metrics for the step, NaN when not applicable.
  double p_err = std::numeric_limits<double>::quiet_NaN();
  double q_err = std::numeric_limits<double>::quiet_NaN();

  bool done() const { return terminated || truncated; }
};

class Environment {
 public:
  virtual ~Environment() = default;
  virtual int obs_dim() const = 0;
  virtual int act_dim() const = 0;
  virtual VecX reset() = 0;
  virtual StepResult step(const VecX& action) = 0;
};

// Builds the environment for worker `index`, seeded from `seed`.
using EnvFactory =
    std::function<std::unique_ptr<Environment>(std::uint64_t seed, int index)>;

}  // namespace tactile_hand

#endif  // TACTILE_HAND_ENVIRONMENT_HPP_
