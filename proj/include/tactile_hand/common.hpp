#ifndef TACTILE_HAND_COMMON_HPP_
#define TACTILE_HAND_COMMON_HPP_

#include <Eigen/Core>
#include <Eigen/Geometry>

#include <array>
#include <cmath>
#include <cstdint>
#include <numbers>
#include <random>
#include <stdexcept>
#include <string>

namespace tactile_hand {

using Vec3 = Eigen::Vector3d;
using Mat3 = Eigen::Matrix3d;
using Quat = Eigen::Quaterniond;
using VecX = Eigen::VectorXd;
using MatX = Eigen::MatrixXd;

inline constexpr double kPi = std::numbers::pi;
inline constexpr double kGravity = 9.81;

inline constexpr int kNumFingers = 3;
inline constexpr int kTaxelsPerFinger = 128;
inline constexpr int kNumTaxels = kNumFingers * kTaxelsPerFinger;
inline constexpr int kNumJoints = 8;
inline constexpr int kNumActive = 6;
inline constexpr int kNumBacklash = 3;

// Errors. All derive from Error so callers can catch the family.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class NonFiniteState : public Error {
 public:
  using Error::Error;
};
class EmptyWindow : public Error {
 public:
  using Error::Error;
};
class DegeneratePoints : public Error {
 public:
  using Error::Error;
};
class UnknownKind : public Error {
 public:
  using Error::Error;
};
class SaturatedProbe : public Error {
 public:
  using Error::Error;
};
class ExhaustedSampling : public Error {
 public:
  using Error::Error;
};
class ShapeMismatch : public Error {
 public:
  using Error::Error;
};
class NonFiniteLoss : public Error {
 public:
  using Error::Error;
};
class ConfigError : public Error {
 public:
  using Error::Error;
};

using Rng = std::mt19937_64;

// splitmix64 finalizer. Subsystem streams are derived as
// derive_seed(root, stream_id) so that every consumer of randomness gets an
// independent, reproducible generator from a single root seed.
inline std::uint64_t derive_seed(std::uint64_t root, std::uint64_t stream) {
  std::uint64_t z = root + 0x9E3779B97F4A7C15ULL * (stream + 1);
  z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
  z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
  return z ^ (z >> 31);
}

// Fixed stream ids for derive_seed.
namespace stream {
inline constexpr std::uint64_t kCalibration = 1;
inline constexpr std::uint64_t kInitialStates = 2;
inline constexpr std::uint64_t kTraining = 3;
inline constexpr std::uint64_t kEvaluation = 4;
inline constexpr std::uint64_t kEnvBase = 100;
}  // namespace stream

// Portable uniform/normal draws. std::normal_distribution is not specified
// bit-for-bit across standard libraries, so draws go through these.
inline double uniform01(Rng& rng) {
  return static_cast<double>(rng() >> 11) * (1.0 / 9007199254740992.0);
}

inline double uniform(Rng& rng, double lo, double hi) {
  return lo + (hi - lo) * uniform01(rng);
}

inline double standard_normal(Rng& rng) {
  // Box-Muller, one draw per call.
  double u1 = uniform01(rng);
  while (u1 <= 0.0) u1 = uniform01(rng);
  const double u2 = uniform01(rng);
  return std::sqrt(-2.0 * std::log(u1)) * std::cos(2.0 * kPi * u2);
}

inline double clamp(double x, double lo, double hi) {
  return x < lo ? lo : (x > hi ? hi : x);
}

inline bool all_finite(const VecX& v) { return v.allFinite(); }

inline Mat3 skew(const Vec3& v) {
  Mat3 m;
  m << 0.0, -v.z(), v.y(), v.z(), 0.0, -v.x(), -v.y(), v.x(), 0.0;
  return m;
}

// Rotation by the vector w*dt (exponential map), as a quaternion.
inline Quat quat_exp(const Vec3& rotation_vector) {
  const double angle = rotation_vector.norm();
  if (angle < 1e-12) {
    Quat q(1.0, 0.5 * rotation_vector.x(), 0.5 * rotation_vector.y(),
           0.5 * rotation_vector.z());
    return q.normalized();
  }
  return Quat(Eigen::AngleAxisd(angle, rotation_vector / angle));
}

}  // namespace tactile_hand

#endif  // TACTILE_HAND_COMMON_HPP_
