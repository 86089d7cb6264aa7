#ifndef TACTILE_HAND_REFERENCE_HPP_
#define TACTILE_HAND_REFERENCE_HPP_

// Reference poses for the stick. The lower end point traces a curve in the
// horizontal plane through the nominal lower end; the upper end point follows
// from the axis through the grasp center:
//   P2 = G + (c_x(t), c_y(t), -L/2),  u = (G - P2)/|G - P2|,  P1 = P2 + L u.

#include <string>

#include "tactile_hand/common.hpp"

namespace tactile_hand {

inline Vec3 desired_axis(const Vec3& p1, const Vec3& p2) {
  const Vec3 d = p1 - p2;
  const double n = d.norm();
  if (n < 1e-9) throw DegeneratePoints("desired_axis: end points coincide");
  return d / n;
}

enum class TrajectoryKind { kLine, kCircle, kSpiral, kEight };

inline TrajectoryKind trajectory_kind_from_string(const std::string& s) {
  if (s == "line") return TrajectoryKind::kLine;
  if (s == "circle") return TrajectoryKind::kCircle;
  if (s == "spiral") return TrajectoryKind::kSpiral;
  if (s == "eight") return TrajectoryKind::kEight;
  throw UnknownKind("unknown trajectory kind: " + s);
}

inline std::string to_string(TrajectoryKind k) {
  switch (k) {
    case TrajectoryKind::kLine: return "line";
    case TrajectoryKind::kCircle: return "circle";
    case TrajectoryKind::kSpiral: return "spiral";
    case TrajectoryKind::kEight: return "eight";
  }
  return "unknown";
}

struct ReferenceParams {
  TrajectoryKind kind = TrajectoryKind::kCircle;
  double omega = kPi;        // rad/s (circle, spiral)
  double radius = 0.02;      // m (circle)
  double line_speed = 0.02;  // m/s
  double line_half_length = 0.02;
  double line_direction = 0.0;  // rad in the horizontal plane
  double spiral_r0 = 0.005;
  double spiral_r_end = 0.02;
  double spiral_laps = 3.0;
  double eight_half_width = 0.02;
  double eight_period = 4.0;
};

struct ReferenceSample {
  Vec3 p1;
  Vec3 p2;
  Vec3 u;
};

// Triangle wave of unit slope in [0, a]: 0 -> a -> 0 -> ...
inline double reflect(double x, double a) {
  const double period = 2.0 * a;
  double m = std::fmod(x, period);
  if (m < 0.0) m += period;
  return m <= a ? m : period - m;
}

// Horizontal offset of the lower end point from its nominal position.
inline Eigen::Vector2d reference_offset(const ReferenceParams& p, double t) {
  switch (p.kind) {
    case TrajectoryKind::kLine: {
      // Starts at the center, moves along +direction, reflects at the ends.
      const double a = p.line_half_length;
      const double s = reflect(p.line_speed * t + a, 2.0 * a) - a;
      return {s * std::cos(p.line_direction), s * std::sin(p.line_direction)};
    }
    case TrajectoryKind::kCircle: {
      const double th = p.omega * t;
      return {p.radius * std::cos(th), p.radius * std::sin(th)};
    }
    case TrajectoryKind::kSpiral: {
      // Archimedean r = r0 + k theta out to the end radius, then back in.
      const double th = p.omega * t;
      const double span = 2.0 * kPi * p.spiral_laps;
      const double k = (p.spiral_r_end - p.spiral_r0) / span;
      const double r = p.spiral_r0 + k * reflect(th, span);
      return {r * std::cos(th), r * std::sin(th)};
    }
    case TrajectoryKind::kEight: {
      // Lemniscate of Gerono through the nominal point.
      const double ph = 2.0 * kPi * t / p.eight_period;
      const double a = p.eight_half_width;
      return {a * std::sin(ph), a * std::sin(ph) * std::cos(ph)};
    }
  }
  throw UnknownKind("reference_offset: bad kind");
}

// Upper bound on the speed of the lower end point, for continuity checks.
inline double reference_speed_bound(const ReferenceParams& p) {
  switch (p.kind) {
    case TrajectoryKind::kLine: return p.line_speed;
    case TrajectoryKind::kCircle: return p.omega * p.radius;
    case TrajectoryKind::kSpiral: {
      const double k =
          (p.spiral_r_end - p.spiral_r0) / (2.0 * kPi * p.spiral_laps);
      return p.omega * (p.spiral_r_end + k);
    }
    case TrajectoryKind::kEight: {
      const double w = 2.0 * kPi / p.eight_period;
      return w * p.eight_half_width * std::sqrt(2.0);
    }
  }
  return 0.0;
}

inline ReferenceSample sample_reference(const ReferenceParams& p,
                                        const Vec3& grasp_center,
                                        double stick_length, double t) {
  if (t < 0.0) t = 0.0;
  const Eigen::Vector2d c = reference_offset(p, t);
  ReferenceSample out;
  out.p2 = grasp_center + Vec3(c.x(), c.y(), -0.5 * stick_length);
  out.u = desired_axis(grasp_center, out.p2);
  out.p1 = out.p2 + stick_length * out.u;
  return out;
}

}  // namespace tactile_hand

#endif  // TACTILE_HAND_REFERENCE_HPP_
