#ifndef TACTILE_HAND_TACTILE_HPP_
#define TACTILE_HAND_TACTILE_HPP_

// Stick/taxel contact detection, penalty contact forces and the tactile
// signal chain: synthetic raw readings, offset calibration, thresholding and
// per-fingertip contact centers.

#include <array>
#include <optional>
#include <ostream>
#include <span>
#include <vector>

#include "tactile_hand/common.hpp"
#include "tactile_hand/hand_model.hpp"
#include "tactile_hand/taxel_layout.hpp"

namespace tactile_hand {

struct StickPose {
  Vec3 position = Vec3::Zero();
  Quat orientation = Quat::Identity();

  Vec3 axis() const { return orientation * Vec3::UnitZ(); }
  // Upper (P1) and lower (P2) end points.
  Vec3 upper_end(double length) const { return position + 0.5 * length * axis(); }
  Vec3 lower_end(double length) const { return position - 0.5 * length * axis(); }
};

struct Contact {
  int taxel = 0;
  Vec3 point = Vec3::Zero();       // on the stick surface
  Vec3 axis_point = Vec3::Zero();  // closest point on the stick axis
  Vec3 normal = Vec3::UnitX();     // from the stick axis toward the taxel
  double penetration = 0.0;
  double normal_force = 0.0;
  Vec3 tangential_force = Vec3::Zero();  // orthogonal to normal

  // Force applied to the taxel (the stick receives the opposite).
  Vec3 force() const { return normal_force * normal + tangential_force; }
  double force_magnitude() const { return force().norm(); }
};

using ContactSet = std::vector<Contact>;

struct ContactParams {
  double stiffness = 5000.0;  // N/m
  double damping = 50.0;      // N s/m
  // Viscous coefficient of the regularized Coulomb law below the slip
  // threshold, N s/m.
  double friction_viscosity = 1000.0;
};

inline Vec3 closest_point_on_segment(const Vec3& p, const Vec3& a,
                                     const Vec3& b) {
  const Vec3 ab = b - a;
  const double denom = ab.squaredNorm();
  if (denom <= 0.0) return a;
  const double t = clamp((p - a).dot(ab) / denom, 0.0, 1.0);
  return a + t * ab;
}

// A taxel (sphere of radius sensing_radius) touches the stick (capsule around
// its axis segment) when their centers are closer than the radius sum.
inline ContactSet detect_contacts(const TaxelLayout& layout,
                                  const HandPose& pose,
                                  const StickPose& stick_pose,
                                  const StickModel& stick) {
  ContactSet contacts;
  const Vec3 axis = stick_pose.axis();
  const Vec3 a = stick_pose.position - 0.5 * stick.length * axis;
  const Vec3 b = stick_pose.position + 0.5 * stick.length * axis;
  const double reach = stick.radius + layout.sensing_radius;
  const double cull = layout.bounding_radius() + stick.radius;
  for (int f = 0; f < kNumFingers; ++f) {
    const FingerFrames& ff = pose.fingers[f];
    const Vec3 c = closest_point_on_segment(ff.tip_origin, a, b);
    if ((ff.tip_origin - c).squaredNorm() > cull * cull) continue;
    for (int i = 0; i < kTaxelsPerFinger; ++i) {
      const int id = f * kTaxelsPerFinger + i;
      const Vec3 p = ff.tip_origin + ff.tip_rotation * layout.positions[i];
      const Vec3 q = closest_point_on_segment(p, a, b);
      const Vec3 d = p - q;
      const double dist2 = d.squaredNorm();
      if (dist2 >= reach * reach) continue;
      const double dist = std::sqrt(dist2);
      Contact ct;
      ct.taxel = id;
      ct.axis_point = q;
      // Taxel center exactly on the axis: push along the pad normal.
      ct.normal = dist > 1e-12 ? Vec3(d / dist)
                               : Vec3(ff.tip_rotation * layout.normals[i]);
      ct.point = q + stick.radius * ct.normal;
      ct.penetration = reach - dist;
      contacts.push_back(ct);
    }
  }
  return contacts;
}

struct PenaltyForce {
  double normal = 0.0;
  Vec3 tangential = Vec3::Zero();
};

// Spring-damper normal force with one-sided damping (only while penetration
// grows), floored at zero; regularized Coulomb friction: viscous below the
// slip threshold, capped at mu * normal.
inline PenaltyForce penalty_force(double penetration, double penetration_rate,
                                  const Vec3& tangential_velocity,
                                  const ContactParams& params, double mu) {
  PenaltyForce out;
  if (penetration <= 0.0) return out;
  out.normal = std::max(0.0, params.stiffness * penetration +
                                 params.damping *
                                     std::max(penetration_rate, 0.0));
  const double speed = tangential_velocity.norm();
  const double cap = mu * out.normal;
  if (speed <= 0.0 || cap <= 0.0) return out;
  if (params.friction_viscosity * speed <= cap) {
    out.tangential = -params.friction_viscosity * tangential_velocity;
  } else {
    out.tangential = -cap * tangential_velocity / speed;
  }
  return out;
}

// ---------------------------------------------------------------------------
// Tactile signal chain

using TaxelArray = std::array<double, kNumTaxels>;

struct SensorModel {
  double gain = 10.0;       // units per newton of normal force
  double noise_std = 0.5;   // units
  // Crosstalk kernel: a contact with normal force N adds
  // gain * N * amplitude * exp(-d^2 / (2 sigma^2)) to every other taxel of the
  // same fingertip within `radius` (d = distance between taxel sites).
  double crosstalk_amplitude = 0.1;
  double crosstalk_sigma = 0.002;  // about one taxel pitch
  double crosstalk_radius = 0.005;

  double default_threshold() const { return 3.0 * noise_std; }
};

inline TaxelArray synthesize_raw(const ContactSet& contacts,
                                 const TaxelLayout& layout,
                                 const SensorModel& sensor,
                                 std::span<const double> drift, Rng* rng) {
  TaxelArray raw{};
  for (const Contact& c : contacts) {
    const double signal = sensor.gain * c.normal_force;
    raw[c.taxel] += signal;
    if (sensor.crosstalk_amplitude <= 0.0 || signal == 0.0) continue;
    const int f = TaxelLayout::finger_of(c.taxel);
    const Vec3& pc = layout.positions[TaxelLayout::local_of(c.taxel)];
    const double r2max = sensor.crosstalk_radius * sensor.crosstalk_radius;
    const double inv2s2 =
        1.0 / (2.0 * sensor.crosstalk_sigma * sensor.crosstalk_sigma);
    for (int i = 0; i < kTaxelsPerFinger; ++i) {
      const int id = f * kTaxelsPerFinger + i;
      if (id == c.taxel) continue;
      const double d2 = (layout.positions[i] - pc).squaredNorm();
      if (d2 > r2max) continue;
      raw[id] += signal * sensor.crosstalk_amplitude * std::exp(-d2 * inv2s2);
    }
  }
  for (int i = 0; i < kNumTaxels; ++i) {
    if (!drift.empty()) raw[i] += drift[i];
    if (rng != nullptr && sensor.noise_std > 0.0) {
      raw[i] += sensor.noise_std * standard_normal(*rng);
    }
    raw[i] = std::max(raw[i], 0.0);
  }
  return raw;
}

// Offsets are the per-taxel mean of readings captured without contact.
inline TaxelArray calibrate_offsets(std::span<const TaxelArray> frames) {
  if (frames.empty()) {
    throw EmptyWindow("calibrate_offsets: no frames in the window");
  }
  TaxelArray offsets{};
  for (const auto& f : frames) {
    for (int i = 0; i < kNumTaxels; ++i) offsets[i] += f[i];
  }
  const double n = static_cast<double>(frames.size());
  for (double& o : offsets) o /= n;
  return offsets;
}

struct TactileFrame {
  double t = 0.0;
  TaxelArray raw{};
  TaxelArray offsets{};
  TaxelArray calibrated{};
  std::array<bool, kNumTaxels> active{};
  double threshold = 1.5;

  int active_count(int finger) const {
    int n = 0;
    for (int i = 0; i < kTaxelsPerFinger; ++i) {
      n += active[finger * kTaxelsPerFinger + i] ? 1 : 0;
    }
    return n;
  }
};

// calibrated = max(raw - offset, 0); active = calibrated > threshold.
inline const std::array<bool, kNumTaxels>& binarize(TactileFrame& frame) {
  for (int i = 0; i < kNumTaxels; ++i) {
    frame.calibrated[i] = std::max(frame.raw[i] - frame.offsets[i], 0.0);
    frame.active[i] = frame.calibrated[i] > frame.threshold;
  }
  return frame.active;
}

// Mean local position of the active taxels of one fingertip, times `scale`.
inline std::optional<Vec3> contact_center(const TactileFrame& frame,
                                          const TaxelLayout& layout,
                                          int finger, double scale = 1.0) {
  Vec3 sum = Vec3::Zero();
  int n = 0;
  for (int i = 0; i < kTaxelsPerFinger; ++i) {
    if (frame.active[finger * kTaxelsPerFinger + i]) {
      sum += layout.positions[i];
      ++n;
    }
  }
  if (n == 0) return std::nullopt;
  return Vec3(scale * sum / static_cast<double>(n));
}

// Frame dump rows: t, finger, taxel, raw, calibrated, active.
inline void write_frame_header(std::ostream& out) {
  out << "t,finger,taxel,raw,calibrated,active\n";
}

inline void write_frame_rows(std::ostream& out, const TactileFrame& frame,
                             bool only_nonzero = true) {
  for (int i = 0; i < kNumTaxels; ++i) {
    if (only_nonzero && frame.raw[i] == 0.0 && !frame.active[i]) continue;
    out << frame.t << ',' << TaxelLayout::finger_of(i) << ','
        << TaxelLayout::local_of(i) << ',' << frame.raw[i] << ','
        << frame.calibrated[i] << ',' << (frame.active[i] ? 1 : 0) << '\n';
  }
}

}  // namespace tactile_hand

#endif  // TACTILE_HAND_TACTILE_HPP_
