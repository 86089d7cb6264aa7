#ifndef TACTILE_HAND_HAND_MODEL_HPP_
#define TACTILE_HAND_HAND_MODEL_HPP_

// Kinematic and dynamic description of the three-finger hand and the stick.
//
// Frames: world z is up, the palm is the vertical plane x = 0 and the fingers
// point along +x at zero joint angles. Finger 0 (the thumb) sits at
// y = -thumb_offset and curls toward +y; fingers 1 and 2 sit at
// y = +thumb_offset, z = +/- finger_spacing / 2, and curl toward -y. All
// flexion axes are vertical, so each finger moves in a horizontal plane and
// the three pads pinch a roughly vertical stick at three heights.
//
// Joint naming follows the hand's 8-joint diagram: finger 0 uses J0 (worm
// gear), J1 and the fixed spread joint J2; finger 1 uses J3 (worm gear), J4 and
// the fixed spread joint J5; finger 2 uses J6 (worm gear) and J7.

#include <array>
#include <string>
#include <vector>

#include "tactile_hand/common.hpp"
#include "tactile_hand/config.hpp"
#include "tactile_hand/taxel_layout.hpp"

namespace tactile_hand {

struct JointSpec {
  std::string name;
  Vec3 axis = Vec3::UnitZ();
  double lower = -1.0;
  double upper = 1.0;
  double kp = 2.0;   // N m / rad
  double kd = 0.05;  // N m s / rad
  double backlash_lo = 0.0;
  double backlash_hi = 0.0;
  bool self_lock = false;
  double armature = 5e-4;  // kg m^2, reflected actuator inertia
  double damping = 0.01;   // N m s / rad, passive, acts on the link angle
  bool fixed = false;
  double fixed_value = 0.0;
  // Link-side inertia carried by the backlash sub-joint and its passive
  // stiffness / damping relative to the gear.
  double link_inertia = 2e-5;
  double backlash_stiffness = 0.1;
  double backlash_damping = 0.01;

  bool has_backlash() const { return backlash_hi > backlash_lo || self_lock; }

  void validate() const {
    if (!(lower < upper)) throw ConfigError(name + ": lower limit >= upper");
    if (fixed) return;
    if (!(kp > 0.0) || !(kd > 0.0) || !std::isfinite(kp) ||
        !std::isfinite(kd)) {
      throw ConfigError(name + ": PD gains must be finite and positive");
    }
    if (backlash_lo > 0.0 || backlash_hi < 0.0) {
      throw ConfigError(name + ": backlash range must contain 0");
    }
    if (!(armature > 0.0) || !(link_inertia > 0.0) || damping < 0.0 ||
        backlash_stiffness < 0.0 || backlash_damping < 0.0) {
      throw ConfigError(name + ": inertia/damping parameters out of range");
    }
  }
};

struct StickModel {
  double length = 0.2;
  double radius = 0.005;
  double mass = 0.03;
  double friction_mu = 1.0;

  void validate() const {
    if (!(length > 0.0) || !(radius > 0.0) || !(mass > 0.0) ||
        !(friction_mu > 0.0)) {
      throw ConfigError("stick parameters must be strictly positive");
    }
    if (!(radius / length < 0.2)) {
      throw ConfigError("stick must be slender (radius/length < 0.2)");
    }
  }

  // Solid cylinder inertia about its center, body z along the axis.
  Vec3 principal_inertia() const {
    const double axial = 0.5 * mass * radius * radius;
    const double transverse =
        mass * (3.0 * radius * radius + length * length) / 12.0;
    return {transverse, transverse, axial};
  }
};

struct FingerSpec {
  Vec3 base = Vec3::Zero();
  double flex_sign = 1.0;  // +1 curls toward +y, -1 toward -y
  int proximal = 0;        // joint index
  int distal = 1;
  int spread = -1;  // fixed spread joint index, -1 if none
};

struct HandGeometry {
  double proximal_length = 0.05;
  double distal_length = 0.04;
  double palm_width = 0.08;
  double finger_spacing = 0.04;  // vertical distance between fingers 1 and 2
  double thumb_offset = 0.03;    // |y| of finger bases
  double pad_offset = 0.025;     // pad center along the distal link
  double nominal_flexion = 0.3;  // proximal + distal angle of the grasp pose
};

// Active (non-fixed) joints in observation/action order.
inline constexpr std::array<int, kNumActive> kActiveJoints = {0, 1, 3, 4, 6, 7};
// Active-index of each finger's worm-gear joint; backlash slot = finger id.
inline constexpr std::array<int, kNumBacklash> kBacklashActive = {0, 2, 4};

inline int finger_of_active(int active) { return active / 2; }
inline bool is_proximal_active(int active) { return active % 2 == 0; }

struct HandModel {
  std::array<JointSpec, kNumJoints> joints;
  std::array<FingerSpec, kNumFingers> fingers;
  HandGeometry geometry;
  TaxelLayout layout = TaxelLayout::make();
  Vec3 base_position = Vec3::Zero();
  Mat3 base_rotation = Mat3::Identity();
  double max_fingertip_force = 15.0;  // N

  static HandModel make_default() {
    HandModel m;
    const char* names[kNumJoints] = {"J0", "J1", "J2", "J3",
                                     "J4", "J5", "J6", "J7"};
    for (int j = 0; j < kNumJoints; ++j) m.joints[j].name = names[j];
    m.rebuild();
    return m;
  }

  // Recomputes finger placement, joint axes, default limits and the taxel
  // layout from `geometry`. Gains and backlash ranges already set are kept.
  void rebuild() {
    const auto& g = geometry;
    fingers[0] = {Vec3(0.0, -g.thumb_offset, 0.0), 1.0, 0, 1, 2};
    fingers[1] = {Vec3(0.0, g.thumb_offset, 0.5 * g.finger_spacing), -1.0, 3,
                  4, 5};
    fingers[2] = {Vec3(0.0, g.thumb_offset, -0.5 * g.finger_spacing), -1.0, 6,
                  7, -1};
    for (const auto& f : fingers) {
      joints[f.proximal].axis = Vec3(0.0, 0.0, f.flex_sign);
      joints[f.distal].axis = Vec3(0.0, 0.0, f.flex_sign);
      if (f.spread >= 0) {
        joints[f.spread].axis = Vec3::UnitY();
        joints[f.spread].fixed = true;
      }
    }
    for (const auto& f : fingers) {
      auto& p = joints[f.proximal];
      if (!limits_set_) {
        p.lower = -0.4;
        p.upper = 1.2;
        joints[f.distal].lower = -0.3;
        joints[f.distal].upper = 1.4;
      }
      p.self_lock = true;
      if (!limits_set_ && p.backlash_lo == 0.0 && p.backlash_hi == 0.0) {
        p.backlash_lo = -0.02;
        p.backlash_hi = 0.02;
      }
      joints[f.distal].self_lock = false;
      joints[f.distal].backlash_lo = 0.0;
      joints[f.distal].backlash_hi = 0.0;
    }
    limits_set_ = true;
  }

  double torque_cap() const {
    return max_fingertip_force * geometry.distal_length;
  }

  const JointSpec& active(int a) const { return joints[kActiveJoints[a]]; }
  JointSpec& active(int a) { return joints[kActiveJoints[a]]; }

  void validate() const {
    for (const auto& j : joints) j.validate();
    if (static_cast<int>(layout.positions.size()) != kTaxelsPerFinger) {
      throw ConfigError("taxel layout must hold 128 sites");
    }
  }

  // Configuration file round trip: [hand], [taxels], [joint.J*].
  void write_config(Config& cfg) const {
    const auto& g = geometry;
    cfg.set("hand", "proximal_length", g.proximal_length);
    cfg.set("hand", "distal_length", g.distal_length);
    cfg.set("hand", "palm_width", g.palm_width);
    cfg.set("hand", "finger_spacing", g.finger_spacing);
    cfg.set("hand", "thumb_offset", g.thumb_offset);
    cfg.set("hand", "pad_offset", g.pad_offset);
    cfg.set("hand", "nominal_flexion", g.nominal_flexion);
    cfg.set("hand", "max_fingertip_force", max_fingertip_force);
    cfg.set("taxels", "rows", layout.rows);
    cfg.set("taxels", "columns", layout.columns);
    cfg.set("taxels", "pad_radius", layout.pad_radius);
    cfg.set("taxels", "pad_arc", layout.pad_arc);
    cfg.set("taxels", "pad_length", layout.pad_length);
    cfg.set("taxels", "sensing_radius", layout.sensing_radius);
    for (const auto& j : joints) {
      const std::string s = "joint." + j.name;
      cfg.set(s, "lower", j.lower);
      cfg.set(s, "upper", j.upper);
      cfg.set(s, "kp", j.kp);
      cfg.set(s, "kd", j.kd);
      cfg.set(s, "backlash_lo", j.backlash_lo);
      cfg.set(s, "backlash_hi", j.backlash_hi);
      cfg.set(s, "self_lock", j.self_lock);
      cfg.set(s, "armature", j.armature);
      cfg.set(s, "damping", j.damping);
      cfg.set(s, "fixed", j.fixed);
      cfg.set(s, "fixed_value", j.fixed_value);
      cfg.set(s, "link_inertia", j.link_inertia);
      cfg.set(s, "backlash_stiffness", j.backlash_stiffness);
      cfg.set(s, "backlash_damping", j.backlash_damping);
    }
  }

  static HandModel from_config(const Config& cfg) {
    HandModel m = make_default();
    auto& g = m.geometry;
    g.proximal_length = cfg.get_double("hand", "proximal_length",
                                       g.proximal_length);
    g.distal_length = cfg.get_double("hand", "distal_length", g.distal_length);
    g.palm_width = cfg.get_double("hand", "palm_width", g.palm_width);
    g.finger_spacing =
        cfg.get_double("hand", "finger_spacing", g.finger_spacing);
    g.thumb_offset = cfg.get_double("hand", "thumb_offset", g.thumb_offset);
    g.pad_offset = cfg.get_double("hand", "pad_offset", g.pad_offset);
    g.nominal_flexion =
        cfg.get_double("hand", "nominal_flexion", g.nominal_flexion);
    m.max_fingertip_force = cfg.get_double("hand", "max_fingertip_force",
                                           m.max_fingertip_force);
    const auto& l = m.layout;
    m.layout = TaxelLayout::make(
        static_cast<int>(cfg.get_int("taxels", "rows", l.rows)),
        static_cast<int>(cfg.get_int("taxels", "columns", l.columns)),
        cfg.get_double("taxels", "pad_radius", l.pad_radius),
        cfg.get_double("taxels", "pad_arc", l.pad_arc),
        cfg.get_double("taxels", "pad_length", l.pad_length),
        cfg.get_double("taxels", "sensing_radius", l.sensing_radius));
    m.rebuild();
    for (auto& j : m.joints) {
      const std::string s = "joint." + j.name;
      j.lower = cfg.get_double(s, "lower", j.lower);
      j.upper = cfg.get_double(s, "upper", j.upper);
      j.kp = cfg.get_double(s, "kp", j.kp);
      j.kd = cfg.get_double(s, "kd", j.kd);
      j.backlash_lo = cfg.get_double(s, "backlash_lo", j.backlash_lo);
      j.backlash_hi = cfg.get_double(s, "backlash_hi", j.backlash_hi);
      j.self_lock = cfg.get_bool(s, "self_lock", j.self_lock);
      j.armature = cfg.get_double(s, "armature", j.armature);
      j.damping = cfg.get_double(s, "damping", j.damping);
      j.fixed = cfg.get_bool(s, "fixed", j.fixed);
      j.fixed_value = cfg.get_double(s, "fixed_value", j.fixed_value);
      j.link_inertia = cfg.get_double(s, "link_inertia", j.link_inertia);
      j.backlash_stiffness =
          cfg.get_double(s, "backlash_stiffness", j.backlash_stiffness);
      j.backlash_damping =
          cfg.get_double(s, "backlash_damping", j.backlash_damping);
    }
    m.validate();
    return m;
  }

 private:
  bool limits_set_ = false;
};

inline void write_stick_config(Config& cfg, const StickModel& s) {
  cfg.set("stick", "length", s.length);
  cfg.set("stick", "radius", s.radius);
  cfg.set("stick", "mass", s.mass);
  cfg.set("stick", "friction_mu", s.friction_mu);
}

inline StickModel stick_from_config(const Config& cfg) {
  StickModel s;
  s.length = cfg.get_double("stick", "length", s.length);
  s.radius = cfg.get_double("stick", "radius", s.radius);
  s.mass = cfg.get_double("stick", "mass", s.mass);
  s.friction_mu = cfg.get_double("stick", "friction_mu", s.friction_mu);
  s.validate();
  return s;
}

// ---------------------------------------------------------------------------
// Forward kinematics

struct FingerFrames {
  Vec3 proximal_origin;
  Vec3 distal_origin;
  Mat3 proximal_rotation;
  Mat3 distal_rotation;
  Vec3 flex_axis;  // world direction of both flexion axes
  Vec3 tip_origin;  // pad center on the surface
  Mat3 tip_rotation;  // columns: local x, y, z (z = outward pad normal)
};

struct HandPose {
  std::array<FingerFrames, kNumFingers> fingers;

  Vec3 taxel_world(const TaxelLayout& layout, int taxel_id) const {
    const auto& f = fingers[TaxelLayout::finger_of(taxel_id)];
    return f.tip_origin +
           f.tip_rotation * layout.positions[TaxelLayout::local_of(taxel_id)];
  }

  Vec3 taxel_normal_world(const TaxelLayout& layout, int taxel_id) const {
    const auto& f = fingers[TaxelLayout::finger_of(taxel_id)];
    return f.tip_rotation * layout.normals[TaxelLayout::local_of(taxel_id)];
  }

  std::vector<Vec3> taxel_positions(const TaxelLayout& layout) const {
    std::vector<Vec3> out(kNumTaxels);
    for (int i = 0; i < kNumTaxels; ++i) out[i] = taxel_world(layout, i);
    return out;
  }
};

// `angles` holds effective link angles (gear angle plus backlash offset) for
// all 8 joints; fixed joints always use their fixed value.
inline HandPose forward_kinematics(const HandModel& model,
                                   const std::array<double, kNumJoints>& angles) {
  HandPose pose;
  const auto& g = model.geometry;
  for (int f = 0; f < kNumFingers; ++f) {
    const FingerSpec& spec = model.fingers[f];
    Mat3 r0 = model.base_rotation;
    if (spec.spread >= 0) {
      const JointSpec& s = model.joints[spec.spread];
      r0 = r0 * Eigen::AngleAxisd(s.fixed_value, s.axis).toRotationMatrix();
    }
    const JointSpec& jp = model.joints[spec.proximal];
    const JointSpec& jd = model.joints[spec.distal];
    FingerFrames& ff = pose.fingers[f];
    ff.proximal_origin = model.base_position + model.base_rotation * spec.base;
    ff.proximal_rotation =
        r0 * Eigen::AngleAxisd(angles[spec.proximal], jp.axis).toRotationMatrix();
    ff.distal_origin =
        ff.proximal_origin + ff.proximal_rotation * Vec3(g.proximal_length, 0, 0);
    ff.distal_rotation =
        ff.proximal_rotation *
        Eigen::AngleAxisd(angles[spec.distal], jd.axis).toRotationMatrix();
    ff.flex_axis = r0 * jp.axis;
    const double s = spec.flex_sign;
    Mat3 local;
    local.col(0) = Vec3::UnitX();
    local.col(1) = Vec3(0.0, 0.0, -s);
    local.col(2) = Vec3(0.0, s, 0.0);
    ff.tip_rotation = ff.distal_rotation * local;
    ff.tip_origin =
        ff.distal_origin +
        ff.distal_rotation * Vec3(g.pad_offset, s * model.layout.pad_radius, 0);
  }
  return pose;
}

// Nominal grasp: every finger at total flexion `nominal_flexion`, proximal
// angle chosen so that a vertical stick of the given radius touching each pad
// apex has its axis on the plane y = 0.
struct NominalGrasp {
  std::array<double, kNumActive> q{};
  Vec3 center = Vec3::Zero();
};

inline NominalGrasp nominal_grasp(const HandModel& model,
                                  const StickModel& stick) {
  NominalGrasp out;
  const double phi = model.geometry.nominal_flexion;
  const double reach = stick.radius + model.layout.sensing_radius;
  std::array<double, kNumJoints> angles{};
  std::array<Vec3, kNumFingers> axis_points;
  for (int f = 0; f < kNumFingers; ++f) {
    const FingerSpec& spec = model.fingers[f];
    auto axis_y = [&](double alpha) {
      angles[spec.proximal] = alpha;
      angles[spec.distal] = phi - alpha;
      const HandPose pose = forward_kinematics(model, angles);
      const auto& ff = pose.fingers[f];
      const Vec3 p = ff.tip_origin + reach * ff.tip_rotation.col(2);
      return std::pair{p, p.y() * spec.flex_sign};
    };
    // flex_sign * y of the axis point grows with alpha on this bracket.
    double lo = -0.4, hi = 1.0;
    for (int it = 0; it < 100; ++it) {
      const double mid = 0.5 * (lo + hi);
      if (axis_y(mid).second > 0.0) {
        hi = mid;
      } else {
        lo = mid;
      }
    }
    const double alpha = 0.5 * (lo + hi);
    axis_points[f] = axis_y(alpha).first;
    out.q[2 * f] = alpha;
    out.q[2 * f + 1] = phi - alpha;
  }
  out.center = Vec3(axis_points[0].x(), 0.0, model.base_position.z());
  return out;
}

}  // namespace tactile_hand

#endif  // TACTILE_HAND_HAND_MODEL_HPP_
