#ifndef TACTILE_HAND_CALIBRATION_HPP_
#define TACTILE_HAND_CALIBRATION_HPP_

// Joint identification: PD gain fitting against recorded position traces,
// backlash range probing, export of the fitted distributions.

#include <fstream>
#include <iomanip>
#include <limits>
#include <ostream>
#include <sstream>
#include <string>
#include <vector>

#include "tactile_hand/cmaes.hpp"
#include "tactile_hand/common.hpp"
#include "tactile_hand/config.hpp"
#include "tactile_hand/dynamics.hpp"
#include "tactile_hand/randomization.hpp"
#include "tactile_hand/reference.hpp"

namespace tactile_hand {

// One joint, sampled at a fixed rate.
struct ReferenceRecording {
  std::vector<double> t;
  std::vector<double> q_target;
  std::vector<double> q_measured;

  std::size_t size() const { return t.size(); }

  void validate() const {
    if (q_target.size() != t.size() || q_measured.size() != t.size()) {
      throw ConfigError("recording: column lengths differ");
    }
    if (t.size() < 2) throw ConfigError("recording: fewer than two samples");
    for (std::size_t i = 1; i < t.size(); ++i) {
      if (!(t[i] > t[i - 1])) {
        throw ConfigError("recording: times not strictly increasing");
      }
    }
  }
};

inline void write_recording(std::ostream& out, const ReferenceRecording& r) {
  out << "t,q_target,q_measured\n" << std::setprecision(17);
  for (std::size_t i = 0; i < r.size(); ++i) {
    out << r.t[i] << ',' << r.q_target[i] << ',' << r.q_measured[i] << '\n';
  }
}

inline ReferenceRecording read_recording(std::istream& in) {
  ReferenceRecording r;
  std::string line;
  if (!std::getline(in, line)) throw ConfigError("recording: empty file");
  int line_no = 1;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty()) continue;
    std::stringstream ss(line);
    std::string cell;
    std::vector<double> v;
    try {
      while (std::getline(ss, cell, ',')) v.push_back(std::stod(cell));
    } catch (const std::exception&) {
      throw ConfigError("recording line " + std::to_string(line_no) +
                        ": not a number");
    }
    if (v.size() != 3) {
      throw ConfigError("recording line " + std::to_string(line_no) +
                        ": expected 3 columns");
    }
    r.t.push_back(v[0]);
    r.q_target.push_back(v[1]);
    r.q_measured.push_back(v[2]);
  }
  r.validate();
  return r;
}

// Step sequence for the first half, then a 1 Hz sinusoid, around `base`.
inline ReferenceRecording calibration_signal(double base, double amplitude,
                                             double duration = 10.0,
                                             double dt = 1e-3) {
  ReferenceRecording r;
  const int n = static_cast<int>(std::lround(duration / dt)) + 1;
  const double levels[] = {0.0, 1.0, -0.5, 0.5, -1.0, 0.0};
  const double half = 0.5 * duration;
  for (int i = 0; i < n; ++i) {
    const double t = i * dt;
    double q;
    if (t < half) {
      const int k = std::min(5, static_cast<int>(t / (half / 6.0)));
      q = base + amplitude * levels[k];
    } else {
      q = base + amplitude * std::sin(2.0 * kPi * 1.0 * (t - half));
    }
    r.t.push_back(t);
    r.q_target.push_back(q);
    r.q_measured.push_back(q);
  }
  return r;
}

// Runs the single-joint bench along the recording's targets. Sample k of the
// output is the gear position at t[k]; the bench starts at rest at the first
// measured position.
inline std::vector<double> simulate_joint(const JointSpec& spec,
                                          const ReferenceRecording& rec,
                                          double torque_cap, double dt = 1e-3) {
  JointBenchState s;
  s.q = rec.q_measured.front();
  std::vector<double> out;
  out.reserve(rec.size());
  out.push_back(s.q);
  for (std::size_t k = 0; k + 1 < rec.size(); ++k) {
    const int n = std::max(
        1, static_cast<int>(std::lround((rec.t[k + 1] - rec.t[k]) / dt)));
    for (int i = 0; i < n; ++i) {
      bench_step(spec, s, rec.q_target[k], 0.0, dt, torque_cap);
    }
    out.push_back(s.q);
  }
  return out;
}

// Sum over samples of |q_sim - q_real|. Non-positive gains and numerical
// blow-ups give +inf.
inline double trajectory_loss(double kp, double kd,
                              const ReferenceRecording& rec,
                              const JointSpec& spec, double torque_cap) {
  if (!(kp > 0.0) || !(kd > 0.0)) {
    return std::numeric_limits<double>::infinity();
  }
  JointSpec j = spec;
  j.kp = kp;
  j.kd = kd;
  try {
    const auto sim = simulate_joint(j, rec, torque_cap);
    double loss = 0.0;
    for (std::size_t k = 0; k < sim.size(); ++k) {
      loss += std::abs(sim[k] - rec.q_measured[k]);
    }
    return std::isfinite(loss) ? loss : std::numeric_limits<double>::infinity();
  } catch (const NonFiniteState&) {
    return std::numeric_limits<double>::infinity();
  }
}

// Synthetic "hardware" trace: the bench with hidden gains plus Gaussian
// measurement noise.
inline ReferenceRecording synthetic_recording(const JointSpec& hidden,
                                              const ReferenceRecording& signal,
                                              double noise_std,
                                              double torque_cap, Rng& rng) {
  ReferenceRecording r = signal;
  const auto clean = simulate_joint(hidden, signal, torque_cap);
  for (std::size_t k = 0; k < r.size(); ++k) {
    r.q_measured[k] =
        clean[k] + (noise_std > 0.0 ? noise_std * standard_normal(rng) : 0.0);
  }
  return r;
}

struct GainFit {
  double kp = 0.0;
  double kd = 0.0;
  double kp_std = 0.0;
  double kd_std = 0.0;
  double residual = 0.0;
  CmaEsResult search;
};

inline GainFit fit_pd_gains(const ReferenceRecording& rec,
                            const JointSpec& spec, double torque_cap,
                            int generations, std::uint64_t seed,
                            int threads = 1, std::ostream* log = nullptr) {
  rec.validate();
  VecX x0(2);
  x0 << spec.kp, spec.kd;
  // Search in log-gain space scaled by the starting guess; bounds keep the
  // gains positive and within two decades of it.
  CmaEsOptions opt;
  opt.max_generations = generations;
  opt.seed = seed;
  opt.threads = threads;
  opt.lower = {-std::log(100.0), -std::log(100.0)};
  opt.upper = {std::log(100.0), std::log(100.0)};
  opt.tol_x = 1e-8;
  auto obj = [&](const VecX& z) {
    return trajectory_loss(x0[0] * std::exp(z[0]), x0[1] * std::exp(z[1]), rec,
                           spec, torque_cap);
  };
  GainFit fit;
  fit.search = cma_es_minimize(obj, VecX::Zero(2), 0.5, opt, log);
  fit.kp = x0[0] * std::exp(fit.search.x_best[0]);
  fit.kd = x0[1] * std::exp(fit.search.x_best[1]);
  // Map the final log-space spread to gain space (first order).
  fit.kp_std = fit.kp * fit.search.stddev[0];
  fit.kd_std = fit.kd * fit.search.stddev[1];
  fit.residual = fit.search.f_best;
  return fit;
}

// ---------------------------------------------------------------------------
// Backlash probing.

struct BacklashProbe {
  double q_desired = 0.0;
  double q_a = 0.0;  // settled link angle while holding
  double q_b = 0.0;  // extreme under +push
  double q_c = 0.0;  // extreme under -push
  double lo() const { return q_c - q_a; }
  double hi() const { return q_b - q_a; }
};

struct BacklashEstimate {
  double lo = 0.0;
  double hi = 0.0;
  std::vector<BacklashProbe> probes;
  int discarded = 0;
};

inline BacklashProbe probe_backlash(const JointSpec& spec, double q_desired,
                                    double push_torque, double torque_cap,
                                    double settle = 0.5, double dt = 1e-3) {
  JointBenchState s;
  s.q = q_desired;
  const int n = static_cast<int>(std::lround(settle / dt));
  for (int i = 0; i < n; ++i) bench_step(spec, s, q_desired, 0.0, dt, torque_cap);
  BacklashProbe p;
  p.q_desired = q_desired;
  p.q_a = s.link_angle();
  p.q_b = p.q_a;
  p.q_c = p.q_a;
  for (int i = 0; i < n; ++i) {
    bench_step(spec, s, q_desired, push_torque, dt, torque_cap);
    p.q_b = std::max(p.q_b, s.link_angle());
  }
  for (int i = 0; i < n; ++i) {
    bench_step(spec, s, q_desired, -push_torque, dt, torque_cap);
    p.q_c = std::min(p.q_c, s.link_angle());
  }
  const double tol = 1e-9;
  if (p.q_b >= spec.upper + spec.backlash_hi - tol ||
      p.q_c <= spec.lower + spec.backlash_lo + tol ||
      s.q <= spec.lower + tol || s.q >= spec.upper - tol) {
    throw SaturatedProbe("backlash probe at " + std::to_string(q_desired) +
                         " reached a joint limit");
  }
  return p;
}

// Mean per-probe range over the probe positions. Probes that hit a limit are
// discarded (and logged).
inline BacklashEstimate estimate_backlash(const JointSpec& spec,
                                          const std::vector<double>& probes,
                                          double push_torque, double torque_cap,
                                          std::ostream* log = nullptr) {
  BacklashEstimate est;
  for (double q : probes) {
    try {
      est.probes.push_back(
          probe_backlash(spec, q, push_torque, torque_cap));
    } catch (const SaturatedProbe& e) {
      ++est.discarded;
      if (log) *log << "discarded: " << e.what() << '\n';
    }
  }
  if (est.probes.empty()) {
    throw SaturatedProbe("estimate_backlash: every probe was discarded");
  }
  for (const auto& p : est.probes) {
    est.lo += p.lo();
    est.hi += p.hi();
  }
  est.lo /= static_cast<double>(est.probes.size());
  est.hi /= static_cast<double>(est.probes.size());
  return est;
}

// Evenly spread probe positions over the middle of the joint range.
inline std::vector<double> default_probes(const JointSpec& spec, int count) {
  std::vector<double> out;
  const double a = spec.lower + 0.25 * (spec.upper - spec.lower);
  const double b = spec.lower + 0.75 * (spec.upper - spec.lower);
  for (int i = 0; i < count; ++i) {
    out.push_back(count == 1 ? 0.5 * (a + b) : a + (b - a) * i / (count - 1));
  }
  return out;
}

// Triangle-wave command on a backlash joint. Returns, per sample, the gear
// angle and the link (effective) angle.
struct HysteresisTrace {
  std::vector<double> command;
  std::vector<double> gear;
  std::vector<double> link;
  std::vector<int> direction;  // +1 rising command, -1 falling
};

inline HysteresisTrace backlash_triangle(const JointSpec& spec, double center,
                                         double amplitude, double rate,
                                         int cycles, double torque_cap,
                                         double dt = 1e-3) {
  HysteresisTrace tr;
  JointBenchState s;
  s.q = center - amplitude;
  const double period = 4.0 * amplitude / rate;
  const int n = static_cast<int>(std::lround(cycles * period / dt));
  for (int i = 0; i < n; ++i) {
    const double t = i * dt;
    const double x = reflect(rate * t, 2.0 * amplitude);
    const double cmd = center - amplitude + x;
    bench_step(spec, s, cmd, 0.0, dt, torque_cap);
    tr.command.push_back(cmd);
    tr.gear.push_back(s.q);
    tr.link.push_back(s.link_angle());
    tr.direction.push_back(std::fmod(rate * t, 4.0 * amplitude) <
                                   2.0 * amplitude
                               ? 1
                               : -1);
  }
  return tr;
}

// Loop width: difference of (link - gear) between falling and rising
// branches, taken as the median over the middle half of each branch after
// the first cycle.
inline double hysteresis_width(const HysteresisTrace& tr, double center,
                               double amplitude) {
  std::vector<double> up, down;
  const std::size_t skip = tr.gear.size() / 4;
  for (std::size_t i = skip; i < tr.gear.size(); ++i) {
    if (std::abs(tr.command[i] - center) > 0.5 * amplitude) continue;
    const double off = tr.link[i] - tr.gear[i];
    (tr.direction[i] > 0 ? up : down).push_back(off);
  }
  if (up.empty() || down.empty()) {
    throw EmptyWindow("hysteresis_width: no samples on a branch");
  }
  auto median = [](std::vector<double> v) {
    std::nth_element(v.begin(), v.begin() + v.size() / 2, v.end());
    return v[v.size() / 2];
  };
  return median(down) - median(up);
}

// ---------------------------------------------------------------------------
// Results and export.

struct JointCalibration {
  std::string joint;
  double kp = 0.0, kp_std = 0.0;
  double kd = 0.0, kd_std = 0.0;
  double backlash_lo = 0.0, backlash_hi = 0.0;
  double residual = 0.0;
};

struct CalibrationResult {
  std::vector<JointCalibration> joints;

  void write(Config& cfg) const {
    for (const auto& j : joints) {
      const std::string s = "calibration." + j.joint;
      cfg.set(s, "kp_mean", j.kp);
      cfg.set(s, "kp_std", j.kp_std);
      cfg.set(s, "kd_mean", j.kd);
      cfg.set(s, "kd_std", j.kd_std);
      cfg.set(s, "backlash_lo", j.backlash_lo);
      cfg.set(s, "backlash_hi", j.backlash_hi);
      cfg.set(s, "residual", j.residual);
    }
  }
};

inline int active_index_of(const std::string& joint_name) {
  for (int a = 0; a < kNumActive; ++a) {
    if (joint_name == "J" + std::to_string(kActiveJoints[a])) return a;
  }
  throw ConfigError("not an actuated joint: " + joint_name);
}

// Normal distributions from the fit, truncated at zero.
inline RandomizationSpec export_randomization(const CalibrationResult& result,
                                              const RandomizationSpec& base) {
  RandomizationSpec spec = base;
  for (const auto& j : result.joints) {
    const int a = active_index_of(j.joint);
    spec.joints[a].kp = {j.kp, j.kp_std, 0.0};
    spec.joints[a].kd = {j.kd, j.kd_std, 0.0};
    if (is_proximal_active(a)) {
      spec.backlash_lo[finger_of_active(a)] = j.backlash_lo;
      spec.backlash_hi[finger_of_active(a)] = j.backlash_hi;
    }
  }
  return spec;
}

}  // namespace tactile_hand

#endif  // TACTILE_HAND_CALIBRATION_HPP_
