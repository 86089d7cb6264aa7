// Command-line entry point: calibrate, genstates, train, eval, plot, selftest.
//
// Exit codes: 0 success, 2 input error, 3 sampling/convergence failure,
// 4 numerical failure.

#include <CLI11.hpp>

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <iostream>
#include <optional>
#include <sstream>
#include <string>

#include "tactile_hand/calibration.hpp"
#include "tactile_hand/env.hpp"
#include "tactile_hand/experiment.hpp"
#include "tactile_hand/manifest.hpp"
#include "tactile_hand/mlp.hpp"
#include "tactile_hand/plot.hpp"
#include "tactile_hand/ppo.hpp"
#include "tactile_hand/selftest.hpp"

namespace fs = std::filesystem;
using namespace tactile_hand;

namespace {

constexpr int kExitOk = 0;
constexpr int kExitInput = 2;
constexpr int kExitSampling = 3;
constexpr int kExitNumerical = 4;

struct Globals {
  std::string config;
  std::optional<long long> seed;
  std::string out = "run";
  int threads = 1;
  std::string command_line;
};

// Command flags are written into the configuration so the manifest alone
// replays a run.
struct Overrides {
  std::vector<std::tuple<std::string, std::string, std::string>> entries;
  void add(const std::string& s, const std::string& k, const std::string& v) {
    entries.emplace_back(s, k, v);
  }
};

// "pi", "0.5pi", "1.5*pi", "3.14" -> rad/s.
double parse_rate(const std::string& text) {
  std::string s;
  for (char c : text) {
    if (c != ' ' && c != '*') s += c;
  }
  double factor = 1.0;
  if (s.size() >= 2 && s.substr(s.size() - 2) == "pi") {
    factor = kPi;
    s.erase(s.size() - 2);
    if (s.empty()) return kPi;
  }
  try {
    std::size_t used = 0;
    const double v = std::stod(s, &used);
    if (used != s.size()) throw std::invalid_argument(text);
    return v * factor;
  } catch (const std::exception&) {
    throw ConfigError("cannot parse rate '" + text + "'");
  }
}

std::string fmt_num(double v) {
  std::ostringstream o;
  o << std::setprecision(17) << v;
  return o.str();
}

Config load_resolved(const Globals& g, const Overrides& ov) {
  Config user;
  if (!g.config.empty()) user = strip_run_bookkeeping(Config::load(g.config));
  Config cfg = ExperimentSetup::resolve(user);
  for (const auto& [s, k, v] : ov.entries) cfg.set(s, k, v);
  if (g.seed) cfg.set("run", "seed", *g.seed);
  return cfg;
}

RunManifest start_manifest(const Globals& g, const Config& cfg) {
  RunManifest m;
  m.command = g.command_line;
  m.config = cfg;
  m.seed = static_cast<std::uint64_t>(cfg.get_int("run", "seed", 0));
  m.started = utc_timestamp();
  m.run_dir = g.out;
  m.write();
  return m;
}

void write_text(const std::string& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw ConfigError("cannot write " + path);
  out << text;
}

// ---------------------------------------------------------------------------
// calibrate

struct CalibrateArgs {
  std::string mode;  // pd | backlash
  std::string joint = "J0";
  std::string recording;
  bool synthetic = false;
  int budget = 300;
  double noise = 1e-3;
  int probes = 5;
  double push = 0.05;
};

int cmd_calibrate(const Globals& g, const CalibrateArgs& a) {
  Overrides ov;
  ov.add("calibrate", "mode", a.mode);
  ov.add("calibrate", "joint", a.joint);
  ov.add("calibrate", "recording", a.recording);
  ov.add("calibrate", "synthetic", a.synthetic ? "true" : "false");
  ov.add("calibrate", "budget", std::to_string(a.budget));
  ov.add("calibrate", "noise", fmt_num(a.noise));
  ov.add("calibrate", "probes", std::to_string(a.probes));
  ov.add("calibrate", "push", fmt_num(a.push));
  const Config cfg = load_resolved(g, ov);
  const ExperimentSetup setup = ExperimentSetup::from_config(cfg);
  const int active = active_index_of(a.joint);
  const JointSpec spec = setup.model.active(active);
  const double cap = setup.model.torque_cap();
  if (!a.synthetic && a.recording.empty()) {
    throw ConfigError("calibrate: give --recording FILE or --synthetic");
  }
  if (a.mode == "backlash" && !is_proximal_active(active)) {
    throw ConfigError(a.joint + " has no worm gear backlash");
  }

  // Inputs are read before anything is written.
  ReferenceRecording rec;
  std::vector<BacklashProbe> measured;
  if (!a.synthetic) {
    std::ifstream in(a.recording);
    if (!in) throw ConfigError("cannot open recording " + a.recording);
    if (a.mode == "pd") {
      rec = read_recording(in);
    } else {
      std::string line;
      std::getline(in, line);
      if (line.rfind("q_desired,q_a,q_b,q_c", 0) != 0) {
        throw ConfigError(a.recording + ": expected header q_desired,q_a,q_b,q_c");
      }
      while (std::getline(in, line)) {
        if (line.empty()) continue;
        BacklashProbe p;
        if (std::sscanf(line.c_str(), "%lf,%lf,%lf,%lf", &p.q_desired, &p.q_a,
                        &p.q_b, &p.q_c) != 4) {
          throw ConfigError(a.recording + ": malformed probe row '" + line + "'");
        }
        measured.push_back(p);
      }
      if (measured.empty()) throw ConfigError(a.recording + ": no probes");
    }
  }

  RunManifest man = start_manifest(g, cfg);
  Rng rng(derive_seed(man.seed, stream::kCalibration));
  JointCalibration jc;
  jc.joint = a.joint;
  jc.kp = setup.randomization.joints[active].kp.mean;
  jc.kp_std = setup.randomization.joints[active].kp.std;
  jc.kd = setup.randomization.joints[active].kd.mean;
  jc.kd_std = setup.randomization.joints[active].kd.std;
  jc.backlash_lo = spec.backlash_lo;
  jc.backlash_hi = spec.backlash_hi;

  if (a.mode == "pd") {
    JointSpec hidden = spec;
    if (a.synthetic) {
      hidden.kp = spec.kp * uniform(rng, 0.7, 1.3);
      hidden.kd = spec.kd * uniform(rng, 0.7, 1.3);
      const double mid = 0.5 * (spec.lower + spec.upper);
      const double amp = 0.2 * (spec.upper - spec.lower);
      rec = synthetic_recording(hidden, calibration_signal(mid, amp), a.noise,
                                cap, rng);
      std::ofstream out(man.output("synthetic_recording.csv"));
      write_recording(out, rec);
    }
    const GainFit fit = fit_pd_gains(rec, spec, cap, a.budget,
                                     derive_seed(man.seed, stream::kCalibration + 50),
                                     g.threads, &std::cerr);
    jc.kp = fit.kp;
    jc.kp_std = fit.kp_std;
    jc.kd = fit.kd;
    jc.kd_std = fit.kd_std;
    jc.residual = fit.residual;
    std::cout << std::setprecision(6);
    std::cout << a.joint << " fit kp " << fit.kp << " (std " << fit.kp_std
              << ") kd " << fit.kd << " (std " << fit.kd_std << ") residual "
              << fit.residual << " after " << fit.search.generations
              << " generations\n";
    if (a.synthetic) {
      std::cout << "hidden kp " << hidden.kp << " kd " << hidden.kd
                << "; relative error kp "
                << std::abs(fit.kp - hidden.kp) / hidden.kp << " kd "
                << std::abs(fit.kd - hidden.kd) / hidden.kd << '\n';
    }
  } else {
    BacklashEstimate est;
    if (a.synthetic) {
      est = estimate_backlash(spec, default_probes(spec, a.probes), a.push, cap,
                              &std::cerr);
    } else {
      est.probes = measured;
      for (const auto& p : measured) {
        est.lo += p.lo();
        est.hi += p.hi();
      }
      est.lo /= static_cast<double>(measured.size());
      est.hi /= static_cast<double>(measured.size());
    }
    jc.backlash_lo = est.lo;
    jc.backlash_hi = est.hi;
    std::ofstream out(man.output("backlash_probes.csv"));
    out << "q_desired,q_a,q_b,q_c\n" << std::setprecision(12);
    for (const auto& p : est.probes) {
      out << p.q_desired << ',' << p.q_a << ',' << p.q_b << ',' << p.q_c << '\n';
    }
    std::cout << a.joint << " backlash [" << est.lo << ", " << est.hi
              << "] rad from " << est.probes.size() << " probes ("
              << est.discarded << " discarded)\n";
  }

  CalibrationResult result;
  result.joints.push_back(jc);
  Config report;
  result.write(report);
  report.save(man.output("calibration.ini"));
  Config rand;
  export_randomization(result, setup.randomization).write_config(rand);
  rand.save(man.output("randomization.ini"));
  man.finish("ok");
  return kExitOk;
}

// ---------------------------------------------------------------------------
// genstates

struct GenstatesArgs {
  std::optional<int> count;
  std::string center_offset;
};

int cmd_genstates(const Globals& g, const GenstatesArgs& a) {
  Overrides ov;
  if (a.count) ov.add("states", "count", std::to_string(*a.count));
  if (!a.center_offset.empty()) ov.add("states", "center_offset", a.center_offset);
  const Config cfg = load_resolved(g, ov);
  const ExperimentSetup setup = ExperimentSetup::from_config(cfg);
  RunManifest man = start_manifest(g, cfg);
  const std::string path = man.output("initial_states.csv");
  if (setup.states.count == 0) {
    std::cerr << "warning: count is 0, writing an empty state set\n";
  }
  InitialStateSet set;
  try {
    set = setup.generate_states(&std::cerr);
  } catch (const ExhaustedSampling&) {
    man.finish("sampling failure");
    throw;
  }
  std::ofstream out(path);
  write_initial_states(out, set);
  const double rate = set.attempts > 0
                          ? static_cast<double>(set.records.size()) / set.attempts
                          : 0.0;
  std::cout << "generated " << set.records.size() << " states from "
            << set.attempts << " attempts (acceptance " << 100.0 * rate
            << "%)\n";
  man.finish("ok");
  return kExitOk;
}

// ---------------------------------------------------------------------------
// train / eval

struct TaskArgs {
  std::string task;
  std::string obs;
  std::string states;
  std::string omega;
  std::optional<double> radius;

  void apply(Overrides& ov) const {
    if (!task.empty()) {
      trajectory_kind_from_string(task);
      ov.add("task", "trajectory", task);
    }
    if (!obs.empty()) {
      obs_variant_from_string(obs);
      ov.add("task", "observation", obs);
    }
    if (!omega.empty()) ov.add("task", "omega", fmt_num(parse_rate(omega)));
    if (radius) ov.add("task", "radius", fmt_num(*radius));
    if (!states.empty()) ov.add("randomization", "initial_states", states);
  }
};

std::shared_ptr<InitialStateSet> states_for_run(const ExperimentSetup& setup,
                                                RunManifest& man) {
  if (!setup.randomization.initial_states.empty()) {
    return std::make_shared<InitialStateSet>(
        load_initial_states(setup.randomization.initial_states));
  }
  auto set = std::make_shared<InitialStateSet>(setup.generate_states(&std::cerr));
  std::ofstream out(man.output("initial_states.csv"));
  write_initial_states(out, *set);
  return set;
}

struct TrainArgs {
  TaskArgs task;
  std::optional<long> steps;
};

int cmd_train(const Globals& g, const TrainArgs& a) {
  Overrides ov;
  a.task.apply(ov);
  if (a.steps) ov.add("train", "total_steps", std::to_string(*a.steps));
  const Config cfg = load_resolved(g, ov);
  ExperimentSetup setup = ExperimentSetup::from_config(cfg);
  setup.train.threads = g.threads;
  if (!setup.randomization.initial_states.empty() &&
      !fs::exists(setup.randomization.initial_states)) {
    throw ConfigError("initial state file not found: " +
                      setup.randomization.initial_states);
  }
  RunManifest man = start_manifest(g, cfg);
  const auto set = states_for_run(setup, man);
  std::ofstream curve(man.output("curve.csv"));
  write_curve_header(curve);
  fs::create_directories(man.run_dir / "checkpoints");
  const std::string final_path = man.output("policy.ckpt");
  std::ofstream log_file(man.output("train.log"));
  auto hook = [&](const CurveEntry& c, const ActorCritic& ac) {
    write_curve_row(curve, c);
    curve.flush();
    if (setup.train.checkpoint_every > 0 &&
        (c.iteration + 1) % setup.train.checkpoint_every == 0) {
      char name[64];
      std::snprintf(name, sizeof(name), "checkpoints/iter_%05d.ckpt", c.iteration + 1);
      save_checkpoint(ac, man.output(name));
    }
  };
  struct Tee : std::streambuf {
    std::streambuf *a, *b;
    Tee(std::streambuf* x, std::streambuf* y) : a(x), b(y) {}
    int overflow(int c) override {
      if (c == EOF) return 0;
      a->sputc(static_cast<char>(c));
      b->sputc(static_cast<char>(c));
      return c;
    }
    int sync() override { return a->pubsync() | b->pubsync(); }
  } tee(std::cout.rdbuf(), log_file.rdbuf());
  std::ostream log(&tee);
  const TrainResult res = train(setup.factory(set), setup.train, hook, &log);
  save_checkpoint(res.params, final_path);
  man.finish("ok");
  return kExitOk;
}

struct EvalArgs {
  TaskArgs task;
  std::string checkpoint;
  int episodes = 10;
  bool zero_policy = false;
};

int cmd_eval(const Globals& g, const EvalArgs& a) {
  Overrides ov;
  a.task.apply(ov);
  ov.add("eval", "checkpoint", a.checkpoint);
  ov.add("eval", "episodes", std::to_string(a.episodes));
  ov.add("eval", "zero_policy", a.zero_policy ? "true" : "false");
  const Config cfg = load_resolved(g, ov);
  const ExperimentSetup setup = ExperimentSetup::from_config(cfg);
  if (a.episodes < 1) throw ConfigError("eval: --episodes must be >= 1");
  std::optional<ActorCritic> policy;
  if (!a.zero_policy) {
    if (a.checkpoint.empty()) throw ConfigError("eval: give --checkpoint or --zero-policy");
    if (!fs::exists(a.checkpoint)) throw ConfigError("checkpoint not found: " + a.checkpoint);
    policy = load_checkpoint(a.checkpoint);
    const int want = obs_dim(setup.env.obs);
    if (policy->obs_dim() != want || policy->act_dim() != kNumActive) {
      throw ShapeMismatch("checkpoint expects " + std::to_string(policy->obs_dim()) +
                          " observations, task '" + to_string(setup.env.obs) +
                          "' gives " + std::to_string(want));
    }
  }
  if (!setup.randomization.initial_states.empty() &&
      !fs::exists(setup.randomization.initial_states)) {
    throw ConfigError("initial state file not found: " +
                      setup.randomization.initial_states);
  }
  RunManifest man = start_manifest(g, cfg);
  const auto set = states_for_run(setup, man);
  HandEnv env(setup.model, setup.stick, setup.env, setup.randomization, set,
              derive_seed(man.seed, stream::kEvaluation));
  ActionFn act = policy ? mean_action(*policy)
                        : ActionFn([](const VecX&) { return VecX(VecX::Zero(kNumActive)); });
  std::ofstream trace(man.output("episodes.csv"));
  write_episode_header(trace);
  EpisodeLog current;
  int current_ep = 0;
  auto hook = [&](int ep, const StepResult& r) {
    if (ep != current_ep) {
      write_episode_rows(trace, current_ep, current);
      current = {};
      current_ep = ep;
    }
    current.steps.push_back(log_step(env, r));
    current.dropped = r.terminated;
  };
  const EvalReport rep = evaluate(env, act, a.episodes, hook);
  write_episode_rows(trace, current_ep, current);

  std::ofstream rows(man.output("eval.csv"));
  rows << "episode,return,length,retained,p_err_cm,q_err_deg\n" << std::setprecision(10);
  for (std::size_t k = 0; k < rep.episodes.size(); ++k) {
    const EvalEpisode& e = rep.episodes[k];
    rows << k << ',' << e.ret << ',' << e.length << ',' << (e.retained ? 1 : 0)
         << ',' << 100.0 * e.mean_p_err << ',' << e.mean_q_err * 180.0 / kPi << '\n';
  }
  Config summary;
  summary.set("eval", "episodes", a.episodes);
  summary.set("eval", "retained", rep.retained());
  summary.set("eval", "retention", static_cast<double>(rep.retained()) / a.episodes);
  summary.set("eval", "mean_return", rep.mean_return());
  summary.set("eval", "mean_p_err_cm", 100.0 * rep.mean_p_err());
  summary.set("eval", "mean_q_err_deg", rep.mean_q_err() * 180.0 / kPi);
  summary.save(man.output("eval_summary.ini"));
  std::cout << std::setprecision(4) << "grasp retained " << rep.retained() << "/"
            << a.episodes << " (" << 100.0 * rep.retained() / a.episodes
            << "%), p_err " << 100.0 * rep.mean_p_err() << " cm, q_err "
            << rep.mean_q_err() * 180.0 / kPi << " deg, return "
            << rep.mean_return() << '\n';
  if (rep.retained() == 0) std::cout << "warning: grasp lost in every episode\n";
  man.finish("ok");
  return kExitOk;
}

// ---------------------------------------------------------------------------
// plot

struct PlotArgs {
  std::string log;
  std::optional<int> episode;
};

int cmd_plot(const Globals& g, const PlotArgs& a) {
  Overrides ov;
  ov.add("plot", "log", a.log);
  if (a.episode) ov.add("plot", "episode", std::to_string(*a.episode));
  std::ifstream in(a.log);
  if (!in) throw ConfigError("cannot open episode log " + a.log);
  const EpisodeTable table = read_episode_log(in);
  const Config cfg = load_resolved(g, ov);
  RunManifest man = start_manifest(g, cfg);
  std::vector<EpisodeStep> steps;
  if (table.empty()) {
    std::cerr << "warning: episode log is empty\n";
  } else {
    const int ep = a.episode.value_or(table.begin()->first);
    const auto it = table.find(ep);
    if (it == table.end()) {
      throw ConfigError("episode " + std::to_string(ep) + " not in the log");
    }
    steps = it->second;
  }
  write_text(man.output("trajectory.svg"), render_svg({trajectory_panel(steps)}, 1, 460, 460));
  write_text(man.output("joints.svg"), render_svg({joints_panel(steps)}, 1, 720, 320));
  write_text(man.output("contacts.svg"), render_svg(contact_panels(steps), 1, 720, 260));
  man.finish("ok");
  return kExitOk;
}

int guarded(const std::function<int()>& fn) {
  try {
    return fn();
  } catch (const ExhaustedSampling& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kExitSampling;
  } catch (const SaturatedProbe& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kExitSampling;
  } catch (const NonFiniteState& e) {
    std::cerr << "numerical failure: " << e.what() << '\n';
    return kExitNumerical;
  } catch (const NonFiniteLoss& e) {
    std::cerr << "numerical failure: " << e.what() << '\n';
    return kExitNumerical;
  } catch (const Error& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kExitInput;
  } catch (const fs::filesystem_error& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kExitInput;
  }
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Tactile in-hand manipulation toolkit"};
  app.require_subcommand(1);
  app.fallthrough();
  Globals g;
  for (int i = 0; i < argc; ++i) g.command_line += (i ? " " : "") + std::string(argv[i]);
  long long seed_value = 0;
  auto* seed_opt = app.add_option("--seed", seed_value, "Root seed");
  app.add_option("--config", g.config, "Configuration file (a manifest works too)");
  app.add_option("--out", g.out, "Run directory")->capture_default_str();
  app.add_option("--threads", g.threads, "Worker threads")->check(CLI::PositiveNumber);

  auto* cal = app.add_subcommand("calibrate", "Fit PD gains or measure backlash");
  cal->require_subcommand(1);
  CalibrateArgs ca_pd, ca_bl;
  ca_pd.mode = "pd";
  ca_bl.mode = "backlash";
  auto* pd = cal->add_subcommand("pd", "Fit PD gains to a step/sine recording");
  pd->add_option("--joint", ca_pd.joint)->capture_default_str();
  pd->add_option("--recording", ca_pd.recording, "CSV t,q_target,q_measured");
  pd->add_flag("--synthetic", ca_pd.synthetic, "Use a simulated recording with hidden gains");
  pd->add_option("--budget", ca_pd.budget, "CMA-ES generations")->capture_default_str();
  pd->add_option("--noise", ca_pd.noise, "Synthetic measurement noise (rad)")->capture_default_str();
  auto* bl = cal->add_subcommand("backlash", "Estimate the backlash range");
  bl->add_option("--joint", ca_bl.joint)->capture_default_str();
  bl->add_option("--recording", ca_bl.recording, "CSV q_desired,q_a,q_b,q_c");
  bl->add_flag("--synthetic", ca_bl.synthetic, "Probe the simulated joint");
  bl->add_option("--probes", ca_bl.probes)->capture_default_str()->check(CLI::PositiveNumber);
  bl->add_option("--push", ca_bl.push, "Probe torque (N m)")->capture_default_str();

  auto* gen = app.add_subcommand("genstates", "Generate initial grasp states");
  GenstatesArgs ga;
  gen->add_option("--count", ga.count);
  gen->add_option("--center-offset", ga.center_offset, "x,y,z shift of the stick box (m)");

  TrainArgs ta;
  auto* tr = app.add_subcommand("train", "Train a policy with PPO");
  tr->add_option("--task", ta.task.task, "line|circle|spiral|eight");
  tr->add_option("--obs", ta.task.obs, "Observation variant");
  tr->add_option("--states", ta.task.states, "Initial state CSV");
  tr->add_option("--omega", ta.task.omega, "Circle angular speed, e.g. pi or 0.5pi");
  tr->add_option("--radius", ta.task.radius, "Circle radius (m)");
  tr->add_option("--steps", ta.steps, "Total environment steps");

  EvalArgs ea;
  auto* ev = app.add_subcommand("eval", "Evaluate a checkpoint");
  ev->add_option("--checkpoint", ea.checkpoint);
  ev->add_flag("--zero-policy", ea.zero_policy, "Evaluate zero displacements instead");
  ev->add_option("--episodes", ea.episodes)->capture_default_str();
  ev->add_option("--task", ea.task.task);
  ev->add_option("--obs", ea.task.obs);
  ev->add_option("--states", ea.task.states);
  ev->add_option("--omega", ea.task.omega);
  ev->add_option("--radius", ea.task.radius);

  PlotArgs pa;
  auto* pl = app.add_subcommand("plot", "Plot an episode log as SVG");
  pl->add_option("--log", pa.log)->required();
  pl->add_option("--episode", pa.episode);

  auto* st = app.add_subcommand("selftest", "Run quick oracle checks");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? kExitOk : kExitInput;
  }
  if (*seed_opt) g.seed = seed_value;

  if (*pd) return guarded([&] { return cmd_calibrate(g, ca_pd); });
  if (*bl) return guarded([&] { return cmd_calibrate(g, ca_bl); });
  if (*gen) return guarded([&] { return cmd_genstates(g, ga); });
  if (*tr) return guarded([&] { return cmd_train(g, ta); });
  if (*ev) return guarded([&] { return cmd_eval(g, ea); });
  if (*pl) return guarded([&] { return cmd_plot(g, pa); });
  if (*st) return run_selftest(std::cout) ? kExitOk : kExitNumerical;
  return kExitInput;
}
