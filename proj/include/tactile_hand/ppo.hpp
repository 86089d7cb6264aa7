#ifndef TACTILE_HAND_PPO_HPP_
#define TACTILE_HAND_PPO_HPP_

// Clipped-surrogate PPO with GAE. Rollouts are collected from a fixed set of
// environments, each with its own action-noise generator, and concatenated
// in environment-index order, so a run is reproducible for a given env count
// whether or not collection is threaded.

#include <algorithm>
#include <chrono>
#include <filesystem>
#include <functional>
#include <limits>
#include <memory>
#include <numeric>
#include <ostream>
#include <string>
#include <thread>
#include <vector>

#include "tactile_hand/common.hpp"
#include "tactile_hand/config.hpp"
#include "tactile_hand/environment.hpp"
#include "tactile_hand/mlp.hpp"

namespace tactile_hand {

struct TrainConfig {
  double gamma = 0.99;
  double lambda = 0.95;
  double clip = 0.2;
  double lr = 3e-4;
  int epochs = 10;
  int minibatch = 1024;
  int num_envs = 8;
  int steps_per_env = 2048;
  long total_steps = 5'000'000;
  std::uint64_t seed = 0;
  double entropy_coef = 1e-3;
  double value_coef = 0.5;
  double max_grad_norm = 0.5;
  std::vector<int> hidden{64, 64};
  double log_std_init = -1.2039728043259361;  // ln 0.3
  int threads = 1;
  int checkpoint_every = 10;  // iterations; 0 disables periodic checkpoints

  void validate() const {
    if (!(gamma > 0.0 && gamma <= 1.0)) throw ConfigError("gamma must be in (0, 1]");
    if (!(lambda >= 0.0 && lambda <= 1.0)) throw ConfigError("lambda must be in [0, 1]");
    if (!(clip > 0.0)) throw ConfigError("clip must be > 0");
    if (!(lr > 0.0)) throw ConfigError("learning rate must be > 0");
    if (epochs < 1 || minibatch < 1 || num_envs < 1 || steps_per_env < 1) {
      throw ConfigError("epochs, minibatch, envs and steps per env must be >= 1");
    }
    if (total_steps < 1) throw ConfigError("total steps must be >= 1");
    if (hidden.empty()) throw ConfigError("need at least one hidden layer");
  }

  void write_config(Config& cfg) const {
    cfg.set("train", "gamma", gamma);
    cfg.set("train", "lambda", lambda);
    cfg.set("train", "clip", clip);
    cfg.set("train", "lr", lr);
    cfg.set("train", "epochs", epochs);
    cfg.set("train", "minibatch", minibatch);
    cfg.set("train", "num_envs", num_envs);
    cfg.set("train", "steps_per_env", steps_per_env);
    cfg.set("train", "total_steps", static_cast<long long>(total_steps));
    cfg.set("train", "entropy_coef", entropy_coef);
    cfg.set("train", "value_coef", value_coef);
    cfg.set("train", "max_grad_norm", max_grad_norm);
    std::string h;
    for (std::size_t i = 0; i < hidden.size(); ++i) {
      h += (i ? "," : "") + std::to_string(hidden[i]);
    }
    cfg.set("train", "hidden", h);
    cfg.set("train", "log_std_init", log_std_init);
    cfg.set("train", "checkpoint_every", checkpoint_every);
  }

  static TrainConfig from_config(const Config& cfg, TrainConfig b) {
    b.gamma = cfg.get_double("train", "gamma", b.gamma);
    b.lambda = cfg.get_double("train", "lambda", b.lambda);
    b.clip = cfg.get_double("train", "clip", b.clip);
    b.lr = cfg.get_double("train", "lr", b.lr);
    b.epochs = static_cast<int>(cfg.get_int("train", "epochs", b.epochs));
    b.minibatch = static_cast<int>(cfg.get_int("train", "minibatch", b.minibatch));
    b.num_envs = static_cast<int>(cfg.get_int("train", "num_envs", b.num_envs));
    b.steps_per_env =
        static_cast<int>(cfg.get_int("train", "steps_per_env", b.steps_per_env));
    b.total_steps = cfg.get_int("train", "total_steps", b.total_steps);
    b.entropy_coef = cfg.get_double("train", "entropy_coef", b.entropy_coef);
    b.value_coef = cfg.get_double("train", "value_coef", b.value_coef);
    b.max_grad_norm = cfg.get_double("train", "max_grad_norm", b.max_grad_norm);
    if (cfg.has("train", "hidden")) {
      b.hidden.clear();
      std::string s = cfg.get_string("train", "hidden", "");
      std::size_t pos = 0;
      while (pos <= s.size()) {
        const std::size_t end = std::min(s.find(',', pos), s.size());
        const std::string tok = s.substr(pos, end - pos);
        try {
          b.hidden.push_back(std::stoi(tok));
        } catch (const std::exception&) {
          throw ConfigError("train.hidden: bad entry '" + tok + "'");
        }
        if (b.hidden.back() < 1) throw ConfigError("train.hidden: entries must be >= 1");
        pos = end + 1;
      }
    }
    b.log_std_init = cfg.get_double("train", "log_std_init", b.log_std_init);
    b.checkpoint_every =
        static_cast<int>(cfg.get_int("train", "checkpoint_every", b.checkpoint_every));
    b.validate();
    return b;
  }
};

// A_t = sum_k (gamma lambda)^k delta_{t+k}, with the sum cut at episode ends.
// dones[t] marks that the episode ended after step t; last_value bootstraps
// the step after the final one.
inline void gae(const VecX& rewards, const VecX& values,
                const std::vector<bool>& dones, double last_value,
                double gamma, double lambda, VecX& advantages, VecX& returns) {
  const Eigen::Index n = rewards.size();
  if (values.size() != n || static_cast<Eigen::Index>(dones.size()) != n) {
    throw ShapeMismatch("gae: rewards, values and dones differ in length");
  }
  advantages.resize(n);
  double next_adv = 0.0;
  double next_value = last_value;
  for (Eigen::Index t = n - 1; t >= 0; --t) {
    const double live = dones[t] ? 0.0 : 1.0;
    const double delta = rewards[t] + gamma * next_value * live - values[t];
    next_adv = delta + gamma * lambda * live * next_adv;
    advantages[t] = next_adv;
    next_value = values[t];
  }
  returns = advantages + values;
}

// Zero mean, unit (population) standard deviation.
inline void normalize_advantages(VecX& a) {
  if (a.size() == 0) return;
  const double mean = a.mean();
  a.array() -= mean;
  const double sd = std::sqrt(a.squaredNorm() / static_cast<double>(a.size()));
  a /= (sd + 1e-8);
}

struct RolloutBatch {
  MatX obs;      // obs_dim x N
  MatX actions;  // act_dim x N
  VecX log_probs;
  VecX rewards;  // includes the bootstrap term on truncated steps
  VecX values;
  std::vector<bool> dones;
  VecX advantages;
  VecX returns;
  double gamma = 0.99;

  Eigen::Index size() const { return rewards.size(); }
};

// Per-sample clipped objective min(rho A, clip(rho, 1-eps, 1+eps) A).
inline double clipped_objective(double ratio, double advantage, double eps) {
  const double clipped = clamp(ratio, 1.0 - eps, 1.0 + eps);
  return std::min(ratio * advantage, clipped * advantage);
}

struct UpdateStats {
  double policy_loss = 0.0;
  double value_loss = 0.0;
  double entropy = 0.0;
  double clip_fraction = 0.0;
  double approx_kl = 0.0;
  double grad_norm = 0.0;
  int minibatches = 0;
  bool aborted = false;
};

// Loss of a minibatch and its gradient with respect to the flat parameters.
struct MinibatchLoss {
  double policy_loss = 0.0;
  double value_loss = 0.0;
  double entropy = 0.0;
  double total = 0.0;
  double clip_fraction = 0.0;
  double approx_kl = 0.0;
  VecX grad;
};

inline MinibatchLoss ppo_loss(const ActorCritic& ac, const RolloutBatch& batch,
                              const std::vector<int>& idx,
                              const TrainConfig& cfg) {
  const int m = static_cast<int>(idx.size());
  const int od = ac.obs_dim(), ad = ac.act_dim();
  MatX obs(od, m), act(ad, m);
  VecX old_lp(m), adv(m), ret(m);
  for (int k = 0; k < m; ++k) {
    obs.col(k) = batch.obs.col(idx[k]);
    act.col(k) = batch.actions.col(idx[k]);
    old_lp[k] = batch.log_probs[idx[k]];
    adv[k] = batch.advantages[idx[k]];
    ret[k] = batch.returns[idx[k]];
  }
  MlpCache pc, vc;
  const MatX mean = ac.pi.forward(obs, &pc);
  const MatX value = ac.v.forward(obs, &vc);
  const VecX inv_std = (-ac.log_std).array().exp();

  MinibatchLoss out;
  out.grad = VecX::Zero(ac.num_params());
  MatX d_mean(ad, m);
  VecX d_log_std = VecX::Zero(ad);
  const double norm_const = 0.5 * std::log(2.0 * kPi);
  int clipped = 0;
  for (int k = 0; k < m; ++k) {
    double lp = 0.0;
    for (int i = 0; i < ad; ++i) {
      const double z = (act(i, k) - mean(i, k)) * inv_std[i];
      lp += -0.5 * z * z - ac.log_std[i] - norm_const;
    }
    const double log_ratio = lp - old_lp[k];
    const double ratio = std::exp(log_ratio);
    const double unclipped = ratio * adv[k];
    const double obj = clipped_objective(ratio, adv[k], cfg.clip);
    out.policy_loss -= obj / m;
    if (std::abs(ratio - 1.0) > cfg.clip) ++clipped;
    // (ratio - 1) - log ratio: non-negative KL estimate.
    out.approx_kl += ((ratio - 1.0) - log_ratio) / m;
    // Gradient flows only where the unclipped term is the minimum.
    const double d_lp = unclipped <= obj ? -ratio * adv[k] / m : 0.0;
    for (int i = 0; i < ad; ++i) {
      const double z = (act(i, k) - mean(i, k)) * inv_std[i];
      d_mean(i, k) = d_lp * z * inv_std[i];
      d_log_std[i] += d_lp * (z * z - 1.0);
    }
  }
  out.clip_fraction = static_cast<double>(clipped) / m;
  out.entropy = gaussian_entropy(ac.log_std);
  d_log_std.array() -= cfg.entropy_coef;

  const VecX verr = value.row(0).transpose() - ret;
  out.value_loss = verr.squaredNorm() / m;
  const MatX d_value = (2.0 * cfg.value_coef / m) * verr.transpose();

  ac.pi.backward(pc, d_mean, out.grad, 0);
  out.grad.segment(ac.log_std_offset(), ad) += d_log_std;
  ac.v.backward(vc, d_value, out.grad, ac.value_offset());
  out.total = out.policy_loss + cfg.value_coef * out.value_loss -
              cfg.entropy_coef * out.entropy;
  return out;
}

// Epochs of shuffled minibatch steps. A non-finite loss or gradient restores
// the parameters and optimizer state from before the call.
inline UpdateStats ppo_update(ActorCritic& ac, Adam& opt,
                              const RolloutBatch& batch, const TrainConfig& cfg,
                              Rng& rng, std::ostream* log = nullptr) {
  const ActorCritic saved = ac;
  const Adam saved_opt = opt;
  UpdateStats st;
  const int n = static_cast<int>(batch.size());
  if (n == 0) return st;
  std::vector<int> perm(n);
  std::iota(perm.begin(), perm.end(), 0);
  VecX params = ac.flat();
  const int mb = std::min(cfg.minibatch, n);
  for (int e = 0; e < cfg.epochs; ++e) {
    // Fisher-Yates with the portable uniform draw.
    for (int i = n - 1; i > 0; --i) {
      const int j = static_cast<int>(uniform01(rng) * (i + 1));
      std::swap(perm[i], perm[std::min(j, i)]);
    }
    for (int start = 0; start + mb <= n; start += mb) {
      const std::vector<int> idx(perm.begin() + start, perm.begin() + start + mb);
      MinibatchLoss l = ppo_loss(ac, batch, idx, cfg);
      const double gn = l.grad.norm();
      if (!std::isfinite(l.total) || !std::isfinite(gn)) {
        if (log) *log << "ppo: non-finite loss, update aborted\n";
        ac = saved;
        opt = saved_opt;
        st.aborted = true;
        return st;
      }
      if (cfg.max_grad_norm > 0.0 && gn > cfg.max_grad_norm) {
        l.grad *= cfg.max_grad_norm / gn;
      }
      opt.step(params, l.grad);
      ac.set_flat(params);
      st.policy_loss += l.policy_loss;
      st.value_loss += l.value_loss;
      st.entropy += l.entropy;
      st.clip_fraction += l.clip_fraction;
      st.approx_kl += l.approx_kl;
      st.grad_norm += gn;
      ++st.minibatches;
    }
  }
  if (st.minibatches > 0) {
    const double k = 1.0 / st.minibatches;
    st.policy_loss *= k;
    st.value_loss *= k;
    st.entropy *= k;
    st.clip_fraction *= k;
    st.approx_kl *= k;
    st.grad_norm *= k;
  }
  return st;
}

// Summary of one finished episode.
struct EpisodeSummary {
  double ret = 0.0;
  int length = 0;
  bool terminated = false;
  double mean_p_err = std::numeric_limits<double>::quiet_NaN();
  double mean_q_err = std::numeric_limits<double>::quiet_NaN();
};

// Running accumulators for one in-progress episode.
struct EpisodeAccumulator {
  double ret = 0.0;
  int length = 0;
  double p_sum = 0.0, q_sum = 0.0;
  int p_n = 0, q_n = 0;

  void add(const StepResult& r) {
    ret += r.reward;
    ++length;
    if (std::isfinite(r.p_err)) {
      p_sum += r.p_err;
      ++p_n;
    }
    if (std::isfinite(r.q_err)) {
      q_sum += r.q_err;
      ++q_n;
    }
  }

  EpisodeSummary finish(bool terminated) const {
    EpisodeSummary s;
    s.ret = ret;
    s.length = length;
    s.terminated = terminated;
    if (p_n) s.mean_p_err = p_sum / p_n;
    if (q_n) s.mean_q_err = q_sum / q_n;
    return s;
  }
};

// One environment with its own action-noise stream and episode state.
struct RolloutWorker {
  std::unique_ptr<Environment> env;
  Rng rng;
  VecX obs;
  EpisodeAccumulator acc;
  bool needs_reset = true;
};

struct WorkerSegment {
  MatX obs, actions;
  VecX log_probs, rewards, values;
  std::vector<bool> dones;
  double last_value = 0.0;
  std::vector<EpisodeSummary> episodes;
  int env_errors = 0;
};

inline WorkerSegment collect_segment(RolloutWorker& w, const ActorCritic& ac,
                                     int steps, double gamma) {
  const int od = ac.obs_dim(), ad = ac.act_dim();
  WorkerSegment seg;
  seg.obs.resize(od, steps);
  seg.actions.resize(ad, steps);
  seg.log_probs.resize(steps);
  seg.rewards.resize(steps);
  seg.values.resize(steps);
  seg.dones.assign(steps, false);
  const VecX sd = ac.log_std.array().exp();
  for (int t = 0; t < steps; ++t) {
    if (w.needs_reset) {
      w.obs = w.env->reset();
      w.acc = {};
      w.needs_reset = false;
    }
    const PolicyOutput po = ac.forward(w.obs);
    VecX a(ad);
    for (int i = 0; i < ad; ++i) a[i] = po.mean[i] + sd[i] * standard_normal(w.rng);
    seg.obs.col(t) = w.obs;
    seg.actions.col(t) = a;
    seg.log_probs[t] = gaussian_log_prob(a, po.mean, ac.log_std);
    seg.values[t] = po.value;
    StepResult r;
    try {
      r = w.env->step(a);
    } catch (const Error&) {
      // Episode discarded from the statistics; its transitions end here.
      ++seg.env_errors;
      seg.rewards[t] = 0.0;
      seg.dones[t] = true;
      w.needs_reset = true;
      continue;
    }
    w.acc.add(r);
    double rew = r.reward;
    if (r.truncated && !r.terminated) {
      // Time limit: bootstrap from the value of the final observation.
      rew += gamma * ac.value(r.obs);
    }
    seg.rewards[t] = rew;
    seg.dones[t] = r.done();
    if (r.done()) {
      seg.episodes.push_back(w.acc.finish(r.terminated));
      w.needs_reset = true;
    } else {
      w.obs = r.obs;
    }
  }
  seg.last_value = w.needs_reset ? 0.0 : ac.value(w.obs);
  return seg;
}

struct CurveEntry {
  int iteration = 0;
  long env_steps = 0;
  double mean_return = std::numeric_limits<double>::quiet_NaN();
  double mean_p_err = std::numeric_limits<double>::quiet_NaN();
  double mean_q_err = std::numeric_limits<double>::quiet_NaN();
  int episodes = 0;
  int env_errors = 0;
  UpdateStats update;
  double seconds = 0.0;
};

inline void write_curve_header(std::ostream& out) {
  out << "iteration,env_steps,mean_return,mean_p_err,mean_q_err,episodes,"
         "policy_loss,value_loss,entropy,clip_fraction,approx_kl\n";
}

inline void write_curve_row(std::ostream& out, const CurveEntry& c) {
  out << c.iteration << ',' << c.env_steps << ',' << c.mean_return << ','
      << c.mean_p_err << ',' << c.mean_q_err << ',' << c.episodes << ','
      << c.update.policy_loss << ',' << c.update.value_loss << ','
      << c.update.entropy << ',' << c.update.clip_fraction << ','
      << c.update.approx_kl << '\n';
}

struct TrainResult {
  ActorCritic params;
  std::vector<CurveEntry> curve;
};

// Called after every iteration; may write logs and checkpoints.
using IterationHook = std::function<void(const CurveEntry&, const ActorCritic&)>;

inline TrainResult train(const EnvFactory& factory, const TrainConfig& cfg,
                         const IterationHook& hook = {},
                         std::ostream* log = nullptr) {
  cfg.validate();
  std::vector<RolloutWorker> workers(cfg.num_envs);
  for (int i = 0; i < cfg.num_envs; ++i) {
    workers[i].env = factory(derive_seed(cfg.seed, stream::kEnvBase + i), i);
    workers[i].rng = Rng(derive_seed(cfg.seed, stream::kEnvBase + 1000 + i));
  }
  const int od = workers[0].env->obs_dim();
  const int ad = workers[0].env->act_dim();
  TrainResult res;
  res.params = ActorCritic::create(od, ad, cfg.hidden, cfg.log_std_init,
                                   derive_seed(cfg.seed, stream::kTraining));
  Adam opt;
  opt.lr = cfg.lr;
  Rng update_rng(derive_seed(cfg.seed, stream::kTraining + 10));

  const long per_iter = static_cast<long>(cfg.num_envs) * cfg.steps_per_env;
  const long iterations = (cfg.total_steps + per_iter - 1) / per_iter;
  long env_steps = 0;
  for (long it = 0; it < iterations; ++it) {
    const auto t0 = std::chrono::steady_clock::now();
    std::vector<WorkerSegment> segs(cfg.num_envs);
    const ActorCritic snapshot = res.params;
    if (cfg.threads > 1) {
      std::vector<std::thread> pool;
      const int nt = std::min(cfg.threads, cfg.num_envs);
      for (int t = 0; t < nt; ++t) {
        pool.emplace_back([&, t] {
          for (int i = t; i < cfg.num_envs; i += nt) {
            segs[i] = collect_segment(workers[i], snapshot, cfg.steps_per_env,
                                      cfg.gamma);
          }
        });
      }
      for (auto& th : pool) th.join();
    } else {
      for (int i = 0; i < cfg.num_envs; ++i) {
        segs[i] = collect_segment(workers[i], snapshot, cfg.steps_per_env, cfg.gamma);
      }
    }

    // Concatenate in env order.
    RolloutBatch batch;
    batch.gamma = cfg.gamma;
    const long n = per_iter;
    batch.obs.resize(od, n);
    batch.actions.resize(ad, n);
    batch.log_probs.resize(n);
    batch.rewards.resize(n);
    batch.values.resize(n);
    batch.advantages.resize(n);
    batch.returns.resize(n);
    batch.dones.assign(n, false);
    CurveEntry entry;
    double ret_sum = 0.0, p_sum = 0.0, q_sum = 0.0;
    int p_n = 0, q_n = 0;
    for (int i = 0; i < cfg.num_envs; ++i) {
      const WorkerSegment& s = segs[i];
      const long off = static_cast<long>(i) * cfg.steps_per_env;
      const int m = cfg.steps_per_env;
      batch.obs.middleCols(off, m) = s.obs;
      batch.actions.middleCols(off, m) = s.actions;
      batch.log_probs.segment(off, m) = s.log_probs;
      batch.rewards.segment(off, m) = s.rewards;
      batch.values.segment(off, m) = s.values;
      std::copy(s.dones.begin(), s.dones.end(), batch.dones.begin() + off);
      VecX adv, ret;
      gae(s.rewards, s.values, s.dones, s.last_value, cfg.gamma, cfg.lambda,
          adv, ret);
      batch.advantages.segment(off, m) = adv;
      batch.returns.segment(off, m) = ret;
      for (const EpisodeSummary& e : s.episodes) {
        ret_sum += e.ret;
        ++entry.episodes;
        if (std::isfinite(e.mean_p_err)) {
          p_sum += e.mean_p_err;
          ++p_n;
        }
        if (std::isfinite(e.mean_q_err)) {
          q_sum += e.mean_q_err;
          ++q_n;
        }
      }
      entry.env_errors += s.env_errors;
    }
    normalize_advantages(batch.advantages);
    entry.update = ppo_update(res.params, opt, batch, cfg, update_rng, log);

    env_steps += n;
    entry.iteration = static_cast<int>(it);
    entry.env_steps = env_steps;
    if (entry.episodes > 0) entry.mean_return = ret_sum / entry.episodes;
    if (p_n) entry.mean_p_err = p_sum / p_n;
    if (q_n) entry.mean_q_err = q_sum / q_n;
    entry.seconds = std::chrono::duration<double>(
                        std::chrono::steady_clock::now() - t0).count();
    if (log) {
      *log << "iter " << it << " steps " << env_steps << " return "
           << entry.mean_return << " p_err " << entry.mean_p_err << " q_err "
           << entry.mean_q_err << " episodes " << entry.episodes << " kl "
           << entry.update.approx_kl << " clip " << entry.update.clip_fraction
           << " std " << std::exp(res.params.log_std.mean()) << " ("
           << entry.seconds << " s)";
      if (entry.env_errors) *log << " env errors " << entry.env_errors;
      *log << '\n';
    }
    res.curve.push_back(entry);
    if (hook) hook(entry, res.params);
  }
  return res;
}

struct EvalEpisode {
  double ret = 0.0;
  int length = 0;
  bool retained = false;  // ran to the horizon without termination
  double mean_p_err = std::numeric_limits<double>::quiet_NaN();  // m
  double mean_q_err = std::numeric_limits<double>::quiet_NaN();  // rad
};

struct EvalReport {
  std::vector<EvalEpisode> episodes;

  int retained() const {
    return static_cast<int>(std::count_if(episodes.begin(), episodes.end(),
                                          [](const EvalEpisode& e) { return e.retained; }));
  }
  double mean_return() const {
    double s = 0.0;
    for (const auto& e : episodes) s += e.ret;
    return episodes.empty() ? 0.0 : s / episodes.size();
  }
  // Mean over episodes with a defined value.
  double mean_p_err() const { return mean_of(&EvalEpisode::mean_p_err); }
  double mean_q_err() const { return mean_of(&EvalEpisode::mean_q_err); }

 private:
  double mean_of(double EvalEpisode::*field) const {
    double s = 0.0;
    int n = 0;
    for (const auto& e : episodes) {
      if (std::isfinite(e.*field)) {
        s += e.*field;
        ++n;
      }
    }
    return n ? s / n : std::numeric_limits<double>::quiet_NaN();
  }
};

using ActionFn = std::function<VecX(const VecX& obs)>;

// Called after every step with the episode index and the step result.
using StepHook = std::function<void(int episode, const StepResult&)>;

inline EvalReport evaluate(Environment& env, const ActionFn& act, int episodes,
                           const StepHook& hook = {}) {
  EvalReport rep;
  for (int k = 0; k < episodes; ++k) {
    VecX obs = env.reset();
    EpisodeAccumulator acc;
    EvalEpisode ep;
    while (true) {
      const StepResult r = env.step(act(obs));
      acc.add(r);
      if (hook) hook(k, r);
      if (r.done()) {
        ep.retained = !r.terminated;
        break;
      }
      obs = r.obs;
    }
    const EpisodeSummary s = acc.finish(!ep.retained);
    ep.ret = s.ret;
    ep.length = s.length;
    ep.mean_p_err = s.mean_p_err;
    ep.mean_q_err = s.mean_q_err;
    rep.episodes.push_back(ep);
  }
  return rep;
}

// Deterministic policy: the Gaussian mean.
inline ActionFn mean_action(const ActorCritic& ac) {
  return [&ac](const VecX& obs) { return ac.forward(obs).mean; };
}

}  // namespace tactile_hand

#endif  // TACTILE_HAND_PPO_HPP_
