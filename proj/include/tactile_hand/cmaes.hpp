#ifndef TACTILE_HAND_CMAES_HPP_
#define TACTILE_HAND_CMAES_HPP_

// (mu/mu_w, lambda)-CMA-ES with cumulative step-size adaptation, rank-one and
// rank-mu covariance updates, Hansen's default strategy parameters.
// Box constraints are handled by resampling infeasible candidates, so the
// objective is never evaluated outside the bounds.

#include <algorithm>
#include <functional>
#include <limits>
#include <numeric>
#include <ostream>
#include <thread>
#include <vector>

#include <Eigen/Eigenvalues>

#include "tactile_hand/common.hpp"

namespace tactile_hand {

struct CmaEsOptions {
  int max_generations = 200;
  int population = 0;  // 0: 4 + floor(3 ln n)
  std::uint64_t seed = 1;
  std::vector<double> lower;  // empty: unbounded
  std::vector<double> upper;
  double f_target = -std::numeric_limits<double>::infinity();
  double tol_x = 0.0;  // stop when sigma * max sqrt(diag C) falls below
  int max_resamples = 1000;
  // Objective evaluations per generation may run on this many threads.
  int threads = 1;
};

struct CmaEsGeneration {
  int generation = 0;
  double best_f = 0.0;       // best of this generation
  double best_ever_f = 0.0;
  double sigma = 0.0;
  VecX mean;
};

struct CmaEsResult {
  VecX x_best;
  double f_best = std::numeric_limits<double>::infinity();
  VecX stddev;  // sigma * sqrt(diag C) of the final distribution
  VecX mean;
  int generations = 0;
  int evaluations = 0;
  int restarts = 0;
  std::vector<CmaEsGeneration> history;
};

struct CmaEsState {
  VecX mean;
  double sigma = 1.0;
  MatX cov;
  VecX p_sigma;
  VecX p_c;
  int lambda = 4;
  int generation = 0;
};

namespace detail {

inline bool inside(const VecX& x, const CmaEsOptions& o) {
  for (Eigen::Index i = 0; i < x.size(); ++i) {
    if (!o.lower.empty() && x[i] < o.lower[i]) return false;
    if (!o.upper.empty() && x[i] > o.upper[i]) return false;
  }
  return true;
}

}  // namespace detail

inline CmaEsResult cma_es_minimize(
    const std::function<double(const VecX&)>& objective, const VecX& x0,
    double sigma0, const CmaEsOptions& opt = {},
    std::ostream* log = nullptr) {
  const int n = static_cast<int>(x0.size());
  if (n < 1) throw ConfigError("cma_es_minimize: empty start point");
  if (!(sigma0 > 0.0)) throw ConfigError("cma_es_minimize: sigma0 <= 0");

  CmaEsState st;
  st.lambda = opt.population > 0
                  ? opt.population
                  : 4 + static_cast<int>(std::floor(3.0 * std::log(n)));
  st.lambda = std::max(st.lambda, 4);
  const int lambda = st.lambda;
  const int mu = lambda / 2;
  VecX w(mu);
  for (int i = 0; i < mu; ++i) {
    w[i] = std::log(0.5 * (lambda + 1)) - std::log(i + 1.0);
  }
  w /= w.sum();
  const double mueff = 1.0 / w.squaredNorm();
  const double cc = (4.0 + mueff / n) / (n + 4.0 + 2.0 * mueff / n);
  const double cs = (mueff + 2.0) / (n + mueff + 5.0);
  const double c1 = 2.0 / ((n + 1.3) * (n + 1.3) + mueff);
  const double cmu = std::min(
      1.0 - c1,
      2.0 * (mueff - 2.0 + 1.0 / mueff) / ((n + 2.0) * (n + 2.0) + mueff));
  const double damps =
      1.0 + 2.0 * std::max(0.0, std::sqrt((mueff - 1.0) / (n + 1.0)) - 1.0) +
      cs;
  const double chi_n =
      std::sqrt(static_cast<double>(n)) *
      (1.0 - 1.0 / (4.0 * n) + 1.0 / (21.0 * n * n));

  Rng rng(opt.seed);
  CmaEsResult res;

  auto init = [&](const VecX& m, double s) {
    st.mean = m;
    st.sigma = s;
    st.cov = MatX::Identity(n, n);
    st.p_sigma = VecX::Zero(n);
    st.p_c = VecX::Zero(n);
  };
  init(x0, sigma0);

  MatX basis = MatX::Identity(n, n);
  VecX scales = VecX::Ones(n);
  MatX z(n, lambda), y(n, lambda), x(n, lambda);
  std::vector<double> f(lambda);
  std::vector<int> order(lambda);

  for (int g = 0; g < opt.max_generations; ++g) {
    // Sample, resampling infeasible candidates.
    for (int k = 0; k < lambda; ++k) {
      int tries = 0;
      while (true) {
        for (int i = 0; i < n; ++i) z(i, k) = standard_normal(rng);
        y.col(k) = basis * scales.asDiagonal() * z.col(k);
        x.col(k) = st.mean + st.sigma * y.col(k);
        if (detail::inside(x.col(k), opt)) break;
        if (++tries > opt.max_resamples) {
          // Project as a last resort; keeps the run alive.
          for (int i = 0; i < n; ++i) {
            if (!opt.lower.empty()) x(i, k) = std::max(x(i, k), opt.lower[i]);
            if (!opt.upper.empty()) x(i, k) = std::min(x(i, k), opt.upper[i]);
          }
          y.col(k) = (x.col(k) - st.mean) / st.sigma;
          break;
        }
      }
    }
    auto eval = [&](int k) {
      double v = objective(x.col(k));
      if (!std::isfinite(v)) v = std::numeric_limits<double>::infinity();
      f[k] = v;
    };
    if (opt.threads > 1) {
      std::vector<std::thread> pool;
      const int nt = std::min(opt.threads, lambda);
      for (int t = 0; t < nt; ++t) {
        pool.emplace_back([&, t] {
          for (int k = t; k < lambda; k += nt) eval(k);
        });
      }
      for (auto& th : pool) th.join();
    } else {
      for (int k = 0; k < lambda; ++k) eval(k);
    }
    res.evaluations += lambda;

    std::iota(order.begin(), order.end(), 0);
    std::stable_sort(order.begin(), order.end(),
                     [&](int a, int b) { return f[a] < f[b]; });
    if (f[order[0]] < res.f_best) {
      res.f_best = f[order[0]];
      res.x_best = x.col(order[0]);
    }

    // Recombination.
    VecX y_w = VecX::Zero(n);
    for (int i = 0; i < mu; ++i) y_w += w[i] * y.col(order[i]);
    st.mean += st.sigma * y_w;

    // Step-size path uses C^{-1/2} y_w.
    const VecX c_inv_sqrt_y =
        basis * scales.cwiseInverse().asDiagonal() * basis.transpose() * y_w;
    st.p_sigma = (1.0 - cs) * st.p_sigma +
                 std::sqrt(cs * (2.0 - cs) * mueff) * c_inv_sqrt_y;
    const double ps_norm = st.p_sigma.norm();
    const double gen1 = static_cast<double>(g + 1);
    const bool hsig = ps_norm / std::sqrt(1.0 - std::pow(1.0 - cs, 2.0 * gen1)) /
                          chi_n <
                      1.4 + 2.0 / (n + 1.0);
    st.p_c = (1.0 - cc) * st.p_c +
             (hsig ? std::sqrt(cc * (2.0 - cc) * mueff) : 0.0) * y_w;

    MatX rank_mu = MatX::Zero(n, n);
    for (int i = 0; i < mu; ++i) {
      rank_mu += w[i] * y.col(order[i]) * y.col(order[i]).transpose();
    }
    const double dh = hsig ? 0.0 : cc * (2.0 - cc);
    st.cov = (1.0 - c1 - cmu) * st.cov +
             c1 * (st.p_c * st.p_c.transpose() + dh * st.cov) + cmu * rank_mu;
    st.sigma *= std::exp((cs / damps) * (ps_norm / chi_n - 1.0));
    st.generation = g + 1;

    // Eigen decomposition; a degenerate covariance restarts the search at
    // the current mean with doubled step size.
    st.cov = 0.5 * (st.cov + st.cov.transpose());
    Eigen::SelfAdjointEigenSolver<MatX> es(st.cov);
    const bool degenerate = es.info() != Eigen::Success ||
                            es.eigenvalues().minCoeff() <= 0.0 ||
                            !st.cov.allFinite() || !std::isfinite(st.sigma);
    if (degenerate) {
      if (log) {
        *log << "cma-es: degenerate covariance at generation " << g + 1
             << ", restarting with doubled sigma\n";
      }
      const double s = std::isfinite(st.sigma) ? 2.0 * st.sigma : 2.0 * sigma0;
      init(res.x_best.size() ? res.x_best : st.mean, s);
      basis.setIdentity();
      scales.setOnes();
      ++res.restarts;
    } else {
      basis = es.eigenvectors();
      scales = es.eigenvalues().cwiseSqrt();
    }

    CmaEsGeneration h;
    h.generation = g + 1;
    h.best_f = f[order[0]];
    h.best_ever_f = res.f_best;
    h.sigma = st.sigma;
    h.mean = st.mean;
    res.history.push_back(h);
    res.generations = g + 1;

    if (res.f_best <= opt.f_target) break;
    if (opt.tol_x > 0.0 &&
        st.sigma * st.cov.diagonal().cwiseSqrt().maxCoeff() < opt.tol_x) {
      break;
    }
  }
  res.mean = st.mean;
  res.stddev = st.sigma * st.cov.diagonal().cwiseSqrt();
  return res;
}

}  // namespace tactile_hand

#endif  // TACTILE_HAND_CMAES_HPP_
