#ifndef TACTILE_HAND_SELFTEST_HPP_
#define TACTILE_HAND_SELFTEST_HPP_

// Quick oracle and property checks that run from the command line in a few
// seconds. The full suites live in the test binaries.

#include <functional>
#include <ostream>
#include <string>
#include <vector>

#include "tactile_hand/cmaes.hpp"
#include "tactile_hand/dynamics.hpp"
#include "tactile_hand/env.hpp"
#include "tactile_hand/mlp.hpp"
#include "tactile_hand/ppo.hpp"
#include "tactile_hand/tactile.hpp"

namespace tactile_hand {

struct SelfTestCase {
  std::string name;
  std::function<bool(std::string& detail)> run;
};

inline std::vector<SelfTestCase> selftest_cases() {
  std::vector<SelfTestCase> cases;

  cases.push_back({"reward examples", [](std::string& d) {
    const RewardWeights w;
    const Vec3 z = Vec3::UnitZ(), x = Vec3::UnitX(), p = Vec3::Zero();
    const double r0 = reward(w, z, z, p, p, p, p, 0.0);
    const double r1 = reward(w, z, x, p, p, p, p, 0.0);
    const double r2 = reward(w, z, z, p, p, p, p, 100.0);
    d = std::to_string(r0) + " " + std::to_string(r1) + " " + std::to_string(r2);
    return std::abs(r0 - 0.5) <= 1e-12 &&
           std::abs(r1 - (0.5 - 1.5 * std::sqrt(2.0))) <= 1e-12 &&
           std::abs(r2) <= 1e-12;
  }});

  cases.push_back({"offset calibration", [](std::string& d) {
    Rng rng(11);
    double worst = 0.0;
    for (int k = 0; k < 100; ++k) {
      TactileFrame f;
      for (int i = 0; i < kNumTaxels; ++i) {
        f.raw[i] = uniform(rng, -5.0, 20.0);
        f.offsets[i] = uniform(rng, -5.0, 5.0);
      }
      binarize(f);
      for (int i = 0; i < kNumTaxels; ++i) {
        worst = std::max(worst, std::abs(f.calibrated[i] -
                                         std::max(f.raw[i] - f.offsets[i], 0.0)));
      }
    }
    d = "max error " + std::to_string(worst);
    return worst == 0.0;
  }});

  cases.push_back({"contact center", [](std::string& d) {
    const TaxelLayout layout = TaxelLayout::make();
    Rng rng(12);
    double worst = 0.0;
    for (int k = 0; k < 100; ++k) {
      TactileFrame f;
      for (int i = 0; i < kNumTaxels; ++i) f.active[i] = uniform01(rng) < 0.2;
      for (int fi = 0; fi < kNumFingers; ++fi) {
        Vec3 sum = Vec3::Zero();
        int n = 0;
        for (int i = 0; i < kTaxelsPerFinger; ++i) {
          if (f.active[fi * kTaxelsPerFinger + i]) {
            sum += layout.positions[i];
            ++n;
          }
        }
        const auto c = contact_center(f, layout, fi);
        if (n == 0) {
          if (c) return false;
          continue;
        }
        worst = std::max(worst, (*c - sum / n).norm());
      }
    }
    d = "max error " + std::to_string(worst);
    return worst <= 1e-12;
  }});

  cases.push_back({"gae oracle", [](std::string& d) {
    Rng rng(13);
    const int n = 50;
    VecX r(n), v(n);
    std::vector<bool> done(n);
    for (int i = 0; i < n; ++i) {
      r[i] = uniform(rng, -1, 1);
      v[i] = uniform(rng, -1, 1);
      done[i] = uniform01(rng) < 0.1;
    }
    const double g = 0.97, l = 0.9, last = 0.3;
    VecX adv, ret;
    gae(r, v, done, last, g, l, adv, ret);
    double worst = 0.0;
    for (int t = 0; t < n; ++t) {
      double a = 0.0, coef = 1.0;
      for (int k = t; k < n; ++k) {
        const double nv = k + 1 < n ? v[k + 1] : last;
        a += coef * (r[k] + g * nv * (done[k] ? 0.0 : 1.0) - v[k]);
        if (done[k]) break;
        coef *= g * l;
      }
      worst = std::max(worst, std::abs(a - adv[t]));
    }
    d = "max error " + std::to_string(worst);
    return worst <= 1e-10;
  }});

  cases.push_back({"network gradient", [](std::string& d) {
    Rng rng(14);
    Mlp net({4, 8, 3}, rng);
    const MatX x = MatX::Random(4, 5);
    const MatX target = MatX::Random(3, 5);
    auto loss = [&](const Mlp& m) {
      return 0.5 * (m.forward(x) - target).squaredNorm();
    };
    MlpCache cache;
    const MatX y = net.forward(x, &cache);
    VecX grad = VecX::Zero(net.num_params());
    net.backward(cache, y - target, grad);
    VecX p(net.num_params());
    net.get_params(p);
    double worst = 0.0;
    for (int i = 0; i < p.size(); ++i) {
      Mlp a = net, b = net;
      VecX pp = p, pm = p;
      pp[i] += 1e-5;
      pm[i] -= 1e-5;
      a.set_params(pp);
      b.set_params(pm);
      const double fd = (loss(a) - loss(b)) / 2e-5;
      worst = std::max(worst, std::abs(fd - grad[i]) /
                                  std::max(1e-8, std::abs(fd) + std::abs(grad[i])));
    }
    d = "max relative error " + std::to_string(worst);
    return worst <= 1e-4;
  }});

  cases.push_back({"cma-es sphere", [](std::string& d) {
    VecX c(2);
    c << 1.5, -0.7;
    CmaEsOptions o;
    o.seed = 3;
    o.max_generations = 200;
    const auto res = cma_es_minimize(
        [&](const VecX& x) { return (x - c).squaredNorm(); }, VecX::Zero(2), 1.0, o);
    const double err = (res.x_best - c).norm();
    d = "error " + std::to_string(err);
    return err < 1e-6;
  }});

  cases.push_back({"free fall", [](std::string& d) {
    const HandModel model = HandModel::make_default();
    const StickModel stick;
    SimState s;
    s.stick = vertical_stick(Vec3(1.0, 1.0, 1.0));
    JointVector target{};
    PhysicsOptions opt;
    const int n = 300;
    for (int i = 0; i < n; ++i) step(model, stick, s, target, opt);
    const double t = n * opt.dt;
    const double expect = -0.5 * kGravity * t * t;
    const double dz = s.stick.position.z() - 1.0;
    d = "dz " + std::to_string(dz) + " expected " + std::to_string(expect);
    return std::abs(dz - expect) <= 0.01 * std::abs(expect);
  }});

  return cases;
}

// Prints one line per check; true when all pass.
inline bool run_selftest(std::ostream& out) {
  bool ok = true;
  for (const auto& c : selftest_cases()) {
    std::string detail;
    bool pass = false;
    try {
      pass = c.run(detail);
    } catch (const std::exception& e) {
      detail = e.what();
    }
    out << (pass ? "PASS " : "FAIL ") << c.name << ": " << detail << '\n';
    ok = ok && pass;
  }
  return ok;
}

}  // namespace tactile_hand

#endif  // TACTILE_HAND_SELFTEST_HPP_
