#ifndef TACTILE_HAND_MLP_HPP_
#define TACTILE_HAND_MLP_HPP_

// Feed-forward networks with hand-written reverse mode. Samples are columns:
// a batch of B inputs is an (in x B) matrix.
//
// Flat parameter layout, used by the optimizer, the gradient checks and the
// checkpoint file: layers in order, each as W (out x in, row-major) then b.

#include <cmath>
#include <cstdint>
#include <fstream>
#include <string>
#include <vector>

#include "tactile_hand/common.hpp"

namespace tactile_hand {

struct Layer {
  MatX w;  // out x in
  VecX b;
};

// Values kept by forward() for backward().
struct MlpCache {
  std::vector<MatX> inputs;  // input to each layer
  std::vector<MatX> act;     // tanh output of each hidden layer
};

class Mlp {
 public:
  Mlp() = default;

  // sizes = {in, hidden..., out}. Weights ~ U(-1/sqrt(in), 1/sqrt(in)),
  // biases zero, output layer scaled by out_scale.
  Mlp(const std::vector<int>& sizes, Rng& rng, double out_scale = 1.0) {
    if (sizes.size() < 2) throw ShapeMismatch("Mlp: need at least in and out");
    for (std::size_t l = 0; l + 1 < sizes.size(); ++l) {
      const int in = sizes[l], out = sizes[l + 1];
      if (in < 1 || out < 1) throw ShapeMismatch("Mlp: empty layer");
      Layer layer{MatX(out, in), VecX::Zero(out)};
      const double bound = 1.0 / std::sqrt(static_cast<double>(in));
      const double s = (l + 2 == sizes.size()) ? out_scale : 1.0;
      for (int r = 0; r < out; ++r) {
        for (int c = 0; c < in; ++c) layer.w(r, c) = s * uniform(rng, -bound, bound);
      }
      layers.push_back(std::move(layer));
    }
  }

  int in_dim() const { return layers.empty() ? 0 : static_cast<int>(layers.front().w.cols()); }
  int out_dim() const { return layers.empty() ? 0 : static_cast<int>(layers.back().w.rows()); }

  int num_params() const {
    int n = 0;
    for (const Layer& l : layers) n += static_cast<int>(l.w.size() + l.b.size());
    return n;
  }

  MatX forward(const MatX& x, MlpCache* cache = nullptr) const {
    if (x.rows() != in_dim()) {
      throw ShapeMismatch("Mlp: input has " + std::to_string(x.rows()) +
                          " rows, expected " + std::to_string(in_dim()));
    }
    if (cache) {
      cache->inputs.clear();
      cache->act.clear();
    }
    MatX h = x;
    for (std::size_t l = 0; l < layers.size(); ++l) {
      if (cache) cache->inputs.push_back(h);
      MatX z = layers[l].w * h;
      z.colwise() += layers[l].b;
      if (l + 1 < layers.size()) {
        h = z.array().tanh().matrix();
        if (cache) cache->act.push_back(h);
      } else {
        h = std::move(z);
      }
    }
    return h;
  }

  VecX forward_one(const VecX& x) const { return forward(MatX(x)).col(0); }

  // dy = dL/d(output). Adds dL/d(params) into grad (flat layout, starting
  // at offset) and returns dL/d(input).
  MatX backward(const MlpCache& cache, const MatX& dy, VecX& grad,
                int offset = 0) const {
    std::vector<int> starts(layers.size());
    int pos = offset;
    for (std::size_t l = 0; l < layers.size(); ++l) {
      starts[l] = pos;
      pos += static_cast<int>(layers[l].w.size() + layers[l].b.size());
    }
    MatX d = dy;
    for (int l = static_cast<int>(layers.size()) - 1; l >= 0; --l) {
      const Layer& layer = layers[l];
      if (l + 1 < static_cast<int>(layers.size())) {
        // Through tanh: d/dz = d/dh * (1 - h^2).
        d = (d.array() * (1.0 - cache.act[l].array().square())).matrix();
      }
      const MatX gw = d * cache.inputs[l].transpose();
      const int rows = static_cast<int>(layer.w.rows());
      const int cols = static_cast<int>(layer.w.cols());
      int p = starts[l];
      for (int r = 0; r < rows; ++r) {
        for (int c = 0; c < cols; ++c) grad[p++] += gw(r, c);
      }
      grad.segment(p, rows) += d.rowwise().sum();
      d = layer.w.transpose() * d;
    }
    return d;
  }

  void get_params(VecX& flat, int offset = 0) const {
    int p = offset;
    for (const Layer& l : layers) {
      for (int r = 0; r < l.w.rows(); ++r) {
        for (int c = 0; c < l.w.cols(); ++c) flat[p++] = l.w(r, c);
      }
      for (int r = 0; r < l.b.size(); ++r) flat[p++] = l.b[r];
    }
  }

  void set_params(const VecX& flat, int offset = 0) {
    int p = offset;
    for (Layer& l : layers) {
      for (int r = 0; r < l.w.rows(); ++r) {
        for (int c = 0; c < l.w.cols(); ++c) l.w(r, c) = flat[p++];
      }
      for (int r = 0; r < l.b.size(); ++r) l.b[r] = flat[p++];
    }
  }

  std::vector<Layer> layers;
};

inline double gaussian_log_prob(const VecX& a, const VecX& mean,
                                const VecX& log_std) {
  double lp = 0.0;
  for (Eigen::Index i = 0; i < a.size(); ++i) {
    const double z = (a[i] - mean[i]) * std::exp(-log_std[i]);
    lp += -0.5 * z * z - log_std[i] - 0.5 * std::log(2.0 * kPi);
  }
  return lp;
}

inline double gaussian_entropy(const VecX& log_std) {
  return log_std.sum() +
         0.5 * static_cast<double>(log_std.size()) * std::log(2.0 * kPi * std::exp(1.0));
}

struct PolicyOutput {
  VecX mean;
  VecX log_std;
  double value = 0.0;
};

// Diagonal Gaussian policy with state-independent log-std, plus a separate
// value network. Flat layout: policy net, log_std, value net.
struct ActorCritic {
  Mlp pi;
  VecX log_std;
  Mlp v;

  static ActorCritic create(int obs_dim, int act_dim,
                            const std::vector<int>& hidden, double log_std0,
                            std::uint64_t seed) {
    Rng rng(seed);
    std::vector<int> ps{obs_dim}, vs{obs_dim};
    for (int h : hidden) {
      ps.push_back(h);
      vs.push_back(h);
    }
    ps.push_back(act_dim);
    vs.push_back(1);
    ActorCritic ac;
    ac.pi = Mlp(ps, rng, 0.01);
    ac.log_std = VecX::Constant(act_dim, log_std0);
    ac.v = Mlp(vs, rng, 1.0);
    return ac;
  }

  int obs_dim() const { return pi.in_dim(); }
  int act_dim() const { return pi.out_dim(); }
  int num_params() const {
    return pi.num_params() + static_cast<int>(log_std.size()) + v.num_params();
  }
  int log_std_offset() const { return pi.num_params(); }
  int value_offset() const { return pi.num_params() + static_cast<int>(log_std.size()); }

  VecX flat() const {
    VecX f(num_params());
    pi.get_params(f, 0);
    f.segment(log_std_offset(), log_std.size()) = log_std;
    v.get_params(f, value_offset());
    return f;
  }

  void set_flat(const VecX& f) {
    if (f.size() != num_params()) throw ShapeMismatch("ActorCritic: flat size");
    pi.set_params(f, 0);
    log_std = f.segment(log_std_offset(), log_std.size());
    v.set_params(f, value_offset());
  }

  PolicyOutput forward(const VecX& obs) const {
    if (obs.size() != obs_dim()) {
      throw ShapeMismatch("policy: observation has " + std::to_string(obs.size()) +
                          " entries, expected " + std::to_string(obs_dim()));
    }
    return {pi.forward_one(obs), log_std, v.forward_one(obs)[0]};
  }

  double value(const VecX& obs) const { return v.forward_one(obs)[0]; }
};

// Per-parameter adaptive moments.
struct Adam {
  double lr = 3e-4;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
  VecX m, s;
  long t = 0;

  void step(VecX& params, const VecX& grad) {
    if (m.size() != params.size()) {
      m = VecX::Zero(params.size());
      s = VecX::Zero(params.size());
    }
    ++t;
    m = beta1 * m + (1.0 - beta1) * grad;
    s = beta2 * s + (1.0 - beta2) * grad.cwiseProduct(grad);
    const double c1 = 1.0 - std::pow(beta1, static_cast<double>(t));
    const double c2 = 1.0 - std::pow(beta2, static_cast<double>(t));
    params.array() -= lr * (m.array() / c1) / ((s.array() / c2).sqrt() + eps);
  }
};

// Checkpoint layout (little-endian):
//   8 bytes magic "THPOLCY1"
//   uint32 tensor count
//   uint32 policy layer count
//   per tensor: uint32 rows, uint32 cols
//   all tensors' float64 values, row-major, in table order
// Tensor order: policy W0, b0, W1, b1, ..., log_std, value W0, b0, ...
// Biases and log_std are (n x 1).
inline constexpr char kCheckpointMagic[8] = {'T', 'H', 'P', 'O', 'L', 'C', 'Y', '1'};

inline void save_checkpoint(const ActorCritic& ac, const std::string& path) {
  std::vector<const MatX*> mats;
  std::vector<MatX> store;
  store.reserve(2 * (ac.pi.layers.size() + ac.v.layers.size()) + 1);
  auto add_net = [&](const Mlp& net) {
    for (const Layer& l : net.layers) {
      store.push_back(l.w);
      store.push_back(MatX(l.b));
    }
  };
  add_net(ac.pi);
  store.push_back(MatX(ac.log_std));
  add_net(ac.v);
  for (const MatX& m : store) mats.push_back(&m);

  std::ofstream out(path, std::ios::binary);
  if (!out) throw ConfigError("cannot write checkpoint " + path);
  out.write(kCheckpointMagic, 8);
  const auto count = static_cast<std::uint32_t>(mats.size());
  out.write(reinterpret_cast<const char*>(&count), 4);
  const auto policy_layers = static_cast<std::uint32_t>(ac.pi.layers.size());
  out.write(reinterpret_cast<const char*>(&policy_layers), 4);
  for (const MatX* m : mats) {
    const auto r = static_cast<std::uint32_t>(m->rows());
    const auto c = static_cast<std::uint32_t>(m->cols());
    out.write(reinterpret_cast<const char*>(&r), 4);
    out.write(reinterpret_cast<const char*>(&c), 4);
  }
  for (const MatX* m : mats) {
    for (Eigen::Index i = 0; i < m->rows(); ++i) {
      for (Eigen::Index j = 0; j < m->cols(); ++j) {
        const double x = (*m)(i, j);
        out.write(reinterpret_cast<const char*>(&x), 8);
      }
    }
  }
  if (!out) throw ConfigError("failed writing checkpoint " + path);
}

inline ActorCritic load_checkpoint(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ConfigError("cannot open checkpoint " + path);
  char magic[8];
  in.read(magic, 8);
  if (!in || std::string(magic, 8) != std::string(kCheckpointMagic, 8)) {
    throw ConfigError(path + ": not a policy checkpoint");
  }
  std::uint32_t count = 0;
  in.read(reinterpret_cast<char*>(&count), 4);
  if (!in || count < 5 || count % 2 == 0 || count > 1000) {
    throw ConfigError(path + ": bad tensor count");
  }
  std::uint32_t policy_layers = 0;
  in.read(reinterpret_cast<char*>(&policy_layers), 4);
  if (!in || policy_layers == 0 || 2 * policy_layers + 1 >= count) {
    throw ConfigError(path + ": bad policy layer count");
  }
  std::vector<MatX> mats(count);
  for (auto& m : mats) {
    std::uint32_t r = 0, c = 0;
    in.read(reinterpret_cast<char*>(&r), 4);
    in.read(reinterpret_cast<char*>(&c), 4);
    if (!in || r == 0 || c == 0 || r > 100000 || c > 100000) {
      throw ConfigError(path + ": bad shape table");
    }
    m.resize(r, c);
  }
  for (auto& m : mats) {
    for (Eigen::Index i = 0; i < m.rows(); ++i) {
      for (Eigen::Index j = 0; j < m.cols(); ++j) {
        in.read(reinterpret_cast<char*>(&m(i, j)), 8);
      }
    }
  }
  if (!in) throw ConfigError(path + ": truncated");

  const std::size_t split = 2 * policy_layers;
  ActorCritic ac;
  for (std::size_t k = 0; k < split; k += 2) {
    if (mats[k + 1].cols() != 1 || mats[k + 1].rows() != mats[k].rows()) {
      throw ConfigError(path + ": inconsistent policy layer");
    }
    ac.pi.layers.push_back({mats[k], mats[k + 1].col(0)});
  }
  ac.log_std = mats[split].col(0);
  for (std::size_t k = split + 1; k + 1 < mats.size(); k += 2) {
    if (mats[k + 1].cols() != 1 || mats[k + 1].rows() != mats[k].rows()) {
      throw ConfigError(path + ": inconsistent value layer");
    }
    ac.v.layers.push_back({mats[k], mats[k + 1].col(0)});
  }
  for (std::size_t l = 1; l < ac.pi.layers.size(); ++l) {
    if (ac.pi.layers[l].w.cols() != ac.pi.layers[l - 1].w.rows()) {
      throw ConfigError(path + ": policy layer shapes do not chain");
    }
  }
  if (mats[split].cols() != 1 || ac.log_std.size() != ac.pi.out_dim() || ac.v.out_dim() != 1 ||
      ac.v.in_dim() != ac.pi.in_dim()) {
    throw ConfigError(path + ": head shapes disagree");
  }
  if (!ac.flat().allFinite()) throw ConfigError(path + ": non-finite weights");
  return ac;
}

}  // namespace tactile_hand

#endif  // TACTILE_HAND_MLP_HPP_
