#pragma once

#include <cmath>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <optional>
#include <random>
#include <span>
#include <string>
#include <vector>

#include "json.hpp"

#include "aot/core.hpp"
#include "aot/feature_space.hpp"

namespace aot {

enum class Activation { relu, identity };

struct LayerShape {
  std::size_t in = 0;
  std::size_t out = 0;
  Activation activation = Activation::identity;
  std::size_t weight_offset = 0;  // out x in, row-major
  std::size_t bias_offset = 0;
};

// Fully connected network with all parameters in one flat array, so that
// optimizers, clipping and checkpoints treat every parameter uniformly.
class DenseNetwork {
 public:
  DenseNetwork() = default;

  // widths = {input, hidden..., output}. Hidden layers use ReLU, the last layer
  // is affine. Weights are drawn uniformly from +-min(1/sqrt(fan_in), clip);
  // hidden biases start at `hidden_bias`, output biases at zero.
  static DenseNetwork create(const std::vector<std::size_t>& widths, std::optional<double> clip_bound, std::uint64_t seed,
                             double hidden_bias = 0.0) {
    require(widths.size() >= 2, "network needs at least an input and an output width");
    for (auto w : widths) require(w >= 1, "layer widths must be positive");
    if (clip_bound) require(*clip_bound > 0.0, "clip_bound must be positive");
    DenseNetwork net;
    net.clip_bound_ = clip_bound;
    net.seed_ = seed;
    std::size_t offset = 0;
    for (std::size_t l = 0; l + 1 < widths.size(); ++l) {
      LayerShape s;
      s.in = widths[l];
      s.out = widths[l + 1];
      s.activation = l + 2 < widths.size() ? Activation::relu : Activation::identity;
      s.weight_offset = offset;
      offset += s.in * s.out;
      s.bias_offset = offset;
      offset += s.out;
      net.layers_.push_back(s);
    }
    net.params_.assign(offset, 0.0);
    std::mt19937_64 rng(seed);
    for (const auto& s : net.layers_) {
      double bound = 1.0 / std::sqrt(static_cast<double>(s.in));
      if (clip_bound) bound = std::min(bound, *clip_bound);
      std::uniform_real_distribution<double> dist(-bound, bound);
      for (std::size_t k = 0; k < s.in * s.out; ++k) net.params_[s.weight_offset + k] = dist(rng);
      if (s.activation == Activation::relu)
        std::fill_n(net.params_.begin() + static_cast<long>(s.bias_offset), s.out, hidden_bias);
    }
    net.clip();
    return net;
  }

  static DenseNetwork from_parts(std::vector<LayerShape> layers, std::vector<double> params, std::optional<double> clip_bound,
                                 std::uint64_t seed) {
    require(!layers.empty(), "network needs at least one layer");
    std::size_t offset = 0;
    for (std::size_t l = 0; l < layers.size(); ++l) {
      auto& s = layers[l];
      require(s.in >= 1 && s.out >= 1, "layer widths must be positive");
      if (l > 0) require(layers[l - 1].out == s.in, "consecutive layer dimensions do not chain");
      s.weight_offset = offset;
      offset += s.in * s.out;
      s.bias_offset = offset;
      offset += s.out;
    }
    require(params.size() == offset, "parameter count does not match layer shapes");
    DenseNetwork net;
    net.layers_ = std::move(layers);
    net.params_ = std::move(params);
    net.clip_bound_ = clip_bound;
    net.seed_ = seed;
    return net;
  }

  std::size_t input_dim() const { return layers_.front().in; }
  std::size_t output_dim() const { return layers_.back().out; }
  const std::vector<LayerShape>& layers() const { return layers_; }
  std::vector<double>& parameters() { return params_; }
  const std::vector<double>& parameters() const { return params_; }
  std::optional<double> clip_bound() const { return clip_bound_; }
  std::uint64_t seed() const { return seed_; }

  double weight(std::size_t layer, std::size_t out, std::size_t in) const {
    const auto& s = layers_[layer];
    return params_[s.weight_offset + out * s.in + in];
  }
  double bias(std::size_t layer, std::size_t out) const { return params_[layers_[layer].bias_offset + out]; }

  void clip() {
    if (!clip_bound_) return;
    const double c = *clip_bound_;
    for (auto& p : params_) p = std::clamp(p, -c, c);
  }

  double max_abs_parameter() const {
    double m = 0.0;
    for (double p : params_) m = std::max(m, std::abs(p));
    return m;
  }

 private:
  std::vector<LayerShape> layers_;
  std::vector<double> params_;
  std::optional<double> clip_bound_;
  std::uint64_t seed_ = 0;
};

// Per-layer inputs and pre-activations of one forward pass.
struct ForwardCache {
  std::vector<std::vector<double>> inputs;
  std::vector<std::vector<double>> pre_activations;
  std::vector<double> output;
};

inline ForwardCache network_forward_cached(const DenseNetwork& net, std::span<const double> x) {
  require(x.size() == net.input_dim(), "network input has length " + std::to_string(x.size()) + ", expected " +
                                           std::to_string(net.input_dim()));
  ForwardCache cache;
  std::vector<double> cur(x.begin(), x.end());
  const auto& p = net.parameters();
  for (const auto& s : net.layers()) {
    std::vector<double> z(s.out);
    for (std::size_t o = 0; o < s.out; ++o) {
      double acc = p[s.bias_offset + o];
      const double* w = p.data() + s.weight_offset + o * s.in;
      for (std::size_t i = 0; i < s.in; ++i) acc += w[i] * cur[i];
      z[o] = acc;
    }
    cache.inputs.push_back(std::move(cur));
    cur = z;
    if (s.activation == Activation::relu)
      for (auto& v : cur) v = v > 0.0 ? v : 0.0;
    cache.pre_activations.push_back(std::move(z));
  }
  cache.output = std::move(cur);
  return cache;
}

inline std::vector<double> network_forward(const DenseNetwork& net, std::span<const double> x) {
  return network_forward_cached(net, x).output;
}

struct NetworkGradients {
  std::vector<double> parameters;  // same layout as DenseNetwork::parameters()
  std::vector<double> input;
};

// Reverse-mode pass. Parameter gradients are added into `param_grad` when it is
// non-null (sized like the parameter array); the input gradient is returned.
inline std::vector<double> network_backward(const DenseNetwork& net, const ForwardCache& cache, std::span<const double> output_grad,
                                            std::vector<double>* param_grad) {
  const auto& layers = net.layers();
  require(cache.inputs.size() == layers.size() && cache.pre_activations.size() == layers.size(),
          "forward cache does not match network depth");
  require(output_grad.size() == net.output_dim(), "output gradient length does not match network output");
  if (param_grad) require(param_grad->size() == net.parameters().size(), "parameter gradient buffer has wrong size");
  const auto& p = net.parameters();
  std::vector<double> g(output_grad.begin(), output_grad.end());
  for (std::size_t l = layers.size(); l-- > 0;) {
    const auto& s = layers[l];
    const auto& z = cache.pre_activations[l];
    const auto& x = cache.inputs[l];
    require(z.size() == s.out && x.size() == s.in, "stale forward cache");
    if (s.activation == Activation::relu)
      for (std::size_t o = 0; o < s.out; ++o)
        if (!(z[o] > 0.0)) g[o] = 0.0;
    std::vector<double> gin(s.in, 0.0);
    for (std::size_t o = 0; o < s.out; ++o) {
      const double go = g[o];
      if (go == 0.0) continue;
      const double* w = p.data() + s.weight_offset + o * s.in;
      if (param_grad) {
        double* gw = param_grad->data() + s.weight_offset + o * s.in;
        for (std::size_t i = 0; i < s.in; ++i) gw[i] += go * x[i];
        (*param_grad)[s.bias_offset + o] += go;
      }
      for (std::size_t i = 0; i < s.in; ++i) gin[i] += w[i] * go;
    }
    g = std::move(gin);
  }
  return g;
}

inline NetworkGradients network_gradients(const DenseNetwork& net, std::span<const double> output_grad, const ForwardCache& cache) {
  NetworkGradients out;
  out.parameters.assign(net.parameters().size(), 0.0);
  out.input = network_backward(net, cache, output_grad, &out.parameters);
  return out;
}

// RMSProp with per-parameter running second moments.
class RmsProp {
 public:
  RmsProp(std::size_t n, double learning_rate, double decay = 0.9, double epsilon = 1e-8)
      : lr_(learning_rate), decay_(decay), eps_(epsilon), ms_(n, 0.0) {}

  // direction = +1 for ascent, -1 for descent. Clips afterwards when the net has a bound.
  void step(DenseNetwork& net, const std::vector<double>& grad, double direction) {
    auto& p = net.parameters();
    for (std::size_t k = 0; k < p.size(); ++k) {
      ms_[k] = decay_ * ms_[k] + (1.0 - decay_) * grad[k] * grad[k];
      p[k] += direction * lr_ * grad[k] / (std::sqrt(ms_[k]) + eps_);
    }
    net.clip();
  }

  void set_learning_rate(double lr) { lr_ = lr; }

 private:
  double lr_, decay_, eps_;
  std::vector<double> ms_;
};

struct TrainConfig {
  double learning_rate = 5e-4;
  int critic_steps = 5;
  int total_iterations = 3000;
  std::size_t batch_size = 64;
  double clip_bound = 0.1;
  std::size_t hidden_width = 64;
  std::uint64_t seed = 0;

  void validate() const {
    require(learning_rate > 0.0 && std::isfinite(learning_rate), "learning_rate must be positive");
    require(critic_steps > 0, "critic_steps must be positive");
    require(total_iterations > 0, "total_iterations must be positive");
    require(batch_size > 0, "batch_size must be positive");
    require(clip_bound > 0.0 && std::isfinite(clip_bound), "clip_bound must be positive");
    require(hidden_width > 0, "hidden_width must be positive");
  }
};

// With every weight clipped to +-1/sqrt(width), a saturated [d -> width -> 1]
// ReLU critic has gradient entries of magnitude exactly 1, i.e. it is
// 1-Lipschitz with respect to the l1 ground metric.
inline double unit_slope_clip_bound(std::size_t hidden_width) { return 1.0 / std::sqrt(static_cast<double>(hidden_width)); }

// Affine map into the unit l1 ball around the pooled mean. Networks act on
// normalized coordinates; potentials are scaled back by `scale`, which leaves
// Lipschitz constants unchanged.
struct Normalizer {
  std::vector<double> center;
  double scale = 1.0;

  std::vector<double> apply(std::span<const double> v) const {
    std::vector<double> out(v.size());
    for (std::size_t k = 0; k < v.size(); ++k) out[k] = (v[k] - center[k]) / scale;
    return out;
  }

  static Normalizer fit(const Matrix& a, const Matrix& b) {
    const std::size_t d = a.cols;
    Normalizer n;
    n.center.assign(d, 0.0);
    for (std::size_t i = 0; i < a.rows; ++i)
      for (std::size_t k = 0; k < d; ++k) n.center[k] += a(i, k);
    for (std::size_t i = 0; i < b.rows; ++i)
      for (std::size_t k = 0; k < d; ++k) n.center[k] += b(i, k);
    for (auto& c : n.center) c /= static_cast<double>(a.rows + b.rows);
    double radius = 0.0;
    auto visit = [&](const Matrix& m) {
      for (std::size_t i = 0; i < m.rows; ++i) {
        double r = 0.0;
        for (std::size_t k = 0; k < d; ++k) r += std::abs(m(i, k) - n.center[k]);
        radius = std::max(radius, r);
      }
    };
    visit(a);
    visit(b);
    n.scale = radius > 0.0 ? radius : 1.0;
    return n;
  }
};

// Trained dual potential: psi(x) = scale * net((x - center) / scale).
struct PotentialModel {
  DenseNetwork net;
  Normalizer norm;

  double operator()(std::span<const double> x) const { return norm.scale * network_forward(net, norm.apply(x))[0]; }
};

// Summary statistics of source and target: mean and std of each, 4d entries.
struct ConditionVector {
  std::vector<double> values;
};

inline ConditionVector make_condition(const WeightedPointCloud& source, const WeightedPointCloud& target) {
  require(source.dim() == target.dim(), "condition: dimension mismatch");
  ConditionVector c;
  for (const auto* cloud : {&source, &target}) {
    const std::size_t d = cloud->dim();
    std::vector<double> mean(d, 0.0), var(d, 0.0);
    for (std::size_t i = 0; i < cloud->size(); ++i)
      for (std::size_t k = 0; k < d; ++k) mean[k] += cloud->weights[i] * cloud->points(i, k);
    for (std::size_t i = 0; i < cloud->size(); ++i)
      for (std::size_t k = 0; k < d; ++k) {
        const double t = cloud->points(i, k) - mean[k];
        var[k] += cloud->weights[i] * t * t;
      }
    c.values.insert(c.values.end(), mean.begin(), mean.end());
    for (double v : var) c.values.push_back(std::sqrt(v));
  }
  return c;
}

// Transport map: omega(v) = v + scale * net([(v - center)/scale, condition]).
struct TransportModel {
  DenseNetwork net;
  Normalizer norm;
  ConditionVector condition;

  std::size_t dim() const { return norm.center.size(); }
};

inline std::vector<double> transport_input(const TransportModel& model, std::span<const double> v, const ConditionVector& cond) {
  auto in = model.norm.apply(v);
  in.insert(in.end(), cond.values.begin(), cond.values.end());
  return in;
}

inline std::vector<double> transport_sample(const TransportModel& model, std::span<const double> v, const ConditionVector& cond) {
  require(v.size() == model.dim(), "transport_sample: point has dimension " + std::to_string(v.size()) + ", expected " +
                                       std::to_string(model.dim()));
  require(cond.values.size() == 4 * model.dim(), "transport_sample: condition vector must have 4*d entries");
  const auto out = network_forward(model.net, transport_input(model, v, cond));
  std::vector<double> y(v.begin(), v.end());
  for (std::size_t k = 0; k < y.size(); ++k) y[k] += model.norm.scale * out[k];
  return y;
}

namespace detail {

// Draws indices proportionally to cloud weights.
class WeightedSampler {
 public:
  explicit WeightedSampler(const std::vector<double>& weights) : cdf_(weights.size()) {
    double acc = 0.0;
    for (std::size_t i = 0; i < weights.size(); ++i) cdf_[i] = acc += weights[i];
  }
  template <class Rng>
  std::size_t operator()(Rng& rng) const {
    std::uniform_real_distribution<double> unit(0.0, cdf_.back());
    const double r = unit(rng);
    const auto it = std::upper_bound(cdf_.begin(), cdf_.end(), r);
    return std::min<std::size_t>(static_cast<std::size_t>(it - cdf_.begin()), cdf_.size() - 1);
  }

 private:
  std::vector<double> cdf_;
};

inline void check_finite(const std::vector<double>& v, const std::string& what, int iteration) {
  for (double x : v)
    if (!std::isfinite(x))
      fail(ErrorKind::solver, what + " diverged (non-finite value) at iteration " + std::to_string(iteration) +
                                  "; lower the learning rate");
}

// Accumulates the gradient of mean(psi(batch)) * sign into grad, returning the mean.
inline double accumulate_potential(const DenseNetwork& critic, const std::vector<std::vector<double>>& batch, double sign,
                                   std::vector<double>& grad) {
  const double w = sign / static_cast<double>(batch.size());
  double mean = 0.0;
  const double g[1] = {w};
  for (const auto& x : batch) {
    const auto cache = network_forward_cached(critic, x);
    mean += cache.output[0];
    network_backward(critic, cache, g, &grad);
  }
  return mean / static_cast<double>(batch.size());
}

inline double mean_potential(const DenseNetwork& critic, const Normalizer& norm, const Matrix& pts, const std::vector<double>& w) {
  double s = 0.0;
  for (std::size_t i = 0; i < pts.rows; ++i)
    s += w[i] * network_forward(critic, norm.apply(std::span<const double>(pts.row(i), pts.cols)))[0];
  return norm.scale * s;
}

}  // namespace detail

// Inputs lie in the unit l1 ball after normalization, so a hidden bias equal to
// the clip bound keeps every ReLU unit active on the data at initialization.
inline DenseNetwork critic_network(std::size_t dim, const TrainConfig& config) {
  return DenseNetwork::create({dim, config.hidden_width, 1}, config.clip_bound, config.seed, config.clip_bound);
}

struct W1Estimate {
  PotentialModel potential;
  double estimate = 0.0;
};

// Maximizes E_source[psi] - E_target[psi] over clipped critics [d -> width -> 1].
// The estimate is the raw dual value over the full clouds.
inline W1Estimate estimate_w1(const WeightedPointCloud& source, const WeightedPointCloud& target, const TrainConfig& config) {
  config.validate();
  source.validate();
  target.validate();
  require(source.dim() == target.dim(), "estimate_w1: dimension mismatch");
  const std::size_t d = source.dim();

  W1Estimate res;
  res.potential.norm = Normalizer::fit(source.points, target.points);
  res.potential.net = critic_network(d, config);
  auto& critic = res.potential.net;
  std::mt19937_64 rng(config.seed ^ 0x9e3779b97f4a7c15ULL);
  const detail::WeightedSampler pick_src(source.weights), pick_tgt(target.weights);
  RmsProp opt(critic.parameters().size(), config.learning_rate);

  std::vector<std::vector<double>> bs(config.batch_size), bt(config.batch_size);
  std::vector<double> grad(critic.parameters().size());
  for (int it = 0; it < config.total_iterations; ++it) {
    for (std::size_t k = 0; k < config.batch_size; ++k) {
      const std::size_t i = pick_src(rng), j = pick_tgt(rng);
      bs[k] = res.potential.norm.apply(std::span<const double>(source.points.row(i), d));
      bt[k] = res.potential.norm.apply(std::span<const double>(target.points.row(j), d));
    }
    std::fill(grad.begin(), grad.end(), 0.0);
    const double ms = detail::accumulate_potential(critic, bs, +1.0, grad);
    const double mt = detail::accumulate_potential(critic, bt, -1.0, grad);
    if (!std::isfinite(ms - mt))
      fail(ErrorKind::solver, "estimate_w1: dual objective is non-finite at iteration " + std::to_string(it) +
                                  "; lower the learning rate");
    detail::check_finite(grad, "estimate_w1 critic gradient", it);
    opt.step(critic, grad, +1.0);
  }
  res.estimate = detail::mean_potential(critic, res.potential.norm, source.points, source.weights) -
                 detail::mean_potential(critic, res.potential.norm, target.points, target.weights);
  if (!std::isfinite(res.estimate)) fail(ErrorKind::solver, "estimate_w1: final estimate is non-finite");
  return res;
}

inline W1Estimate estimate_w1(const Matrix& source_samples, const Matrix& target_samples, const TrainConfig& config) {
  return estimate_w1(uniform_cloud(source_samples), uniform_cloud(target_samples), config);
}

// Observer for per-update checks (e.g. the clipping invariant): called with the
// critic after each of its updates.
using CriticObserver = std::function<void(const DenseNetwork& critic, int iteration)>;

struct NotpeResult {
  TransportModel map;
  PotentialModel critic;
};

// Alternating minimax: per outer iteration, `critic_steps` ascent steps on the
// clipped critic for E[psi(target)] - E[psi(omega(source))], then one descent
// step on omega for the same objective with the critic fixed.
inline NotpeResult train_notpe(const WeightedPointCloud& source, const WeightedPointCloud& target, const ConditionVector& condition,
                               const TrainConfig& config, const CriticObserver& observer = {}) {
  config.validate();
  source.validate();
  target.validate();
  require(source.dim() == target.dim(), "train_notpe: dimension mismatch");
  const std::size_t d = source.dim();
  require(condition.values.size() == 4 * d, "train_notpe: condition vector must have 4*d entries");

  NotpeResult res;
  const auto norm = Normalizer::fit(source.points, target.points);
  res.critic.norm = norm;
  res.critic.net = critic_network(d, config);
  auto& critic = res.critic.net;
  auto& omega = res.map;
  omega.norm = norm;
  omega.condition = condition;
  omega.net = DenseNetwork::create({d + condition.values.size(), config.hidden_width, config.hidden_width, d}, std::nullopt,
                                   config.seed + 1);
  {
    // Zero output layer: training starts from the identity map.
    const auto& last = omega.net.layers().back();
    auto& p = omega.net.parameters();
    std::fill(p.begin() + static_cast<long>(last.weight_offset), p.end(), 0.0);
  }

  std::mt19937_64 rng(config.seed ^ 0xd1b54a32d192ed03ULL);
  const detail::WeightedSampler pick_src(source.weights), pick_tgt(target.weights);
  RmsProp critic_opt(critic.parameters().size(), config.learning_rate);
  RmsProp omega_opt(omega.net.parameters().size(), config.learning_rate);

  const std::size_t B = config.batch_size;
  std::vector<std::vector<double>> moved(B), bt(B), omega_in(B);
  std::vector<double> cgrad(critic.parameters().size()), ograd(omega.net.parameters().size());
  auto transport_batch = [&](std::vector<ForwardCache>* caches) {
    for (std::size_t k = 0; k < B; ++k) {
      const std::size_t i = pick_src(rng);
      const std::span<const double> v(source.points.row(i), d);
      omega_in[k] = transport_input(omega, v, condition);
      auto cache = network_forward_cached(omega.net, omega_in[k]);
      // Normalized coordinates of omega(v) = v + scale * out.
      moved[k] = norm.apply(v);
      for (std::size_t j = 0; j < d; ++j) moved[k][j] += cache.output[j];
      if (caches) (*caches)[k] = std::move(cache);
    }
  };

  std::vector<ForwardCache> caches(B);
  for (int it = 0; it < config.total_iterations; ++it) {
    for (int s = 0; s < config.critic_steps; ++s) {
      transport_batch(nullptr);
      for (std::size_t k = 0; k < B; ++k) bt[k] = norm.apply(std::span<const double>(target.points.row(pick_tgt(rng)), d));
      std::fill(cgrad.begin(), cgrad.end(), 0.0);
      detail::accumulate_potential(critic, bt, +1.0, cgrad);
      detail::accumulate_potential(critic, moved, -1.0, cgrad);
      detail::check_finite(cgrad, "train_notpe critic gradient", it);
      critic_opt.step(critic, cgrad, +1.0);
      if (observer) observer(critic, it);
    }
    // Omega minimizes -E[psi(omega(v))]; d/d(out) = -(1/B) grad psi at the moved point.
    transport_batch(&caches);
    std::fill(ograd.begin(), ograd.end(), 0.0);
    const double gout[1] = {-1.0 / static_cast<double>(B)};
    for (std::size_t k = 0; k < B; ++k) {
      const auto ccache = network_forward_cached(critic, moved[k]);
      const auto gin = network_backward(critic, ccache, gout, nullptr);
      network_backward(omega.net, caches[k], gin, &ograd);
    }
    detail::check_finite(ograd, "train_notpe transport-map gradient", it);
    omega_opt.step(omega.net, ograd, -1.0);
  }
  return res;
}

inline NotpeResult train_notpe(const Matrix& source_samples, const Matrix& target_samples, const TrainConfig& config,
                               const CriticObserver& observer = {}) {
  const auto s = uniform_cloud(source_samples), t = uniform_cloud(target_samples);
  return train_notpe(s, t, make_condition(s, t), config, observer);
}

// ---- checkpoints --------------------------------------------------------

inline constexpr const char* kCheckpointFormat = "NOTPE-CKPT-1";

inline nlohmann::json network_to_json(const DenseNetwork& net) {
  nlohmann::json j;
  j["format"] = kCheckpointFormat;
  j["seed"] = net.seed();
  j["clip_bound"] = net.clip_bound() ? nlohmann::json(*net.clip_bound()) : nlohmann::json(nullptr);
  j["layers"] = nlohmann::json::array();
  const auto& p = net.parameters();
  for (const auto& s : net.layers()) {
    nlohmann::json l;
    l["in"] = s.in;
    l["out"] = s.out;
    l["activation"] = s.activation == Activation::relu ? "relu" : "identity";
    l["weights"] = std::vector<double>(p.begin() + static_cast<long>(s.weight_offset),
                                       p.begin() + static_cast<long>(s.weight_offset + s.in * s.out));
    l["bias"] = std::vector<double>(p.begin() + static_cast<long>(s.bias_offset), p.begin() + static_cast<long>(s.bias_offset + s.out));
    j["layers"].push_back(std::move(l));
  }
  return j;
}

inline DenseNetwork network_from_json(const nlohmann::json& j) {
  try {
    if (j.at("format").get<std::string>() != kCheckpointFormat)
      fail(ErrorKind::invalid_argument, "unsupported checkpoint format '" + j.at("format").get<std::string>() + "'");
    std::vector<LayerShape> layers;
    std::vector<double> params;
    for (const auto& l : j.at("layers")) {
      LayerShape s;
      s.in = l.at("in").get<std::size_t>();
      s.out = l.at("out").get<std::size_t>();
      const auto act = l.at("activation").get<std::string>();
      require(act == "relu" || act == "identity", "unknown activation '" + act + "'");
      s.activation = act == "relu" ? Activation::relu : Activation::identity;
      const auto w = l.at("weights").get<std::vector<double>>();
      const auto b = l.at("bias").get<std::vector<double>>();
      require(w.size() == s.in * s.out && b.size() == s.out, "checkpoint layer arrays do not match declared shape");
      params.insert(params.end(), w.begin(), w.end());
      params.insert(params.end(), b.begin(), b.end());
      layers.push_back(s);
    }
    std::optional<double> clip;
    if (!j.at("clip_bound").is_null()) clip = j.at("clip_bound").get<double>();
    return DenseNetwork::from_parts(std::move(layers), std::move(params), clip, j.at("seed").get<std::uint64_t>());
  } catch (const nlohmann::json::exception& e) {
    fail(ErrorKind::invalid_argument, std::string("malformed checkpoint: ") + e.what());
  }
}

inline nlohmann::json transport_model_to_json(const TransportModel& m) {
  auto j = network_to_json(m.net);
  j["normalization"] = {{"center", m.norm.center}, {"scale", m.norm.scale}};
  j["condition"] = m.condition.values;
  return j;
}

inline TransportModel transport_model_from_json(const nlohmann::json& j) {
  TransportModel m;
  m.net = network_from_json(j);
  try {
    m.norm.center = j.at("normalization").at("center").get<std::vector<double>>();
    m.norm.scale = j.at("normalization").at("scale").get<double>();
    m.condition.values = j.at("condition").get<std::vector<double>>();
  } catch (const nlohmann::json::exception& e) {
    fail(ErrorKind::invalid_argument, std::string("malformed transport checkpoint: ") + e.what());
  }
  const std::size_t d = m.norm.center.size();
  require(m.condition.values.size() == 4 * d && m.net.input_dim() == 5 * d && m.net.output_dim() == d,
          "transport checkpoint shapes are inconsistent");
  return m;
}

inline void save_json(const nlohmann::json& j, const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::trunc);
  if (!out) fail(ErrorKind::io, "cannot open " + path.string() + " for writing");
  out << j.dump(2) << '\n';
  if (!out) fail(ErrorKind::io, "write error on " + path.string());
}

inline nlohmann::json load_json(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) fail(ErrorKind::io, "cannot open " + path.string());
  try {
    return nlohmann::json::parse(in);
  } catch (const nlohmann::json::parse_error& e) {
    fail(ErrorKind::invalid_argument, "invalid JSON in " + path.string() + ": " + e.what());
  }
}

}  // namespace aot
