#pragma once

#include <chrono>
#include <optional>
#include <string>
#include <vector>

#include "json.hpp"

#include "aot/core.hpp"
#include "aot/feature_space.hpp"
#include "aot/image_io.hpp"
#include "aot/metrics.hpp"
#include "aot/neural.hpp"
#include "aot/ot_solvers.hpp"

namespace aot {

enum class TransferMethod { sinkhorn, exact, neural };

inline std::string to_string(TransferMethod m) {
  switch (m) {
    case TransferMethod::sinkhorn: return "sinkhorn";
    case TransferMethod::exact: return "exact";
    case TransferMethod::neural: return "neural";
  }
  return "unknown";
}

inline TransferMethod parse_method(const std::string& s) {
  if (s == "sinkhorn") return TransferMethod::sinkhorn;
  if (s == "exact") return TransferMethod::exact;
  if (s == "neural") return TransferMethod::neural;
  fail(ErrorKind::invalid_argument, "unknown transfer method '" + s + "' (expected sinkhorn, exact or neural)");
}

struct TransferOptions {
  TransferMethod method = TransferMethod::sinkhorn;
  std::size_t max_points = 0;  // 0: 256 for sinkhorn/neural, 64 for exact
  double epsilon = 0.01;
  int sinkhorn_max_iter = 5000;
  double sinkhorn_tol = 1e-6;
  double position_weight = 0.25;
  double normal_weight = 0.25;
  std::uint64_t seed = 0;
  std::size_t smoothing_radius = 2;
  CostKind cost = CostKind::squared_euclidean;
  TrainConfig neural;

  std::size_t resolved_max_points() const {
    if (max_points != 0) return max_points;
    return method == TransferMethod::exact ? kExactMaxSize : 256;
  }

  void validate() const {
    require(position_weight >= 0.0 && std::isfinite(position_weight), "position_weight must be nonnegative");
    require(normal_weight >= 0.0 && std::isfinite(normal_weight), "normal_weight must be nonnegative");
    if (method == TransferMethod::sinkhorn) {
      require(epsilon > 0.0 && std::isfinite(epsilon), "epsilon must be positive");
      require(sinkhorn_max_iter > 0, "sinkhorn_max_iter must be positive");
      require(sinkhorn_tol > 0.0, "sinkhorn_tol must be positive");
    }
    if (method == TransferMethod::exact)
      require(resolved_max_points() <= kExactMaxSize, "exact method supports at most 64 cloud points");
    if (method == TransferMethod::neural) neural.validate();
  }
};

struct TransferReport {
  TransferMethod method = TransferMethod::sinkhorn;
  double cost = 0.0;  // plan cost, or the final dual gap for the neural method
  std::optional<double> marginal_error;
  double seconds = 0.0;
  double histogram_distance_before = 0.0;
  double histogram_distance_after = 0.0;
  std::size_t source_points = 0;
  std::size_t target_points = 0;
  int iterations = 0;
  bool converged = true;

  nlohmann::json to_json() const {
    return {{"method", to_string(method)},
            {"cost", cost},
            {"marginal_error", marginal_error ? nlohmann::json(*marginal_error) : nlohmann::json(nullptr)},
            {"seconds", seconds},
            {"histogram_distance_before", histogram_distance_before},
            {"histogram_distance_after", histogram_distance_after},
            {"source_points", source_points},
            {"target_points", target_points},
            {"iterations", iterations},
            {"converged", converged}};
  }
};

// Conditional mean of the target points under each row of the plan. Rows
// without mass keep their own source point.
inline Matrix barycentric_map(const TransportPlan& plan, const WeightedPointCloud& source, const WeightedPointCloud& target) {
  const auto& p = plan.coupling;
  require(p.cols == target.size(), "barycentric_map: plan has " + std::to_string(p.cols) + " columns but target has " +
                                       std::to_string(target.size()) + " points");
  require(p.rows == source.size(), "barycentric_map: plan rows do not match source cloud");
  require(source.dim() == target.dim(), "barycentric_map: dimension mismatch");
  const std::size_t d = target.dim();
  Matrix out(p.rows, d);
  for (std::size_t i = 0; i < p.rows; ++i) {
    double mass = 0.0;
    for (std::size_t j = 0; j < p.cols; ++j) mass += p(i, j);
    if (!(mass > 0.0)) {
      std::copy_n(source.points.row(i), d, out.row(i));
      continue;
    }
    for (std::size_t j = 0; j < p.cols; ++j) {
      const double w = p(i, j);
      if (w == 0.0) continue;
      for (std::size_t k = 0; k < d; ++k) out(i, k) += w * target.points(j, k);
    }
    for (std::size_t k = 0; k < d; ++k) out(i, k) /= mass;
  }
  return out;
}

// Moves each pixel by its cloud point's color displacement (mapped - point),
// which keeps the pixel's residual around that point. The displacement field is
// box-blurred with `smoothing_radius` before the result is clamped to [0,1].
inline ImageBuffer apply_mapping(const ImageBuffer& image, const WeightedPointCloud& source_cloud, const Matrix& mapped_points,
                                 const std::vector<std::size_t>& assignment, std::size_t smoothing_radius) {
  require(assignment.size() == image.pixel_count(), "apply_mapping: assignment must cover every pixel");
  require(mapped_points.rows == source_cloud.size(), "apply_mapping: mapped point count differs from cloud size");
  require(source_cloud.dim() >= 3 && mapped_points.cols >= 3, "apply_mapping: points must carry 3 color components");
  const std::size_t w = image.width(), h = image.height();

  std::vector<double> delta(w * h * 3);
  for (std::size_t p = 0; p < w * h; ++p) {
    const std::size_t c = assignment[p];
    require(c < source_cloud.size(), "apply_mapping: assignment index out of range");
    for (int k = 0; k < 3; ++k) delta[p * 3 + k] = mapped_points(c, k) - source_cloud.points(c, k);
  }

  if (smoothing_radius > 0) {
    // Separable box filter, window truncated at the borders.
    const long r = static_cast<long>(smoothing_radius);
    std::vector<double> tmp(delta.size());
    parallel_for(h, [&](std::size_t y) {
      for (long x = 0; x < static_cast<long>(w); ++x) {
        const long lo = std::max(0L, x - r), hi = std::min(static_cast<long>(w) - 1, x + r);
        for (int k = 0; k < 3; ++k) {
          double s = 0.0;
          for (long xx = lo; xx <= hi; ++xx) s += delta[(y * w + xx) * 3 + k];
          tmp[(y * w + x) * 3 + k] = s / static_cast<double>(hi - lo + 1);
        }
      }
    });
    parallel_for(w, [&](std::size_t x) {
      for (long y = 0; y < static_cast<long>(h); ++y) {
        const long lo = std::max(0L, y - r), hi = std::min(static_cast<long>(h) - 1, y + r);
        for (int k = 0; k < 3; ++k) {
          double s = 0.0;
          for (long yy = lo; yy <= hi; ++yy) s += tmp[(yy * w + x) * 3 + k];
          delta[(y * w + x) * 3 + k] = s / static_cast<double>(hi - lo + 1);
        }
      }
    });
  }

  std::vector<double> out(image.data());
  for (std::size_t i = 0; i < out.size(); ++i) out[i] += delta[i];
  return clamp_to_image(w, h, std::move(out));
}

struct TransferResult {
  ImageBuffer image;
  TransferReport report;
  // Intermediate products, exposed for inspection and tests.
  QuantizedCloud source;
  QuantizedCloud target;
  Matrix mapped_points;
  std::optional<TransportModel> neural_model;
};

// features -> clouds -> OT solve -> per-point map -> per-pixel application.
inline TransferResult transfer_appearance(const ImageBuffer& source, const ImageBuffer& target, const GeometryMaps& source_geom,
                                          const GeometryMaps& target_geom, const TransferOptions& options) {
  options.validate();
  require(!source.empty() && !target.empty(), "transfer: empty input image");
  require(source_geom.position_map.has_value() == target_geom.position_map.has_value() &&
              source_geom.normal_map.has_value() == target_geom.normal_map.has_value(),
          "transfer: source and target must supply the same kinds of geometry maps");
  const auto t0 = std::chrono::steady_clock::now();

  TransferResult res;
  const std::size_t k = options.resolved_max_points();
  res.source = quantize_with_assignment(
      build_augmented_features(source, source_geom, options.position_weight, options.normal_weight), k, options.seed);
  res.target = quantize_with_assignment(
      build_augmented_features(target, target_geom, options.position_weight, options.normal_weight), k, options.seed);
  const auto& sc = res.source.cloud;
  const auto& tc = res.target.cloud;
  auto& rep = res.report;
  rep.method = options.method;
  rep.source_points = sc.size();
  rep.target_points = tc.size();

  if (options.method == TransferMethod::neural) {
    TrainConfig cfg = options.neural;
    cfg.seed = options.seed;
    const auto cond = make_condition(sc, tc);
    auto trained = train_notpe(sc, tc, cond, cfg);
    res.mapped_points = Matrix(sc.size(), sc.dim());
    for (std::size_t i = 0; i < sc.size(); ++i) {
      const auto y = transport_sample(trained.map, std::span<const double>(sc.points.row(i), sc.dim()), cond);
      std::copy(y.begin(), y.end(), res.mapped_points.row(i));
    }
    // Remaining dual gap E[psi(target)] - E[psi(omega(source))] under the final critic.
    double gap = 0.0;
    for (std::size_t j = 0; j < tc.size(); ++j) gap += tc.weights[j] * trained.critic(std::span<const double>(tc.points.row(j), tc.dim()));
    for (std::size_t i = 0; i < sc.size(); ++i)
      gap -= sc.weights[i] * trained.critic(std::span<const double>(res.mapped_points.row(i), sc.dim()));
    rep.cost = gap;
    rep.iterations = cfg.total_iterations;
    res.neural_model = std::move(trained.map);
  } else {
    const auto c = cost_matrix(sc, tc, options.cost);
    const TransportPlan plan = options.method == TransferMethod::exact
                                   ? exact_ot_small(c, sc.weights, tc.weights)
                                   : sinkhorn(c, sc.weights, tc.weights, options.epsilon, options.sinkhorn_max_iter,
                                              options.sinkhorn_tol);
    rep.cost = plan_cost(plan, c);
    rep.marginal_error = std::max(plan.row_marginal_error, plan.col_marginal_error);
    rep.iterations = plan.iterations_used;
    rep.converged = plan.converged;
    res.mapped_points = barycentric_map(plan, sc, tc);
  }

  res.image = apply_mapping(source, sc, res.mapped_points, res.source.assignment, options.smoothing_radius);
  rep.histogram_distance_before = histogram_w_distance(source, target, kHistogramMaxPoints, options.seed);
  rep.histogram_distance_after = histogram_w_distance(res.image, target, kHistogramMaxPoints, options.seed);
  rep.seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  return res;
}

inline TransferResult transfer_appearance(const ImageBuffer& source, const ImageBuffer& target, const TransferOptions& options) {
  return transfer_appearance(source, target, GeometryMaps{}, GeometryMaps{}, options);
}

}  // namespace aot
