#pragma once

#include <cstdint>
#include <limits>
#include <map>
#include <random>
#include <vector>

#include "aot/core.hpp"
#include "aot/image_io.hpp"

namespace aot {

// Concatenated (color, position, normal) vector of one pixel.
struct AugmentedPixelFeature {
  std::vector<double> values;
  std::size_t row = 0;
  std::size_t col = 0;
};

// Discrete distribution over feature space: one row of `points` per support point.
struct WeightedPointCloud {
  Matrix points;
  std::vector<double> weights;

  std::size_t size() const { return points.rows; }
  std::size_t dim() const { return points.cols; }
  std::vector<double> point(std::size_t i) const { return {points.row(i), points.row(i) + points.cols}; }

  void validate() const {
    require(points.rows >= 1, "point cloud must have at least one point");
    require(weights.size() == points.rows, "point cloud weight count differs from point count");
    require(points.all_finite(), "point cloud has non-finite coordinates");
    double total = 0.0;
    for (double w : weights) {
      require(std::isfinite(w) && w >= 0.0, "point cloud weights must be finite and nonnegative");
      total += w;
    }
    require(std::abs(total - 1.0) <= 1e-9, "point cloud weights must sum to 1");
  }
};

// Cloud plus the index of the cloud point each input feature was assigned to.
struct QuantizedCloud {
  WeightedPointCloud cloud;
  std::vector<std::size_t> assignment;
};

inline std::size_t feature_dimension(const GeometryMaps& geom) {
  return 3 + (geom.position_map ? 3 : 2) + (geom.normal_map ? 3 : 0);
}

// One feature per pixel, row-major. Without a position map the position is the
// normalized (col/(W-1), row/(H-1)) pair; without a normal map the normal term
// is omitted.
inline std::vector<AugmentedPixelFeature> build_augmented_features(const ImageBuffer& image, const GeometryMaps& geom,
                                                                   double position_weight, double normal_weight) {
  require(!image.empty(), "empty image");
  require(position_weight >= 0.0 && std::isfinite(position_weight), "position_weight must be a nonnegative real");
  require(normal_weight >= 0.0 && std::isfinite(normal_weight), "normal_weight must be a nonnegative real");
  validate_geometry(image, geom);

  const std::size_t w = image.width(), h = image.height();
  std::vector<std::array<double, 3>> normals;
  if (geom.normal_map) normals = decode_normals(*geom.normal_map);
  const std::size_t dim = feature_dimension(geom);

  std::vector<AugmentedPixelFeature> out(w * h);
  parallel_for(out.size(), [&](std::size_t p) {
    const std::size_t row = p / w, col = p % w;
    auto& f = out[p];
    f.row = row;
    f.col = col;
    f.values.reserve(dim);
    for (int c = 0; c < 3; ++c) f.values.push_back(image.at(row, col, c));
    if (geom.position_map) {
      for (int c = 0; c < 3; ++c) f.values.push_back(position_weight * geom.position_map->at(row, col, c));
    } else {
      f.values.push_back(position_weight * (w > 1 ? static_cast<double>(col) / static_cast<double>(w - 1) : 0.0));
      f.values.push_back(position_weight * (h > 1 ? static_cast<double>(row) / static_cast<double>(h - 1) : 0.0));
    }
    if (geom.normal_map)
      for (int c = 0; c < 3; ++c) f.values.push_back(normal_weight * normals[p][c]);
  });
  return out;
}

inline std::vector<AugmentedPixelFeature> color_only_features(const ImageBuffer& image) {
  std::vector<AugmentedPixelFeature> out(image.pixel_count());
  for (std::size_t p = 0; p < out.size(); ++p) {
    const auto px = image.pixel(p);
    out[p] = {{px[0], px[1], px[2]}, p / image.width(), p % image.width()};
  }
  return out;
}

namespace detail {

inline double sq_dist(const double* a, const double* b, std::size_t d) {
  double s = 0.0;
  for (std::size_t k = 0; k < d; ++k) {
    const double t = a[k] - b[k];
    s += t * t;
  }
  return s;
}

// Distinct feature vectors in first-occurrence order with their multiplicities.
struct DistinctPoints {
  Matrix points;
  std::vector<double> counts;
  std::vector<std::size_t> index_of_feature;
};

inline DistinctPoints merge_duplicates(const std::vector<AugmentedPixelFeature>& features) {
  const std::size_t d = features.front().values.size();
  std::map<std::vector<double>, std::size_t> seen;
  DistinctPoints out;
  out.index_of_feature.resize(features.size());
  std::vector<double> flat;
  for (std::size_t i = 0; i < features.size(); ++i) {
    require(features[i].values.size() == d, "all features in a batch must share one dimension");
    auto [it, inserted] = seen.try_emplace(features[i].values, out.counts.size());
    if (inserted) {
      out.counts.push_back(0.0);
      flat.insert(flat.end(), features[i].values.begin(), features[i].values.end());
    }
    out.counts[it->second] += 1.0;
    out.index_of_feature[i] = it->second;
  }
  out.points.rows = out.counts.size();
  out.points.cols = d;
  out.points.data = std::move(flat);
  return out;
}

}  // namespace detail

inline constexpr int kKMeansMaxIterations = 50;
inline constexpr double kKMeansTolerance = 1e-6;

struct KMeansResult {
  Matrix centroids;
  std::vector<std::size_t> labels;  // per input point
  std::vector<double> mass;         // summed point weight per centroid
};

// Weighted Lloyd iterations with k-means++ seeding. Points carry nonnegative
// weights (multiplicities). Stops after 50 iterations or once no centroid moves
// more than 1e-6.
inline KMeansResult weighted_kmeans(const Matrix& points, const std::vector<double>& weights, std::size_t k, std::uint64_t seed) {
  const std::size_t n = points.rows, d = points.cols;
  require(n >= 1 && k >= 1 && k <= n, "k-means needs 1 <= k <= number of points");
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> unit(0.0, 1.0);

  auto pick_weighted = [&](const std::vector<double>& w) {
    double total = 0.0;
    for (double x : w) total += x;
    const double r = unit(rng) * total;
    double acc = 0.0;
    std::size_t last_positive = 0;
    for (std::size_t i = 0; i < w.size(); ++i) {
      if (w[i] <= 0.0) continue;
      last_positive = i;
      acc += w[i];
      if (r < acc) return i;
    }
    return last_positive;
  };

  KMeansResult res;
  res.centroids = Matrix(k, d);
  std::vector<std::size_t> chosen{pick_weighted(weights)};
  std::vector<double> best(n, std::numeric_limits<double>::infinity());
  for (std::size_t c = 0;; ++c) {
    std::copy_n(points.row(chosen[c]), d, res.centroids.row(c));
    if (c + 1 == k) break;
    std::vector<double> score(n);
    for (std::size_t i = 0; i < n; ++i) {
      best[i] = std::min(best[i], detail::sq_dist(points.row(i), res.centroids.row(c), d));
      score[i] = weights[i] * best[i];
    }
    // All remaining mass sits on existing centroids: fall back to the first unused point.
    bool any = false;
    for (double s : score) any = any || s > 0.0;
    if (any) {
      chosen.push_back(pick_weighted(score));
    } else {
      std::size_t next = 0;
      while (std::find(chosen.begin(), chosen.end(), next) != chosen.end()) ++next;
      chosen.push_back(next);
    }
  }

  res.labels.assign(n, 0);
  for (int iter = 0; iter < kKMeansMaxIterations; ++iter) {
    for (std::size_t i = 0; i < n; ++i) {
      double bd = std::numeric_limits<double>::infinity();
      for (std::size_t c = 0; c < k; ++c) {
        const double dist = detail::sq_dist(points.row(i), res.centroids.row(c), d);
        if (dist < bd) {
          bd = dist;
          res.labels[i] = c;
        }
      }
    }
    Matrix sums(k, d);
    std::vector<double> mass(k, 0.0);
    for (std::size_t i = 0; i < n; ++i) {
      const std::size_t c = res.labels[i];
      mass[c] += weights[i];
      for (std::size_t j = 0; j < d; ++j) sums(c, j) += weights[i] * points(i, j);
    }
    double moved = 0.0;
    for (std::size_t c = 0; c < k; ++c) {
      if (mass[c] <= 0.0) continue;  // empty cluster keeps its centroid
      double shift = 0.0;
      for (std::size_t j = 0; j < d; ++j) {
        const double nc = sums(c, j) / mass[c];
        const double t = nc - res.centroids(c, j);
        shift += t * t;
        res.centroids(c, j) = nc;
      }
      moved = std::max(moved, std::sqrt(shift));
    }
    if (moved <= kKMeansTolerance) break;
  }
  // Final labels against the final centroids.
  res.mass.assign(k, 0.0);
  for (std::size_t i = 0; i < n; ++i) {
    double bd = std::numeric_limits<double>::infinity();
    for (std::size_t c = 0; c < k; ++c) {
      const double dist = detail::sq_dist(points.row(i), res.centroids.row(c), d);
      if (dist < bd) {
        bd = dist;
        res.labels[i] = c;
      }
    }
    res.mass[res.labels[i]] += weights[i];
  }
  return res;
}

// Exact empirical distribution (duplicates merged) when the distinct feature
// count fits in max_points, otherwise a k-means summary with k = max_points.
// Empty clusters are dropped.
inline QuantizedCloud quantize_with_assignment(const std::vector<AugmentedPixelFeature>& features, std::size_t max_points,
                                               std::uint64_t seed) {
  require(!features.empty(), "feature list must be nonempty");
  require(max_points >= 1, "max_points must be at least 1");
  const auto distinct = detail::merge_duplicates(features);
  const double n = static_cast<double>(features.size());

  QuantizedCloud out;
  if (distinct.points.rows <= max_points) {
    out.cloud.points = distinct.points;
    out.cloud.weights.resize(distinct.counts.size());
    for (std::size_t i = 0; i < distinct.counts.size(); ++i) out.cloud.weights[i] = distinct.counts[i] / n;
    out.assignment = distinct.index_of_feature;
    return out;
  }

  const auto km = weighted_kmeans(distinct.points, distinct.counts, max_points, seed);
  std::vector<std::size_t> remap(max_points, max_points);
  std::vector<double> flat;
  for (std::size_t c = 0; c < max_points; ++c) {
    if (km.mass[c] <= 0.0) continue;
    remap[c] = out.cloud.weights.size();
    out.cloud.weights.push_back(km.mass[c] / n);
    flat.insert(flat.end(), km.centroids.row(c), km.centroids.row(c) + km.centroids.cols);
  }
  out.cloud.points.rows = out.cloud.weights.size();
  out.cloud.points.cols = distinct.points.cols;
  out.cloud.points.data = std::move(flat);
  out.assignment.resize(features.size());
  for (std::size_t i = 0; i < features.size(); ++i) out.assignment[i] = remap[km.labels[distinct.index_of_feature[i]]];
  return out;
}

inline WeightedPointCloud quantize_to_cloud(const std::vector<AugmentedPixelFeature>& features, std::size_t max_points,
                                            std::uint64_t seed) {
  return quantize_with_assignment(features, max_points, seed).cloud;
}

// Builds a cloud from explicit samples with uniform weights (no merging).
inline WeightedPointCloud uniform_cloud(const Matrix& samples) {
  require(samples.rows >= 1, "sample set must be nonempty");
  WeightedPointCloud c;
  c.points = samples;
  c.weights.assign(samples.rows, 1.0 / static_cast<double>(samples.rows));
  return c;
}

}  // namespace aot
