#pragma once

#include <array>
#include <cmath>
#include <cstdint>
#include <random>
#include <vector>

#include "json.hpp"

#include "aot/core.hpp"
#include "aot/feature_space.hpp"
#include "aot/image_io.hpp"
#include "aot/ot_solvers.hpp"

namespace aot {

// BT.601 luma.
inline Plane luma(const ImageBuffer& img) {
  Plane p(img.width(), img.height());
  for (std::size_t i = 0; i < img.pixel_count(); ++i) {
    const auto px = img.pixel(i);
    p.data[i] = 0.299 * px[0] + 0.587 * px[1] + 0.114 * px[2];
  }
  return p;
}

struct SsimParams {
  std::size_t window = 8;
  double c1 = 0.01 * 0.01;
  double c2 = 0.03 * 0.03;
};

// Mean local SSIM over all window positions (stride 1).
inline double ssim(const Plane& a, const Plane& b, const SsimParams& prm = {}) {
  require(a.width == b.width && a.height == b.height, "ssim: dimension mismatch (" + std::to_string(a.width) + "x" +
                                                          std::to_string(a.height) + " vs " + std::to_string(b.width) + "x" +
                                                          std::to_string(b.height) + ")");
  require(prm.window >= 1 && a.width >= prm.window && a.height >= prm.window, "ssim: image smaller than the window");
  const std::size_t win = prm.window;
  const double n = static_cast<double>(win * win);
  double total = 0.0;
  std::size_t count = 0;
  for (std::size_t y = 0; y + win <= a.height; ++y) {
    for (std::size_t x = 0; x + win <= a.width; ++x) {
      double sa = 0, sb = 0, saa = 0, sbb = 0, sab = 0;
      for (std::size_t dy = 0; dy < win; ++dy)
        for (std::size_t dx = 0; dx < win; ++dx) {
          const double va = a(y + dy, x + dx), vb = b(y + dy, x + dx);
          sa += va;
          sb += vb;
          saa += va * va;
          sbb += vb * vb;
          sab += va * vb;
        }
      const double ma = sa / n, mb = sb / n;
      const double va = saa / n - ma * ma, vb = sbb / n - mb * mb, cov = sab / n - ma * mb;
      total += ((2.0 * ma * mb + prm.c1) * (2.0 * cov + prm.c2)) / ((ma * ma + mb * mb + prm.c1) * (va + vb + prm.c2));
      ++count;
    }
  }
  return total / static_cast<double>(count);
}

inline double ssim(const ImageBuffer& a, const ImageBuffer& b, const SsimParams& prm = {}) {
  require(a.same_shape(b), "ssim: dimension mismatch");
  return ssim(luma(a), luma(b), prm);
}

namespace detail {

// 3x3 correlation with edge replication.
inline Plane filter3x3(const Plane& in, const std::array<double, 9>& k) {
  Plane out(in.width, in.height);
  const auto h = static_cast<long>(in.height), w = static_cast<long>(in.width);
  for (long y = 0; y < h; ++y)
    for (long x = 0; x < w; ++x) {
      // Row totals first, so mirrored kernels cancel exactly on flat regions.
      double s = 0.0;
      for (long dy = -1; dy <= 1; ++dy) {
        const long yy = std::clamp(y + dy, 0L, h - 1);
        double row = 0.0;
        for (long dx = -1; dx <= 1; ++dx) row += k[(dy + 1) * 3 + (dx + 1)] * in(yy, std::clamp(x + dx, 0L, w - 1));
        s += row;
      }
      out(y, x) = s;
    }
  return out;
}

inline Plane downsample2(const Plane& in) {
  Plane out(in.width / 2, in.height / 2);
  for (std::size_t y = 0; y < out.height; ++y)
    for (std::size_t x = 0; x < out.width; ++x)
      out(y, x) = 0.25 * (in(2 * y, 2 * x) + in(2 * y, 2 * x + 1) + in(2 * y + 1, 2 * x) + in(2 * y + 1, 2 * x + 1));
  return out;
}

}  // namespace detail

inline constexpr std::array<double, 9> kSobelX = {-1, 0, 1, -2, 0, 2, -1, 0, 1};
inline constexpr std::array<double, 9> kSobelY = {-1, -2, -1, 0, 0, 0, 1, 2, 1};

// Sobel gradient magnitude of luma, divided by its maximum.
inline Plane edge_map(const ImageBuffer& image) {
  const Plane l = luma(image);
  const Plane gx = detail::filter3x3(l, kSobelX), gy = detail::filter3x3(l, kSobelY);
  Plane mag(l.width, l.height);
  double mx = 0.0;
  for (std::size_t i = 0; i < mag.data.size(); ++i) {
    mag.data[i] = std::hypot(gx.data[i], gy.data[i]);
    mx = std::max(mx, mag.data[i]);
  }
  if (mx > 0.0)
    for (auto& v : mag.data) v /= mx;
  return mag;
}

// SSIM between edge maps. The usual pairing is (result, source image).
inline double ssim_edge(const ImageBuffer& a, const ImageBuffer& b, const SsimParams& prm = {}) {
  require(a.same_shape(b), "ssim_edge: dimension mismatch");
  return ssim(edge_map(a), edge_map(b), prm);
}

// Fixed random 3x3 kernels applied to luma at full and half resolution.
class FeatureBank {
 public:
  static constexpr std::size_t kDefaultKernels = 16;

  explicit FeatureBank(std::uint64_t seed = 0, std::size_t kernels = kDefaultKernels) : seed_(seed) {
    require(kernels >= 1, "feature bank needs at least one kernel");
    std::mt19937_64 rng(seed);
    std::normal_distribution<double> dist(0.0, 1.0);
    kernels_.resize(kernels);
    for (auto& k : kernels_) {
      double norm = 0.0;
      for (auto& v : k) {
        v = dist(rng);
        norm += v * v;
      }
      norm = std::sqrt(norm);
      for (auto& v : k) v /= norm;
    }
  }

  std::size_t size() const { return kernels_.size(); }
  std::uint64_t seed() const { return seed_; }
  const std::array<double, 9>& kernel(std::size_t i) const { return kernels_[i]; }

  // responses[scale][kernel] as planes.
  std::vector<std::vector<Plane>> respond(const ImageBuffer& image) const {
    std::vector<Plane> levels{luma(image)};
    if (levels[0].width >= 2 && levels[0].height >= 2) levels.push_back(detail::downsample2(levels[0]));
    std::vector<std::vector<Plane>> out;
    for (const auto& lvl : levels) {
      std::vector<Plane> r;
      for (const auto& k : kernels_) r.push_back(detail::filter3x3(lvl, k));
      out.push_back(std::move(r));
    }
    return out;
  }

 private:
  std::uint64_t seed_;
  std::vector<std::array<double, 9>> kernels_;
};

// G = R^T R / P for the K response maps of one scale.
inline Matrix gram_matrix(const std::vector<Plane>& responses) {
  const std::size_t k = responses.size();
  const std::size_t p = responses.front().data.size();
  Matrix g(k, k);
  for (std::size_t i = 0; i < k; ++i)
    for (std::size_t j = i; j < k; ++j) {
      double s = 0.0;
      for (std::size_t q = 0; q < p; ++q) s += responses[i].data[q] * responses[j].data[q];
      g(i, j) = g(j, i) = s / static_cast<double>(p);
    }
  return g;
}

// Squared Frobenius distance between Gram matrices, averaged over scales.
inline double gram_loss(const ImageBuffer& a, const ImageBuffer& b, const FeatureBank& bank) {
  require(a.same_shape(b), "gram_loss: dimension mismatch");
  const auto ra = bank.respond(a), rb = bank.respond(b);
  double total = 0.0;
  for (std::size_t s = 0; s < ra.size(); ++s) {
    const Matrix ga = gram_matrix(ra[s]), gb = gram_matrix(rb[s]);
    double f = 0.0;
    for (std::size_t q = 0; q < ga.data.size(); ++q) {
      const double t = ga.data[q] - gb.data[q];
      f += t * t;
    }
    total += f;
  }
  return total / static_cast<double>(ra.size());
}

// Mean absolute difference of bank responses, averaged over scales.
inline double content_loss(const ImageBuffer& a, const ImageBuffer& b, const FeatureBank& bank) {
  require(a.same_shape(b), "content_loss: dimension mismatch");
  const auto ra = bank.respond(a), rb = bank.respond(b);
  double total = 0.0;
  for (std::size_t s = 0; s < ra.size(); ++s) {
    double acc = 0.0;
    std::size_t n = 0;
    for (std::size_t k = 0; k < ra[s].size(); ++k)
      for (std::size_t q = 0; q < ra[s][k].data.size(); ++q) {
        acc += std::abs(ra[s][k].data[q] - rb[s][k].data[q]);
        ++n;
      }
    total += acc / static_cast<double>(n);
  }
  return total / static_cast<double>(ra.size());
}

inline constexpr std::size_t kHistogramMaxPoints = 64;

// Exact squared-Euclidean OT cost between color clouds of at most 64 points.
inline double histogram_w_distance(const ImageBuffer& a, const ImageBuffer& b, std::size_t max_points = kHistogramMaxPoints,
                                   std::uint64_t seed = 0) {
  require(max_points >= 1 && max_points <= kHistogramMaxPoints, "histogram_w_distance: max_points must be in [1, 64]");
  const auto ca = quantize_to_cloud(color_only_features(a), max_points, seed);
  const auto cb = quantize_to_cloud(color_only_features(b), max_points, seed);
  return exact_ot_cost(ca, cb, CostKind::squared_euclidean);
}

struct MetricReport {
  double ssim_whole = 0.0;
  double ssim_edge = 0.0;
  double gram_loss = 0.0;
  double content_loss = 0.0;
  double histogram_w = 0.0;

  nlohmann::json to_json() const {
    return {{"ssim_whole", ssim_whole},
            {"ssim_edge", ssim_edge},
            {"gram_loss", gram_loss},
            {"content_loss", content_loss},
            {"histogram_w", histogram_w}};
  }
};

// ssim_whole, gram, content and histogram terms compare `result` with
// `reference`; ssim_edge compares `result` with `edge_reference`.
inline MetricReport compute_metrics(const ImageBuffer& result, const ImageBuffer& reference, const ImageBuffer& edge_reference,
                                    const FeatureBank& bank = FeatureBank{}) {
  MetricReport r;
  r.ssim_whole = ssim(result, reference);
  r.ssim_edge = ssim_edge(result, edge_reference);
  r.gram_loss = gram_loss(result, reference, bank);
  r.content_loss = content_loss(result, reference, bank);
  r.histogram_w = histogram_w_distance(result, reference);
  return r;
}

}  // namespace aot
