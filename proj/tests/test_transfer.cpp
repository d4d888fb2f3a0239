#include <gtest/gtest.h>

#include "test_support.hpp"

namespace aot {
namespace {

TransportPlan plan_from(Matrix coupling) {
  TransportPlan p;
  p.coupling = std::move(coupling);
  return p;
}

TEST(BarycentricMap, PermutationPlanPicksMatchedPoint) {
  std::mt19937_64 rng(1);
  const auto s = testing::random_cloud(4, 3, rng), t = testing::random_cloud(4, 3, rng);
  const std::size_t perm[4] = {2, 0, 3, 1};
  Matrix c(4, 4);
  for (std::size_t i = 0; i < 4; ++i) c(i, perm[i]) = 0.25;
  const auto m = barycentric_map(plan_from(c), s, t);
  for (std::size_t i = 0; i < 4; ++i)
    for (std::size_t k = 0; k < 3; ++k) EXPECT_EQ(m(i, k), t.points(perm[i], k));
}

TEST(BarycentricMap, ProductCouplingGivesTargetMean) {
  std::mt19937_64 rng(2);
  const auto s = testing::random_cloud(3, 2, rng), t = testing::random_cloud(5, 2, rng);
  Matrix c(3, 5);
  for (std::size_t i = 0; i < 3; ++i)
    for (std::size_t j = 0; j < 5; ++j) c(i, j) = s.weights[i] * t.weights[j];
  const auto m = barycentric_map(plan_from(c), s, t);
  for (std::size_t k = 0; k < 2; ++k) {
    double mean = 0;
    for (std::size_t j = 0; j < 5; ++j) mean += t.weights[j] * t.points(j, k);
    for (std::size_t i = 0; i < 3; ++i) EXPECT_NEAR(m(i, k), mean, 1e-14);
  }
}

TEST(BarycentricMap, MatchesRowNormalizedProduct) {
  std::mt19937_64 rng(3);
  std::uniform_real_distribution<double> u(0, 1);
  const auto s = testing::random_cloud(6, 4, rng), t = testing::random_cloud(7, 4, rng);
  Matrix c(6, 7);
  for (auto& v : c.data) v = u(rng);
  for (std::size_t j = 0; j < 7; ++j) c(5, j) = 0.0;  // empty row keeps its point
  const auto m = barycentric_map(plan_from(c), s, t);
  for (std::size_t i = 0; i < 5; ++i) {
    double row = 0;
    for (std::size_t j = 0; j < 7; ++j) row += c(i, j);
    for (std::size_t k = 0; k < 4; ++k) {
      double acc = 0;
      for (std::size_t j = 0; j < 7; ++j) acc += c(i, j) / row * t.points(j, k);
      EXPECT_NEAR(m(i, k), acc, 1e-14);
    }
  }
  for (std::size_t k = 0; k < 4; ++k) EXPECT_EQ(m(5, k), s.points(5, k));
  EXPECT_THROW(barycentric_map(plan_from(Matrix(6, 3)), s, t), Error);
}

TEST(ApplyMapping, IdentityMapIsExact) {
  const auto img = testing::random_image(9, 7, 4);
  const auto q = quantize_with_assignment(color_only_features(img), 8, 0);
  for (std::size_t r : {0u, 2u}) EXPECT_EQ(apply_mapping(img, q.cloud, q.cloud.points, q.assignment, r), img);
}

TEST(ApplyMapping, ConstantShift) {
  const auto img = ImageBuffer::filled(5, 4, {0.3, 0.4, 0.5});
  const auto q = quantize_with_assignment(color_only_features(img), 4, 0);
  Matrix mapped = q.cloud.points;
  for (auto& v : mapped.data) v += 0.2;
  for (std::size_t r : {0u, 3u}) {
    const auto out = apply_mapping(img, q.cloud, mapped, q.assignment, r);
    for (std::size_t p = 0; p < out.pixel_count(); ++p) {
      EXPECT_NEAR(out.at(p / 5, p % 5, 0), 0.5, 1e-15);
      EXPECT_NEAR(out.at(p / 5, p % 5, 2), 0.7, 1e-15);
    }
  }
}

TEST(ApplyMapping, ResidualPreservedPerCluster) {
  const auto img = testing::random_image(12, 10, 5, 0.3, 0.7);
  const auto q = quantize_with_assignment(color_only_features(img), 6, 1);
  std::mt19937_64 rng(6);
  std::uniform_real_distribution<double> shift(-0.1, 0.1);
  Matrix mapped = q.cloud.points;
  for (auto& v : mapped.data) v += shift(rng);
  const auto out = apply_mapping(img, q.cloud, mapped, q.assignment, 0);
  for (std::size_t p = 0; p < img.pixel_count(); ++p) {
    const std::size_t c = q.assignment[p];
    for (int k = 0; k < 3; ++k)
      EXPECT_NEAR(out.data()[p * 3 + k] - img.data()[p * 3 + k], mapped(c, k) - q.cloud.points(c, k), 1e-14);
  }
}

TEST(ApplyMapping, ClampsAndChecksAssignment) {
  const auto img = ImageBuffer::filled(2, 2, {0.9, 0.1, 0.5});
  const auto q = quantize_with_assignment(color_only_features(img), 4, 0);
  Matrix mapped = q.cloud.points;
  mapped(0, 0) = 1.5;
  mapped(0, 1) = -0.5;
  const auto out = apply_mapping(img, q.cloud, mapped, q.assignment, 1);
  for (double v : out.data()) {
    EXPECT_GE(v, 0.0);
    EXPECT_LE(v, 1.0);
  }
  EXPECT_THROW(apply_mapping(img, q.cloud, mapped, {0, 0, 0}, 0), Error);
}

TransferOptions quick(TransferMethod m) {
  TransferOptions o;
  o.method = m;
  o.neural.total_iterations = 300;
  o.neural.clip_bound = unit_slope_clip_bound(o.neural.hidden_width);
  return o;
}

TEST(Transfer, GrayToGray) {
  const auto src = ImageBuffer::filled(16, 12, {0.25, 0.25, 0.25});
  const auto tgt = ImageBuffer::filled(10, 10, {0.75, 0.75, 0.75});
  for (auto m : {TransferMethod::sinkhorn, TransferMethod::exact}) {
    const auto r = transfer_appearance(src, tgt, quick(m));
    for (double v : r.image.data()) EXPECT_NEAR(v, 0.75, 1.0 / 255.0) << to_string(m);
    EXPECT_NEAR(r.report.histogram_distance_before, 0.75, 1e-12);
    EXPECT_NEAR(r.report.histogram_distance_after, 0.0, 1e-4);
  }
}

TEST(Transfer, IdentityPair) {
  const auto img = testing::random_image(20, 16, 7);
  for (auto m : {TransferMethod::sinkhorn, TransferMethod::exact, TransferMethod::neural}) {
    const auto r = transfer_appearance(img, img, quick(m));
    double diff = 0;
    for (std::size_t i = 0; i < img.data().size(); ++i) diff += std::abs(r.image.data()[i] - img.data()[i]);
    diff /= static_cast<double>(img.data().size());
    if (m == TransferMethod::exact) EXPECT_LE(diff, 2.0 / 255.0);
    else EXPECT_LE(diff, 0.05) << to_string(m);
  }
}

// Two-tone image: `left` color in the left half, `right` in the right half,
// with small per-pixel noise.
ImageBuffer halves(std::size_t w, std::size_t h, std::array<double, 3> left, std::array<double, 3> right, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> n(-0.03, 0.03);
  std::vector<double> d;
  for (std::size_t y = 0; y < h; ++y)
    for (std::size_t x = 0; x < w; ++x) {
      const auto& c = x < w / 2 ? left : right;
      for (int k = 0; k < 3; ++k) d.push_back(c[k] + n(rng));
    }
  return ImageBuffer(w, h, std::move(d));
}

TEST(Transfer, HistogramDistanceDoesNotGrow) {
  for (std::uint64_t seed = 0; seed < 3; ++seed) {
    const auto src = testing::random_image(16, 16, seed, 0.0, 0.5);
    const auto tgt = testing::random_image(14, 18, seed + 10, 0.4, 1.0);
    for (auto m : {TransferMethod::sinkhorn, TransferMethod::exact}) {
      auto o = quick(m);
      o.seed = seed;
      const auto r = transfer_appearance(src, tgt, o);
      const double before = histogram_w_distance(src, tgt, 64, seed), after = histogram_w_distance(r.image, tgt, 64, seed);
      EXPECT_EQ(r.report.histogram_distance_before, before);
      EXPECT_EQ(r.report.histogram_distance_after, after);
      EXPECT_LE(after, before) << to_string(m) << " seed " << seed;
    }
  }
}

TEST(Transfer, PositionWeightKeepsMassInPlace) {
  // Reddish and bluish halves, swapped between source and target.
  const std::array<double, 3> red{0.8, 0.3, 0.3}, blue{0.3, 0.3, 0.8};
  const auto src = halves(16, 12, red, blue, 1), tgt = halves(16, 12, blue, red, 2);
  auto left_mean_blue_minus_red = [&](const TransferResult& r) {
    double s = 0;
    std::size_t n = 0;
    for (std::size_t p = 0; p < src.pixel_count(); ++p) {
      if (p % 16 >= 6) continue;  // columns near the seam may swap at any finite weight
      const std::size_t c = r.source.assignment[p];
      s += r.mapped_points(c, 2) - r.mapped_points(c, 0);
      ++n;
    }
    return s / static_cast<double>(n);
  };
  for (auto m : {TransferMethod::sinkhorn, TransferMethod::exact}) {
    auto o = quick(m);
    // A seam strip of normalized width d swaps only while (8 d)^2 < 0.5, the color cost.
    o.position_weight = 8.0;
    const auto geo = transfer_appearance(src, tgt, o);
    EXPECT_GT(left_mean_blue_minus_red(geo), 0.4) << to_string(m);
    o.position_weight = 0.0;
    const auto blind = transfer_appearance(src, tgt, o);
    EXPECT_LT(left_mean_blue_minus_red(blind), -0.4) << to_string(m);
  }
}

TEST(Transfer, GeometryMapsEnterTheFeatures) {
  const auto src = testing::random_image(8, 8, 3), tgt = testing::random_image(8, 8, 4);
  GeometryMaps gs, gt;
  gs.normal_map = encode_normals(8, 8, std::vector<std::array<double, 3>>(64, {0, 0, 1}));
  gt.normal_map = encode_normals(8, 8, std::vector<std::array<double, 3>>(64, {1, 0, 0}));
  const auto r = transfer_appearance(src, tgt, gs, gt, quick(TransferMethod::exact));
  EXPECT_EQ(r.source.cloud.dim(), 8u);
  EXPECT_THROW(transfer_appearance(src, tgt, gs, GeometryMaps{}, quick(TransferMethod::exact)), Error);
}

TEST(Transfer, DeterministicUnderSeed) {
  const auto src = testing::random_image(12, 12, 8), tgt = testing::random_image(12, 12, 9);
  for (auto m : {TransferMethod::sinkhorn, TransferMethod::exact, TransferMethod::neural}) {
    auto o = quick(m);
    o.seed = 17;
    const auto a = transfer_appearance(src, tgt, o), b = transfer_appearance(src, tgt, o);
    EXPECT_EQ(a.image, b.image) << to_string(m);
    auto ja = a.report.to_json(), jb = b.report.to_json();
    ja.erase("seconds");
    jb.erase("seconds");
    EXPECT_EQ(ja, jb);
  }
}

TEST(Transfer, ReportFields) {
  const auto img = testing::random_image(8, 8, 10);
  const auto j = transfer_appearance(img, img, quick(TransferMethod::neural)).report.to_json();
  for (const char* k : {"method", "cost", "marginal_error", "seconds", "histogram_distance_before", "histogram_distance_after"})
    EXPECT_TRUE(j.contains(k)) << k;
  EXPECT_TRUE(j["marginal_error"].is_null());
  EXPECT_EQ(j["method"], "neural");
}

TEST(TransferOptions, Validation) {
  EXPECT_EQ(quick(TransferMethod::exact).resolved_max_points(), 64u);
  EXPECT_EQ(quick(TransferMethod::sinkhorn).resolved_max_points(), 256u);
  auto o = quick(TransferMethod::exact);
  o.max_points = 100;
  EXPECT_THROW(o.validate(), Error);
  o = quick(TransferMethod::sinkhorn);
  o.epsilon = 0;
  EXPECT_THROW(o.validate(), Error);
  o = quick(TransferMethod::sinkhorn);
  o.position_weight = -1;
  EXPECT_THROW(o.validate(), Error);
  EXPECT_THROW(parse_method("greedy"), Error);
  EXPECT_EQ(parse_method("neural"), TransferMethod::neural);
}

}  // namespace
}  // namespace aot
