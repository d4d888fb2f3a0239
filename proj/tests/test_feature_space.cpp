#include <gtest/gtest.h>

#include "test_support.hpp"

namespace aot {
namespace {

TEST(Features, CornerPixelOfTwoByTwo) {
  std::vector<double> d(12, 0.0);
  d[0] = 1.0;  // (row 0, col 0) red
  const ImageBuffer img(2, 2, d);
  const auto f = build_augmented_features(img, {}, 1.0, 1.0);
  ASSERT_EQ(f.size(), 4u);
  EXPECT_EQ(f[0].values, (std::vector<double>{1, 0, 0, 0, 0}));
  EXPECT_EQ(f[3].values, (std::vector<double>{0, 0, 0, 1, 1}));
}

TEST(Features, ZeroWeightsLeaveOnlyColor) {
  const auto img = testing::random_image(4, 3, 11);
  GeometryMaps g;
  g.normal_map = encode_normals(4, 3, std::vector<std::array<double, 3>>(12, {0, 0, 1}));
  const auto f = build_augmented_features(img, g, 0.0, 0.0);
  for (std::size_t p = 0; p < f.size(); ++p) {
    ASSERT_EQ(f[p].values.size(), 8u);
    const auto px = img.pixel(p);
    for (int c = 0; c < 3; ++c) EXPECT_EQ(f[p].values[c], px[c]);
    for (std::size_t k = 3; k < 8; ++k) EXPECT_EQ(f[p].values[k], 0.0);
  }
}

TEST(Features, GradientMatchesHandEnumeration) {
  // 3x3 image with color (col/2, row/2, 0.5).
  std::vector<double> d;
  for (int r = 0; r < 3; ++r)
    for (int c = 0; c < 3; ++c) d.insert(d.end(), {c / 2.0, r / 2.0, 0.5});
  const ImageBuffer img(3, 3, d);
  const auto f = build_augmented_features(img, {}, 0.5, 1.0);
  const double expected[9][5] = {
      {0, 0, .5, 0, 0},        {.5, 0, .5, .25, 0},      {1, 0, .5, .5, 0},
      {0, .5, .5, 0, .25},     {.5, .5, .5, .25, .25},   {1, .5, .5, .5, .25},
      {0, 1, .5, 0, .5},       {.5, 1, .5, .25, .5},     {1, 1, .5, .5, .5},
  };
  for (int p = 0; p < 9; ++p) {
    EXPECT_EQ(f[p].row, static_cast<std::size_t>(p / 3));
    EXPECT_EQ(f[p].col, static_cast<std::size_t>(p % 3));
    for (int k = 0; k < 5; ++k) EXPECT_DOUBLE_EQ(f[p].values[k], expected[p][k]) << p << "," << k;
  }
}

TEST(Features, SingleRowUsesZeroCoordinate) {
  const auto img = testing::random_image(3, 1, 2);
  const auto f = build_augmented_features(img, {}, 1.0, 0.0);
  EXPECT_EQ(f[2].values[3], 1.0);
  EXPECT_EQ(f[2].values[4], 0.0);
}

TEST(Features, PositionAndNormalMaps) {
  const auto img = testing::random_image(2, 2, 3);
  GeometryMaps g;
  g.position_map = testing::random_image(2, 2, 4);
  g.normal_map = encode_normals(2, 2, std::vector<std::array<double, 3>>(4, {1, 0, 0}));
  const auto f = build_augmented_features(img, g, 2.0, 3.0);
  ASSERT_EQ(f[1].values.size(), 9u);
  for (int c = 0; c < 3; ++c) EXPECT_DOUBLE_EQ(f[1].values[3 + c], 2.0 * g.position_map->at(0, 1, c));
  EXPECT_DOUBLE_EQ(f[1].values[6], 3.0);
  g.position_map = testing::random_image(3, 2, 4);
  EXPECT_THROW(build_augmented_features(img, g, 1.0, 1.0), Error);
}

TEST(Quantize, MergesDuplicates) {
  const ImageBuffer img(2, 2, {1, 0, 0, 0, 0, 1, 1, 0, 0, 0, 0, 1});
  const auto q = quantize_with_assignment(build_augmented_features(img, {}, 0.0, 0.0), 16, 0);
  ASSERT_EQ(q.cloud.size(), 2u);
  EXPECT_EQ(q.cloud.weights, (std::vector<double>{0.5, 0.5}));
  EXPECT_EQ(q.assignment, (std::vector<std::size_t>{0, 1, 0, 1}));
}

TEST(Quantize, EmpiricalDistributionWhenItFits) {
  const auto img = testing::random_image(5, 4, 8);
  const auto c = quantize_to_cloud(color_only_features(img), 20, 0);
  ASSERT_EQ(c.size(), 20u);
  for (double w : c.weights) EXPECT_DOUBLE_EQ(w, 1.0 / 20.0);
}

TEST(Quantize, Preconditions) {
  EXPECT_THROW(quantize_to_cloud({}, 4, 0), Error);
  const auto f = color_only_features(testing::random_image(2, 2, 1));
  EXPECT_THROW(quantize_to_cloud(f, 0, 0), Error);
}

// Independent k-means: unweighted points, same seeding draw procedure and
// Lloyd rule, written without the library's helpers.
std::vector<std::vector<double>> reference_kmeans(const std::vector<std::vector<double>>& pts, std::size_t k, std::uint64_t seed,
                                                  std::vector<std::size_t>& labels) {
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  auto dist2 = [](const std::vector<double>& a, const std::vector<double>& b) {
    double s = 0;
    for (std::size_t i = 0; i < a.size(); ++i) s += (a[i] - b[i]) * (a[i] - b[i]);
    return s;
  };
  auto draw = [&](const std::vector<double>& w) {
    double total = 0;
    for (double x : w) total += x;
    const double r = unit(rng) * total;
    double acc = 0;
    std::size_t last = 0;
    for (std::size_t i = 0; i < w.size(); ++i) {
      if (w[i] <= 0) continue;
      last = i;
      acc += w[i];
      if (r < acc) return i;
    }
    return last;
  };
  std::vector<std::vector<double>> cent{pts[draw(std::vector<double>(pts.size(), 1.0))]};
  std::vector<double> best(pts.size(), std::numeric_limits<double>::infinity());
  while (cent.size() < k) {
    std::vector<double> score(pts.size());
    for (std::size_t i = 0; i < pts.size(); ++i) score[i] = best[i] = std::min(best[i], dist2(pts[i], cent.back()));
    cent.push_back(pts[draw(score)]);
  }
  labels.assign(pts.size(), 0);
  auto assign = [&] {
    for (std::size_t i = 0; i < pts.size(); ++i) {
      double bd = std::numeric_limits<double>::infinity();
      for (std::size_t c = 0; c < k; ++c)
        if (double dd = dist2(pts[i], cent[c]); dd < bd) {
          bd = dd;
          labels[i] = c;
        }
    }
  };
  for (int it = 0; it < 50; ++it) {
    assign();
    std::vector<std::vector<double>> sum(k, std::vector<double>(pts[0].size(), 0.0));
    std::vector<double> cnt(k, 0.0);
    for (std::size_t i = 0; i < pts.size(); ++i) {
      cnt[labels[i]] += 1.0;
      for (std::size_t j = 0; j < pts[i].size(); ++j) sum[labels[i]][j] += pts[i][j];
    }
    double moved = 0;
    for (std::size_t c = 0; c < k; ++c) {
      if (cnt[c] == 0) continue;
      for (auto& v : sum[c]) v /= cnt[c];
      moved = std::max(moved, std::sqrt(dist2(sum[c], cent[c])));
      cent[c] = sum[c];
    }
    if (moved <= 1e-6) break;
  }
  assign();
  return cent;
}

TEST(Quantize, KMeansMatchesIndependentRun) {
  const auto img = testing::random_image(40, 25, 99);  // 1000 distinct pixels
  const auto features = color_only_features(img);
  const auto q = quantize_with_assignment(features, 16, 1234);

  std::vector<std::vector<double>> pts;
  for (const auto& f : features) pts.push_back(f.values);
  std::vector<std::size_t> labels;
  const auto cent = reference_kmeans(pts, 16, 1234, labels);
  std::vector<double> mass(16, 0.0);
  for (auto l : labels) mass[l] += 1.0 / 1000.0;

  ASSERT_EQ(q.cloud.size(), 16u);
  double total = 0;
  for (std::size_t c = 0; c < 16; ++c) {
    total += q.cloud.weights[c];
    EXPECT_NEAR(q.cloud.weights[c], mass[c], 1e-12);
    for (int k = 0; k < 3; ++k) EXPECT_NEAR(q.cloud.points(c, k), cent[c][k], 1e-12);
  }
  EXPECT_NEAR(total, 1.0, 1e-9);
  EXPECT_EQ(q.assignment, labels);
}

TEST(Quantize, WeightsAndDeterminismProperty) {
  std::mt19937_64 rng(5);
  for (int trial = 0; trial < 10; ++trial) {
    // Few distinct colors so duplicate merging and k-means both get exercised.
    std::vector<double> d;
    const std::size_t w = 3 + rng() % 20, h = 3 + rng() % 20;
    for (std::size_t p = 0; p < w * h * 3; ++p) d.push_back(static_cast<double>(rng() % 6) / 5.0);
    const ImageBuffer img(w, h, d);
    const auto features = build_augmented_features(img, {}, 0.3, 0.0);
    const std::size_t k = 1 + rng() % 40;
    const auto q1 = quantize_with_assignment(features, k, trial);
    const auto q2 = quantize_with_assignment(features, k, trial);
    EXPECT_NO_THROW(q1.cloud.validate());
    EXPECT_LE(q1.cloud.size(), k);
    for (double x : q1.cloud.weights) EXPECT_GE(x, 0.0);
    EXPECT_EQ(q1.cloud.points.data, q2.cloud.points.data);
    EXPECT_EQ(q1.cloud.weights, q2.cloud.weights);
    EXPECT_EQ(q1.assignment, q2.assignment);
    // Mass per point equals the share of pixels assigned to it.
    std::vector<double> share(q1.cloud.size(), 0.0);
    for (auto a : q1.assignment) share[a] += 1.0;
    for (std::size_t c = 0; c < share.size(); ++c)
      EXPECT_NEAR(share[c] / static_cast<double>(features.size()), q1.cloud.weights[c], 1e-12);
  }
}

}  // namespace
}  // namespace aot
