#pragma once

#include <cmath>
#include <cstdint>
#include <random>
#include <vector>

#include "aot/core.hpp"
#include "aot/image_io.hpp"
#include "aot/neural.hpp"

namespace aot {

struct PatchRect {
  std::size_t row = 0;
  std::size_t col = 0;
  std::size_t height = 0;
  std::size_t width = 0;
};

// Blend weights in [0,1]; 1 selects the real (target) image.
struct MixMask {
  Plane values;
  std::uint64_t seed = 0;
  std::vector<PatchRect> patches;

  std::size_t width() const { return values.width; }
  std::size_t height() const { return values.height; }

  static MixMask constant(std::size_t height, std::size_t width, double v) {
    require(v >= 0.0 && v <= 1.0, "mask value outside [0,1]");
    return MixMask{Plane(width, height, v), 0, {}};
  }
};

// Axis-aligned rectangles with side fractions drawn uniformly from
// [lo, hi] of the frame, set to 1 over an all-zero mask. With soft_edge > 0 the
// value ramps linearly from the rectangle border inwards over soft_edge pixels.
// Overlapping patches combine by maximum.
inline MixMask generate_mix_mask(std::size_t height, std::size_t width, std::size_t num_patches, double lo, double hi,
                                 std::size_t soft_edge, std::uint64_t seed) {
  require(height > 0 && width > 0, "mask dimensions must be positive");
  require(lo > 0.0 && hi <= 1.0 && lo <= hi, "patch fraction range must satisfy 0 < lo <= hi <= 1");
  MixMask mask{Plane(width, height, 0.0), seed, {}};
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> frac(lo, hi);
  auto side = [](double f, std::size_t full) {
    const auto s = static_cast<std::size_t>(std::lround(f * static_cast<double>(full)));
    return std::clamp<std::size_t>(s, 1, full);
  };
  for (std::size_t k = 0; k < num_patches; ++k) {
    PatchRect r;
    r.height = side(frac(rng), height);
    r.width = side(frac(rng), width);
    r.row = std::uniform_int_distribution<std::size_t>(0, height - r.height)(rng);
    r.col = std::uniform_int_distribution<std::size_t>(0, width - r.width)(rng);
    for (std::size_t y = r.row; y < r.row + r.height; ++y)
      for (std::size_t x = r.col; x < r.col + r.width; ++x) {
        double v = 1.0;
        if (soft_edge > 0) {
          const std::size_t e = std::min({y - r.row, r.row + r.height - 1 - y, x - r.col, r.col + r.width - 1 - x});
          v = std::min(1.0, static_cast<double>(e + 1) / static_cast<double>(soft_edge + 1));
        }
        mask.values(y, x) = std::max(mask.values(y, x), v);
      }
    mask.patches.push_back(r);
  }
  return mask;
}

// (1 - M) * generated + M * real, per pixel and channel. M = 0, M = 1 and equal
// inputs reproduce the corresponding input exactly.
inline ImageBuffer mix_images(const ImageBuffer& generated, const ImageBuffer& real, const MixMask& mask) {
  require(generated.same_shape(real), "mix_images: generated and real images differ in size");
  require(mask.width() == generated.width() && mask.height() == generated.height(), "mix_images: mask size differs from images");
  std::vector<double> out(generated.data().size());
  for (std::size_t p = 0; p < generated.pixel_count(); ++p) {
    const double m = mask.values.data[p];
    for (std::size_t c = 0; c < 3; ++c) {
      const double y = generated.data()[p * 3 + c], x = real.data()[p * 3 + c];
      double v;
      if (m == 0.0 || x == y)
        v = y;
      else if (m == 1.0)
        v = x;
      else
        v = (1.0 - m) * y + m * x;
      out[p * 3 + c] = v;
    }
  }
  return clamp_to_image(generated.width(), generated.height(), std::move(out));
}

struct MsdTerms {
  double real_term = 0.0;       // mean(M * score)
  double fake_term = 0.0;       // mean((1 - M) * score)
  double critic_loss = 0.0;     // fake - real, minimized by the critic
  double generator_loss = 0.0;  // -fake
};

inline MsdTerms msd_loss(const Plane& scores, const MixMask& mask) {
  require(scores.width == mask.width() && scores.height == mask.height(), "msd_loss: score map and mask differ in size");
  require(!scores.data.empty(), "msd_loss: empty score map");
  double real = 0.0, fake = 0.0;
  for (std::size_t i = 0; i < scores.data.size(); ++i) {
    const double m = mask.values.data[i], s = scores.data[i];
    real += m * s;
    fake += (1.0 - m) * s;
  }
  const double n = static_cast<double>(scores.data.size());
  MsdTerms t;
  t.real_term = real / n;
  t.fake_term = fake / n;
  t.critic_loss = t.fake_term - t.real_term;
  t.generator_loss = -t.fake_term;
  return t;
}

// Clipped [3*p*p -> hidden -> 1] critic for toy_patch_critic.
inline DenseNetwork make_patch_critic(std::size_t patch_size, std::size_t hidden, double clip_bound, std::uint64_t seed) {
  require(patch_size >= 1, "patch_size must be positive");
  return DenseNetwork::create({3 * patch_size * patch_size, hidden, 1}, clip_bound, seed);
}

// Scores each non-overlapping patch (edge-replicated past the border) with the
// critic and broadcasts the score to the patch's pixels.
inline Plane toy_patch_critic(const ImageBuffer& image, const DenseNetwork& critic, std::size_t patch_size) {
  require(patch_size >= 1, "patch_size must be positive");
  require(critic.input_dim() == 3 * patch_size * patch_size && critic.output_dim() == 1,
          "patch critic must map 3*patch_size^2 inputs to one score");
  const std::size_t w = image.width(), h = image.height();
  Plane scores(w, h);
  std::vector<double> patch(3 * patch_size * patch_size);
  for (std::size_t py = 0; py < h; py += patch_size)
    for (std::size_t px = 0; px < w; px += patch_size) {
      std::size_t k = 0;
      for (std::size_t dy = 0; dy < patch_size; ++dy)
        for (std::size_t dx = 0; dx < patch_size; ++dx) {
          const std::size_t y = std::min(py + dy, h - 1), x = std::min(px + dx, w - 1);
          for (int c = 0; c < 3; ++c) patch[k++] = image.at(y, x, c);
        }
      const double s = network_forward(critic, patch)[0];
      for (std::size_t y = py; y < std::min(py + patch_size, h); ++y)
        for (std::size_t x = px; x < std::min(px + patch_size, w); ++x) scores(y, x) = s;
    }
  return scores;
}

// Mean absolute per-component difference (the appearance and reconstruction terms).
inline double l1_loss(const ImageBuffer& a, const ImageBuffer& b) {
  require(a.same_shape(b), "l1_loss: dimension mismatch");
  double s = 0.0;
  for (std::size_t i = 0; i < a.data().size(); ++i) s += std::abs(a.data()[i] - b.data()[i]);
  return s / static_cast<double>(a.data().size());
}

struct LossWeights {
  double content = 1.0;
  double appearance = 1.0;
  double recon = 1.0;
  double msd = 1.0;

  void validate() const {
    for (double w : {content, appearance, recon, msd}) require(std::isfinite(w) && w >= 0.0, "loss weights must be finite and nonnegative");
  }
};

inline double total_loss(double content, double appearance, double recon, double msd_generator, const LossWeights& w) {
  w.validate();
  return w.content * content + w.appearance * appearance + w.recon * recon + w.msd * msd_generator;
}

}  // namespace aot
