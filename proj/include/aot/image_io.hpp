#pragma once

#include <png.h>

#include <algorithm>
#include <array>
#include <cctype>
#include <cmath>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <iterator>
#include <optional>
#include <string>
#include <vector>

#include "aot/core.hpp"

namespace aot {

// H x W x 3 color image, components in [0,1], row-major RGB triples.
class ImageBuffer {
 public:
  ImageBuffer() = default;

  ImageBuffer(std::size_t width, std::size_t height, std::vector<double> data)
      : width_(width), height_(height), data_(std::move(data)) {
    require(width_ > 0 && height_ > 0, "image dimensions must be positive");
    require(data_.size() == width_ * height_ * 3, "image data length must equal width*height*3");
    for (double v : data_)
      require(std::isfinite(v) && v >= 0.0 && v <= 1.0, "image component outside [0,1]");
  }

  static ImageBuffer filled(std::size_t width, std::size_t height, std::array<double, 3> rgb) {
    std::vector<double> d(width * height * 3);
    for (std::size_t p = 0; p < width * height; ++p)
      for (int c = 0; c < 3; ++c) d[p * 3 + c] = rgb[c];
    return ImageBuffer(width, height, std::move(d));
  }

  std::size_t width() const { return width_; }
  std::size_t height() const { return height_; }
  std::size_t pixel_count() const { return width_ * height_; }
  bool empty() const { return data_.empty(); }

  double at(std::size_t row, std::size_t col, int ch) const { return data_[(row * width_ + col) * 3 + ch]; }
  std::array<double, 3> pixel(std::size_t index) const {
    return {data_[index * 3], data_[index * 3 + 1], data_[index * 3 + 2]};
  }
  const std::vector<double>& data() const { return data_; }

  bool same_shape(const ImageBuffer& o) const { return width_ == o.width_ && height_ == o.height_; }

  friend bool operator==(const ImageBuffer& a, const ImageBuffer& b) {
    return a.width_ == b.width_ && a.height_ == b.height_ && a.data_ == b.data_;
  }

 private:
  std::size_t width_ = 0;
  std::size_t height_ = 0;
  std::vector<double> data_;
};

// Single-channel real-valued map (edge maps, masks, score maps).
struct Plane {
  std::size_t width = 0;
  std::size_t height = 0;
  std::vector<double> data;

  Plane() = default;
  Plane(std::size_t w, std::size_t h, double fill = 0.0) : width(w), height(h), data(w * h, fill) {}

  double& operator()(std::size_t row, std::size_t col) { return data[row * width + col]; }
  double operator()(std::size_t row, std::size_t col) const { return data[row * width + col]; }
};

struct GeometryMaps {
  std::optional<ImageBuffer> position_map;
  std::optional<ImageBuffer> normal_map;  // unit normals stored as (n+1)/2
};

inline constexpr double kNormalLengthTolerance = 0.05;

// Decodes (n+1)/2 normal encoding to unit vectors.
inline std::vector<std::array<double, 3>> decode_normals(const ImageBuffer& normal_map) {
  std::vector<std::array<double, 3>> out(normal_map.pixel_count());
  for (std::size_t p = 0; p < out.size(); ++p) {
    const auto enc = normal_map.pixel(p);
    std::array<double, 3> n{2.0 * enc[0] - 1.0, 2.0 * enc[1] - 1.0, 2.0 * enc[2] - 1.0};
    const double len = std::sqrt(n[0] * n[0] + n[1] * n[1] + n[2] * n[2]);
    if (std::abs(len - 1.0) > kNormalLengthTolerance)
      fail(ErrorKind::invalid_argument, "normal map pixel " + std::to_string(p) + " does not decode to a unit normal (length " +
                                            std::to_string(len) + ")");
    for (auto& c : n) c /= len;
    out[p] = n;
  }
  return out;
}

inline ImageBuffer encode_normals(std::size_t width, std::size_t height, const std::vector<std::array<double, 3>>& normals) {
  require(normals.size() == width * height, "normal count must equal pixel count");
  std::vector<double> d(normals.size() * 3);
  for (std::size_t p = 0; p < normals.size(); ++p)
    for (int c = 0; c < 3; ++c) d[p * 3 + c] = std::clamp((normals[p][c] + 1.0) * 0.5, 0.0, 1.0);
  return ImageBuffer(width, height, std::move(d));
}

inline void validate_geometry(const ImageBuffer& image, const GeometryMaps& geom) {
  if (geom.position_map && !geom.position_map->same_shape(image))
    fail(ErrorKind::invalid_argument, "position map dimensions differ from image");
  if (geom.normal_map) {
    if (!geom.normal_map->same_shape(image)) fail(ErrorKind::invalid_argument, "normal map dimensions differ from image");
    decode_normals(*geom.normal_map);
  }
}

namespace detail {

inline std::string lower_extension(const std::filesystem::path& path) {
  std::string ext = path.extension().string();
  std::transform(ext.begin(), ext.end(), ext.begin(), [](unsigned char c) { return static_cast<char>(std::tolower(c)); });
  return ext;
}

inline std::vector<unsigned char> read_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) fail(ErrorKind::io, "cannot open " + path.string());
  std::vector<unsigned char> bytes((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
  if (in.bad()) fail(ErrorKind::io, "read error on " + path.string());
  return bytes;
}

inline ImageBuffer from_bytes(std::size_t w, std::size_t h, const unsigned char* rgb, std::size_t stride_channels) {
  std::vector<double> d(w * h * 3);
  for (std::size_t p = 0; p < w * h; ++p)
    for (int c = 0; c < 3; ++c) d[p * 3 + c] = rgb[p * stride_channels + c] / 255.0;
  return ImageBuffer(w, h, std::move(d));
}

inline ImageBuffer decode_ppm(const std::vector<unsigned char>& bytes, const std::string& name) {
  std::size_t pos = 2;
  auto next_token = [&]() -> long {
    for (;;) {
      while (pos < bytes.size() && std::isspace(bytes[pos])) ++pos;
      if (pos < bytes.size() && bytes[pos] == '#') {
        while (pos < bytes.size() && bytes[pos] != '\n') ++pos;
        continue;
      }
      break;
    }
    if (pos >= bytes.size() || !std::isdigit(bytes[pos])) fail(ErrorKind::io, "malformed PPM header in " + name);
    long v = 0;
    while (pos < bytes.size() && std::isdigit(bytes[pos])) {
      v = v * 10 + (bytes[pos++] - '0');
      if (v > (1L << 24)) fail(ErrorKind::io, "PPM header value too large in " + name);
    }
    return v;
  };
  const long w = next_token(), h = next_token(), maxval = next_token();
  if (maxval != 255) fail(ErrorKind::io, "only PPM maxval 255 is supported: " + name);
  if (w == 0 || h == 0) fail(ErrorKind::io, "zero-dimension image: " + name);
  ++pos;  // single whitespace after maxval
  const std::size_t need = static_cast<std::size_t>(w) * static_cast<std::size_t>(h) * 3;
  if (bytes.size() < pos + need) fail(ErrorKind::io, "truncated PPM data in " + name);
  return from_bytes(w, h, bytes.data() + pos, 3);
}

inline ImageBuffer decode_png(const std::vector<unsigned char>& bytes, const std::string& name) {
  png_image img{};
  img.version = PNG_IMAGE_VERSION;
  if (!png_image_begin_read_from_memory(&img, bytes.data(), bytes.size()))
    fail(ErrorKind::io, "PNG decode failed for " + name + ": " + img.message);
  if (img.width == 0 || img.height == 0) {
    png_image_free(&img);
    fail(ErrorKind::io, "zero-dimension image: " + name);
  }
  // Read with alpha and discard it so color values are never composited.
  img.format = PNG_FORMAT_RGBA;
  std::vector<unsigned char> pixels(PNG_IMAGE_SIZE(img));
  if (!png_image_finish_read(&img, nullptr, pixels.data(), 0, nullptr))
    fail(ErrorKind::io, "PNG decode failed for " + name + ": " + img.message);
  return from_bytes(img.width, img.height, pixels.data(), 4);
}

inline std::uint8_t quantize(double v) { return static_cast<std::uint8_t>(std::lround(v * 255.0)); }

inline void write_bytes(const std::filesystem::path& path, const std::vector<unsigned char>& bytes) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) fail(ErrorKind::io, "cannot open " + path.string() + " for writing");
  out.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
  if (!out) fail(ErrorKind::io, "write error on " + path.string());
}

inline void write_png(const std::filesystem::path& path, std::size_t w, std::size_t h, const std::vector<std::uint8_t>& px,
                      bool gray) {
  png_image img{};
  img.version = PNG_IMAGE_VERSION;
  img.width = static_cast<png_uint_32>(w);
  img.height = static_cast<png_uint_32>(h);
  img.format = gray ? PNG_FORMAT_GRAY : PNG_FORMAT_RGB;
  png_alloc_size_t size = 0;
  if (!png_image_write_to_memory(&img, nullptr, &size, 0, px.data(), 0, nullptr))
    fail(ErrorKind::io, std::string("PNG encode failed: ") + img.message);
  std::vector<unsigned char> buf(size);
  if (!png_image_write_to_memory(&img, buf.data(), &size, 0, px.data(), 0, nullptr))
    fail(ErrorKind::io, std::string("PNG encode failed: ") + img.message);
  buf.resize(size);
  write_bytes(path, buf);
}

inline void check_parent(const std::filesystem::path& path) {
  const auto parent = path.parent_path();
  if (!parent.empty() && !std::filesystem::is_directory(parent))
    fail(ErrorKind::io, "output directory does not exist: " + parent.string());
}

}  // namespace detail

// Loads a PNG or binary PPM (P6, maxval 255), detected by content.
inline ImageBuffer load_image(const std::filesystem::path& path) {
  const auto bytes = detail::read_file(path);
  static constexpr unsigned char kPngMagic[8] = {0x89, 'P', 'N', 'G', '\r', '\n', 0x1a, '\n'};
  if (bytes.size() >= 8 && std::equal(kPngMagic, kPngMagic + 8, bytes.begin())) return detail::decode_png(bytes, path.string());
  if (bytes.size() >= 2 && bytes[0] == 'P' && bytes[1] == '6') return detail::decode_ppm(bytes, path.string());
  fail(ErrorKind::io, "unsupported image format: " + path.string());
}

// Writes PNG or PPM by extension. Components are quantized by round(v*255);
// values outside [0,1] are rejected.
inline void save_image(const ImageBuffer& image, const std::filesystem::path& path) {
  require(!image.empty(), "cannot save an empty image");
  std::vector<std::uint8_t> px(image.data().size());
  for (std::size_t i = 0; i < px.size(); ++i) {
    const double v = image.data()[i];
    require(std::isfinite(v) && v >= 0.0 && v <= 1.0, "image component outside [0,1]; clamp before saving");
    px[i] = detail::quantize(v);
  }
  const std::string ext = detail::lower_extension(path);
  detail::check_parent(path);
  if (ext == ".png") {
    detail::write_png(path, image.width(), image.height(), px, false);
  } else if (ext == ".ppm") {
    const std::string header = "P6\n" + std::to_string(image.width()) + " " + std::to_string(image.height()) + "\n255\n";
    std::vector<unsigned char> bytes(header.begin(), header.end());
    bytes.insert(bytes.end(), px.begin(), px.end());
    detail::write_bytes(path, bytes);
  } else {
    fail(ErrorKind::invalid_argument, "unsupported output extension '" + ext + "' (use .png or .ppm)");
  }
}

// Single-channel PNG, value = round(m*255).
inline void save_plane_png(const Plane& plane, const std::filesystem::path& path) {
  std::vector<std::uint8_t> px(plane.data.size());
  for (std::size_t i = 0; i < px.size(); ++i) {
    const double v = plane.data[i];
    require(std::isfinite(v) && v >= 0.0 && v <= 1.0, "plane value outside [0,1]");
    px[i] = detail::quantize(v);
  }
  detail::check_parent(path);
  detail::write_png(path, plane.width, plane.height, px, true);
}

inline ImageBuffer clamp_to_image(std::size_t width, std::size_t height, std::vector<double> data) {
  for (auto& v : data) v = std::isfinite(v) ? std::clamp(v, 0.0, 1.0) : 0.0;
  return ImageBuffer(width, height, std::move(data));
}

}  // namespace aot
