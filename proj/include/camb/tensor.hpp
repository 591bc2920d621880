#pragma once

#include <cstddef>
#include <span>
#include <string>
#include <vector>

namespace camb {

// H x W x C real image, row-major with interleaved channels.
// Canonical intensity range is [0,1]; functions that may leave it say so.
class ImageTensor {
 public:
  ImageTensor() = default;
  ImageTensor(std::size_t height, std::size_t width, std::size_t channels, double fill = 0.0);
  ImageTensor(std::size_t height, std::size_t width, std::size_t channels, std::vector<double> data);

  std::size_t height() const { return height_; }
  std::size_t width() const { return width_; }
  std::size_t channels() const { return channels_; }
  std::size_t size() const { return data_.size(); }
  std::size_t pixel_count() const { return height_ * width_; }
  bool empty() const { return data_.empty(); }

  double& at(std::size_t row, std::size_t col, std::size_t ch = 0) {
    return data_[(row * width_ + col) * channels_ + ch];
  }
  double at(std::size_t row, std::size_t col, std::size_t ch = 0) const {
    return data_[(row * width_ + col) * channels_ + ch];
  }
  double& operator[](std::size_t i) { return data_[i]; }
  double operator[](std::size_t i) const { return data_[i]; }

  std::span<double> values() { return data_; }
  std::span<const double> values() const { return data_; }
  const std::vector<double>& data() const { return data_; }

  bool same_shape(const ImageTensor& other) const {
    return height_ == other.height_ && width_ == other.width_ && channels_ == other.channels_;
  }
  std::string shape_string() const;

  bool operator==(const ImageTensor&) const = default;

 private:
  std::size_t height_ = 0;
  std::size_t width_ = 0;
  std::size_t channels_ = 1;
  std::vector<double> data_;
};

// Throws ParameterError naming both shapes when they differ.
void require_same_shape(const ImageTensor& a, const ImageTensor& b, const char* what);

// Throws ParameterError if any value is NaN or infinite.
void require_finite(const ImageTensor& img, const char* what);

ImageTensor clamp_unit(ImageTensor img);

// Affine map between [lo,hi] and [0,1].
class RangeMap {
 public:
  enum class Direction { to_unit, from_unit };

  RangeMap(double lo, double hi);

  double lo() const { return lo_; }
  double hi() const { return hi_; }

  double to_unit(double v) const { return (v - lo_) / (hi_ - lo_); }
  double from_unit(double v) const { return lo_ + v * (hi_ - lo_); }

  static RangeMap unit() { return {0.0, 1.0}; }
  static RangeMap symmetric() { return {-1.0, 1.0}; }

 private:
  double lo_;
  double hi_;
};

// to_unit requires values inside [lo,hi] up to 1e-9 slack.
ImageTensor apply_range(const ImageTensor& img, const RangeMap& map, RangeMap::Direction direction);

// Image file I/O: binary PGM (P5, 8/16 bit) and 8-bit gray/RGB PNG.
ImageTensor load_image(const std::string& path);
// Clamps to [0,1] and writes 8 bits per sample with round-half-up.
// The format follows the extension (.png, otherwise PGM/PPM).
void save_image(const ImageTensor& img, const std::string& path);

// round(v * 255) after clamping, ties upward.
unsigned char quantize8(double v);

}  // namespace camb
