#include "camb/tensor.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>

#include "camb/error.hpp"

namespace camb {

namespace {

void check_dims(std::size_t height, std::size_t width, std::size_t channels) {
  if (height == 0 || width == 0) throw ParameterError("image dimensions must be positive");
  if (channels != 1 && channels != 3) {
    throw ParameterError("image must have 1 or 3 channels, got " + std::to_string(channels));
  }
}

}  // namespace

ImageTensor::ImageTensor(std::size_t height, std::size_t width, std::size_t channels, double fill)
    : height_(height), width_(width), channels_(channels) {
  check_dims(height, width, channels);
  data_.assign(height * width * channels, fill);
}

ImageTensor::ImageTensor(std::size_t height, std::size_t width, std::size_t channels,
                         std::vector<double> data)
    : height_(height), width_(width), channels_(channels), data_(std::move(data)) {
  check_dims(height, width, channels);
  if (data_.size() != height * width * channels) {
    throw ParameterError("image data length " + std::to_string(data_.size()) +
                         " does not match " + shape_string());
  }
}

std::string ImageTensor::shape_string() const {
  std::ostringstream os;
  os << height_ << "x" << width_ << "x" << channels_;
  return os.str();
}

void require_same_shape(const ImageTensor& a, const ImageTensor& b, const char* what) {
  if (!a.same_shape(b)) {
    throw ParameterError(std::string(what) + ": shape mismatch " + a.shape_string() + " vs " +
                         b.shape_string());
  }
}

void require_finite(const ImageTensor& img, const char* what) {
  for (std::size_t i = 0; i < img.size(); ++i) {
    if (!std::isfinite(img[i])) {
      throw ParameterError(std::string(what) + ": non-finite value at index " + std::to_string(i));
    }
  }
}

ImageTensor clamp_unit(ImageTensor img) {
  for (double& v : img.values()) v = std::clamp(v, 0.0, 1.0);
  return img;
}

RangeMap::RangeMap(double lo, double hi) : lo_(lo), hi_(hi) {
  if (!(hi > lo) || !std::isfinite(lo) || !std::isfinite(hi)) {
    throw ParameterError("range map requires finite lo < hi");
  }
}

ImageTensor apply_range(const ImageTensor& img, const RangeMap& map, RangeMap::Direction direction) {
  ImageTensor out = img;
  constexpr double slack = 1e-9;
  for (std::size_t i = 0; i < out.size(); ++i) {
    const double v = out[i];
    if (direction == RangeMap::Direction::to_unit) {
      if (v < map.lo() - slack || v > map.hi() + slack) {
        std::ostringstream os;
        os << "value " << v << " at index " << i << " outside [" << map.lo() << ", " << map.hi()
           << "]";
        throw DomainError(os.str());
      }
      out[i] = map.to_unit(v);
    } else {
      out[i] = map.from_unit(v);
    }
  }
  return out;
}

unsigned char quantize8(double v) {
  const double c = std::clamp(v, 0.0, 1.0);
  return static_cast<unsigned char>(std::floor(c * 255.0 + 0.5));
}

}  // namespace camb
