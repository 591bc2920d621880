#pragma once

#include <cstdint>
#include <string>
#include <utility>
#include <variant>
#include <vector>

#include "camb/tensor.hpp"

namespace camb {

namespace curves {

struct Gamma {
  double exponent = 1.0;
};

// clip(2x, -1, 1) on [-1,1]-normalized signals; v -> clamp(2v - 0.5, 0, 1) on [0,1].
struct HdrClip {};

// Logistic curve rescaled so that 0 -> 0 and 1 -> 1.
struct Sigmoid {
  double center = 0.5;
  double slope = 10.0;
};

// Linear interpolation through knots (0,0) = k_0, ..., k_last = (1,1);
// abscissae strictly increasing, ordinates non-decreasing.
class Piecewise {
 public:
  explicit Piecewise(std::vector<std::pair<double, double>> knots);
  const std::vector<std::pair<double, double>>& knots() const { return knots_; }
  double operator()(double v) const;

 private:
  std::vector<std::pair<double, double>> knots_;
};

}  // namespace curves

using Curve = std::variant<curves::Gamma, curves::HdrClip, curves::Sigmoid, curves::Piecewise>;

double apply_curve(const Curve& curve, double v);

struct DegradeSpec {
  Curve curve = curves::Gamma{1.0};
  double sigma = 0.01;
  std::uint64_t seed = 0;
};

inline constexpr double kHdrPaperSigma = 0.05;   // in [-1,1] units
inline constexpr double kDefaultSigma = 0.01;

// Curve, then additive Gaussian noise (add_noise with spec.seed), then clamp.
ImageTensor degrade(const ImageTensor& img, const DegradeSpec& spec);

// Equally spaced knots with sorted uniform interior ordinates drawn from
// Pcg64(seed, "curve"); strictly increasing. knot_count >= 2.
DegradeSpec make_random_monotone(std::uint64_t seed, int knot_count, double sigma = kDefaultSigma);

// Piecewise-smooth grayscale test scene: a linear ramp background with a few
// flat discs and rectangles, values in [0,1]. Drawn from Pcg64(seed, "scene").
ImageTensor make_scene(std::uint64_t seed, std::size_t height, std::size_t width);

// `gamma:2.2`, `hdr_clip`, `sigmoid:c:s`, `piecewise:x0:y0,x1:y1,...`.
Curve parse_curve(const std::string& text);

std::string spec_to_json(const DegradeSpec& spec);
DegradeSpec spec_from_json(const std::string& text);

}  // namespace camb
