#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "camb/tensor.hpp"

namespace camb {

// Denoisers standing in for a learned prior. Each maps a noise amplitude in
// (0,1) to a strength through strength_scale.
struct DenoiserSpec {
  enum class Kind { identity, gaussian, tv };
  Kind kind = Kind::tv;
  double strength_scale = 0.25;

  static DenoiserSpec identity() { return {Kind::identity, 1.0}; }
  static DenoiserSpec gaussian(double scale = 4.0) { return {Kind::gaussian, scale}; }
  static DenoiserSpec tv(double scale = 0.25) { return {Kind::tv, scale}; }
};

const char* denoiser_name(DenoiserSpec::Kind kind);
DenoiserSpec parse_denoiser(const std::string& name);

ImageTensor denoise(const DenoiserSpec& spec, const ImageTensor& noisy, double amplitude);

// Adds N(0, amplitude^2) noise from Pcg64(seed, "noise"). Not clamped.
ImageTensor add_noise(const ImageTensor& img, double amplitude, std::uint64_t seed);

// Separable Gaussian blur, kernel truncated at ceil(3 sigma), symmetric
// (edge-including) reflection at the borders.
ImageTensor gaussian_blur(const ImageTensor& img, double sigma);

struct TvOptions {
  int max_iterations = 200;
  double tolerance = 1e-5;  // max |p^{n+1} - p^n| over the dual field
  double step = 0.125;      // tau <= 1/8 guarantees convergence
};

struct TvResult {
  ImageTensor image;
  int iterations = 0;
  // ||f - weight * div p||^2 after each iteration; non-increasing.
  std::vector<double> dual_energy;
};

// argmin_u 1/2 ||u - f||^2 + weight * TV(u), isotropic TV per channel,
// Chambolle's dual projection iteration. Not clamped.
TvResult tv_denoise(const ImageTensor& noisy, double weight, const TvOptions& options = {});

}  // namespace camb
