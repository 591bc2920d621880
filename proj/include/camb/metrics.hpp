#pragma once

#include <cstddef>
#include <optional>
#include <span>

#include "camb/camb.hpp"
#include "camb/tensor.hpp"

namespace camb {

// 10 log10(1 / MSE) with peak 1. Identical images give +infinity.
double psnr(const ImageTensor& a, const ImageTensor& b);

double mse(const ImageTensor& a, const ImageTensor& b);

// Single-scale SSIM: 11x11 Gaussian window (sigma 1.5), K1 = 0.01, K2 = 0.03,
// dynamic range 1, valid positions only, averaged over positions and channels.
double ssim(const ImageTensor& a, const ImageTensor& b);

struct LoeOptions {
  std::size_t downsample = 4;
  // Phase of the Catmull-Rom resampler. Grid-aligned sampling hits pixel
  // centers, where the interpolant equals the pixel, so the metric stays
  // invariant to strictly increasing remaps. Antialiased mode stretches the
  // kernel by the factor (MATLAB imresize style) and mixes neighbours.
  bool antialias = false;
};

// Lightness order error between two images.
double loe(const ImageTensor& enhanced, const ImageTensor& reference, const LoeOptions& options = {});

// (1/M) sum_i sum_j [L_i >= L_j] xor [R_i >= R_j] on two lightness maps.
double loe_from_lightness(std::span<const double> lightness, std::span<const double> reference);

// Max over channels.
ImageTensor lightness(const ImageTensor& img);

// Separable Catmull-Rom (a = -0.5) downsampling, symmetric reflection at borders.
// Output dims are max(1, dim / factor).
ImageTensor bicubic_downsample(const ImageTensor& img, std::size_t factor, bool antialias);

// mean (y - op(x))^2.
double fidelity_error(const ImageTensor& y, const Operator& op, const ImageTensor& x);

struct MetricReport {
  double psnr = 0.0;
  double ssim = 0.0;
  double loe = 0.0;
  double fidelity = 0.0;
  std::optional<double> validation;
};

}  // namespace camb
