#pragma once

// Single-pixel operations shared by the scalar kernel and the SIMD tails.

#include <algorithm>

#include "camb/kernels.hpp"

namespace camb::kernels::detail {
namespace {

// z^k and (1-z)^k for k = 0..n.
inline void powers(double z, int n, double* zp, double* up) {
  const double u = 1.0 - z;
  zp[0] = 1.0;
  up[0] = 1.0;
  for (int k = 1; k <= n; ++k) {
    zp[k] = zp[k - 1] * z;
    up[k] = up[k - 1] * u;
  }
}

inline double layer_value(const LayerView& l, const double* zp, const double* up) {
  const int n = l.degree;
  double value = 0.0;
  for (int k = 0; k <= n; ++k) {
    double b = l.binom[k] * zp[k];
    b = b * up[n - k];
    value = value + l.coefficients[k] * b;
  }
  return std::min(std::max(value, 0.0), 1.0);
}

inline double layer_slope(const LayerView& l, const double* zp, const double* up) {
  const int n = l.degree;
  double slope = 0.0;
  for (int k = 0; k < n; ++k) {
    double b = l.binom_lower[k] * zp[k];
    b = b * up[n - 1 - k];
    slope = slope + l.increments[k] * b;
  }
  return slope * static_cast<double>(n);
}

inline double forward_pixel(std::span<const LayerView> layers, double v, double* cache,
                            std::size_t stride, double* zp, double* up) {
  for (std::size_t k = 0; k < layers.size(); ++k) {
    if (cache) cache[k * stride] = v;
    powers(v, layers[k].degree, zp, up);
    v = layer_value(layers[k], zp, up);
  }
  return v;
}

// Returns upstream times the chain derivative; adds g * b_j into lane of acc.
inline double backward_pixel(std::span<const LayerView> layers, const std::size_t* offset,
                             const double* cache, std::size_t stride, double g, double* acc,
                             std::size_t lane, double* zp, double* up) {
  for (std::size_t k = layers.size(); k-- > 0;) {
    const LayerView& l = layers[k];
    powers(cache[k * stride], l.degree, zp, up);
    double* a = acc + offset[k] * kLanes;
    for (int j = 0; j <= l.degree; ++j) {
      double b = l.binom[j] * zp[j];
      b = b * up[l.degree - j];
      a[j * kLanes + lane] = a[j * kLanes + lane] + g * b;
    }
    g = g * layer_slope(l, zp, up);
  }
  return g;
}

inline int max_degree(std::span<const LayerView> layers) {
  int n = 0;
  for (const LayerView& l : layers) n = std::max(n, l.degree);
  return n;
}

inline std::size_t coefficient_offsets(std::span<const LayerView> layers, std::size_t* offset) {
  std::size_t total = 0;
  for (std::size_t k = 0; k < layers.size(); ++k) {
    offset[k] = total;
    total += static_cast<std::size_t>(layers[k].degree) + 1;
  }
  return total;
}

inline void reduce_lanes(const double* acc, std::size_t total, double* out) {
  for (std::size_t c = 0; c < total; ++c) {
    const double* a = acc + c * kLanes;
    out[c] += (a[0] + a[1]) + (a[2] + a[3]);
  }
}

}  // namespace
}  // namespace camb::kernels::detail
