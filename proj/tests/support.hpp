#pragma once

// Shared helpers for the unit tests: random operators and independent
// reference evaluations that do not go through the library's kernels.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <vector>

#include "camb/camb.hpp"
#include "camb/rng.hpp"
#include "camb/tensor.hpp"

namespace testing {

inline std::vector<double> random_weights(camb::Pcg64& rng, int degree, double spread = 1.5) {
  std::vector<double> w(static_cast<std::size_t>(degree));
  for (double& v : w) v = spread * rng.gaussian();
  return w;
}

inline camb::CambOperator random_camb(camb::Pcg64& rng, int degree, int depth, double spread = 1.5) {
  std::vector<camb::MbpLayer> layers;
  for (int k = 0; k < depth; ++k) layers.emplace_back(random_weights(rng, degree, spread));
  return camb::CambOperator(std::move(layers));
}

inline camb::ImageTensor random_image(camb::Pcg64& rng, std::size_t h, std::size_t w, std::size_t c = 1) {
  camb::ImageTensor img(h, w, c);
  for (double& v : img.values()) v = rng.uniform();
  return img;
}

// Pascal's triangle, long double.
inline long double ref_binomial(int n, int k) {
  std::vector<long double> row{1.0L};
  for (int i = 1; i <= n; ++i) {
    std::vector<long double> next(static_cast<std::size_t>(i + 1), 1.0L);
    for (int j = 1; j < i; ++j) next[j] = row[j - 1] + row[j];
    row = std::move(next);
  }
  return row[static_cast<std::size_t>(k)];
}

// Coefficients straight from the definition, without max-subtraction.
inline std::vector<long double> ref_coefficients(const std::vector<double>& w) {
  long double total = 0.0L;
  for (double v : w) total += std::exp(static_cast<long double>(v));
  std::vector<long double> beta{0.0L};
  long double run = 0.0L;
  for (double v : w) {
    run += std::exp(static_cast<long double>(v)) / total;
    beta.push_back(run);
  }
  return beta;
}

// Brute-force sum of beta_k C(N,k) z^k (1-z)^(N-k).
inline long double ref_bernstein(const std::vector<long double>& beta, long double z) {
  const int n = static_cast<int>(beta.size()) - 1;
  long double s = 0.0L;
  for (int k = 0; k <= n; ++k) {
    s += beta[static_cast<std::size_t>(k)] * ref_binomial(n, k) * std::pow(z, static_cast<long double>(k)) *
         std::pow(1.0L - z, static_cast<long double>(n - k));
  }
  return s;
}

inline long double ref_cascade(const camb::CambOperator& op, long double z) {
  for (const auto& layer : op.layers()) z = ref_bernstein(ref_coefficients(layer.weights()), z);
  return z;
}

inline double rel_err(double a, double b, double floor = 1e-8) {
  return std::abs(a - b) / std::max({std::abs(a), std::abs(b), floor});
}

}  // namespace testing
