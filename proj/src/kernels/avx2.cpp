// AVX2 variants of the cascade kernels. Four pixels per register; each lane
// repeats the scalar kernel's operations in the same order. The file is
// compiled without FMA so mul/add pairs are never contracted.

#include "camb/kernels.hpp"
#include "scalar_ops.hpp"

#if defined(CAMB_HAVE_AVX2_KERNELS)

#include <immintrin.h>

#include <algorithm>
#include <vector>

#define CAMB_AVX2 __attribute__((target("avx2")))

namespace camb::kernels::avx2 {

namespace {

// Register arrays live on the stack; deeper layers use the scalar kernel.
constexpr int kMaxDegree = 64;

CAMB_AVX2 inline void powers(__m256d z, int n, __m256d* zp, __m256d* up) {
  const __m256d one = _mm256_set1_pd(1.0);
  const __m256d u = _mm256_sub_pd(one, z);
  zp[0] = one;
  up[0] = one;
  for (int k = 1; k <= n; ++k) {
    zp[k] = _mm256_mul_pd(zp[k - 1], z);
    up[k] = _mm256_mul_pd(up[k - 1], u);
  }
}

CAMB_AVX2 inline __m256d layer_value(const LayerView& l, const __m256d* zp, const __m256d* up) {
  const int n = l.degree;
  __m256d value = _mm256_setzero_pd();
  for (int k = 0; k <= n; ++k) {
    __m256d b = _mm256_mul_pd(_mm256_set1_pd(l.binom[k]), zp[k]);
    b = _mm256_mul_pd(b, up[n - k]);
    value = _mm256_add_pd(value, _mm256_mul_pd(_mm256_set1_pd(l.coefficients[k]), b));
  }
  // max(value, 0) then min(., 1), matching std::min(std::max(value, 0.0), 1.0).
  value = _mm256_max_pd(value, _mm256_setzero_pd());
  return _mm256_min_pd(value, _mm256_set1_pd(1.0));
}

CAMB_AVX2 inline __m256d layer_slope(const LayerView& l, const __m256d* zp, const __m256d* up) {
  const int n = l.degree;
  __m256d slope = _mm256_setzero_pd();
  for (int k = 0; k < n; ++k) {
    __m256d b = _mm256_mul_pd(_mm256_set1_pd(l.binom_lower[k]), zp[k]);
    b = _mm256_mul_pd(b, up[n - 1 - k]);
    slope = _mm256_add_pd(slope, _mm256_mul_pd(_mm256_set1_pd(l.increments[k]), b));
  }
  return _mm256_mul_pd(slope, _mm256_set1_pd(static_cast<double>(n)));
}

}  // namespace

CAMB_AVX2 void cascade_forward(std::span<const LayerView> layers, const double* in, double* out,
                               double* cache, std::size_t count) {
  const int n = detail::max_degree(layers);
  if (n > kMaxDegree) return scalar::cascade_forward(layers, in, out, cache, count);
  __m256d zp[kMaxDegree + 1];
  __m256d up[kMaxDegree + 1];
  const std::size_t blocked = count - count % kLanes;
  for (std::size_t i = 0; i < blocked; i += kLanes) {
    __m256d v = _mm256_loadu_pd(in + i);
    for (std::size_t k = 0; k < layers.size(); ++k) {
      if (cache) _mm256_storeu_pd(cache + k * count + i, v);
      powers(v, layers[k].degree, zp, up);
      v = layer_value(layers[k], zp, up);
    }
    _mm256_storeu_pd(out + i, v);
  }
  std::vector<double> zs(n + 1), us(n + 1);
  for (std::size_t i = blocked; i < count; ++i) {
    out[i] = detail::forward_pixel(layers, in[i], cache ? cache + i : nullptr, count, zs.data(),
                                   us.data());
  }
}

CAMB_AVX2 void cascade_backward(std::span<const LayerView> layers, const double* cache,
                                const double* upstream, double* grad_in, double* grad_coefficients,
                                std::size_t count) {
  const int n = detail::max_degree(layers);
  if (n > kMaxDegree) {
    return scalar::cascade_backward(layers, cache, upstream, grad_in, grad_coefficients, count);
  }
  __m256d zp[kMaxDegree + 1];
  __m256d up[kMaxDegree + 1];
  std::vector<std::size_t> offset(layers.size());
  const std::size_t total = detail::coefficient_offsets(layers, offset.data());
  // lanes[c * 4 + lane], the same layout the scalar kernel reduces.
  std::vector<double> lanes(total * kLanes, 0.0);

  const std::size_t blocked = count - count % kLanes;
  for (std::size_t i = 0; i < blocked; i += kLanes) {
    __m256d g = _mm256_loadu_pd(upstream + i);
    for (std::size_t k = layers.size(); k-- > 0;) {
      const LayerView& l = layers[k];
      powers(_mm256_loadu_pd(cache + k * count + i), l.degree, zp, up);
      double* a = lanes.data() + offset[k] * kLanes;
      for (int j = 0; j <= l.degree; ++j) {
        __m256d b = _mm256_mul_pd(_mm256_set1_pd(l.binom[j]), zp[j]);
        b = _mm256_mul_pd(b, up[l.degree - j]);
        const __m256d sum = _mm256_add_pd(_mm256_loadu_pd(a + j * kLanes), _mm256_mul_pd(g, b));
        _mm256_storeu_pd(a + j * kLanes, sum);
      }
      g = _mm256_mul_pd(g, layer_slope(l, zp, up));
    }
    _mm256_storeu_pd(grad_in + i, g);
  }

  // Tail pixels land in lanes 0..count%4-1, as in the scalar kernel.
  std::vector<double> zs(n + 1), us(n + 1);
  for (std::size_t i = blocked; i < count; ++i) {
    grad_in[i] = detail::backward_pixel(layers, offset.data(), cache + i, count, upstream[i],
                                        lanes.data(), i % kLanes, zs.data(), us.data());
  }
  detail::reduce_lanes(lanes.data(), total, grad_coefficients);
}
}  // namespace camb::kernels::avx2

#endif
