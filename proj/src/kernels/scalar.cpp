#include <vector>

#include "camb/kernels.hpp"
#include "scalar_ops.hpp"

namespace camb::kernels::scalar {

void cascade_forward(std::span<const LayerView> layers, const double* in, double* out,
                     double* cache, std::size_t count) {
  const int n = detail::max_degree(layers);
  std::vector<double> zp(n + 1), up(n + 1);
  for (std::size_t i = 0; i < count; ++i) {
    out[i] = detail::forward_pixel(layers, in[i], cache ? cache + i : nullptr, count, zp.data(),
                                   up.data());
  }
}

void cascade_backward(std::span<const LayerView> layers, const double* cache,
                      const double* upstream, double* grad_in, double* grad_coefficients,
                      std::size_t count) {
  const int n = detail::max_degree(layers);
  std::vector<std::size_t> offset(layers.size());
  const std::size_t total = detail::coefficient_offsets(layers, offset.data());
  std::vector<double> acc(total * kLanes, 0.0);
  std::vector<double> zp(n + 1), up(n + 1);
  for (std::size_t i = 0; i < count; ++i) {
    grad_in[i] = detail::backward_pixel(layers, offset.data(), cache + i, count, upstream[i],
                                        acc.data(), i % kLanes, zp.data(), up.data());
  }
  detail::reduce_lanes(acc.data(), total, grad_coefficients);
}

}  // namespace camb::kernels::scalar
