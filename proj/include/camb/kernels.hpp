#pragma once

// Per-pixel kernels for the Bernstein cascade.
//
// Every backend performs the same floating-point operations in the same order
// (no fused multiply-add, 4-lane striped reductions), so all backends produce
// bit-identical results. The scalar backend is the reference.

#include <cstddef>
#include <span>
#include <string_view>

namespace camb::kernels {

enum class Backend { scalar, avx2 };

struct LayerView {
  int degree = 0;
  const double* coefficients = nullptr;  // N+1 entries, b_0 = 0 ... b_N = 1
  const double* increments = nullptr;    // N entries, b_{k+1} - b_k (softmax probabilities)
  const double* binom = nullptr;         // C(N, 0..N)
  const double* binom_lower = nullptr;   // C(N-1, 0..N-1)
};

// Maps count inputs (already in [0,1]) through all layers into out. When cache
// is non-null it receives the input of every layer, layer-major:
// cache[k * count + i] is the value entering layer k at pixel i.
using ForwardFn = void (*)(std::span<const LayerView> layers, const double* in, double* out,
                           double* cache, std::size_t count);

// Given the forward cache, writes grad_in[i] = upstream[i] * prod_k d layer_k / dz and
// adds the coefficient gradients summed over pixels to grad_coefficients
// (concatenated per layer, N_k + 1 entries each). Pixel i accumulates into
// lane i % 4; the four lanes are combined as (l0 + l1) + (l2 + l3).
using BackwardFn = void (*)(std::span<const LayerView> layers, const double* cache,
                            const double* upstream, double* grad_in, double* grad_coefficients,
                            std::size_t count);

struct KernelTable {
  Backend backend;
  ForwardFn forward;
  BackwardFn backward;
};

inline constexpr std::size_t kLanes = 4;

KernelTable table_for(Backend backend);
bool backend_supported(Backend backend);

// Backend picked at first use: AVX2 when the CPU supports it, unless the
// CAMB_SIMD environment variable is set to "scalar".
const KernelTable& active();
void set_backend(Backend backend);
std::string_view backend_name(Backend backend);

namespace scalar {
void cascade_forward(std::span<const LayerView> layers, const double* in, double* out,
                     double* cache, std::size_t count);
void cascade_backward(std::span<const LayerView> layers, const double* cache,
                      const double* upstream, double* grad_in, double* grad_coefficients,
                      std::size_t count);
}  // namespace scalar

#if defined(__x86_64__) || defined(_M_X64)
#define CAMB_HAVE_AVX2_KERNELS 1
namespace avx2 {
void cascade_forward(std::span<const LayerView> layers, const double* in, double* out,
                     double* cache, std::size_t count);
void cascade_backward(std::span<const LayerView> layers, const double* cache,
                      const double* upstream, double* grad_in, double* grad_coefficients,
                      std::size_t count);
}  // namespace avx2
#endif

}  // namespace camb::kernels
