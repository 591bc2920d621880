#include <atomic>
#include <cstdlib>
#include <cstring>
#include <string>

#include "camb/error.hpp"
#include "camb/kernels.hpp"

namespace camb::kernels {

namespace {

bool cpu_has_avx2() {
#if defined(CAMB_HAVE_AVX2_KERNELS) && (defined(__GNUC__) || defined(__clang__))
  return __builtin_cpu_supports("avx2");
#else
  return false;
#endif
}

Backend detect() {
  const char* forced = std::getenv("CAMB_SIMD");
  if (forced && std::strcmp(forced, "scalar") == 0) return Backend::scalar;
  return cpu_has_avx2() ? Backend::avx2 : Backend::scalar;
}

std::atomic<Backend>& selected() {
  static std::atomic<Backend> backend{detect()};
  return backend;
}

}  // namespace

bool backend_supported(Backend backend) {
  return backend == Backend::scalar || (backend == Backend::avx2 && cpu_has_avx2());
}

KernelTable table_for(Backend backend) {
  switch (backend) {
    case Backend::scalar:
      return {Backend::scalar, &scalar::cascade_forward, &scalar::cascade_backward};
    case Backend::avx2:
#if defined(CAMB_HAVE_AVX2_KERNELS)
      if (cpu_has_avx2()) return {Backend::avx2, &avx2::cascade_forward, &avx2::cascade_backward};
#endif
      break;
  }
  throw ParameterError("kernel backend " + std::string(backend_name(backend)) +
                       " is not supported on this CPU");
}

const KernelTable& active() {
  static const KernelTable scalar_table = table_for(Backend::scalar);
  static const KernelTable avx2_table =
      backend_supported(Backend::avx2) ? table_for(Backend::avx2) : scalar_table;
  return selected().load(std::memory_order_relaxed) == Backend::avx2 ? avx2_table : scalar_table;
}

void set_backend(Backend backend) {
  if (!backend_supported(backend)) {
    throw ParameterError("kernel backend " + std::string(backend_name(backend)) +
                         " is not supported on this CPU");
  }
  selected().store(backend, std::memory_order_relaxed);
}

std::string_view backend_name(Backend backend) {
  switch (backend) {
    case Backend::scalar:
      return "scalar";
    case Backend::avx2:
      return "avx2";
  }
  return "unknown";
}

}  // namespace camb::kernels
