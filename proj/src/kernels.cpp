#include "miemph/kernels.hpp"

#include <atomic>

#include "miemph/errors.hpp"

namespace miemph::kernels {
namespace {

bool cpu_has_avx2() {
#if defined(MIEMPH_HAVE_AVX2_TU) && (defined(__x86_64__) || defined(__i386__))
  return __builtin_cpu_supports("avx2") && __builtin_cpu_supports("fma");
#else
  return false;
#endif
}

Backend detect_backend() {
  return cpu_has_avx2() ? Backend::avx2 : Backend::scalar;
}

std::atomic<Backend> g_backend{detect_backend()};

}  // namespace

Backend active_backend() { return g_backend.load(std::memory_order_relaxed); }

bool backend_supported(Backend b) {
  switch (b) {
    case Backend::scalar:
      return true;
    case Backend::avx2:
      return cpu_has_avx2();
  }
  return false;
}

void force_backend(Backend b) {
  if (!backend_supported(b))
    throw ConfigError("kernel backend '" + backend_name(b) +
                      "' not supported on this CPU");
  g_backend.store(b, std::memory_order_relaxed);
}

std::string backend_name(Backend b) {
  switch (b) {
    case Backend::scalar:
      return "scalar";
    case Backend::avx2:
      return "avx2";
  }
  return "unknown";
}

template <>
const Ops<float>& ops<float>(Backend b) {
#if defined(MIEMPH_HAVE_AVX2_TU)
  if (b == Backend::avx2) return avx2::ops_f32;
#else
  (void)b;
#endif
  return scalar::ops_f32;
}

template <>
const Ops<double>& ops<double>(Backend b) {
#if defined(MIEMPH_HAVE_AVX2_TU)
  if (b == Backend::avx2) return avx2::ops_f64;
#else
  (void)b;
#endif
  return scalar::ops_f64;
}

template <>
const Ops<float>& ops<float>() {
  return ops<float>(active_backend());
}

template <>
const Ops<double>& ops<double>() {
  return ops<double>(active_backend());
}

}  // namespace miemph::kernels
