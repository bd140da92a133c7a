#pragma once

// Data-parallel inner loops behind the DSP and network code: scalar
// reference kernels plus AVX2 variants selected once at startup from CPU
// capabilities. The two backends are equivalence-tested against each
// other; everything above this layer is backend-agnostic.

#include <cstddef>
#include <string>

namespace miemph::kernels {

enum class Backend { scalar, avx2 };

template <typename T>
struct Ops {
  // sum_i a[i] * b[i]
  T (*dot)(const T* a, const T* b, std::size_t n);

  // y[i] += alpha * x[i]
  void (*axpy)(T alpha, const T* x, T* y, std::size_t n);

  // x[i] *= alpha
  void (*scale)(T alpha, T* x, std::size_t n);

  // Fused multi-row valid convolution (the net's conv layers and the FIR
  // path both reduce to this):
  //   out[wo] += sum_r sum_t w[r * w_stride + t] * in[r * in_stride + wo + t]
  // for wo in [0, n_out). Rows r must each hold n_out + taps - 1 values.
  void (*conv1d_acc)(const T* in, std::size_t in_stride, std::size_t n_rows,
                     const T* w, std::size_t w_stride, std::size_t taps,
                     T* out, std::size_t n_out);

  // Weight gradient of the same convolution, one row:
  //   dw[t] += sum_wo in[wo + t] * dout[wo]
  void (*conv1d_grad_w)(const T* in, const T* dout, std::size_t n_out,
                        std::size_t taps, T* dw);

  // Bias-corrected Adam over a flat parameter block. bc1/bc2 are the
  // 1/(1-beta^t) correction factors, precomputed by the caller.
  void (*adam_update)(T* p, const T* g, T* m, T* v, std::size_t n, T lr,
                      T beta1, T beta2, T eps, T bc1, T bc2);
};

namespace scalar {
extern const Ops<float> ops_f32;
extern const Ops<double> ops_f64;
}  // namespace scalar

#if defined(MIEMPH_HAVE_AVX2_TU)
namespace avx2 {
extern const Ops<float> ops_f32;
extern const Ops<double> ops_f64;
}  // namespace avx2
#endif

Backend active_backend();
bool backend_supported(Backend b);
void force_backend(Backend b);  // throws ConfigError when unsupported
std::string backend_name(Backend b);

template <typename T>
const Ops<T>& ops();  // active backend

template <typename T>
const Ops<T>& ops(Backend b);  // explicit backend, for equivalence tests

// Input gradient of conv1d_acc for one row, backend-independent edge
// handling around a core conv1d_acc call with reversed taps:
//   din[wo + t] += w[t] * dout[wo]
template <typename T>
void conv1d_grad_in(const Ops<T>& k, const T* dout, std::size_t n_out,
                    const T* w, std::size_t taps, T* din) {
  if (taps == 0 || n_out == 0) return;
  if (n_out < taps) {
    for (std::size_t wo = 0; wo < n_out; ++wo)
      for (std::size_t t = 0; t < taps; ++t) din[wo + t] += w[t] * dout[wo];
    return;
  }
  // din[i] = sum_t w[t] * dout[i - t]; the interior i in [taps-1, n_out)
  // sees every tap and is a valid convolution with reversed weights.
  T wrev[64];
  const T* wr = wrev;
  std::size_t heap_taps = 0;
  T* heap = nullptr;
  if (taps <= 64) {
    for (std::size_t t = 0; t < taps; ++t) wrev[t] = w[taps - 1 - t];
  } else {
    heap = new T[taps];
    for (std::size_t t = 0; t < taps; ++t) heap[t] = w[taps - 1 - t];
    wr = heap;
    heap_taps = taps;
  }
  for (std::size_t i = 0; i < taps - 1; ++i)
    for (std::size_t t = 0; t <= i; ++t) din[i] += w[t] * dout[i - t];
  k.conv1d_acc(dout, 0, 1, wr, 0, taps, din + taps - 1, n_out - taps + 1);
  for (std::size_t i = n_out; i < n_out + taps - 1; ++i)
    for (std::size_t t = i - n_out + 1; t < taps; ++t)
      din[i] += w[t] * dout[i - t];
  if (heap_taps) delete[] heap;
}

}  // namespace miemph::kernels
