// Reference kernels. Compiled with -ffp-contract=off so the scalar path
// follows plain IEEE mul/add semantics and stays a stable oracle for the
// SIMD variants.

#include <cmath>

#include "miemph/kernels.hpp"

namespace miemph::kernels::scalar {
namespace {

template <typename T>
T dot(const T* a, const T* b, std::size_t n) {
  T acc{};
  for (std::size_t i = 0; i < n; ++i) acc += a[i] * b[i];
  return acc;
}

template <typename T>
void axpy(T alpha, const T* x, T* y, std::size_t n) {
  for (std::size_t i = 0; i < n; ++i) y[i] += alpha * x[i];
}

template <typename T>
void scale(T alpha, T* x, std::size_t n) {
  for (std::size_t i = 0; i < n; ++i) x[i] *= alpha;
}

template <typename T>
void conv1d_acc(const T* in, std::size_t in_stride, std::size_t n_rows,
                const T* w, std::size_t w_stride, std::size_t taps, T* out,
                std::size_t n_out) {
  for (std::size_t r = 0; r < n_rows; ++r) {
    const T* x = in + r * in_stride;
    const T* wr = w + r * w_stride;
    for (std::size_t t = 0; t < taps; ++t) {
      const T wv = wr[t];
      for (std::size_t wo = 0; wo < n_out; ++wo) out[wo] += wv * x[wo + t];
    }
  }
}

template <typename T>
void conv1d_grad_w(const T* in, const T* dout, std::size_t n_out,
                   std::size_t taps, T* dw) {
  for (std::size_t t = 0; t < taps; ++t) {
    T acc{};
    for (std::size_t wo = 0; wo < n_out; ++wo) acc += in[wo + t] * dout[wo];
    dw[t] += acc;
  }
}

template <typename T>
void adam_update(T* p, const T* g, T* m, T* v, std::size_t n, T lr, T beta1,
                 T beta2, T eps, T bc1, T bc2) {
  const T om1 = T(1) - beta1;
  const T om2 = T(1) - beta2;
  for (std::size_t i = 0; i < n; ++i) {
    m[i] = beta1 * m[i] + om1 * g[i];
    v[i] = beta2 * v[i] + om2 * g[i] * g[i];
    const T mhat = m[i] * bc1;
    const T vhat = v[i] * bc2;
    p[i] -= lr * mhat / (std::sqrt(vhat) + eps);
  }
}

template <typename T>
constexpr Ops<T> make_ops() {
  return Ops<T>{&dot<T>,           &axpy<T>,        &scale<T>,
                &conv1d_acc<T>,    &conv1d_grad_w<T>, &adam_update<T>};
}

}  // namespace

const Ops<float> ops_f32 = make_ops<float>();
const Ops<double> ops_f64 = make_ops<double>();

}  // namespace miemph::kernels::scalar
