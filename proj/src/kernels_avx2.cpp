// AVX2+FMA kernel variants. This translation unit is compiled with
// -mavx2 -mfma; nothing here runs unless the dispatcher verified CPU
// support. adam_update deliberately avoids FMA so it stays bit-identical
// to the scalar reference; dot/axpy/conv reassociate and are compared
// under tolerance instead.

#include <immintrin.h>

#include "miemph/kernels.hpp"

namespace miemph::kernels::avx2 {
namespace {

inline float hsum(__m256 v) {
  __m128 lo = _mm256_castps256_ps128(v);
  __m128 hi = _mm256_extractf128_ps(v, 1);
  lo = _mm_add_ps(lo, hi);
  lo = _mm_add_ps(lo, _mm_movehl_ps(lo, lo));
  lo = _mm_add_ss(lo, _mm_shuffle_ps(lo, lo, 1));
  return _mm_cvtss_f32(lo);
}

inline double hsum(__m256d v) {
  __m128d lo = _mm256_castpd256_pd128(v);
  __m128d hi = _mm256_extractf128_pd(v, 1);
  lo = _mm_add_pd(lo, hi);
  return _mm_cvtsd_f64(_mm_add_sd(lo, _mm_unpackhi_pd(lo, lo)));
}

float dot_f32(const float* a, const float* b, std::size_t n) {
  __m256 acc0 = _mm256_setzero_ps();
  __m256 acc1 = _mm256_setzero_ps();
  __m256 acc2 = _mm256_setzero_ps();
  __m256 acc3 = _mm256_setzero_ps();
  std::size_t i = 0;
  for (; i + 32 <= n; i += 32) {
    acc0 = _mm256_fmadd_ps(_mm256_loadu_ps(a + i), _mm256_loadu_ps(b + i), acc0);
    acc1 = _mm256_fmadd_ps(_mm256_loadu_ps(a + i + 8), _mm256_loadu_ps(b + i + 8), acc1);
    acc2 = _mm256_fmadd_ps(_mm256_loadu_ps(a + i + 16), _mm256_loadu_ps(b + i + 16), acc2);
    acc3 = _mm256_fmadd_ps(_mm256_loadu_ps(a + i + 24), _mm256_loadu_ps(b + i + 24), acc3);
  }
  for (; i + 8 <= n; i += 8)
    acc0 = _mm256_fmadd_ps(_mm256_loadu_ps(a + i), _mm256_loadu_ps(b + i), acc0);
  float s = hsum(_mm256_add_ps(_mm256_add_ps(acc0, acc1), _mm256_add_ps(acc2, acc3)));
  for (; i < n; ++i) s += a[i] * b[i];
  return s;
}

double dot_f64(const double* a, const double* b, std::size_t n) {
  __m256d acc0 = _mm256_setzero_pd();
  __m256d acc1 = _mm256_setzero_pd();
  std::size_t i = 0;
  for (; i + 8 <= n; i += 8) {
    acc0 = _mm256_fmadd_pd(_mm256_loadu_pd(a + i), _mm256_loadu_pd(b + i), acc0);
    acc1 = _mm256_fmadd_pd(_mm256_loadu_pd(a + i + 4), _mm256_loadu_pd(b + i + 4), acc1);
  }
  for (; i + 4 <= n; i += 4)
    acc0 = _mm256_fmadd_pd(_mm256_loadu_pd(a + i), _mm256_loadu_pd(b + i), acc0);
  double s = hsum(_mm256_add_pd(acc0, acc1));
  for (; i < n; ++i) s += a[i] * b[i];
  return s;
}

void axpy_f32(float alpha, const float* x, float* y, std::size_t n) {
  const __m256 av = _mm256_set1_ps(alpha);
  std::size_t i = 0;
  for (; i + 16 <= n; i += 16) {
    _mm256_storeu_ps(y + i, _mm256_fmadd_ps(av, _mm256_loadu_ps(x + i), _mm256_loadu_ps(y + i)));
    _mm256_storeu_ps(y + i + 8, _mm256_fmadd_ps(av, _mm256_loadu_ps(x + i + 8), _mm256_loadu_ps(y + i + 8)));
  }
  for (; i + 8 <= n; i += 8)
    _mm256_storeu_ps(y + i, _mm256_fmadd_ps(av, _mm256_loadu_ps(x + i), _mm256_loadu_ps(y + i)));
  for (; i < n; ++i) y[i] += alpha * x[i];
}

void axpy_f64(double alpha, const double* x, double* y, std::size_t n) {
  const __m256d av = _mm256_set1_pd(alpha);
  std::size_t i = 0;
  for (; i + 8 <= n; i += 8) {
    _mm256_storeu_pd(y + i, _mm256_fmadd_pd(av, _mm256_loadu_pd(x + i), _mm256_loadu_pd(y + i)));
    _mm256_storeu_pd(y + i + 4, _mm256_fmadd_pd(av, _mm256_loadu_pd(x + i + 4), _mm256_loadu_pd(y + i + 4)));
  }
  for (; i + 4 <= n; i += 4)
    _mm256_storeu_pd(y + i, _mm256_fmadd_pd(av, _mm256_loadu_pd(x + i), _mm256_loadu_pd(y + i)));
  for (; i < n; ++i) y[i] += alpha * x[i];
}

void scale_f32(float alpha, float* x, std::size_t n) {
  const __m256 av = _mm256_set1_ps(alpha);
  std::size_t i = 0;
  for (; i + 8 <= n; i += 8)
    _mm256_storeu_ps(x + i, _mm256_mul_ps(av, _mm256_loadu_ps(x + i)));
  for (; i < n; ++i) x[i] *= alpha;
}

void scale_f64(double alpha, double* x, std::size_t n) {
  const __m256d av = _mm256_set1_pd(alpha);
  std::size_t i = 0;
  for (; i + 4 <= n; i += 4)
    _mm256_storeu_pd(x + i, _mm256_mul_pd(av, _mm256_loadu_pd(x + i)));
  for (; i < n; ++i) x[i] *= alpha;
}

// Output chunk of 32 floats stays in registers across all rows and taps;
// the inner loop is one broadcast, four loads, and four FMAs per tap.
void conv1d_acc_f32(const float* in, std::size_t in_stride, std::size_t n_rows,
                    const float* w, std::size_t w_stride, std::size_t taps,
                    float* out, std::size_t n_out) {
  std::size_t wo = 0;
  for (; wo + 32 <= n_out; wo += 32) {
    __m256 a0 = _mm256_loadu_ps(out + wo);
    __m256 a1 = _mm256_loadu_ps(out + wo + 8);
    __m256 a2 = _mm256_loadu_ps(out + wo + 16);
    __m256 a3 = _mm256_loadu_ps(out + wo + 24);
    for (std::size_t r = 0; r < n_rows; ++r) {
      const float* x = in + r * in_stride + wo;
      const float* wr = w + r * w_stride;
      for (std::size_t t = 0; t < taps; ++t) {
        const __m256 wv = _mm256_set1_ps(wr[t]);
        a0 = _mm256_fmadd_ps(wv, _mm256_loadu_ps(x + t), a0);
        a1 = _mm256_fmadd_ps(wv, _mm256_loadu_ps(x + t + 8), a1);
        a2 = _mm256_fmadd_ps(wv, _mm256_loadu_ps(x + t + 16), a2);
        a3 = _mm256_fmadd_ps(wv, _mm256_loadu_ps(x + t + 24), a3);
      }
    }
    _mm256_storeu_ps(out + wo, a0);
    _mm256_storeu_ps(out + wo + 8, a1);
    _mm256_storeu_ps(out + wo + 16, a2);
    _mm256_storeu_ps(out + wo + 24, a3);
  }
  for (; wo + 8 <= n_out; wo += 8) {
    __m256 a0 = _mm256_loadu_ps(out + wo);
    for (std::size_t r = 0; r < n_rows; ++r) {
      const float* x = in + r * in_stride + wo;
      const float* wr = w + r * w_stride;
      for (std::size_t t = 0; t < taps; ++t)
        a0 = _mm256_fmadd_ps(_mm256_set1_ps(wr[t]), _mm256_loadu_ps(x + t), a0);
    }
    _mm256_storeu_ps(out + wo, a0);
  }
  for (; wo < n_out; ++wo) {
    float acc = out[wo];
    for (std::size_t r = 0; r < n_rows; ++r) {
      const float* x = in + r * in_stride + wo;
      const float* wr = w + r * w_stride;
      for (std::size_t t = 0; t < taps; ++t) acc += wr[t] * x[t];
    }
    out[wo] = acc;
  }
}

void conv1d_acc_f64(const double* in, std::size_t in_stride,
                    std::size_t n_rows, const double* w, std::size_t w_stride,
                    std::size_t taps, double* out, std::size_t n_out) {
  std::size_t wo = 0;
  for (; wo + 16 <= n_out; wo += 16) {
    __m256d a0 = _mm256_loadu_pd(out + wo);
    __m256d a1 = _mm256_loadu_pd(out + wo + 4);
    __m256d a2 = _mm256_loadu_pd(out + wo + 8);
    __m256d a3 = _mm256_loadu_pd(out + wo + 12);
    for (std::size_t r = 0; r < n_rows; ++r) {
      const double* x = in + r * in_stride + wo;
      const double* wr = w + r * w_stride;
      for (std::size_t t = 0; t < taps; ++t) {
        const __m256d wv = _mm256_set1_pd(wr[t]);
        a0 = _mm256_fmadd_pd(wv, _mm256_loadu_pd(x + t), a0);
        a1 = _mm256_fmadd_pd(wv, _mm256_loadu_pd(x + t + 4), a1);
        a2 = _mm256_fmadd_pd(wv, _mm256_loadu_pd(x + t + 8), a2);
        a3 = _mm256_fmadd_pd(wv, _mm256_loadu_pd(x + t + 12), a3);
      }
    }
    _mm256_storeu_pd(out + wo, a0);
    _mm256_storeu_pd(out + wo + 4, a1);
    _mm256_storeu_pd(out + wo + 8, a2);
    _mm256_storeu_pd(out + wo + 12, a3);
  }
  for (; wo + 4 <= n_out; wo += 4) {
    __m256d a0 = _mm256_loadu_pd(out + wo);
    for (std::size_t r = 0; r < n_rows; ++r) {
      const double* x = in + r * in_stride + wo;
      const double* wr = w + r * w_stride;
      for (std::size_t t = 0; t < taps; ++t)
        a0 = _mm256_fmadd_pd(_mm256_set1_pd(wr[t]), _mm256_loadu_pd(x + t), a0);
    }
    _mm256_storeu_pd(out + wo, a0);
  }
  for (; wo < n_out; ++wo) {
    double acc = out[wo];
    for (std::size_t r = 0; r < n_rows; ++r) {
      const double* x = in + r * in_stride + wo;
      const double* wr = w + r * w_stride;
      for (std::size_t t = 0; t < taps; ++t) acc += wr[t] * x[t];
    }
    out[wo] = acc;
  }
}

// Tap gradients accumulate per-lane across the dout sweep; no horizontal
// reduction needed.
void conv1d_grad_w_f32(const float* in, const float* dout, std::size_t n_out,
                       std::size_t taps, float* dw) {
  std::size_t tc = 0;
  for (; tc + 8 <= taps; tc += 8) {
    __m256 acc = _mm256_setzero_ps();
    for (std::size_t wo = 0; wo < n_out; ++wo)
      acc = _mm256_fmadd_ps(_mm256_set1_ps(dout[wo]),
                            _mm256_loadu_ps(in + wo + tc), acc);
    _mm256_storeu_ps(dw + tc, _mm256_add_ps(_mm256_loadu_ps(dw + tc), acc));
  }
  for (; tc < taps; ++tc) {
    float acc = 0.0f;
    for (std::size_t wo = 0; wo < n_out; ++wo) acc += in[wo + tc] * dout[wo];
    dw[tc] += acc;
  }
}

void conv1d_grad_w_f64(const double* in, const double* dout, std::size_t n_out,
                       std::size_t taps, double* dw) {
  std::size_t tc = 0;
  for (; tc + 4 <= taps; tc += 4) {
    __m256d acc = _mm256_setzero_pd();
    for (std::size_t wo = 0; wo < n_out; ++wo)
      acc = _mm256_fmadd_pd(_mm256_set1_pd(dout[wo]),
                            _mm256_loadu_pd(in + wo + tc), acc);
    _mm256_storeu_pd(dw + tc, _mm256_add_pd(_mm256_loadu_pd(dw + tc), acc));
  }
  for (; tc < taps; ++tc) {
    double acc = 0.0;
    for (std::size_t wo = 0; wo < n_out; ++wo) acc += in[wo + tc] * dout[wo];
    dw[tc] += acc;
  }
}

// Mirrors the scalar operation order exactly (mul/add only, no FMA), so
// scalar and AVX2 Adam steps produce identical bits.
void adam_update_f32(float* p, const float* g, float* m, float* v,
                     std::size_t n, float lr, float beta1, float beta2,
                     float eps, float bc1, float bc2) {
  const __m256 b1 = _mm256_set1_ps(beta1);
  const __m256 b2 = _mm256_set1_ps(beta2);
  const __m256 om1 = _mm256_set1_ps(1.0f - beta1);
  const __m256 om2 = _mm256_set1_ps(1.0f - beta2);
  const __m256 lrv = _mm256_set1_ps(lr);
  const __m256 epsv = _mm256_set1_ps(eps);
  const __m256 bc1v = _mm256_set1_ps(bc1);
  const __m256 bc2v = _mm256_set1_ps(bc2);
  std::size_t i = 0;
  for (; i + 8 <= n; i += 8) {
    const __m256 gv = _mm256_loadu_ps(g + i);
    __m256 mv = _mm256_loadu_ps(m + i);
    __m256 vv = _mm256_loadu_ps(v + i);
    mv = _mm256_add_ps(_mm256_mul_ps(b1, mv), _mm256_mul_ps(om1, gv));
    vv = _mm256_add_ps(_mm256_mul_ps(b2, vv),
                       _mm256_mul_ps(_mm256_mul_ps(om2, gv), gv));
    _mm256_storeu_ps(m + i, mv);
    _mm256_storeu_ps(v + i, vv);
    const __m256 mhat = _mm256_mul_ps(mv, bc1v);
    const __m256 vhat = _mm256_mul_ps(vv, bc2v);
    const __m256 step = _mm256_div_ps(
        _mm256_mul_ps(lrv, mhat), _mm256_add_ps(_mm256_sqrt_ps(vhat), epsv));
    _mm256_storeu_ps(p + i, _mm256_sub_ps(_mm256_loadu_ps(p + i), step));
  }
  const Ops<float>& ref = scalar::ops_f32;
  if (i < n)
    ref.adam_update(p + i, g + i, m + i, v + i, n - i, lr, beta1, beta2, eps,
                    bc1, bc2);
}

void adam_update_f64(double* p, const double* g, double* m, double* v,
                     std::size_t n, double lr, double beta1, double beta2,
                     double eps, double bc1, double bc2) {
  const __m256d b1 = _mm256_set1_pd(beta1);
  const __m256d b2 = _mm256_set1_pd(beta2);
  const __m256d om1 = _mm256_set1_pd(1.0 - beta1);
  const __m256d om2 = _mm256_set1_pd(1.0 - beta2);
  const __m256d lrv = _mm256_set1_pd(lr);
  const __m256d epsv = _mm256_set1_pd(eps);
  const __m256d bc1v = _mm256_set1_pd(bc1);
  const __m256d bc2v = _mm256_set1_pd(bc2);
  std::size_t i = 0;
  for (; i + 4 <= n; i += 4) {
    const __m256d gv = _mm256_loadu_pd(g + i);
    __m256d mv = _mm256_loadu_pd(m + i);
    __m256d vv = _mm256_loadu_pd(v + i);
    mv = _mm256_add_pd(_mm256_mul_pd(b1, mv), _mm256_mul_pd(om1, gv));
    vv = _mm256_add_pd(_mm256_mul_pd(b2, vv),
                       _mm256_mul_pd(_mm256_mul_pd(om2, gv), gv));
    _mm256_storeu_pd(m + i, mv);
    _mm256_storeu_pd(v + i, vv);
    const __m256d mhat = _mm256_mul_pd(mv, bc1v);
    const __m256d vhat = _mm256_mul_pd(vv, bc2v);
    const __m256d step = _mm256_div_pd(
        _mm256_mul_pd(lrv, mhat), _mm256_add_pd(_mm256_sqrt_pd(vhat), epsv));
    _mm256_storeu_pd(p + i, _mm256_sub_pd(_mm256_loadu_pd(p + i), step));
  }
  const Ops<double>& ref = scalar::ops_f64;
  if (i < n)
    ref.adam_update(p + i, g + i, m + i, v + i, n - i, lr, beta1, beta2, eps,
                    bc1, bc2);
}

}  // namespace

const Ops<float> ops_f32 = {&dot_f32,          &axpy_f32,
                            &scale_f32,        &conv1d_acc_f32,
                            &conv1d_grad_w_f32, &adam_update_f32};
const Ops<double> ops_f64 = {&dot_f64,          &axpy_f64,
                             &scale_f64,        &conv1d_acc_f64,
                             &conv1d_grad_w_f64, &adam_update_f64};

}  // namespace miemph::kernels::avx2
