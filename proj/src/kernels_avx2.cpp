// Compiled with -mavx2 -mfma. Nothing in here may run before the dispatcher
// has confirmed CPU support.
#include <immintrin.h>

#include "kgp/kernels.hpp"

namespace kgp::kernels {
namespace {

inline double hsum(__m256d v) {
  const __m128d lo = _mm256_castpd256_pd128(v);
  const __m128d hi = _mm256_extractf128_pd(v, 1);
  const __m128d s = _mm_add_pd(lo, hi);
  return _mm_cvtsd_f64(_mm_add_sd(s, _mm_unpackhi_pd(s, s)));
}

inline __m256d lrelu(__m256d z, __m256d slope) {
  const __m256d positive = _mm256_cmp_pd(z, _mm256_setzero_pd(), _CMP_GT_OQ);
  return _mm256_blendv_pd(_mm256_mul_pd(z, slope), z, positive);
}

inline __m256d lrelu_grad(__m256d z, __m256d slope) {
  const __m256d positive = _mm256_cmp_pd(z, _mm256_setzero_pd(), _CMP_GT_OQ);
  return _mm256_blendv_pd(slope, _mm256_set1_pd(1.0), positive);
}

double dot_avx2(const double* a, const double* b, std::size_t n) {
  __m256d acc0 = _mm256_setzero_pd();
  __m256d acc1 = _mm256_setzero_pd();
  std::size_t k = 0;
  for (; k + 8 <= n; k += 8) {
    acc0 = _mm256_fmadd_pd(_mm256_loadu_pd(a + k), _mm256_loadu_pd(b + k), acc0);
    acc1 = _mm256_fmadd_pd(_mm256_loadu_pd(a + k + 4), _mm256_loadu_pd(b + k + 4), acc1);
  }
  for (; k + 4 <= n; k += 4) {
    acc0 = _mm256_fmadd_pd(_mm256_loadu_pd(a + k), _mm256_loadu_pd(b + k), acc0);
  }
  double acc = hsum(_mm256_add_pd(acc0, acc1));
  for (; k < n; ++k) acc += a[k] * b[k];
  return acc;
}

void axpy_avx2(double alpha, const double* x, double* y, std::size_t n) {
  const __m256d va = _mm256_set1_pd(alpha);
  std::size_t k = 0;
  for (; k + 4 <= n; k += 4) {
    _mm256_storeu_pd(y + k, _mm256_fmadd_pd(va, _mm256_loadu_pd(x + k), _mm256_loadu_pd(y + k)));
  }
  for (; k < n; ++k) y[k] += alpha * x[k];
}

double gated_dot_avx2(const double* u, const double* a, const double* b, std::size_t n,
                      double slope) {
  const __m256d vs = _mm256_set1_pd(slope);
  __m256d acc = _mm256_setzero_pd();
  std::size_t k = 0;
  for (; k + 4 <= n; k += 4) {
    const __m256d z = _mm256_mul_pd(_mm256_loadu_pd(a + k), _mm256_loadu_pd(b + k));
    acc = _mm256_fmadd_pd(_mm256_loadu_pd(u + k), lrelu(z, vs), acc);
  }
  double total = hsum(acc);
  for (; k < n; ++k) total += u[k] * leaky_relu(a[k] * b[k], slope);
  return total;
}

void gated_dot_backward_avx2(double coef, const double* u, const double* a, const double* b,
                             std::size_t n, double slope, double* gu, double* ga, double* gb) {
  const __m256d vs = _mm256_set1_pd(slope);
  const __m256d vc = _mm256_set1_pd(coef);
  std::size_t k = 0;
  for (; k + 4 <= n; k += 4) {
    const __m256d va = _mm256_loadu_pd(a + k);
    const __m256d vb = _mm256_loadu_pd(b + k);
    const __m256d z = _mm256_mul_pd(va, vb);
    const __m256d gz = _mm256_mul_pd(_mm256_mul_pd(vc, _mm256_loadu_pd(u + k)), lrelu_grad(z, vs));
    _mm256_storeu_pd(gu + k, _mm256_fmadd_pd(vc, lrelu(z, vs), _mm256_loadu_pd(gu + k)));
    _mm256_storeu_pd(ga + k, _mm256_fmadd_pd(gz, vb, _mm256_loadu_pd(ga + k)));
    _mm256_storeu_pd(gb + k, _mm256_fmadd_pd(gz, va, _mm256_loadu_pd(gb + k)));
  }
  for (; k < n; ++k) {
    const double z = a[k] * b[k];
    const double gz = coef * u[k] * leaky_relu_grad(z, slope);
    gu[k] += coef * leaky_relu(z, slope);
    ga[k] += gz * b[k];
    gb[k] += gz * a[k];
  }
}

}  // namespace

const KernelTable& avx2_table() {
  static const KernelTable table{"avx2", dot_avx2, axpy_avx2, gated_dot_avx2,
                                 gated_dot_backward_avx2};
  return table;
}

}  // namespace kgp::kernels
