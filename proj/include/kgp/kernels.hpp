#pragma once

// Data-parallel inner loops shared by the recommender, the graph encoder and
// the policy network. Each kernel has a portable scalar reference and an
// AVX2/FMA variant; the variant is picked once at startup from CPUID and can
// be pinned with KGP_SIMD=scalar.

#include <cassert>
#include <cstddef>
#include <span>
#include <string_view>

namespace kgp::kernels {

struct KernelTable {
  std::string_view name;

  // sum_k a[k] * b[k]
  double (*dot)(const double* a, const double* b, std::size_t n);

  // y[k] += alpha * x[k]
  void (*axpy)(double alpha, const double* x, double* y, std::size_t n);

  // sum_k u[k] * lrelu(a[k] * b[k])
  double (*gated_dot)(const double* u, const double* a, const double* b,
                      std::size_t n, double slope);

  // Reverse of gated_dot scaled by `coef`:
  //   gu += coef * lrelu(a*b)
  //   ga += coef * u * lrelu'(a*b) * b
  //   gb += coef * u * lrelu'(a*b) * a
  void (*gated_dot_backward)(double coef, const double* u, const double* a,
                             const double* b, std::size_t n, double slope,
                             double* gu, double* ga, double* gb);
};

const KernelTable& scalar();

// nullptr when the build or the CPU has no AVX2+FMA.
const KernelTable* avx2();

const KernelTable& active();

// Pins the table used by the span helpers below. Tests use this to run the
// same workload through both variants.
void set_active(const KernelTable& table);

inline double dot(std::span<const double> a, std::span<const double> b) {
  assert(a.size() == b.size());
  return active().dot(a.data(), b.data(), a.size());
}

inline void axpy(double alpha, std::span<const double> x, std::span<double> y) {
  assert(x.size() == y.size());
  active().axpy(alpha, x.data(), y.data(), x.size());
}

inline double gated_dot(std::span<const double> u, std::span<const double> a,
                        std::span<const double> b, double slope) {
  assert(u.size() == a.size() && a.size() == b.size());
  return active().gated_dot(u.data(), a.data(), b.data(), u.size(), slope);
}

inline void gated_dot_backward(double coef, std::span<const double> u,
                               std::span<const double> a, std::span<const double> b,
                               double slope, std::span<double> gu,
                               std::span<double> ga, std::span<double> gb) {
  assert(u.size() == a.size() && a.size() == b.size());
  assert(gu.size() == u.size() && ga.size() == u.size() && gb.size() == u.size());
  active().gated_dot_backward(coef, u.data(), a.data(), b.data(), u.size(), slope,
                              gu.data(), ga.data(), gb.data());
}

inline double leaky_relu(double x, double slope) { return x > 0.0 ? x : slope * x; }
inline double leaky_relu_grad(double x, double slope) { return x > 0.0 ? 1.0 : slope; }

}  // namespace kgp::kernels
