#include "kgp/kernels.hpp"

namespace kgp::kernels {
namespace {

double dot_scalar(const double* a, const double* b, std::size_t n) {
  double acc = 0.0;
  for (std::size_t k = 0; k < n; ++k) acc += a[k] * b[k];
  return acc;
}

void axpy_scalar(double alpha, const double* x, double* y, std::size_t n) {
  for (std::size_t k = 0; k < n; ++k) y[k] += alpha * x[k];
}

double gated_dot_scalar(const double* u, const double* a, const double* b,
                        std::size_t n, double slope) {
  double acc = 0.0;
  for (std::size_t k = 0; k < n; ++k) acc += u[k] * leaky_relu(a[k] * b[k], slope);
  return acc;
}

void gated_dot_backward_scalar(double coef, const double* u, const double* a,
                               const double* b, std::size_t n, double slope,
                               double* gu, double* ga, double* gb) {
  for (std::size_t k = 0; k < n; ++k) {
    const double z = a[k] * b[k];
    const double gz = coef * u[k] * leaky_relu_grad(z, slope);
    gu[k] += coef * leaky_relu(z, slope);
    ga[k] += gz * b[k];
    gb[k] += gz * a[k];
  }
}

}  // namespace

const KernelTable& scalar() {
  static const KernelTable table{"scalar", dot_scalar, axpy_scalar, gated_dot_scalar,
                                 gated_dot_backward_scalar};
  return table;
}

}  // namespace kgp::kernels
