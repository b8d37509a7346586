#include "kgp/adam.hpp"

#include <cmath>

#include "kgp/binary_io.hpp"

namespace kgp {

void AdamState::update_row(std::size_t r, std::span<double> param, std::span<const double> grad,
                           double lr) {
  const double b1 = config_.beta1;
  const double b2 = config_.beta2;
  const double t = static_cast<double>(step_ == 0 ? 1 : step_);
  const double c1 = 1.0 - std::pow(b1, t);
  const double c2 = 1.0 - std::pow(b2, t);
  auto m = m_.row(r);
  auto v = v_.row(r);
  for (std::size_t k = 0; k < param.size(); ++k) {
    m[k] = b1 * m[k] + (1.0 - b1) * grad[k];
    v[k] = b2 * v[k] + (1.0 - b2) * grad[k] * grad[k];
    const double m_hat = m[k] / c1;
    const double v_hat = v[k] / c2;
    param[k] -= lr * m_hat / (std::sqrt(v_hat) + config_.epsilon);
  }
}

void AdamState::update_all(Matrix& param, const Matrix& grad, double lr) {
  for (std::size_t r = 0; r < param.rows(); ++r) update_row(r, param.row(r), grad.row(r), lr);
}

void AdamState::save(std::ostream& out) const {
  io::write_pod(out, config_.beta1);
  io::write_pod(out, config_.beta2);
  io::write_pod(out, config_.epsilon);
  io::write_pod(out, step_);
  io::write_matrix(out, m_);
  io::write_matrix(out, v_);
}

void AdamState::load(std::istream& in) {
  config_.beta1 = io::read_pod<double>(in);
  config_.beta2 = io::read_pod<double>(in);
  config_.epsilon = io::read_pod<double>(in);
  step_ = io::read_pod<std::uint64_t>(in);
  m_ = io::read_matrix(in);
  v_ = io::read_matrix(in);
}

}  // namespace kgp
