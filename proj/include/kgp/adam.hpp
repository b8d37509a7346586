#pragma once

#include <cstdint>
#include <iosfwd>
#include <span>

#include "kgp/matrix.hpp"

namespace kgp {

struct AdamConfig {
  double beta1 = 0.9;
  double beta2 = 0.999;
  double epsilon = 1e-8;

  bool operator==(const AdamConfig&) const = default;
};

// Adam moments for one parameter table. Rows are updated independently so
// embedding tables can take lazy updates that leave untouched rows intact;
// bias correction uses the shared step counter advanced by begin_step().
class AdamState {
 public:
  AdamState() = default;
  AdamState(std::size_t rows, std::size_t cols, AdamConfig config = {})
      : config_(config), m_(rows, cols), v_(rows, cols) {}

  void begin_step() { ++step_; }
  std::uint64_t step() const noexcept { return step_; }
  std::size_t rows() const noexcept { return m_.rows(); }
  std::size_t cols() const noexcept { return m_.cols(); }

  // param -= lr * m_hat / (sqrt(v_hat) + eps) for a single row.
  void update_row(std::size_t r, std::span<double> param, std::span<const double> grad, double lr);

  // Dense update over every row.
  void update_all(Matrix& param, const Matrix& grad, double lr);

  void save(std::ostream& out) const;
  void load(std::istream& in);

  bool operator==(const AdamState&) const = default;

 private:
  AdamConfig config_;
  Matrix m_;
  Matrix v_;
  std::uint64_t step_ = 0;
};

}  // namespace kgp
