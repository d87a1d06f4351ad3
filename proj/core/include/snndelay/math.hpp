#pragma once

#include <cstddef>
#include <functional>
#include <span>
#include <vector>

namespace snndelay {

/// Dense row-major matrix of doubles. Used for every parameter tensor in the
/// engine, including 1 x n rows for per-neuron parameters.
class Matrix {
 public:
  Matrix() = default;
  Matrix(std::size_t rows, std::size_t cols, double fill = 0.0);
  Matrix(std::size_t rows, std::size_t cols, std::vector<double> data);

  static Matrix identity(std::size_t n);

  std::size_t rows() const { return rows_; }
  std::size_t cols() const { return cols_; }
  std::size_t size() const { return data_.size(); }
  bool empty() const { return data_.empty(); }

  double& operator()(std::size_t r, std::size_t c) { return data_[r * cols_ + c]; }
  double operator()(std::size_t r, std::size_t c) const { return data_[r * cols_ + c]; }

  std::span<double> row(std::size_t r) { return {data_.data() + r * cols_, cols_}; }
  std::span<const double> row(std::size_t r) const { return {data_.data() + r * cols_, cols_}; }

  std::vector<double>& data() { return data_; }
  const std::vector<double>& data() const { return data_; }

  void fill(double v);
  bool all_finite() const;

  friend bool operator==(const Matrix&, const Matrix&) = default;

 private:
  std::size_t rows_ = 0;
  std::size_t cols_ = 0;
  std::vector<double> data_;
};

/// out[i] = sum_j m(i, j) * x[j]. Throws std::invalid_argument on a
/// dimension mismatch.
std::vector<double> matvec(const Matrix& m, std::span<const double> x);

double dot(std::span<const double> a, std::span<const double> b);

Matrix transpose(const Matrix& m);

using ScalarFunction = std::function<double(std::span<const double>)>;

/// Central differences: out[i] = (f(x + eps e_i) - f(x - eps e_i)) / (2 eps).
/// Throws std::domain_error naming the coordinate if f is non-finite there.
std::vector<double> finite_diff_grad(const ScalarFunction& f, std::span<const double> x,
                                     double eps);

/// |a - b| / max(|a|, |b|, floor). The floor keeps entries whose true value
/// is zero from dominating the error through finite-difference round-off.
/// One Richardson step on central differences: (4 D(eps/2) - D(eps)) / 3,
/// truncation error O(eps^4).
std::vector<double> richardson_diff_grad(const ScalarFunction& f, std::span<const double> x,
                                         double eps);

double relative_error(double a, double b, double floor = 1e-6);

}  // namespace snndelay
