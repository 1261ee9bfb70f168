// Copyright 2026 The dptd Authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//      http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#ifndef DPTD_LINALG_HPP
#define DPTD_LINALG_HPP

#include <cstddef>
#include <span>
#include <vector>

namespace dptd {

using Vector = std::vector<double>;

// Dense row-major matrix. Sized for the parameter dimensions that appear here
// (d up to a few hundred); no attempt at blocking or vectorized kernels.
class Matrix {
 public:
  Matrix() = default;
  Matrix(std::size_t rows, std::size_t cols)
      : rows_(rows), cols_(cols), a_(rows * cols, 0.0) {}

  static Matrix identity(std::size_t n);

  double& operator()(std::size_t i, std::size_t j) { return a_[i * cols_ + j]; }
  double operator()(std::size_t i, std::size_t j) const {
    return a_[i * cols_ + j];
  }

  std::size_t rows() const { return rows_; }
  std::size_t cols() const { return cols_; }
  std::span<const double> row(std::size_t i) const {
    return {a_.data() + i * cols_, cols_};
  }
  const std::vector<double>& data() const { return a_; }

 private:
  std::size_t rows_ = 0, cols_ = 0;
  std::vector<double> a_;
};

double dot(std::span<const double> x, std::span<const double> y);
double norm2(std::span<const double> x);
double norm_inf(std::span<const double> x);
// y += a * x
void axpy(double a, std::span<const double> x, std::span<double> y);
void scale(double a, std::span<double> x);
Vector sub(std::span<const double> x, std::span<const double> y);

// y = A x
Vector matvec(const Matrix& a, std::span<const double> x);
// y = A^T x
Vector matvec_t(const Matrix& a, std::span<const double> x);

double max_abs_asymmetry(const Matrix& a);

// Solves A x = b for symmetric positive definite A by Cholesky.
// Throws SingularSystem when a pivot degenerates.
Vector solve_spd(const Matrix& a, std::span<const double> b);

// Solves A x = b by LU with partial pivoting. Throws SingularSystem.
Vector solve_lu(Matrix a, Vector b);

}  // namespace dptd

#endif  // DPTD_LINALG_HPP
