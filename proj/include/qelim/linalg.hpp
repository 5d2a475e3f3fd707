// Copyright 2026 The qelim Authors.
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#pragma once

#include <cstddef>
#include <vector>

#include "qelim/matrix.hpp"
#include "qelim/rng.hpp"

namespace qelim::linalg {

/// Largest 1-norm condition number accepted by invert()/solve() by default.
inline constexpr double kMaxCondition = 1e12;

/// LU factorisation with partial (row) pivoting, P*A = L*U.
class LuDecomposition {
 public:
  /// Throws SingularMatrixError when a pivot is zero to working precision.
  explicit LuDecomposition(const Matrix& a);

  std::size_t size() const noexcept { return lu_.rows(); }
  /// Smallest pivot magnitude |U_ii|.
  double min_pivot() const noexcept { return min_pivot_; }

  /// A^{-1} B.
  Matrix solve(const Matrix& b) const;
  /// A^{-T} B.
  Matrix solve_transposed(const Matrix& b) const;
  Matrix inverse() const;

  /// Hager/Higham estimate of ||A^{-1}||_1 (a lower bound, usually exact).
  double inverse_norm1_estimate() const;
  /// ||A||_1 * estimate(||A^{-1}||_1).
  double condition_estimate() const { return norm1_ * inverse_norm1_estimate(); }

 private:
  void solve_in_place(double* x) const;
  void solve_transposed_in_place(double* x) const;

  Matrix lu_;
  std::vector<std::size_t> perm_;
  double min_pivot_ = 0.0;
  double norm1_ = 0.0;
};

/// a^{-1}. Throws SingularMatrixError if singular or the 1-norm condition
/// estimate exceeds max_cond.
Matrix invert(const Matrix& a, double max_cond = kMaxCondition);
/// a^{-1} b with the same conditioning gate as invert().
Matrix solve(const Matrix& a, const Matrix& b, double max_cond = kMaxCondition);
/// b a^{-1}.
Matrix solve_right(const Matrix& b, const Matrix& a, double max_cond = kMaxCondition);

double condition_estimate_1(const Matrix& a);
/// sigma_max / sigma_min from power iteration on a and a^{-1}.
double condition_number_2(const Matrix& a);

/// Cholesky solve of a x = b for symmetric positive definite a.
Matrix solve_spd(const Matrix& a, const Matrix& b);

/// d x (d-1) matrix whose columns are an orthonormal basis of {z : sum(z) = 0},
/// taken from the Householder reflector that maps 1/sqrt(d) onto -e_1.
Matrix orthonormal_basis_zero_mean(std::size_t d);

/// Largest singular value by power iteration on a^T a.
double spectral_norm(const Matrix& a);

/// i.i.d. N(0, scale^2) entries, row-major fill order.
Matrix gaussian_matrix(std::size_t rows, std::size_t cols, double scale, Rng& rng);

/// Numerical rank by Gaussian elimination with complete pivoting; pivots
/// below rel_tol * max|a| count as zero.
std::size_t rank(const Matrix& a, double rel_tol = 1e-10);

}  // namespace qelim::linalg
