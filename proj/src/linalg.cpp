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

#include "qelim/linalg.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <string>

#include "qelim/error.hpp"
#include "qelim/kernels.hpp"

namespace qelim::linalg {
namespace {

constexpr double kEps = std::numeric_limits<double>::epsilon();

void require_square(const Matrix& a, const char* op) {
  require(a.is_square() && a.rows() > 0, ErrorKind::kShape,
          std::string(op) + ": expected a non-empty square matrix, got " + std::to_string(a.rows()) + "x" +
              std::to_string(a.cols()));
}

double norm1(const Matrix& a) {
  double best = 0.0;
  for (std::size_t c = 0; c < a.cols(); ++c) {
    double s = 0.0;
    for (std::size_t r = 0; r < a.rows(); ++r) s += std::abs(a(r, c));
    best = std::max(best, s);
  }
  return best;
}

double abs_sum(const Matrix& x) {
  double s = 0.0;
  for (double v : x.values()) s += std::abs(v);
  return s;
}

void normalize(Vector& v) {
  const double n = norm2(v);
  for (double& x : v) x /= n;
}

struct PowerResult {
  double lambda = 0.0;
  Vector v;
};

// Power iteration for the top eigenpair of a^T a from the given unit start.
PowerResult power_iterate(const Matrix& a, const Matrix& at, Vector v) {
  constexpr int kMaxIter = 10000;
  constexpr double kRelTol = 1e-13;
  PowerResult res;
  double prev = 0.0;
  for (int it = 0; it < kMaxIter; ++it) {
    const Vector w = matvec(a, v);
    const double lambda = dot(w, w);
    Vector u = matvec(at, w);
    const double nu = norm2(u);
    res.lambda = lambda;
    res.v = v;
    if (nu == 0.0) break;
    for (double& x : u) x /= nu;
    v = std::move(u);
    if (it > 0 && std::abs(lambda - prev) <= kRelTol * lambda) break;
    prev = lambda;
  }
  return res;
}

}  // namespace

LuDecomposition::LuDecomposition(const Matrix& a) : lu_(a), perm_(a.rows()) {
  require_square(a, "LU");
  const std::size_t n = a.rows();
  require(all_finite(a), ErrorKind::kInvalidArgument, "LU: non-finite entries");
  std::iota(perm_.begin(), perm_.end(), std::size_t{0});
  norm1_ = norm1(a);
  const double tiny = static_cast<double>(n) * kEps * max_abs(a);
  min_pivot_ = std::numeric_limits<double>::infinity();
  const auto& k = kernels::active();

  for (std::size_t col = 0; col < n; ++col) {
    std::size_t piv = col;
    for (std::size_t r = col + 1; r < n; ++r)
      if (std::abs(lu_(r, col)) > std::abs(lu_(piv, col))) piv = r;
    const double p = std::abs(lu_(piv, col));
    min_pivot_ = std::min(min_pivot_, p);
    if (p == 0.0 || p <= tiny)
      throw SingularMatrixError(p, "zero pivot " + std::to_string(p) + " at column " + std::to_string(col));
    if (piv != col) {
      std::swap_ranges(lu_.row(col).begin(), lu_.row(col).end(), lu_.row(piv).begin());
      std::swap(perm_[col], perm_[piv]);
    }
    const double inv = 1.0 / lu_(col, col);
    for (std::size_t r = col + 1; r < n; ++r) {
      const double l = lu_(r, col) * inv;
      lu_(r, col) = l;
      if (l != 0.0) k.axpy(-l, lu_.data() + col * n + col + 1, lu_.data() + r * n + col + 1, n - col - 1);
    }
  }
}

Matrix LuDecomposition::solve(const Matrix& b) const {
  const std::size_t n = size();
  require(b.rows() == n, ErrorKind::kShape, "LU solve: right-hand side has wrong row count");
  const std::size_t m = b.cols();
  Matrix x(n, m);
  for (std::size_t i = 0; i < n; ++i) std::copy(b.row(perm_[i]).begin(), b.row(perm_[i]).end(), x.row(i).begin());
  const auto& k = kernels::active();
  // L y = P b, unit lower triangular.
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = 0; j < i; ++j)
      if (lu_(i, j) != 0.0) k.axpy(-lu_(i, j), x.row(j).data(), x.row(i).data(), m);
  // U x = y.
  for (std::size_t ii = n; ii-- > 0;) {
    for (std::size_t j = ii + 1; j < n; ++j)
      if (lu_(ii, j) != 0.0) k.axpy(-lu_(ii, j), x.row(j).data(), x.row(ii).data(), m);
    const double d = lu_(ii, ii);
    for (double& v : x.row(ii)) v /= d;
  }
  return x;
}

Matrix LuDecomposition::solve_transposed(const Matrix& b) const {
  const std::size_t n = size();
  require(b.rows() == n, ErrorKind::kShape, "LU solve: right-hand side has wrong row count");
  const std::size_t m = b.cols();
  Matrix w = b;
  const auto& k = kernels::active();
  // U^T y = b, lower triangular.
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = 0; j < i; ++j)
      if (lu_(j, i) != 0.0) k.axpy(-lu_(j, i), w.row(j).data(), w.row(i).data(), m);
    const double d = lu_(i, i);
    for (double& v : w.row(i)) v /= d;
  }
  // L^T z = y, unit upper triangular.
  for (std::size_t ii = n; ii-- > 0;)
    for (std::size_t j = ii + 1; j < n; ++j)
      if (lu_(j, ii) != 0.0) k.axpy(-lu_(j, ii), w.row(j).data(), w.row(ii).data(), m);
  Matrix x(n, m);
  for (std::size_t i = 0; i < n; ++i) std::copy(w.row(i).begin(), w.row(i).end(), x.row(perm_[i]).begin());
  return x;
}

Matrix LuDecomposition::inverse() const { return solve(Matrix::identity(size())); }

double LuDecomposition::inverse_norm1_estimate() const {
  const std::size_t n = size();
  Matrix x(n, 1, 1.0 / static_cast<double>(n));
  double est = 0.0;
  std::size_t last_j = n;
  for (int iter = 0; iter < 5; ++iter) {
    const Matrix y = solve(x);
    est = std::max(est, abs_sum(y));
    Matrix xi(n, 1);
    for (std::size_t i = 0; i < n; ++i) xi(i, 0) = y(i, 0) >= 0.0 ? 1.0 : -1.0;
    const Matrix z = solve_transposed(xi);
    std::size_t j = 0;
    for (std::size_t i = 1; i < n; ++i)
      if (std::abs(z(i, 0)) > std::abs(z(j, 0))) j = i;
    double ztx = 0.0;
    for (std::size_t i = 0; i < n; ++i) ztx += z(i, 0) * x(i, 0);
    if (std::abs(z(j, 0)) <= ztx || j == last_j) break;
    x = Matrix(n, 1);
    x(j, 0) = 1.0;
    last_j = j;
  }
  // Higham's alternating test vector guards against the cases Hager misses.
  Matrix alt(n, 1);
  for (std::size_t i = 0; i < n; ++i) {
    const double mag = 1.0 + (n > 1 ? static_cast<double>(i) / static_cast<double>(n - 1) : 0.0);
    alt(i, 0) = (i % 2 == 0) ? mag : -mag;
  }
  est = std::max(est, 2.0 * abs_sum(solve(alt)) / (3.0 * static_cast<double>(n)));
  return est;
}

Matrix invert(const Matrix& a, double max_cond) { return solve(a, Matrix::identity(a.rows()), max_cond); }

Matrix solve(const Matrix& a, const Matrix& b, double max_cond) {
  require_square(a, "solve");
  const LuDecomposition lu(a);
  const double cond = lu.condition_estimate();
  if (!(cond <= max_cond))
    throw SingularMatrixError(lu.min_pivot(), "condition estimate " + std::to_string(cond) +
                                                  " exceeds limit " + std::to_string(max_cond));
  return lu.solve(b);
}

Matrix solve_right(const Matrix& b, const Matrix& a, double max_cond) {
  // b a^{-1} = (a^{-T} b^T)^T
  require_square(a, "solve_right");
  const LuDecomposition lu(a);
  const double cond = lu.condition_estimate();
  if (!(cond <= max_cond))
    throw SingularMatrixError(lu.min_pivot(), "condition estimate " + std::to_string(cond) +
                                                  " exceeds limit " + std::to_string(max_cond));
  return transpose(lu.solve_transposed(transpose(b)));
}

double condition_estimate_1(const Matrix& a) { return LuDecomposition(a).condition_estimate(); }

double condition_number_2(const Matrix& a) {
  require_square(a, "condition_number_2");
  const LuDecomposition lu(a);
  return spectral_norm(a) * spectral_norm(lu.inverse());
}

Matrix solve_spd(const Matrix& a, const Matrix& b) {
  require_square(a, "solve_spd");
  const std::size_t n = a.rows();
  require(b.rows() == n, ErrorKind::kShape, "solve_spd: right-hand side has wrong row count");
  const double scale = max_abs(a);
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = i + 1; j < n; ++j)
      if (std::abs(a(i, j) - a(j, i)) > 1e-10 * scale)
        fail(ErrorKind::kNotPositiveDefinite, "matrix is not symmetric");

  Matrix l(n, n);
  for (std::size_t j = 0; j < n; ++j) {
    double d = a(j, j);
    for (std::size_t p = 0; p < j; ++p) d -= l(j, p) * l(j, p);
    if (!(d > 0.0)) fail(ErrorKind::kNotPositiveDefinite, "non-positive pivot at row " + std::to_string(j));
    const double ljj = std::sqrt(d);
    l(j, j) = ljj;
    for (std::size_t i = j + 1; i < n; ++i) {
      double s = a(i, j);
      for (std::size_t p = 0; p < j; ++p) s -= l(i, p) * l(j, p);
      l(i, j) = s / ljj;
    }
  }

  const std::size_t m = b.cols();
  Matrix x = b;
  const auto& k = kernels::active();
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = 0; j < i; ++j) k.axpy(-l(i, j), x.row(j).data(), x.row(i).data(), m);
    for (double& v : x.row(i)) v /= l(i, i);
  }
  for (std::size_t ii = n; ii-- > 0;) {
    for (std::size_t j = ii + 1; j < n; ++j) k.axpy(-l(j, ii), x.row(j).data(), x.row(ii).data(), m);
    for (double& v : x.row(ii)) v /= l(ii, ii);
  }
  return x;
}

Matrix orthonormal_basis_zero_mean(std::size_t d) {
  require(d >= 2, ErrorKind::kDimensionTooSmall, "zero-mean basis needs d >= 2, got " + std::to_string(d));
  // u = w + e_1 with w = 1/sqrt(d); H = I - 2 u u^T / (u^T u) sends w to -e_1,
  // so columns 2..d of H span the orthogonal complement of the ones vector.
  const double w = 1.0 / std::sqrt(static_cast<double>(d));
  Vector u(d, w);
  u[0] += 1.0;
  const double uu = dot(u, u);
  Matrix q(d, d - 1);
  for (std::size_t r = 0; r < d; ++r)
    for (std::size_t c = 1; c < d; ++c) q(r, c - 1) = (r == c ? 1.0 : 0.0) - 2.0 * u[r] * u[c] / uu;
  return q;
}

double spectral_norm(const Matrix& a) {
  const std::size_t n = a.cols();
  if (a.empty() || max_abs(a) == 0.0) return 0.0;
  const Matrix at = transpose(a);

  Vector start(n, 1.0 / std::sqrt(static_cast<double>(n)));
  PowerResult best = power_iterate(a, at, start);

  // The all-ones start can be (numerically) orthogonal to the top singular
  // direction. A second run from an alternating vector, deflated against the
  // first result, catches that; its Rayleigh quotient never overshoots.
  if (n > 1) {
    Vector alt(n);
    for (std::size_t i = 0; i < n; ++i) alt[i] = (i % 2 == 0 ? 1.0 : -1.0) * (1.0 + static_cast<double>(i));
    if (best.v.size() == n) {
      const double proj = dot(alt, best.v);
      for (std::size_t i = 0; i < n; ++i) alt[i] -= proj * best.v[i];
    }
    if (norm2(alt) > 0.0) {
      normalize(alt);
      const PowerResult second = power_iterate(a, at, std::move(alt));
      if (second.lambda > best.lambda * (1.0 + 1e-12)) best = second;
    }
  }
  return std::sqrt(best.lambda);
}

Matrix gaussian_matrix(std::size_t rows, std::size_t cols, double scale, Rng& rng) {
  require(scale > 0.0 && std::isfinite(scale), ErrorKind::kInvalidArgument, "gaussian_matrix: scale must be > 0");
  Matrix m(rows, cols);
  for (double& v : m.values()) v = scale * rng.normal();
  return m;
}

std::size_t rank(const Matrix& a, double rel_tol) {
  Matrix w = a;
  const std::size_t rows = w.rows();
  const std::size_t cols = w.cols();
  const double tol = rel_tol * max_abs(a);
  std::size_t r = 0;
  for (; r < std::min(rows, cols); ++r) {
    std::size_t pr = r;
    std::size_t pc = r;
    double best = 0.0;
    for (std::size_t i = r; i < rows; ++i)
      for (std::size_t j = r; j < cols; ++j)
        if (std::abs(w(i, j)) > best) {
          best = std::abs(w(i, j));
          pr = i;
          pc = j;
        }
    if (best <= tol || best == 0.0) break;
    if (pr != r) std::swap_ranges(w.row(r).begin(), w.row(r).end(), w.row(pr).begin());
    if (pc != r)
      for (std::size_t i = 0; i < rows; ++i) std::swap(w(i, r), w(i, pc));
    for (std::size_t i = r + 1; i < rows; ++i) {
      const double f = w(i, r) / w(r, r);
      for (std::size_t j = r; j < cols; ++j) w(i, j) -= f * w(r, j);
    }
  }
  return r;
}

}  // namespace qelim::linalg
