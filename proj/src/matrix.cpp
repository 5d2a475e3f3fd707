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

#include "qelim/matrix.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include "qelim/error.hpp"
#include "qelim/kernels.hpp"

namespace qelim {
namespace {

std::string dims(const Matrix& a) { return std::to_string(a.rows()) + "x" + std::to_string(a.cols()); }

void require_same_shape(const Matrix& a, const Matrix& b, const char* op) {
  require(a.rows() == b.rows() && a.cols() == b.cols(), ErrorKind::kShape,
          std::string(op) + ": " + dims(a) + " vs " + dims(b));
}

}  // namespace

Matrix::Matrix(std::size_t rows, std::size_t cols, std::vector<double> data)
    : rows_(rows), cols_(cols), data_(std::move(data)) {
  require(data_.size() == rows * cols, ErrorKind::kShape,
          "data length " + std::to_string(data_.size()) + " does not match " + std::to_string(rows) + "x" +
              std::to_string(cols));
}

Matrix::Matrix(std::initializer_list<std::initializer_list<double>> rows) {
  rows_ = rows.size();
  cols_ = rows_ == 0 ? 0 : rows.begin()->size();
  data_.reserve(rows_ * cols_);
  for (const auto& r : rows) {
    require(r.size() == cols_, ErrorKind::kShape, "ragged initializer list");
    data_.insert(data_.end(), r.begin(), r.end());
  }
}

Matrix Matrix::identity(std::size_t n) {
  Matrix m(n, n);
  for (std::size_t i = 0; i < n; ++i) m(i, i) = 1.0;
  return m;
}

Matrix Matrix::diagonal(std::span<const double> diag) {
  Matrix m(diag.size(), diag.size());
  for (std::size_t i = 0; i < diag.size(); ++i) m(i, i) = diag[i];
  return m;
}

Matrix Matrix::block(std::size_t r0, std::size_t c0, std::size_t nr, std::size_t nc) const {
  require(r0 + nr <= rows_ && c0 + nc <= cols_, ErrorKind::kShape, "block out of range");
  Matrix out(nr, nc);
  for (std::size_t r = 0; r < nr; ++r) std::copy_n(data_.data() + (r0 + r) * cols_ + c0, nc, out.row(r).data());
  return out;
}

void Matrix::set_block(std::size_t r0, std::size_t c0, const Matrix& src) {
  require(r0 + src.rows() <= rows_ && c0 + src.cols() <= cols_, ErrorKind::kShape, "set_block out of range");
  for (std::size_t r = 0; r < src.rows(); ++r)
    std::copy(src.row(r).begin(), src.row(r).end(), data_.begin() + (r0 + r) * cols_ + c0);
}

Vector Matrix::column(std::size_t c) const {
  Vector out(rows_);
  for (std::size_t r = 0; r < rows_; ++r) out[r] = (*this)(r, c);
  return out;
}

Matrix transpose(const Matrix& a) {
  constexpr std::size_t kTile = 32;
  Matrix t(a.cols(), a.rows());
  for (std::size_t r0 = 0; r0 < a.rows(); r0 += kTile)
    for (std::size_t c0 = 0; c0 < a.cols(); c0 += kTile) {
      const std::size_t r1 = std::min(r0 + kTile, a.rows()), c1 = std::min(c0 + kTile, a.cols());
      for (std::size_t r = r0; r < r1; ++r)
        for (std::size_t c = c0; c < c1; ++c) t(c, r) = a(r, c);
    }
  return t;
}

Matrix matmul(const Matrix& a, const Matrix& b) {
  require(a.cols() == b.rows(), ErrorKind::kShape, "matmul: " + dims(a) + " * " + dims(b));
  Matrix c(a.rows(), b.cols());
  if (c.empty() || a.cols() == 0) return c;
  kernels::active().gemm(a.rows(), b.cols(), a.cols(), a.data(), a.cols(), b.data(), b.cols(), c.data(),
                         c.cols());
  return c;
}

Matrix matmul_nt(const Matrix& a, const Matrix& b) {
  require(a.cols() == b.cols(), ErrorKind::kShape, "matmul_nt: " + dims(a) + " * " + dims(b) + "^T");
  return matmul(a, transpose(b));
}

Matrix matmul_tn(const Matrix& a, const Matrix& b) {
  require(a.rows() == b.rows(), ErrorKind::kShape, "matmul_tn: " + dims(a) + "^T * " + dims(b));
  return matmul(transpose(a), b);
}

Vector matvec(const Matrix& a, std::span<const double> x) {
  require(a.cols() == x.size(), ErrorKind::kShape, "matvec: " + dims(a) + " * " + std::to_string(x.size()));
  Vector y(a.rows());
  const auto& k = kernels::active();
  for (std::size_t r = 0; r < a.rows(); ++r) y[r] = k.dot(a.row(r).data(), x.data(), x.size());
  return y;
}

Matrix operator+(const Matrix& a, const Matrix& b) {
  Matrix c = a;
  c += b;
  return c;
}

Matrix operator-(const Matrix& a, const Matrix& b) {
  require_same_shape(a, b, "operator-");
  Matrix c = a;
  for (std::size_t i = 0; i < c.size(); ++i) c.data()[i] -= b.data()[i];
  return c;
}

Matrix operator*(double s, const Matrix& a) {
  Matrix c = a;
  for (double& v : c.values()) v *= s;
  return c;
}

Matrix& operator+=(Matrix& a, const Matrix& b) {
  require_same_shape(a, b, "operator+=");
  for (std::size_t i = 0; i < a.size(); ++i) a.data()[i] += b.data()[i];
  return a;
}

double max_abs(const Matrix& a) {
  double m = 0.0;
  for (double v : a.values()) m = std::max(m, std::abs(v));
  return m;
}

double max_abs_diff(const Matrix& a, const Matrix& b) {
  require_same_shape(a, b, "max_abs_diff");
  return max_abs_diff(a.values(), b.values());
}

double frobenius_norm(const Matrix& a) { return norm2(a.values()); }

bool all_finite(const Matrix& a) {
  return std::all_of(a.values().begin(), a.values().end(), [](double v) { return std::isfinite(v); });
}

double dot(std::span<const double> a, std::span<const double> b) {
  require(a.size() == b.size(), ErrorKind::kShape, "dot: length mismatch");
  return kernels::active().dot(a.data(), b.data(), a.size());
}

double norm2(std::span<const double> a) {
  // Scaled accumulation so that entries near 1e154 do not overflow.
  double scale = 0.0;
  for (double v : a) scale = std::max(scale, std::abs(v));
  if (scale == 0.0 || !std::isfinite(scale)) return scale;
  double ss = 0.0;
  for (double v : a) {
    const double t = v / scale;
    ss += t * t;
  }
  return scale * std::sqrt(ss);
}

double max_abs_diff(std::span<const double> a, std::span<const double> b) {
  require(a.size() == b.size(), ErrorKind::kShape, "max_abs_diff: length mismatch");
  double m = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) m = std::max(m, std::abs(a[i] - b[i]));
  return m;
}

}  // namespace qelim
