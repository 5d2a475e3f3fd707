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

#include "qelim/normconj.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <string>

#include <json.hpp>

#include "qelim/activation.hpp"
#include "qelim/error.hpp"
#include "qelim/io.hpp"
#include "qelim/linalg.hpp"

namespace qelim::normconj {
namespace {

void require_eps(double eps) {
  require(eps > 0.0 && std::isfinite(eps), ErrorKind::kInvalidArgument, "eps must be positive and finite");
}

double mean(std::span<const double> x) {
  double s = 0.0;
  for (double v : x) s += v;
  return s / static_cast<double>(x.size());
}

double sum_sq(std::span<const double> x) {
  double s = 0.0;
  for (double v : x) s += v * v;
  return s;
}

double max_abs_diff_vec(std::span<const double> a, std::span<const double> b) {
  double m = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) m = std::max(m, std::abs(a[i] - b[i]));
  return m;
}

}  // namespace

Vector layernorm_eps(std::span<const double> x, double eps) {
  require_eps(eps);
  require(!x.empty(), ErrorKind::kShape, "layernorm_eps: empty input");
  const double d = static_cast<double>(x.size());
  Vector c(x.begin(), x.end());
  // Two centring passes keep the mean at rounding level for large offsets.
  for (int pass = 0; pass < 2; ++pass) {
    const double mu = mean(c);
    for (double& v : c) v -= mu;
  }
  const double var = sum_sq(c) / d;
  const double inv_sigma = 1.0 / std::sqrt(var + eps);
  for (double& v : c) v *= inv_sigma;

  // |out|^2 = d var / (var + eps) < d in exact arithmetic; when var dwarfs eps
  // rounding can land on the boundary, so pull back inside the open ball.
  double s = sum_sq(c);
  while (s >= d) {
    const double shrink = std::sqrt(d / s) * (1.0 - 4.0 * std::numeric_limits<double>::epsilon());
    for (double& v : c) v *= shrink;
    s = sum_sq(c);
  }
  return c;
}

Matrix layernorm_rows(const Matrix& x, double eps) {
  Matrix out(x.rows(), x.cols());
  for (std::size_t r = 0; r < x.rows(); ++r) {
    const Vector y = layernorm_eps(x.row(r), eps);
    std::copy(y.begin(), y.end(), out.row(r).begin());
  }
  return out;
}

Vector layernorm_inverse(std::span<const double> z, double eps, double delta_guard) {
  require_eps(eps);
  require(delta_guard >= 0.0 && delta_guard < 1.0, ErrorKind::kInvalidArgument, "delta_guard must lie in [0, 1)");
  require(!z.empty(), ErrorKind::kShape, "layernorm_inverse: empty input");
  const double d = static_cast<double>(z.size());
  const double mu = mean(z);
  if (std::abs(mu) > kZeroMeanTol) fail(ErrorKind::kNotZeroMean, "input mean " + std::to_string(mu) + " is not zero");
  const double s = sum_sq(z);
  if (s > d * (1.0 - delta_guard))
    fail(ErrorKind::kOutsideImageBall,
         "|z|^2 = " + io::format_double(s) + " is too close to d = " + io::format_double(d));
  const double k = std::sqrt(d * eps / (d - s));
  Vector out(z.begin(), z.end());
  for (double& v : out) v *= k;
  return out;
}

ConjugacyData construct_m0(const Matrix& a, double eps) {
  require_eps(eps);
  require(a.is_square(), ErrorKind::kShape, "construct_m0: A must be square");
  const std::size_t d = a.rows();
  if (d < 2) fail(ErrorKind::kDimensionTooSmall, "construct_m0 needs d >= 2");

  const linalg::LuDecomposition lu(a);
  const Matrix ones(d, 1, 1.0);
  Vector v = lu.solve_transposed(ones).column(0);
  const double nv = norm2(v);
  for (double& e : v) e /= nv;
  for (std::size_t i = 0; i < d; ++i)
    if (std::abs(v[i]) <= 1e-12)
      fail(ErrorKind::kZeroEntryInV, "entry " + std::to_string(i) + " of (A^T)^-1 1 vanishes; D' is not invertible");

  Matrix dva = a;
  for (std::size_t i = 0; i < d; ++i)
    for (double& e : dva.row(i)) e *= v[i];
  const Matrix q = linalg::orthonormal_basis_zero_mean(d);
  const double lambda0 = 1.0 / linalg::spectral_norm(matmul_tn(q, matmul(dva, q)));

  ConjugacyData cd;
  cd.a = a;
  cd.v = v;
  cd.lambda0 = lambda0;
  cd.m0 = lambda0 * dva;
  cd.d_prime.resize(d);
  for (std::size_t i = 0; i < d; ++i) cd.d_prime[i] = 1.0 / (lambda0 * v[i]);
  cd.eps = eps;
  return cd;
}

Vector conjugate_map(std::span<const double> x, const ConjugacyData& cd, double mean_shift) {
  require(x.size() == cd.m0.rows(), ErrorKind::kShape, "conjugate_map: dimension mismatch");
  const Vector w = matvec(cd.m0, layernorm_eps(x, cd.eps));
  Vector f = layernorm_inverse(w, cd.eps);
  for (double& e : f) e += mean_shift;
  return f;
}

Vector mlp_eval(std::span<const double> x, const Mlp& mlp) {
  require(mlp.w_up.rows() == x.size() && mlp.w_down.rows() == mlp.w_up.cols() && mlp.w_down.cols() == x.size(),
          ErrorKind::kShape, "mlp_eval: weight shapes do not match the input");
  Vector hidden = matvec(transpose(mlp.w_up), x);
  for (double& e : hidden) e = mlp.activation == Activation::kGelu ? gelu(e) : std::max(e, 0.0);
  return matvec(transpose(mlp.w_down), hidden);
}

Vector mlp_prime_eval(std::span<const double> x, const Mlp& mlp, const ConjugacyData& cd, double mean_shift) {
  const Vector m = mlp_eval(x, mlp);
  Vector u(x.begin(), x.end());
  for (std::size_t i = 0; i < u.size(); ++i) u[i] += m[i];
  Vector out = conjugate_map(u, cd, mean_shift);
  for (std::size_t i = 0; i < out.size(); ++i) out[i] -= x[i];
  return out;
}

ConjugacyCheck check_conjugacy(std::size_t dim, double eps, std::size_t samples, std::uint64_t seed) {
  require_eps(eps);
  require(samples >= 1, ErrorKind::kInvalidArgument, "check_conjugacy needs at least one sample");
  if (dim < 2) fail(ErrorKind::kDimensionTooSmall, "check_conjugacy needs d >= 2");
  Rng rng(seed);
  const double s = 1.0 / std::sqrt(static_cast<double>(dim));

  Matrix theta;
  for (int attempt = 0;; ++attempt) {
    if (attempt == 100) fail(ErrorKind::kConditioningFailure, "no Theta with cond <= 100 after 100 draws");
    theta = linalg::gaussian_matrix(dim, dim, s, rng);
    if (linalg::condition_number_2(theta) <= 100.0) break;
  }
  Vector dg(dim);
  for (double& e : dg) e = std::exp(0.2 * rng.normal());
  const Matrix a = matmul(theta, Matrix::diagonal(dg));
  const ConjugacyData cd = construct_m0(a, eps);
  const Mlp mlp{linalg::gaussian_matrix(dim, 4 * dim, s, rng),
                linalg::gaussian_matrix(4 * dim, dim, 0.5 * s, rng), Activation::kGelu};

  ConjugacyCheck out;
  out.dim = dim;
  out.eps = eps;
  out.samples = samples;
  out.seed = seed;
  out.lambda0 = cd.lambda0;
  const Matrix q = linalg::orthonormal_basis_zero_mean(dim);
  out.m0_norm_on_h = linalg::spectral_norm(matmul_tn(q, matmul(cd.m0, q)));

  Vector x(dim);
  for (std::size_t t = 0; t < samples; ++t) {
    for (double& e : x) e = rng.normal();
    const double shift = 3.0 * rng.normal();

    const Vector f0 = conjugate_map(x, cd, 0.0);
    const Vector lf0 = layernorm_eps(f0, eps);
    out.conjugacy_err = std::max(out.conjugacy_err, max_abs_diff_vec(lf0, matvec(cd.m0, layernorm_eps(x, eps))));
    out.shift_invariance_err =
        std::max(out.shift_invariance_err, max_abs_diff_vec(layernorm_eps(conjugate_map(x, cd, shift), eps), lf0));

    const Vector mp = mlp_prime_eval(x, mlp, cd, shift);
    const Vector m = mlp_eval(x, mlp);
    Vector u1(dim), u0(dim);
    for (std::size_t i = 0; i < dim; ++i) {
      u1[i] = x[i] + mp[i];
      u0[i] = x[i] + m[i];
    }
    Vector lhs = layernorm_eps(u1, eps);
    for (std::size_t i = 0; i < dim; ++i) lhs[i] *= cd.d_prime[i];
    out.mlp_prime_err = std::max(out.mlp_prime_err, max_abs_diff_vec(lhs, matvec(a, layernorm_eps(u0, eps))));
  }
  return out;
}

std::string to_json(const ConjugacyCheck& c) {
  nlohmann::ordered_json j;
  j["dim"] = c.dim;
  j["eps"] = c.eps;
  j["samples"] = c.samples;
  j["seed"] = c.seed;
  j["lambda0"] = c.lambda0;
  j["m0_norm_on_h"] = c.m0_norm_on_h;
  j["max_conjugacy_err"] = c.conjugacy_err;
  j["max_mlp_prime_err"] = c.mlp_prime_err;
  j["max_shift_invariance_err"] = c.shift_invariance_err;
  return j.dump(2) + "\n";
}

Vector probe_map(const Matrix& m, std::span<const double> x, double eps) {
  require(m.is_square() && m.rows() == x.size(), ErrorKind::kShape, "probe_map: dimension mismatch");
  const double d = static_cast<double>(x.size());
  Vector mx = matvec(m, x);
  const double denom = sum_sq(x) + d * eps - sum_sq(mx);
  if (!(denom > 0.0)) return {};
  const double k = std::sqrt(d * eps / denom);
  for (double& e : mx) e *= k;
  return mx;
}

ProbeRow probe_matrix(const Matrix& m, double eps, std::size_t samples, Rng& rng) {
  require_eps(eps);
  require(m.is_square(), ErrorKind::kShape, "probe_matrix: M must be square");
  const std::size_t d = m.rows();
  require(samples > d, ErrorKind::kInvalidArgument,
          "linearity probe needs more samples (" + std::to_string(samples) + ") than dimensions (" +
              std::to_string(d) + ")");

  Matrix xs(samples, d), fs(samples, d);
  std::size_t kept = 0;
  Vector x(d);
  for (std::size_t t = 0; t < samples; ++t) {
    for (double& e : x) e = rng.normal();
    const double nx = norm2(x);
    for (double& e : x) e /= nx;
    const Vector f = probe_map(m, x, eps);
    if (f.empty()) continue;
    std::copy(x.begin(), x.end(), xs.row(kept).begin());
    std::copy(f.begin(), f.end(), fs.row(kept).begin());
    ++kept;
  }
  require(kept > d, ErrorKind::kInvalidArgument, "too few probe samples with a positive denominator");
  xs = xs.block(0, 0, kept, d);
  fs = fs.block(0, 0, kept, d);

  // Row convention: f ~ x B with B = (X^T X)^-1 X^T F.
  const Matrix b = linalg::solve_spd(matmul_tn(xs, xs), matmul_tn(xs, fs));
  const Matrix fit = matmul(xs, b);
  double sum = 0.0, worst = 0.0;
  for (std::size_t t = 0; t < kept; ++t) {
    double r2 = 0.0;
    for (std::size_t i = 0; i < d; ++i) {
      const double e = fit(t, i) - fs(t, i);
      r2 += e * e;
    }
    const double rel = std::sqrt(r2) / norm2(fs.row(t));
    sum += rel;
    worst = std::max(worst, rel);
  }
  ProbeRow row;
  row.d = d;
  row.eps = eps;
  row.samples = kept;
  row.mean_rel_dev = sum / static_cast<double>(kept);
  row.max_rel_dev = worst;
  return row;
}

std::vector<ProbeRow> linearity_probe(std::span<const std::size_t> dims, double eps, std::size_t samples,
                                      std::uint64_t seed) {
  std::vector<ProbeRow> rows;
  rows.reserve(dims.size());
  for (std::size_t d : dims) {
    if (d < 4) fail(ErrorKind::kDimensionTooSmall, "linearity probe needs d >= 4, got " + std::to_string(d));
    Rng rng(derive_seed(seed, d));
    const Matrix m = linalg::gaussian_matrix(d, d, 1.0 / std::sqrt(static_cast<double>(d)), rng);
    ProbeRow row = probe_matrix(m, eps, samples, rng);
    row.seed = seed;
    rows.push_back(row);
  }
  return rows;
}

std::string probe_csv(std::span<const ProbeRow> rows) {
  std::string out = "d,eps,samples,mean_rel_dev,max_rel_dev,seed\n";
  for (const ProbeRow& r : rows) {
    out += std::to_string(r.d) + "," + io::format_double(r.eps) + "," + std::to_string(r.samples) + "," +
           io::format_double(r.mean_rel_dev) + "," + io::format_double(r.max_rel_dev) + "," +
           std::to_string(r.seed) + "\n";
  }
  return out;
}

}  // namespace qelim::normconj
