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

// epsilon-LayerNorm and the conjugation that moves an invertible linear map
// through it.
//
//   L_eps(x)      = (x - mu(x) 1) / sqrt(var(x) + eps)
//   L_eps^-1(z)   = sqrt(d eps / (d - |z|^2)) z      for zero-mean z, |z| < sqrt(d)
//
// Given A = Theta D, the M0 construction rescales the rows of A so that M0
// keeps the zero-mean hyperplane H invariant and has unit norm on it. Then
// f(x) = L_eps^-1(M0 L_eps(x)) satisfies L_eps(f(x)) = M0 L_eps(x).
//
// Vectors here are columns when multiplied by A or M0 (A z). The MLP follows
// the model's row convention: MLP(x) = gelu(x W_up) W_down.

#include <cstddef>
#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "qelim/matrix.hpp"
#include "qelim/rng.hpp"

namespace qelim::normconj {

inline constexpr double kDefaultDeltaGuard = 1e-9;
/// Largest |mean(z)| accepted as zero by layernorm_inverse.
inline constexpr double kZeroMeanTol = 1e-10;

/// Zero-mean output with |output| < sqrt(d) strictly. Throws kInvalidArgument
/// unless eps > 0.
Vector layernorm_eps(std::span<const double> x, double eps);

/// Row-wise layernorm_eps of an n x d matrix.
Matrix layernorm_rows(const Matrix& x, double eps);

/// Unique zero-mean pre-image of z. Throws kNotZeroMean or
/// kOutsideImageBall (|z|^2 > d (1 - delta_guard)).
Vector layernorm_inverse(std::span<const double> z, double eps, double delta_guard = kDefaultDeltaGuard);

struct ConjugacyData {
  Matrix a;         // Theta D
  Vector v;         // (A^T)^-1 1, normalised
  double lambda0 = 0.0;
  Matrix m0;        // lambda0 Diag(v) A
  Vector d_prime;   // 1 / (lambda0 v_i)
  double eps = 0.0;
};

/// Throws kDimensionTooSmall (d < 2), SingularMatrixError, or kZeroEntryInV.
ConjugacyData construct_m0(const Matrix& a, double eps);

/// L_eps^-1(M0 L_eps(x)) + mean_shift 1.
Vector conjugate_map(std::span<const double> x, const ConjugacyData& cd, double mean_shift);

enum class Activation { kGelu, kRelu };

struct Mlp {
  Matrix w_up;    // d x k
  Matrix w_down;  // k x d
  Activation activation = Activation::kGelu;
};

/// act(x W_up) W_down.
Vector mlp_eval(std::span<const double> x, const Mlp& mlp);

/// MLP'(x) = L_eps^-1(M0 L_eps(x + MLP(x))) - x + mean_shift 1, which gives
/// D' L_eps(x + MLP'(x)) = A L_eps(x + MLP(x)).
Vector mlp_prime_eval(std::span<const double> x, const Mlp& mlp, const ConjugacyData& cd, double mean_shift);

/// Worst-case deviations over a batch of random inputs for one (d, eps)
/// setting. Every field is a max absolute entry difference.
struct ConjugacyCheck {
  std::size_t dim = 0;
  double eps = 0.0;
  std::size_t samples = 0;
  std::uint64_t seed = 0;
  double conjugacy_err = 0.0;       // |L(f(x)) - M0 L(x)|
  double mlp_prime_err = 0.0;       // |D' L(x + MLP'(x)) - A L(x + MLP(x))|
  double shift_invariance_err = 0.0;// |L(f_s(x)) - L(f_0(x))|
  double m0_norm_on_h = 0.0;        // |Q^T M0 Q|_2
  double lambda0 = 0.0;
};

/// Random A = Theta D (cond(Theta) <= 100, D = diag(exp(0.2 N))), random
/// GELU MLP of width 4d, and `samples` standard Gaussian inputs.
ConjugacyCheck check_conjugacy(std::size_t dim, double eps, std::size_t samples, std::uint64_t seed);

std::string to_json(const ConjugacyCheck& c);

/// f_M(x) = sqrt(d eps / (|x|^2 + d eps - |Mx|^2)) M x. Returns an empty
/// vector when the denominator is not positive.
Vector probe_map(const Matrix& m, std::span<const double> x, double eps);

struct ProbeRow {
  std::size_t d = 0;
  double eps = 0.0;
  std::size_t samples = 0;  // samples kept (positive denominator)
  double mean_rel_dev = 0.0;
  double max_rel_dev = 0.0;
  std::uint64_t seed = 0;
};

/// Relative deviation of f_m from its least-squares linear fit, over
/// `samples` points drawn uniformly from the unit sphere. Throws
/// kInvalidArgument when fewer than d + 1 samples survive.
ProbeRow probe_matrix(const Matrix& m, double eps, std::size_t samples, Rng& rng);

/// One row per dimension; M has i.i.d. N(0, 1/d) entries. Each dimension
/// draws from its own stream derived from (seed, d).
std::vector<ProbeRow> linearity_probe(std::span<const std::size_t> dims, double eps, std::size_t samples,
                                      std::uint64_t seed);

/// Header d,eps,samples,mean_rel_dev,max_rel_dev,seed.
std::string probe_csv(std::span<const ProbeRow> rows);

}  // namespace qelim::normconj
