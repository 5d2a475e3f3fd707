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

// Can a GELU MLP with a plain skip learn a skip-MLP seen through a basis
// change? The target is
//
//   y = W2t gelu(W1t x) + Z x - x
//
// and the model is y^ = W2' gelu(W1' x) + x, trained with AdamW on the mean
// relative squared error. A ridge-regression linear map is the baseline.
//
// Weights follow the column convention (W1 is 4h x h, W2 is h x 4h), but a
// batch is stored with one sample per row, so a batch of n inputs is n x h.

#include <cstddef>
#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "qelim/matrix.hpp"
#include "qelim/rng.hpp"

namespace qelim::mlpexp {

/// Columns with |y| below this are left out of the relative loss.
inline constexpr double kDegenerateNorm = 1e-12;

struct TargetSpec {
  std::size_t h = 0;
  Matrix w1t;  // 4h x h, scale 1/sqrt(4h)
  Matrix w2t;  // h x 4h, scale 1/sqrt(4h)
  Matrix z;    // h x h,  scale 1/sqrt(h)
  std::uint64_t seed = 0;
};

/// Draws w1t, w2t, z in that order from Rng(seed).
TargetSpec make_target(std::size_t h, std::uint64_t seed);

/// Row-wise target; x is n x h.
Matrix target_eval(const Matrix& x, const TargetSpec& spec);

struct MlpParams {
  Matrix w1;  // 4h x h
  Matrix w2;  // h x 4h
};

/// Gaussian init at the target's scales.
MlpParams init_params(std::size_t h, Rng& rng);

/// Row-wise gelu(x W1^T) W2^T + x.
Matrix model_forward(const Matrix& x, const MlpParams& p);

/// Mean over usable rows of |yhat - y|^2 / |y|^2. Throws
/// kAllTargetsDegenerate if no row is usable.
double relative_loss(const Matrix& yhat, const Matrix& y);

struct LossGrad {
  double loss = 0.0;
  Matrix grad_w1;
  Matrix grad_w2;
  std::size_t used_rows = 0;
};

/// Loss of model_forward(x, p) against y and its exact gradient.
LossGrad model_backward(const Matrix& x, const Matrix& y, const MlpParams& p);

struct TrainConfig {
  std::size_t steps = 3000;
  std::size_t batch = 2048;
  double lr_peak = 5e-3;
  double weight_decay = 0.1;
  double beta1 = 0.9;
  double beta2 = 0.95;
  double adam_eps = 1e-8;
  double grad_clip_norm = 3.0;

  /// Throws kInvalidArgument. steps = 0 is allowed (evaluate the init).
  void validate() const;
};

/// lr_peak * 0.5 * (1 + cos(pi t / steps)); reaches 0 at t = steps.
double cosine_lr(const TrainConfig& cfg, std::size_t t);

/// Scales grads in place so their joint 2-norm is at most max_norm.
/// Returns the norm before scaling.
double clip_global_norm(std::span<Matrix* const> grads, double max_norm);

struct AdamState {
  std::vector<Matrix> m;
  std::vector<Matrix> v;
};

/// One AdamW update at step t >= 1 with learning rate lr: global-norm
/// clipping at cfg.grad_clip_norm, then decoupled decay
/// p *= 1 - lr wd, then the bias-corrected Adam step. The state is sized on
/// first use. grads are modified by clipping.
void adamw_step(std::span<Matrix* const> params, std::span<Matrix* const> grads, AdamState& state, std::size_t t,
                double lr, const TrainConfig& cfg);

/// Ridge fit of y ~ A x over n_samples Gaussian inputs drawn from rng in
/// chunks, accumulating G = sum x x^T and C = sum x y^T. Returns
/// A = (solve_spd(G + lambda I, C))^T (h x h, column convention).
Matrix ridge_fit_streaming(const TargetSpec& spec, std::size_t n_samples, double lambda, Rng& rng);

struct ExperimentConfig {
  std::size_t h = 64;
  TrainConfig train;
  std::size_t eval_samples = 4096;
  std::size_t baseline_samples = 100000;
  double ridge_lambda = 1e-6;
  std::uint64_t seed = 0;

  void validate() const;
};

struct Seeds {
  std::uint64_t target = 0;
  std::uint64_t model = 0;  // init and training batches
  std::uint64_t baseline = 0;
  std::uint64_t eval = 0;
};

/// Children of base through derive_seed with streams 0..3.
Seeds derive_seeds(std::uint64_t base);

struct Summary {
  double mean_rel_err = 0.0;
  double max_rel_err = 0.0;
  double mean_cos = 0.0;
};

struct Quantiles {
  double p5 = 0.0, p25 = 0.0, p50 = 0.0, p75 = 0.0, p95 = 0.0;
};

/// Linear interpolation between order statistics; ignores NaN entries.
Quantiles quantiles(std::span<const double> values);

struct SampleMetrics {
  std::vector<double> rel_err;  // NaN for a degenerate target
  std::vector<double> cos;
};

/// Per-row |yhat - y| / |y| and cosine(yhat, y).
SampleMetrics sample_metrics(const Matrix& yhat, const Matrix& y);
Summary summarize(const SampleMetrics& s);

struct ExperimentReport {
  ExperimentConfig config;
  Seeds seeds;
  Summary trained;
  Summary linear;
  Quantiles trained_quantiles;
  SampleMetrics trained_samples;
  SampleMetrics linear_samples;
  std::vector<double> train_loss;  // one entry per step
  MlpParams params;
  std::optional<double> runtime_s;
};

/// Builds the target, trains, fits the baseline and evaluates both on a
/// held-out stream. Deterministic given config; runtime_s is left empty.
ExperimentReport run_experiment(const ExperimentConfig& cfg);

/// {h, config, trained, linear, quantiles, seeds[, runtime_s]}.
std::string report_json(const ExperimentReport& r);
/// Header rel_err_trained,cos_trained,rel_err_linear,cos_linear and one row
/// per evaluation sample.
std::string samples_csv(const ExperimentReport& r);

}  // namespace qelim::mlpexp
