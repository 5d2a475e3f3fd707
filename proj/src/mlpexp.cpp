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

#include "qelim/mlpexp.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <string>

#include <json.hpp>

#include "qelim/activation.hpp"
#include "qelim/error.hpp"
#include "qelim/io.hpp"
#include "qelim/linalg.hpp"

namespace qelim::mlpexp {
namespace {

constexpr std::size_t kRidgeChunk = 4096;

void check_batch(const Matrix& x, std::size_t h, const char* what) {
  require(x.cols() == h && x.rows() >= 1, ErrorKind::kShape,
          std::string(what) + ": batch must be n x " + std::to_string(h) + " with n >= 1");
}

std::size_t dim_of(const MlpParams& p) {
  const std::size_t h = p.w1.cols();
  require(h >= 1 && p.w1.rows() == 4 * h && p.w2.rows() == h && p.w2.cols() == 4 * h, ErrorKind::kShape,
          "MLP weights must be 4h x h and h x 4h");
  return h;
}

// Sum of a sequence in pairwise order; stable under chunking.
double pairwise_sum(std::span<const double> v) {
  if (v.size() <= 8) {
    double s = 0.0;
    for (double e : v) s += e;
    return s;
  }
  const std::size_t half = v.size() / 2;
  return pairwise_sum(v.first(half)) + pairwise_sum(v.subspan(half));
}

double row_sq(std::span<const double> r) {
  double s = 0.0;
  for (double e : r) s += e * e;
  return s;
}

}  // namespace

TargetSpec make_target(std::size_t h, std::uint64_t seed) {
  require(h >= 1, ErrorKind::kInvalidArgument, "target dimension must be positive");
  Rng rng(seed);
  const double s4 = 1.0 / std::sqrt(4.0 * static_cast<double>(h));
  TargetSpec t;
  t.h = h;
  t.seed = seed;
  t.w1t = linalg::gaussian_matrix(4 * h, h, s4, rng);
  t.w2t = linalg::gaussian_matrix(h, 4 * h, s4, rng);
  t.z = linalg::gaussian_matrix(h, h, 1.0 / std::sqrt(static_cast<double>(h)), rng);
  return t;
}

Matrix target_eval(const Matrix& x, const TargetSpec& spec) {
  check_batch(x, spec.h, "target_eval");
  Matrix a = matmul_nt(x, spec.w1t);
  for (double& v : a.values()) v = gelu(v);
  Matrix y = matmul_nt(a, spec.w2t);
  y += matmul_nt(x, spec.z);
  for (std::size_t i = 0; i < y.size(); ++i) y.data()[i] -= x.data()[i];
  return y;
}

MlpParams init_params(std::size_t h, Rng& rng) {
  require(h >= 1, ErrorKind::kInvalidArgument, "model dimension must be positive");
  const double s4 = 1.0 / std::sqrt(4.0 * static_cast<double>(h));
  MlpParams p;
  p.w1 = linalg::gaussian_matrix(4 * h, h, s4, rng);
  p.w2 = linalg::gaussian_matrix(h, 4 * h, s4, rng);
  return p;
}

Matrix model_forward(const Matrix& x, const MlpParams& p) {
  check_batch(x, dim_of(p), "model_forward");
  Matrix a = matmul_nt(x, p.w1);
  for (double& v : a.values()) v = gelu(v);
  Matrix y = matmul_nt(a, p.w2);
  y += x;
  return y;
}

double relative_loss(const Matrix& yhat, const Matrix& y) {
  require(yhat.rows() == y.rows() && yhat.cols() == y.cols(), ErrorKind::kShape, "relative_loss: shapes differ");
  std::vector<double> terms;
  terms.reserve(y.rows());
  for (std::size_t r = 0; r < y.rows(); ++r) {
    const double yy = row_sq(y.row(r));
    if (std::sqrt(yy) < kDegenerateNorm) continue;
    double e = 0.0;
    for (std::size_t c = 0; c < y.cols(); ++c) e += (yhat(r, c) - y(r, c)) * (yhat(r, c) - y(r, c));
    terms.push_back(e / yy);
  }
  if (terms.empty()) fail(ErrorKind::kAllTargetsDegenerate, "every target row has norm below 1e-12");
  return pairwise_sum(terms) / static_cast<double>(terms.size());
}

LossGrad model_backward(const Matrix& x, const Matrix& y, const MlpParams& p) {
  const std::size_t h = dim_of(p);
  check_batch(x, h, "model_backward");
  require(y.rows() == x.rows() && y.cols() == h, ErrorKind::kShape, "model_backward: y must match x");
  const std::size_t n = x.rows();

  Matrix pre = matmul_nt(x, p.w1);  // n x 4h
  Matrix act(n, 4 * h);
  for (std::size_t i = 0; i < pre.size(); ++i) {
    const GeluPair g = gelu_and_grad(pre.data()[i]);
    act.data()[i] = g.value;
    pre.data()[i] = g.grad;  // reused as the local derivative
  }
  Matrix diff = matmul_nt(act, p.w2);
  diff += x;
  diff = diff - y;

  LossGrad out;
  std::vector<double> terms(n, 0.0);
  std::vector<double> weight(n, 0.0);
  for (std::size_t r = 0; r < n; ++r) {
    const double yy = row_sq(y.row(r));
    if (std::sqrt(yy) < kDegenerateNorm) continue;
    terms[r] = row_sq(diff.row(r)) / yy;
    weight[r] = 1.0 / yy;
    ++out.used_rows;
  }
  if (out.used_rows == 0) fail(ErrorKind::kAllTargetsDegenerate, "every target row has norm below 1e-12");
  const double inv = 1.0 / static_cast<double>(out.used_rows);
  out.loss = pairwise_sum(terms) * inv;

  // d loss / d yhat = 2 (yhat - y) / (|y|^2 N).
  for (std::size_t r = 0; r < n; ++r) {
    const double s = 2.0 * weight[r] * inv;
    for (double& v : diff.row(r)) v *= s;
  }
  out.grad_w2 = matmul_tn(diff, act);  // h x 4h
  Matrix dact = matmul(diff, p.w2);    // n x 4h
  for (std::size_t i = 0; i < dact.size(); ++i) dact.data()[i] *= pre.data()[i];
  out.grad_w1 = matmul_tn(dact, x);  // 4h x h
  return out;
}

void TrainConfig::validate() const {
  require(batch >= 1, ErrorKind::kInvalidArgument, "batch must be at least 1");
  require(grad_clip_norm > 0.0, ErrorKind::kInvalidArgument, "grad_clip_norm must be positive");
  require(lr_peak >= 0.0 && std::isfinite(lr_peak), ErrorKind::kInvalidArgument, "lr_peak must be finite and >= 0");
  require(weight_decay >= 0.0, ErrorKind::kInvalidArgument, "weight_decay must be >= 0");
  require(beta1 >= 0.0 && beta1 < 1.0 && beta2 >= 0.0 && beta2 < 1.0, ErrorKind::kInvalidArgument,
          "betas must lie in [0, 1)");
  require(adam_eps > 0.0, ErrorKind::kInvalidArgument, "adam_eps must be positive");
}

double cosine_lr(const TrainConfig& cfg, std::size_t t) {
  if (cfg.steps == 0) return cfg.lr_peak;
  const double frac = static_cast<double>(std::min(t, cfg.steps)) / static_cast<double>(cfg.steps);
  return cfg.lr_peak * 0.5 * (1.0 + std::cos(std::numbers::pi * frac));
}

double clip_global_norm(std::span<Matrix* const> grads, double max_norm) {
  double sq = 0.0;
  for (const Matrix* g : grads) sq += row_sq(g->values());
  const double norm = std::sqrt(sq);
  if (norm > max_norm) {
    const double s = max_norm / norm;
    for (Matrix* g : grads)
      for (double& v : g->values()) v *= s;
  }
  return norm;
}

void adamw_step(std::span<Matrix* const> params, std::span<Matrix* const> grads, AdamState& state, std::size_t t,
                double lr, const TrainConfig& cfg) {
  require(t >= 1, ErrorKind::kInvalidArgument, "AdamW step index starts at 1");
  require(params.size() == grads.size(), ErrorKind::kShape, "adamw_step: params and grads differ in count");
  if (state.m.empty()) {
    for (const Matrix* p : params) {
      state.m.emplace_back(p->rows(), p->cols());
      state.v.emplace_back(p->rows(), p->cols());
    }
  }
  require(state.m.size() == params.size(), ErrorKind::kShape, "adamw_step: state does not match params");
  (void)clip_global_norm(grads, cfg.grad_clip_norm);

  const double td = static_cast<double>(t);
  const double bc1 = 1.0 - std::pow(cfg.beta1, td);
  const double bc2 = 1.0 - std::pow(cfg.beta2, td);
  const double step = lr / bc1;
  const double bc2_sqrt = std::sqrt(bc2);
  const double decay = 1.0 - lr * cfg.weight_decay;
  for (std::size_t k = 0; k < params.size(); ++k) {
    Matrix& p = *params[k];
    const Matrix& g = *grads[k];
    require(g.rows() == p.rows() && g.cols() == p.cols(), ErrorKind::kShape, "adamw_step: gradient shape");
    double* m = state.m[k].data();
    double* v = state.v[k].data();
    for (std::size_t i = 0; i < p.size(); ++i) {
      const double gi = g.data()[i];
      p.data()[i] *= decay;
      m[i] = cfg.beta1 * m[i] + (1.0 - cfg.beta1) * gi;
      v[i] = cfg.beta2 * v[i] + (1.0 - cfg.beta2) * gi * gi;
      p.data()[i] -= step * m[i] / (std::sqrt(v[i]) / bc2_sqrt + cfg.adam_eps);
    }
  }
}

Matrix ridge_fit_streaming(const TargetSpec& spec, std::size_t n_samples, double lambda, Rng& rng) {
  const std::size_t h = spec.h;
  require(n_samples >= h, ErrorKind::kInvalidArgument, "ridge fit needs at least h samples");
  require(lambda >= 0.0, ErrorKind::kInvalidArgument, "ridge lambda must be >= 0");
  Matrix g(h, h), c(h, h);
  for (std::size_t done = 0; done < n_samples;) {
    const std::size_t n = std::min(kRidgeChunk, n_samples - done);
    const Matrix x = linalg::gaussian_matrix(n, h, 1.0, rng);
    const Matrix y = target_eval(x, spec);
    g += matmul_tn(x, x);
    c += matmul_tn(x, y);
    done += n;
  }
  for (std::size_t i = 0; i < h; ++i) g(i, i) += lambda;
  return transpose(linalg::solve_spd(g, c));
}

void ExperimentConfig::validate() const {
  require(h >= 1, ErrorKind::kInvalidArgument, "h must be at least 1");
  require(eval_samples >= 1, ErrorKind::kInvalidArgument, "eval_samples must be at least 1");
  require(baseline_samples >= h, ErrorKind::kInvalidArgument, "baseline_samples must be at least h");
  require(ridge_lambda >= 0.0, ErrorKind::kInvalidArgument, "ridge_lambda must be >= 0");
  train.validate();
}

Seeds derive_seeds(std::uint64_t base) {
  return {derive_seed(base, 0), derive_seed(base, 1), derive_seed(base, 2), derive_seed(base, 3)};
}

Quantiles quantiles(std::span<const double> values) {
  std::vector<double> v;
  for (double e : values)
    if (!std::isnan(e)) v.push_back(e);
  require(!v.empty(), ErrorKind::kInvalidArgument, "quantiles of an empty sample");
  std::sort(v.begin(), v.end());
  auto at = [&](double q) {
    const double pos = q * static_cast<double>(v.size() - 1);
    const auto lo = static_cast<std::size_t>(std::floor(pos));
    const std::size_t hi = std::min(lo + 1, v.size() - 1);
    return v[lo] + (pos - static_cast<double>(lo)) * (v[hi] - v[lo]);
  };
  return {at(0.05), at(0.25), at(0.50), at(0.75), at(0.95)};
}

SampleMetrics sample_metrics(const Matrix& yhat, const Matrix& y) {
  require(yhat.rows() == y.rows() && yhat.cols() == y.cols(), ErrorKind::kShape, "sample_metrics: shapes differ");
  SampleMetrics s;
  s.rel_err.resize(y.rows());
  s.cos.resize(y.rows());
  for (std::size_t r = 0; r < y.rows(); ++r) {
    const double yn = std::sqrt(row_sq(y.row(r)));
    const double pn = std::sqrt(row_sq(yhat.row(r)));
    double e = 0.0;
    for (std::size_t c = 0; c < y.cols(); ++c) e += (yhat(r, c) - y(r, c)) * (yhat(r, c) - y(r, c));
    const bool degenerate = yn < kDegenerateNorm;
    s.rel_err[r] = degenerate ? std::nan("") : std::sqrt(e) / yn;
    s.cos[r] = degenerate || pn == 0.0 ? std::nan("") : std::clamp(dot(yhat.row(r), y.row(r)) / (pn * yn), -1.0, 1.0);
  }
  return s;
}

Summary summarize(const SampleMetrics& s) {
  std::vector<double> err, cos;
  Summary out;
  for (std::size_t i = 0; i < s.rel_err.size(); ++i) {
    if (!std::isnan(s.rel_err[i])) {
      err.push_back(s.rel_err[i]);
      out.max_rel_err = std::max(out.max_rel_err, s.rel_err[i]);
    }
    if (!std::isnan(s.cos[i])) cos.push_back(s.cos[i]);
  }
  if (err.empty()) fail(ErrorKind::kAllTargetsDegenerate, "no usable evaluation sample");
  out.mean_rel_err = pairwise_sum(err) / static_cast<double>(err.size());
  out.mean_cos = cos.empty() ? std::nan("") : pairwise_sum(cos) / static_cast<double>(cos.size());
  return out;
}

ExperimentReport run_experiment(const ExperimentConfig& cfg) {
  cfg.validate();
  ExperimentReport r;
  r.config = cfg;
  r.seeds = derive_seeds(cfg.seed);
  const TargetSpec spec = make_target(cfg.h, r.seeds.target);

  Rng model_rng(r.seeds.model);
  r.params = init_params(cfg.h, model_rng);
  AdamState state;
  r.train_loss.reserve(cfg.train.steps);
  for (std::size_t t = 1; t <= cfg.train.steps; ++t) {
    const Matrix x = linalg::gaussian_matrix(cfg.train.batch, cfg.h, 1.0, model_rng);
    LossGrad lg = model_backward(x, target_eval(x, spec), r.params);
    r.train_loss.push_back(lg.loss);
    Matrix* params[] = {&r.params.w1, &r.params.w2};
    Matrix* grads[] = {&lg.grad_w1, &lg.grad_w2};
    adamw_step(params, grads, state, t, cosine_lr(cfg.train, t), cfg.train);
  }

  Rng base_rng(r.seeds.baseline);
  const Matrix a = ridge_fit_streaming(spec, cfg.baseline_samples, cfg.ridge_lambda, base_rng);

  Rng eval_rng(r.seeds.eval);
  const Matrix x = linalg::gaussian_matrix(cfg.eval_samples, cfg.h, 1.0, eval_rng);
  const Matrix y = target_eval(x, spec);
  r.trained_samples = sample_metrics(model_forward(x, r.params), y);
  r.linear_samples = sample_metrics(matmul_nt(x, a), y);
  r.trained = summarize(r.trained_samples);
  r.linear = summarize(r.linear_samples);
  r.trained_quantiles = quantiles(r.trained_samples.rel_err);
  return r;
}

std::string report_json(const ExperimentReport& r) {
  using nlohmann::ordered_json;
  const ExperimentConfig& c = r.config;
  auto summary = [](const Summary& s) {
    return ordered_json{{"mean_rel_err", s.mean_rel_err}, {"max_rel_err", s.max_rel_err}, {"mean_cos", s.mean_cos}};
  };
  ordered_json j;
  j["h"] = c.h;
  j["config"] = {{"steps", c.train.steps},
                 {"batch", c.train.batch},
                 {"lr_peak", c.train.lr_peak},
                 {"lr_schedule", "cosine_to_zero"},
                 {"weight_decay", c.train.weight_decay},
                 {"beta1", c.train.beta1},
                 {"beta2", c.train.beta2},
                 {"adam_eps", c.train.adam_eps},
                 {"grad_clip_norm", c.train.grad_clip_norm},
                 {"eval_samples", c.eval_samples},
                 {"baseline_samples", c.baseline_samples},
                 {"ridge_lambda", c.ridge_lambda},
                 {"seed", c.seed},
                 {"input_distribution", "standard_gaussian"},
                 {"gelu", "tanh"}};
  j["trained"] = summary(r.trained);
  j["linear"] = summary(r.linear);
  const Quantiles& q = r.trained_quantiles;
  j["quantiles"] = {{"p5", q.p5}, {"p25", q.p25}, {"p50", q.p50}, {"p75", q.p75}, {"p95", q.p95}};
  j["seeds"] = {{"target", r.seeds.target}, {"model", r.seeds.model}, {"baseline", r.seeds.baseline},
                {"eval", r.seeds.eval}};
  if (r.runtime_s) j["runtime_s"] = *r.runtime_s;
  return j.dump(2) + "\n";
}

std::string samples_csv(const ExperimentReport& r) {
  std::string out = "rel_err_trained,cos_trained,rel_err_linear,cos_linear\n";
  const SampleMetrics& a = r.trained_samples;
  const SampleMetrics& b = r.linear_samples;
  for (std::size_t i = 0; i < a.rel_err.size(); ++i) {
    out += io::format_double(a.rel_err[i]) + ',' + io::format_double(a.cos[i]) + ',' +
           io::format_double(b.rel_err[i]) + ',' + io::format_double(b.cos[i]) + '\n';
  }
  return out;
}

}  // namespace qelim::mlpexp
