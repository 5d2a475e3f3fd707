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

#include "qelim/reparam.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <string>

#include <json.hpp>

#include "qelim/error.hpp"
#include "qelim/io.hpp"
#include "qelim/linalg.hpp"
#include "qelim/parallel.hpp"

namespace qelim::reparam {
namespace {

using model::ArchConfig;
using model::ModelWeights;

double gated_condition(const Matrix& w_q, double max_cond, const std::string& what) {
  const double c = linalg::condition_number_2(w_q);
  if (!(c <= max_cond))
    fail(ErrorKind::kSingularMatrix, what + " has condition number " + io::format_double(c) + " above the limit " +
                                         io::format_double(max_cond));
  return c;
}

void require_plain(const ArchConfig& cfg, const char* mode) {
  if (cfg.norm.type != model::NormType::kNone)
    fail(ErrorKind::kConfigMismatch, std::string(mode) + " elimination needs norm=none");
}

EliminationReport verify(const ModelWeights& original, const ArchConfig& cfg, const ModelWeights& reduced,
                         const ArchConfig& out_cfg, const EliminationOptions& opts, EliminationReport report) {
  require(opts.trials >= 1, ErrorKind::kInvalidArgument, "verification needs at least one trial");
  report.trials = opts.trials;
  report.seq_len = opts.seq_len == 0 ? cfg.max_seq : opts.seq_len;
  report.seed = opts.seed;
  report.max_cond = opts.max_cond;
  report.source_tied = cfg.tied_lm_head;
  Rng rng(opts.seed);
  report.max_logit_rel_err = verify_equivalence(original, reduced, cfg, out_cfg, report.trials, report.seq_len, rng);
  return report;
}

}  // namespace

Triplet reparametrize_triplet(const Matrix& w_q, const Matrix& w_k, const Matrix& w_v) {
  require(w_q.is_square() && w_k.rows() == w_q.rows() && w_v.rows() == w_q.rows(), ErrorKind::kShape,
          "reparametrize_triplet: W_K and W_V need as many rows as W_Q");
  (void)gated_condition(w_q, kTripletMaxCond, "W_Q");
  const linalg::LuDecomposition lu(w_q);
  return {w_q, lu.solve(w_k), lu.solve(w_v)};
}

Matrix merge_qk_single_head(const Matrix& w_q, const Matrix& w_k) {
  require(w_q.is_square() && w_k.is_square() && w_q.rows() == w_k.rows(), ErrorKind::kShape,
          "merge_qk_single_head: W_Q and W_K must be square of equal size");
  return matmul_nt(w_k, w_q);
}

attention::AttnWeights gauge_transform(const attention::AttnWeights& w, const Matrix& d_blocks,
                                       const attention::HeadLayout& layout) {
  layout.validate();
  w.validate(layout);
  const std::size_t d = layout.d_model, dk = layout.d_k;
  require(d_blocks.rows() == d && d_blocks.cols() == d, ErrorKind::kShape, "gauge matrix must be d_model x d_model");
  for (std::size_t i = 0; i < d; ++i)
    for (std::size_t j = 0; j < d; ++j)
      if (i / dk != j / dk && d_blocks(i, j) != 0.0)
        fail(ErrorKind::kInvalidArgument, "gauge matrix has an entry outside the head blocks at (" +
                                              std::to_string(i) + ", " + std::to_string(j) + ")");

  // (D^T)^-1 is block-diagonal with blocks (D_i^T)^-1.
  Matrix inv_t(d, d);
  for (std::size_t h = 0; h < layout.heads; ++h) {
    const Matrix blk = d_blocks.block(h * dk, h * dk, dk, dk);
    const linalg::LuDecomposition lu(blk);
    inv_t.set_block(h * dk, h * dk, lu.solve_transposed(Matrix::identity(dk)));
  }
  return {matmul(w.w_q, d_blocks), matmul(w.w_k, inv_t), w.w_v, w.w_o};
}

const char* to_string(EliminationMode mode) noexcept {
  return mode == EliminationMode::kAttnSkipOnly ? "attn-skip" : "weight-shared";
}

std::string to_json(const EliminationReport& r) {
  nlohmann::ordered_json j;
  j["mode"] = to_string(r.mode);
  j["per_layer_cond"] = r.per_layer_cond;
  j["max_cond"] = r.max_cond;
  j["max_logit_rel_err"] = r.max_logit_rel_err;
  j["trials"] = r.trials;
  j["seq_len"] = r.seq_len;
  j["seed"] = r.seed;
  j["source_tied"] = r.source_tied;
  j["output_tied"] = false;
  return j.dump(2) + "\n";
}

EliminationResult eliminate_query_attn_skip(const ModelWeights& m, const ArchConfig& cfg,
                                            const EliminationOptions& opts) {
  m.validate(cfg);
  require_plain(cfg, "attn-skip");
  if (cfg.skips != model::Skips::kAttnOnly)
    fail(ErrorKind::kConfigMismatch, "attn-skip elimination needs skips=attn_only");
  if (cfg.sharing != model::Sharing::kPerLayer)
    fail(ErrorKind::kConfigMismatch, "attn-skip elimination needs sharing=per_layer (use weight-shared mode)");

  const std::size_t layers = cfg.n_layers;
  const std::size_t d = cfg.d_model();
  EliminationReport report;
  report.mode = EliminationMode::kAttnSkipOnly;
  std::vector<linalg::LuDecomposition> lus;
  lus.reserve(layers);
  for (std::size_t i = 0; i < layers; ++i) {
    const Matrix& wq = m.blocks[i].attn.w_q;
    report.per_layer_cond.push_back(gated_condition(wq, opts.max_cond, "W_Q of layer " + std::to_string(i)));
    lus.emplace_back(wq);
  }
  const Matrix& theta1 = m.blocks[0].attn.w_q;

  ModelWeights out;
  out.e = matmul(m.e, theta1);
  out.e_p = matmul(m.e_p, theta1);
  for (std::size_t i = 0; i < layers; ++i) {
    const model::BlockWeights& b = m.blocks[i];
    const Matrix& theta = b.attn.w_q;
    model::BlockWeights nb;
    nb.attn.w_q = Matrix::identity(d);
    nb.attn.w_k = lus[i].solve(b.attn.w_k);
    nb.attn.w_v = lus[i].solve(b.attn.w_v);
    nb.attn.w_o = matmul(b.attn.w_o, theta);
    nb.w_up = lus[i].solve(b.w_up);
    if (i + 1 < layers)
      nb.w_down = matmul(b.w_down, m.blocks[i + 1].attn.w_q);
    else if (cfg.tied_lm_head)
      nb.w_down = linalg::solve_right(b.w_down, transpose(theta1));
    else
      nb.w_down = b.w_down;
    out.blocks.push_back(std::move(nb));
  }
  out.w_lm = cfg.tied_lm_head ? matmul_tn(theta1, transpose(m.e)) : *m.w_lm;

  ArchConfig out_cfg = cfg;
  out_cfg.tied_lm_head = false;
  out.validate(out_cfg);
  report = verify(m, cfg, out, out_cfg, opts, std::move(report));
  return {std::move(out), out_cfg, std::move(report)};
}

EliminationResult eliminate_query_weight_shared(const ModelWeights& m, const ArchConfig& cfg,
                                                const EliminationOptions& opts) {
  m.validate(cfg);
  require_plain(cfg, "weight-shared");
  if (cfg.sharing != model::Sharing::kShared)
    fail(ErrorKind::kConfigMismatch, "weight-shared elimination needs sharing=shared");
  if (cfg.skips != model::Skips::kBoth) fail(ErrorKind::kConfigMismatch, "weight-shared elimination needs skips=both");

  const model::BlockWeights& b = m.blocks[0];
  const Matrix& theta = b.attn.w_q;
  EliminationReport report;
  report.mode = EliminationMode::kWeightShared;
  report.per_layer_cond.push_back(gated_condition(theta, opts.max_cond, "shared W_Q"));
  const linalg::LuDecomposition lu(theta);

  ModelWeights out;
  out.e = matmul(m.e, theta);
  out.e_p = matmul(m.e_p, theta);
  model::BlockWeights nb;
  nb.attn.w_q = Matrix::identity(cfg.d_model());
  nb.attn.w_k = lu.solve(b.attn.w_k);
  nb.attn.w_v = lu.solve(b.attn.w_v);
  nb.attn.w_o = matmul(b.attn.w_o, theta);
  nb.w_up = lu.solve(b.w_up);
  nb.w_down = matmul(b.w_down, theta);
  out.blocks.push_back(std::move(nb));
  out.w_lm = lu.solve(m.lm_head());

  ArchConfig out_cfg = cfg;
  out_cfg.tied_lm_head = false;
  out.validate(out_cfg);
  report = verify(m, cfg, out, out_cfg, opts, std::move(report));
  return {std::move(out), out_cfg, std::move(report)};
}

double verify_equivalence(const ModelWeights& m1, const ModelWeights& m2, const ArchConfig& cfg1,
                          const ArchConfig& cfg2, std::size_t trials, std::size_t seq_len, Rng& rng) {
  if (cfg1.vocab != cfg2.vocab || cfg1.max_seq != cfg2.max_seq)
    fail(ErrorKind::kConfigMismatch, "models differ in vocab or max_seq");
  require(seq_len >= 1 && seq_len <= cfg1.max_seq, ErrorKind::kInvalidArgument,
          "seq_len must lie in 1..max_seq (" + std::to_string(cfg1.max_seq) + ")");
  m1.validate(cfg1);
  m2.validate(cfg2);

  const std::uint64_t base = rng.next_u64();
  std::vector<double> worst(trials, 0.0);
  parallel_for(trials, [&](std::size_t t) {
    Rng r(base ^ static_cast<std::uint64_t>(t));
    const std::size_t len = 1 + static_cast<std::size_t>(r.uniform_index(seq_len));
    model::TokenSeq tokens(len);
    for (auto& id : tokens) id = static_cast<std::size_t>(r.uniform_index(cfg1.vocab));
    const Matrix l1 = model::forward(tokens, m1, cfg1);
    const Matrix l2 = model::forward(tokens, m2, cfg2);
    double e = 0.0;
    for (std::size_t i = 0; i < l1.values().size(); ++i) {
      const double a = l1.values()[i];
      const double r = std::abs(a - l2.values()[i]) / (1.0 + std::abs(a));
      // A NaN must register as a failure, not vanish inside max().
      e = std::isnan(r) ? std::numeric_limits<double>::infinity() : std::max(e, r);
    }
    worst[t] = e;
  });
  double e = 0.0;
  for (double w : worst) e = std::max(e, w);
  return e;
}

}  // namespace qelim::reparam
