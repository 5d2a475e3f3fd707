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

// Weight rewrites that remove the query projection.
//
// Attention reads X only through XW_Q, XW_K and XW_V, so with Theta = W_Q
//   S(X, W_Q, W_K, W_V) = S(X Theta, I, Theta^-1 W_K, Theta^-1 W_V).
// Pushing Theta through the residual stream of a whole model gives the two
// elimination transforms below. Both are pure: they return a new model.

#include <cstddef>
#include <cstdint>
#include <string>
#include <vector>

#include "qelim/attention.hpp"
#include "qelim/model.hpp"
#include "qelim/rng.hpp"

namespace qelim::reparam {

/// Conditioning gate of reparametrize_triplet.
inline constexpr double kTripletMaxCond = 1e6;

struct Triplet {
  Matrix theta;
  Matrix w_k;
  Matrix w_v;
};

/// (W_Q, W_Q^-1 W_K, W_Q^-1 W_V). Throws kSingularMatrix when cond_2(W_Q)
/// exceeds kTripletMaxCond.
Triplet reparametrize_triplet(const Matrix& w_q, const Matrix& w_k, const Matrix& w_v);

/// W_K W_Q^T: single-head attention with (I, merged) equals (W_Q, W_K).
Matrix merge_qk_single_head(const Matrix& w_q, const Matrix& w_k);

/// (W_Q D, W_K (D^T)^-1, W_V, W_O) for D block-diagonal with one d_k x d_k
/// block per head. Throws kInvalidArgument if D has entries outside the
/// head blocks, SingularMatrixError if a block is singular.
attention::AttnWeights gauge_transform(const attention::AttnWeights& w, const Matrix& d_blocks,
                                       const attention::HeadLayout& layout);

enum class EliminationMode { kAttnSkipOnly, kWeightShared };

const char* to_string(EliminationMode mode) noexcept;

struct EliminationOptions {
  double max_cond = 1e4;     // per W_Q, 2-norm condition number
  std::size_t trials = 10;   // verification sequences
  std::size_t seq_len = 0;   // longest verification sequence; 0 means max_seq
  std::uint64_t seed = 0;    // verification token stream
};

struct EliminationReport {
  EliminationMode mode = EliminationMode::kAttnSkipOnly;
  std::vector<double> per_layer_cond;
  double max_logit_rel_err = 0.0;
  std::size_t trials = 0;
  std::size_t seq_len = 0;
  std::uint64_t seed = 0;
  double max_cond = 0.0;
  bool source_tied = false;
};

std::string to_json(const EliminationReport& r);

struct EliminationResult {
  model::ModelWeights model;
  model::ArchConfig config;
  EliminationReport report;
};

/// Per-layer bases Theta_i = W_Q^i for a model with an attention skip only
/// and no normalisation:
///   E~ = E Theta_1, E_P~ = E_P Theta_1,
///   W_K~ = Theta_i^-1 W_K, W_V~ = Theta_i^-1 W_V, W_O~ = W_O Theta_i,
///   W_up~ = Theta_i^-1 W_up, W_down~ = W_down Theta_{i+1},
/// with Theta_{L+1} = (Theta_1^T)^-1 and W_LM~ = Theta_1^T E^T for a tied
/// head, Theta_{L+1} = I and W_LM~ = W_LM otherwise. The output always stores
/// its LM head explicitly. Throws kConfigMismatch for other architectures
/// (including shared blocks) and kSingularMatrix when a W_Q fails the gate.
EliminationResult eliminate_query_attn_skip(const model::ModelWeights& m, const model::ArchConfig& cfg,
                                            const EliminationOptions& opts = {});

/// Single conjugation by Theta = W_Q for a shared-block model with both skips
/// and no normalisation; W_LM~ = Theta^-1 W_LM (W_LM = E^T when tied).
EliminationResult eliminate_query_weight_shared(const model::ModelWeights& m, const model::ArchConfig& cfg,
                                                const EliminationOptions& opts = {});

/// Max over `trials` random sequences (length uniform in 1..seq_len) of
/// |l1 - l2| / (1 + |l1|). Trial t draws from Rng(base ^ t), base being the
/// next value of rng. Throws kConfigMismatch when vocab or max_seq differ.
double verify_equivalence(const model::ModelWeights& m1, const model::ModelWeights& m2,
                          const model::ArchConfig& cfg1, const model::ArchConfig& cfg2, std::size_t trials,
                          std::size_t seq_len, Rng& rng);

}  // namespace qelim::reparam
