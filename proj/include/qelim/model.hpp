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

// Decoder-only transformer: configuration, weights, forward pass, random
// initialisation and the QEC1 checkpoint format.
//
// Block variants (x is n x d_model, rows are positions):
//   AttnOnly, no norm:  B(X) = gelu((X + Attn(X)) W_up) W_down
//   Both,     no norm:  Y = X + Attn(X);  B(X) = Y + gelu(Y W_up) W_down
// With LayerNorm, Ln_k(x) = s_k * L_eps(x) is applied to the input of the
// attention and of the MLP; the residual paths carry the un-normalised
// stream. There are no biases and no final norm before the LM head.

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "qelim/attention.hpp"
#include "qelim/matrix.hpp"
#include "qelim/rng.hpp"

namespace qelim::model {

enum class NormType { kNone, kLayerNorm };
enum class Skips { kAttnOnly, kBoth };
enum class Sharing { kPerLayer, kShared };

const char* to_string(NormType v) noexcept;
const char* to_string(Skips v) noexcept;
const char* to_string(Sharing v) noexcept;

struct NormConfig {
  NormType type = NormType::kNone;
  double eps = 0.0;

  friend bool operator==(const NormConfig&, const NormConfig&) = default;
};

struct ArchConfig {
  attention::HeadLayout layout;
  std::size_t n_layers = 1;
  NormConfig norm;
  Skips skips = Skips::kAttnOnly;
  Sharing sharing = Sharing::kPerLayer;
  double attn_scale = 0.0;
  std::size_t vocab = 0;
  std::size_t max_seq = 0;
  bool tied_lm_head = false;

  std::size_t d_model() const noexcept { return layout.d_model; }
  /// Stored block count: 1 when shared, n_layers otherwise.
  std::size_t stored_blocks() const noexcept { return sharing == Sharing::kShared ? 1 : n_layers; }
  /// Throws kInvalidArgument naming the violated constraint.
  void validate() const;

  friend bool operator==(const ArchConfig&, const ArchConfig&) = default;
};

/// Sidecar JSON: {d_model,h,n_layers,norm:{type,eps},skips,sharing,attn_scale,vocab,max_seq,tied}.
/// attn_scale may be omitted on input (defaults to 1/sqrt(d_k)).
std::string config_to_json(const ArchConfig& cfg);
/// Throws kConfigParse (with line/column for malformed JSON) or
/// kInvalidArgument for a well-formed but invalid configuration.
ArchConfig config_from_json(const std::string& text);

struct BlockWeights {
  attention::AttnWeights attn;
  Matrix w_up;       // d x 4d
  Matrix w_down;     // 4d x d
  Vector ln1_scale;  // present iff LayerNorm
  Vector ln2_scale;

  friend bool operator==(const BlockWeights&, const BlockWeights&) = default;
};

struct ModelWeights {
  Matrix e;    // vocab x d
  Matrix e_p;  // max_seq x d
  std::vector<BlockWeights> blocks;
  std::optional<Matrix> w_lm;  // d x vocab; empty means tied to e^T

  bool tied() const noexcept { return !w_lm.has_value(); }
  /// e^T when tied.
  Matrix lm_head() const;
  void validate(const ArchConfig& cfg) const;

  friend bool operator==(const ModelWeights&, const ModelWeights&) = default;
};

using TokenSeq = std::vector<std::size_t>;

Matrix block_forward(const Matrix& x, const BlockWeights& b, const ArchConfig& cfg);

/// n x vocab logits. Throws kInvalidArgument for an empty sequence,
/// kSequenceTooLong, or kTokenOutOfRange.
Matrix forward(const TokenSeq& tokens, const ModelWeights& m, const ArchConfig& cfg);

inline constexpr double kDefaultMaxCond = 100.0;
inline constexpr int kMaxConditionDraws = 100;

/// Gaussian weights: embeddings N(0, 1), projections N(0, 1/fan_in),
/// LayerNorm scales exp(0.2 N(0, 1)). Each W_Q is redrawn until its 2-norm
/// condition number is at most max_cond; after kMaxConditionDraws failures
/// throws kConditioningFailure.
ModelWeights random_model(const ArchConfig& cfg, Rng& rng, double max_cond = kDefaultMaxCond);

/// Binary QEC1 image of the weights (no sidecar).
std::vector<std::uint8_t> encode_checkpoint(const ModelWeights& m, const ArchConfig& cfg);
/// Throws kBadMagic, kVersionMismatch, kTruncatedFile or kChecksumMismatch.
/// The result is checked against cfg.
ModelWeights decode_checkpoint(const std::vector<std::uint8_t>& bytes, const ArchConfig& cfg);

/// Sidecar path: the checkpoint path with ".json" appended.
std::filesystem::path sidecar_path(const std::filesystem::path& path);

/// Writes path and its sidecar atomically.
void save_checkpoint(const ModelWeights& m, const ArchConfig& cfg, const std::filesystem::path& path);
std::pair<ModelWeights, ArchConfig> load_checkpoint(const std::filesystem::path& path);

}  // namespace qelim::model
