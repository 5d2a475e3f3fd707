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

// Multi-head causal self-attention written in block-matrix form.
//
// A d_model-wide matrix is split into h column blocks of width d_k; a
// d_model-tall matrix into h row blocks. The block-wise product pairs the
// i-th column block of the left operand with the i-th row block of the right
// one, which is exactly the per-head score computation.

#include <cstddef>
#include <vector>

#include "qelim/matrix.hpp"

namespace qelim::attention {

struct HeadLayout {
  std::size_t d_model = 0;
  std::size_t heads = 0;
  std::size_t d_k = 0;

  /// Layout with d_k = d_model / heads; throws kInvalidArgument unless heads divides d_model.
  static HeadLayout make(std::size_t d_model, std::size_t heads);
  void validate() const;
  double default_scale() const;

  friend bool operator==(const HeadLayout&, const HeadLayout&) = default;
};

struct AttnWeights {
  Matrix w_q;
  Matrix w_k;
  Matrix w_v;
  Matrix w_o;

  void validate(const HeadLayout& layout) const;
  friend bool operator==(const AttnWeights&, const AttnWeights&) = default;
};

using HeadBlocks = std::vector<Matrix>;

/// (W_1 V_1, ..., W_h V_h) for W (n x d_model) split by columns and V
/// (d_model x n) split by rows.
HeadBlocks blockwise_product(const Matrix& w, const Matrix& v_blocks, const HeadLayout& layout);

/// (P_1 U_1 | ... | P_h U_h): each n x n head matrix times the matching
/// column block of U (n x d_model), concatenated back to n x d_model.
Matrix blockwise_product_t(const HeadBlocks& p, const Matrix& u, const HeadLayout& layout);

/// Row-wise softmax over the causal prefix of every head. Entries above the
/// diagonal are exactly zero; masked logits are never materialised.
HeadBlocks causal_block_softmax(const HeadBlocks& logits);

/// Value-mixed head outputs CausalSoftmax(scale (XW_Q) o (XW_K)^T) o^t (XW_V),
/// n x d_model.
Matrix mha_scores(const Matrix& x, const AttnWeights& w, const HeadLayout& layout, double scale);

/// mha_scores(...) * W_O.
Matrix attn_forward(const Matrix& x, const AttnWeights& w, const HeadLayout& layout, double scale);

}  // namespace qelim::attention
