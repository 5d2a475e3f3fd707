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

#include "qelim/attention.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include "qelim/error.hpp"
#include "qelim/kernels.hpp"

namespace qelim::attention {
namespace {

void require_shape(const Matrix& m, std::size_t rows, std::size_t cols, const char* what) {
  require(m.rows() == rows && m.cols() == cols, ErrorKind::kShape,
          std::string(what) + ": expected " + std::to_string(rows) + "x" + std::to_string(cols) + ", got " +
              std::to_string(m.rows()) + "x" + std::to_string(m.cols()));
}

}  // namespace

HeadLayout HeadLayout::make(std::size_t d_model, std::size_t heads) {
  require(heads >= 1 && d_model >= 1 && d_model % heads == 0, ErrorKind::kInvalidArgument,
          "d_model (" + std::to_string(d_model) + ") must be a positive multiple of the head count (" +
              std::to_string(heads) + ")");
  return HeadLayout{d_model, heads, d_model / heads};
}

void HeadLayout::validate() const {
  require(heads >= 1 && d_k >= 1 && heads * d_k == d_model, ErrorKind::kInvalidArgument,
          "head layout requires heads * d_k == d_model");
}

double HeadLayout::default_scale() const { return 1.0 / std::sqrt(static_cast<double>(d_k)); }

void AttnWeights::validate(const HeadLayout& layout) const {
  const std::size_t d = layout.d_model;
  require_shape(w_q, d, d, "W_Q");
  require_shape(w_k, d, d, "W_K");
  require_shape(w_v, d, d, "W_V");
  require_shape(w_o, d, d, "W_O");
}

HeadBlocks blockwise_product(const Matrix& w, const Matrix& v_blocks, const HeadLayout& layout) {
  layout.validate();
  const std::size_t n = w.rows();
  require_shape(w, n, layout.d_model, "blockwise_product lhs");
  require(v_blocks.rows() == layout.d_model, ErrorKind::kShape, "blockwise_product rhs must have d_model rows");
  const std::size_t m = v_blocks.cols();
  const auto& k = kernels::active();
  HeadBlocks out;
  out.reserve(layout.heads);
  for (std::size_t i = 0; i < layout.heads; ++i) {
    Matrix prod(n, m);
    const std::size_t off = i * layout.d_k;
    k.gemm(n, m, layout.d_k, w.data() + off, w.cols(), v_blocks.data() + off * m, m, prod.data(), m);
    out.push_back(std::move(prod));
  }
  return out;
}

Matrix blockwise_product_t(const HeadBlocks& p, const Matrix& u, const HeadLayout& layout) {
  layout.validate();
  require(p.size() == layout.heads, ErrorKind::kShape, "blockwise_product_t: one matrix per head expected");
  const std::size_t n = u.rows();
  require_shape(u, n, layout.d_model, "blockwise_product_t rhs");
  Matrix out(n, layout.d_model);
  const auto& k = kernels::active();
  for (std::size_t i = 0; i < layout.heads; ++i) {
    require_shape(p[i], n, n, "blockwise_product_t head block");
    const std::size_t off = i * layout.d_k;
    k.gemm(n, layout.d_k, n, p[i].data(), n, u.data() + off, u.cols(), out.data() + off, out.cols());
  }
  return out;
}

HeadBlocks causal_block_softmax(const HeadBlocks& logits) {
  HeadBlocks out;
  out.reserve(logits.size());
  for (const Matrix& a : logits) {
    require(a.is_square(), ErrorKind::kShape, "causal softmax expects square head blocks");
    const std::size_t n = a.rows();
    Matrix p(n, n);
    for (std::size_t i = 0; i < n; ++i) {
      const auto row = a.row(i);
      const double mx = *std::max_element(row.begin(), row.begin() + static_cast<std::ptrdiff_t>(i + 1));
      double sum = 0.0;
      for (std::size_t j = 0; j <= i; ++j) {
        const double e = std::exp(row[j] - mx);
        p(i, j) = e;
        sum += e;
      }
      for (std::size_t j = 0; j <= i; ++j) p(i, j) /= sum;
    }
    out.push_back(std::move(p));
  }
  return out;
}

Matrix mha_scores(const Matrix& x, const AttnWeights& w, const HeadLayout& layout, double scale) {
  layout.validate();
  w.validate(layout);
  require(x.cols() == layout.d_model && x.rows() >= 1, ErrorKind::kShape, "attention input must be n x d_model");
  require(scale > 0.0 && std::isfinite(scale), ErrorKind::kInvalidArgument, "attention scale must be > 0");
  const Matrix q = matmul(x, w.w_q);
  const Matrix kt = transpose(matmul(x, w.w_k));
  const Matrix v = matmul(x, w.w_v);
  HeadBlocks logits = blockwise_product(q, kt, layout);
  for (Matrix& l : logits)
    for (double& e : l.values()) e *= scale;
  return blockwise_product_t(causal_block_softmax(logits), v, layout);
}

Matrix attn_forward(const Matrix& x, const AttnWeights& w, const HeadLayout& layout, double scale) {
  return matmul(mha_scores(x, w, layout, scale), w.w_o);
}

}  // namespace qelim::attention
