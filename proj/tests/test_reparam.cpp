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

#include <doctest.h>

#include <algorithm>
#include <cmath>

#include "oracles.hpp"
#include "qelim/error.hpp"
#include "qelim/reparam.hpp"

using namespace qelim;
using namespace qelim::reparam;
using model::ArchConfig;
using model::ModelWeights;

namespace {

ArchConfig make_cfg(std::size_t d, std::size_t h, std::size_t layers, model::Skips skips, model::Sharing sharing,
                    bool tied, std::size_t vocab = 17, std::size_t max_seq = 12) {
  ArchConfig c;
  c.layout = attention::HeadLayout::make(d, h);
  c.n_layers = layers;
  c.skips = skips;
  c.sharing = sharing;
  c.attn_scale = c.layout.default_scale();
  c.vocab = vocab;
  c.max_seq = max_seq;
  c.tied_lm_head = tied;
  return c;
}

ArchConfig attn_skip_cfg(std::size_t d, std::size_t h, std::size_t layers, bool tied, std::size_t vocab = 17) {
  return make_cfg(d, h, layers, model::Skips::kAttnOnly, model::Sharing::kPerLayer, tied, vocab);
}

ArchConfig shared_cfg(std::size_t d, std::size_t h, std::size_t layers, bool tied) {
  return make_cfg(d, h, layers, model::Skips::kBoth, model::Sharing::kShared, tied);
}

double rel_err(const Matrix& ref, const Matrix& got) {
  double e = 0.0;
  for (std::size_t i = 0; i < ref.values().size(); ++i)
    e = std::max(e, std::abs(ref.values()[i] - got.values()[i]) / (1.0 + std::abs(ref.values()[i])));
  return e;
}

model::TokenSeq random_tokens(std::size_t n, std::size_t vocab, Rng& rng) {
  model::TokenSeq t(n);
  for (auto& v : t) v = static_cast<std::size_t>(rng.uniform_index(vocab));
  return t;
}

// Direct two-sided comparison over fresh sequences, independent of
// verify_equivalence.
double compare_forward(const ModelWeights& a, const ArchConfig& ca, const ModelWeights& b, const ArchConfig& cb,
                       std::size_t sequences, std::size_t len, Rng& rng) {
  double e = 0.0;
  for (std::size_t s = 0; s < sequences; ++s) {
    const auto t = random_tokens(len, ca.vocab, rng);
    e = std::max(e, rel_err(model::forward(t, a, ca), model::forward(t, b, cb)));
  }
  return e;
}

Matrix random_block_diag(const attention::HeadLayout& l, double cond, Rng& rng) {
  Matrix d(l.d_model, l.d_model);
  for (std::size_t i = 0; i < l.heads; ++i)
    d.set_block(i * l.d_k, i * l.d_k, oracle::random_with_condition(l.d_k, cond, rng));
  return d;
}

ErrorKind kind_of(auto&& fn) {
  try {
    fn();
  } catch (const Error& e) {
    return e.kind();
  }
  return ErrorKind::kIo;  // sentinel: nothing thrown
}

}  // namespace

TEST_CASE("reparametrize_triplet") {
  Rng rng(50);
  SUBCASE("identity query") {
    const Matrix k = oracle::random_matrix(5, 5, 1.0, rng);
    const Matrix v = oracle::random_matrix(5, 5, 1.0, rng);
    const Triplet t = reparametrize_triplet(Matrix::identity(5), k, v);
    CHECK(t.theta == Matrix::identity(5));
    CHECK(t.w_k == k);
    CHECK(t.w_v == v);
  }
  SUBCASE("diagonal query scales rows by reciprocals") {
    const Vector diag{2.0, -4.0, 0.5, 8.0};
    const Matrix k = oracle::random_matrix(4, 4, 1.0, rng);
    const Triplet t = reparametrize_triplet(Matrix::diagonal(diag), k, k);
    for (std::size_t i = 0; i < 4; ++i)
      for (std::size_t j = 0; j < 4; ++j) CHECK(t.w_k(i, j) == doctest::Approx(k(i, j) / diag[i]).epsilon(1e-15));
  }
  SUBCASE("both sides of the lemma agree") {
    for (int inst = 0; inst < 100; ++inst) {
      const std::size_t heads = inst % 3 == 0 ? 1 : (inst % 3 == 1 ? 2 : 4);
      const std::size_t d = heads * (1 + static_cast<std::size_t>(rng.uniform_index(8)));
      const std::size_t n = 1 + static_cast<std::size_t>(rng.uniform_index(16));
      const Matrix q = oracle::random_with_condition(d, 1.0 + 99.0 * rng.uniform(), rng);
      const Matrix k = oracle::random_matrix(d, d, 1.0, rng);
      const Matrix v = oracle::random_matrix(d, d, 1.0, rng);
      const Matrix x = oracle::random_matrix(n, d, 1.0, rng);
      const Triplet t = reparametrize_triplet(q, k, v);
      const double scale = 1.0 / std::sqrt(static_cast<double>(d / heads));
      const Matrix lhs = oracle::naive_mha_scores(oracle::naive_matmul(x, t.theta), Matrix::identity(d), t.w_k,
                                                  t.w_v, heads, scale);
      const Matrix rhs = oracle::naive_mha_scores(x, q, k, v, heads, scale);
      CHECK(max_abs_diff(lhs, rhs) <= 1e-10);
    }
  }
  SUBCASE("ill-conditioned query is rejected") {
    const Matrix q = oracle::random_with_condition(6, 1e9, rng);
    CHECK(kind_of([&] { (void)reparametrize_triplet(q, q, q); }) == ErrorKind::kSingularMatrix);
    CHECK(kind_of([&] { (void)reparametrize_triplet(Matrix(3, 3), Matrix(3, 3), Matrix(3, 3)); }) ==
          ErrorKind::kSingularMatrix);
  }
}

TEST_CASE("merge_qk_single_head") {
  Rng rng(51);
  const Matrix a = oracle::random_matrix(6, 6, 1.0, rng);
  CHECK(merge_qk_single_head(Matrix::identity(6), a) == a);
  CHECK(merge_qk_single_head(a, Matrix::identity(6)) == transpose(a));
  CHECK(kind_of([&] { (void)merge_qk_single_head(a, Matrix(5, 5)); }) == ErrorKind::kShape);

  for (int inst = 0; inst < 100; ++inst) {
    const Matrix q = oracle::random_matrix(6, 6, 0.5, rng);
    const Matrix k = oracle::random_matrix(6, 6, 0.5, rng);
    const Matrix v = oracle::random_matrix(6, 6, 1.0, rng);
    const Matrix o = oracle::random_matrix(6, 6, 1.0, rng);
    const Matrix x = oracle::random_matrix(1 + inst % 12, 6, 1.0, rng);
    const Matrix merged = merge_qk_single_head(q, k);
    const double c = std::sqrt(6.0);
    const Matrix lhs = oracle::naive_single_head_attention(x, q, k, v, o, c);
    const Matrix rhs = oracle::naive_single_head_attention(x, Matrix::identity(6), merged, v, o, c);
    CHECK(max_abs_diff(lhs, rhs) <= 1e-11);

    // Attention rows pick the same most-attended position.
    const auto layout = attention::HeadLayout::make(6, 1);
    const auto p1 = attention::causal_block_softmax(
        attention::blockwise_product(oracle::naive_matmul(x, q), transpose(oracle::naive_matmul(x, k)), layout));
    const auto p2 = attention::causal_block_softmax(
        attention::blockwise_product(x, transpose(oracle::naive_matmul(x, merged)), layout));
    for (std::size_t r = 0; r < x.rows(); ++r) {
      const auto r1 = p1[0].row(r);
      const auto r2 = p2[0].row(r);
      CHECK(std::max_element(r1.begin(), r1.end()) - r1.begin() == std::max_element(r2.begin(), r2.end()) - r2.begin());
    }
  }
}

TEST_CASE("gauge_transform") {
  Rng rng(52);
  auto random_w = [&](std::size_t d) {
    return attention::AttnWeights{oracle::random_matrix(d, d, 0.5, rng), oracle::random_matrix(d, d, 0.5, rng),
                                  oracle::random_matrix(d, d, 0.5, rng), oracle::random_matrix(d, d, 0.5, rng)};
  };
  SUBCASE("identity and scalar gauges") {
    const auto layout = attention::HeadLayout::make(8, 2);
    const auto w = random_w(8);
    CHECK(gauge_transform(w, Matrix::identity(8), layout) == w);
    const auto g = gauge_transform(w, 2.0 * Matrix::identity(8), layout);
    CHECK(g.w_q == 2.0 * w.w_q);
    CHECK(g.w_k == 0.5 * w.w_k);
    const Matrix x = oracle::random_matrix(7, 8, 1.0, rng);
    CHECK(max_abs_diff(attention::mha_scores(x, g, layout, 0.5), attention::mha_scores(x, w, layout, 0.5)) <= 1e-10);
  }
  SUBCASE("random block-diagonal gauges leave scores unchanged") {
    for (int inst = 0; inst < 100; ++inst) {
      const std::size_t heads = 3;
      const std::size_t dk = 1 + static_cast<std::size_t>(rng.uniform_index(4));
      const auto layout = attention::HeadLayout::make(heads * dk, heads);
      const auto w = random_w(layout.d_model);
      const Matrix dg = random_block_diag(layout, 10.0, rng);
      const auto g = gauge_transform(w, dg, layout);
      const Matrix x = oracle::random_matrix(1 + inst % 10, layout.d_model, 1.0, rng);
      const double s = layout.default_scale();
      CHECK(max_abs_diff(oracle::naive_mha_scores(x, g.w_q, g.w_k, g.w_v, heads, s),
                         oracle::naive_mha_scores(x, w.w_q, w.w_k, w.w_v, heads, s)) <= 1e-9);
    }
  }
  SUBCASE("composition") {
    const auto layout = attention::HeadLayout::make(8, 4);
    for (int inst = 0; inst < 20; ++inst) {
      const auto w = random_w(8);
      const Matrix d1 = random_block_diag(layout, 5.0, rng);
      const Matrix d2 = random_block_diag(layout, 5.0, rng);
      const auto twice = gauge_transform(gauge_transform(w, d1, layout), d2, layout);
      const auto once = gauge_transform(w, oracle::naive_matmul(d1, d2), layout);
      CHECK(max_abs_diff(twice.w_q, once.w_q) <= 1e-12);
      CHECK(max_abs_diff(twice.w_k, once.w_k) <= 1e-10);
    }
  }
  SUBCASE("errors") {
    const auto layout = attention::HeadLayout::make(4, 2);
    const auto w = random_w(4);
    Matrix leaky = Matrix::identity(4);
    leaky(0, 3) = 0.1;
    CHECK(kind_of([&] { (void)gauge_transform(w, leaky, layout); }) == ErrorKind::kInvalidArgument);
    Matrix singular = Matrix::identity(4);
    singular(2, 2) = 0.0;
    CHECK(kind_of([&] { (void)gauge_transform(w, singular, layout); }) == ErrorKind::kSingularMatrix);
    CHECK(kind_of([&] { (void)gauge_transform(w, Matrix::identity(3), layout); }) == ErrorKind::kShape);
  }
}

TEST_CASE("attention-skip elimination") {
  Rng rng(53);
  SUBCASE("weights follow the stated recurrences") {
    const ArchConfig cfg = attn_skip_cfg(8, 2, 2, false);
    const ModelWeights m = model::random_model(cfg, rng);
    const EliminationResult r = eliminate_query_attn_skip(m, cfg);
    const Matrix& t1 = m.blocks[0].attn.w_q;
    const Matrix& t2 = m.blocks[1].attn.w_q;
    CHECK(max_abs_diff(r.model.e, oracle::naive_matmul(m.e, t1)) <= 1e-13);
    CHECK(max_abs_diff(r.model.e_p, oracle::naive_matmul(m.e_p, t1)) <= 1e-13);
    const Matrix t1_inv = oracle::gauss_jordan_inverse(t1);
    const Matrix t2_inv = oracle::gauss_jordan_inverse(t2);
    CHECK(max_abs_diff(r.model.blocks[0].attn.w_k, oracle::naive_matmul(t1_inv, m.blocks[0].attn.w_k)) <= 1e-10);
    CHECK(max_abs_diff(r.model.blocks[1].w_up, oracle::naive_matmul(t2_inv, m.blocks[1].w_up)) <= 1e-10);
    CHECK(max_abs_diff(r.model.blocks[0].w_down, oracle::naive_matmul(m.blocks[0].w_down, t2)) <= 1e-13);
    CHECK(r.model.blocks[1].w_down == m.blocks[1].w_down);
    CHECK(r.model.blocks[1].attn.w_q == Matrix::identity(8));
    CHECK(*r.model.w_lm == *m.w_lm);
    CHECK(r.report.per_layer_cond.size() == 2);
    CHECK(r.report.per_layer_cond[0] == doctest::Approx(oracle::jacobi_condition(t1)).epsilon(1e-8));
  }
  SUBCASE("already reduced models pass through unchanged") {
    const ArchConfig cfg = attn_skip_cfg(8, 2, 3, false);
    ModelWeights m = model::random_model(cfg, rng);
    for (auto& b : m.blocks) b.attn.w_q = Matrix::identity(8);
    const EliminationResult r = eliminate_query_attn_skip(m, cfg);
    CHECK(r.model == m);
    CHECK(r.report.max_logit_rel_err == 0.0);
  }
  SUBCASE("small untied model") {
    const ArchConfig cfg = attn_skip_cfg(4, 2, 1, false, 7);
    const ModelWeights m = model::random_model(cfg, rng);
    const EliminationResult r = eliminate_query_attn_skip(m, cfg);
    CHECK(compare_forward(m, cfg, r.model, r.config, 50, 6, rng) <= 1e-9);
  }
  SUBCASE("tied input produces an untied equivalent") {
    const ArchConfig cfg = attn_skip_cfg(16, 4, 3, true);
    const ModelWeights m = model::random_model(cfg, rng);
    const EliminationResult r = eliminate_query_attn_skip(m, cfg);
    CHECK(!r.model.tied());
    CHECK(!r.config.tied_lm_head);
    CHECK(r.report.source_tied);
    CHECK(compare_forward(m, cfg, r.model, r.config, 50, 12, rng) <= 1e-8);
    CHECK(r.report.max_logit_rel_err <= 1e-8);
  }
  SUBCASE("property over random architectures") {
    int count = 0;
    for (std::size_t layers : {1u, 2u, 3u})
      for (bool tied : {false, true})
        for (std::size_t d : {8u, 16u})
          for (std::size_t h : {2u, 4u}) {
            ArchConfig cfg = attn_skip_cfg(d, h, layers, tied);
            if ((count++ % 2) == 1) cfg.attn_scale = 0.5 * cfg.layout.default_scale();
            const ModelWeights m = model::random_model(cfg, rng);
            const EliminationResult r = eliminate_query_attn_skip(m, cfg);
            CHECK(compare_forward(m, cfg, r.model, r.config, 10, 12, rng) <= 1e-8);
            Rng v(static_cast<std::uint64_t>(count));
            CHECK(verify_equivalence(m, r.model, cfg, r.config, 20, 12, v) <= 1e-8);
          }
    CHECK(count == 24);
  }
  SUBCASE("idempotence") {
    const ArchConfig cfg = attn_skip_cfg(8, 4, 2, true);
    const ModelWeights m = model::random_model(cfg, rng);
    const EliminationResult once = eliminate_query_attn_skip(m, cfg);
    const EliminationResult twice = eliminate_query_attn_skip(once.model, once.config);
    CHECK(twice.model == once.model);
    CHECK(twice.config == once.config);
  }
  SUBCASE("hypotheses are enforced") {
    ArchConfig ln = attn_skip_cfg(8, 2, 1, false);
    ln.norm = {model::NormType::kLayerNorm, 1e-5};
    CHECK(kind_of([&] { (void)eliminate_query_attn_skip(model::random_model(ln, rng), ln); }) ==
          ErrorKind::kConfigMismatch);
    const ArchConfig both = make_cfg(8, 2, 1, model::Skips::kBoth, model::Sharing::kPerLayer, false);
    CHECK(kind_of([&] { (void)eliminate_query_attn_skip(model::random_model(both, rng), both); }) ==
          ErrorKind::kConfigMismatch);
    const ArchConfig shared = make_cfg(8, 2, 2, model::Skips::kAttnOnly, model::Sharing::kShared, false);
    CHECK(kind_of([&] { (void)eliminate_query_attn_skip(model::random_model(shared, rng), shared); }) ==
          ErrorKind::kConfigMismatch);

    const ArchConfig cfg = attn_skip_cfg(8, 2, 2, false);
    ModelWeights bad = model::random_model(cfg, rng);
    bad.blocks[1].attn.w_q = oracle::random_with_condition(8, 1e6, rng);
    CHECK(kind_of([&] { (void)eliminate_query_attn_skip(bad, cfg); }) == ErrorKind::kSingularMatrix);
    EliminationOptions loose;
    loose.max_cond = 1e7;
    CHECK_NOTHROW((void)eliminate_query_attn_skip(bad, cfg, loose));
  }
}

TEST_CASE("weight-shared elimination") {
  Rng rng(54);
  SUBCASE("identity query is a no-op apart from untying") {
    const ArchConfig cfg = shared_cfg(8, 2, 3, false);
    ModelWeights m = model::random_model(cfg, rng);
    m.blocks[0].attn.w_q = Matrix::identity(8);
    const EliminationResult r = eliminate_query_weight_shared(m, cfg);
    CHECK(r.model == m);
  }
  SUBCASE("four layers, fifty sequences") {
    const ArchConfig cfg = shared_cfg(8, 2, 4, false);
    const ModelWeights m = model::random_model(cfg, rng);
    const EliminationResult r = eliminate_query_weight_shared(m, cfg);
    CHECK(compare_forward(m, cfg, r.model, r.config, 50, 12, rng) <= 1e-8);
    CHECK(r.model.blocks.size() == 1);
  }
  SUBCASE("one reduced model serves every depth") {
    for (bool tied : {false, true}) {
      ArchConfig cfg = shared_cfg(8, 2, 1, tied);
      const ModelWeights m = model::random_model(cfg, rng);
      const EliminationResult r = eliminate_query_weight_shared(m, cfg);
      for (std::size_t layers : {1u, 2u, 4u}) {
        ArchConfig c1 = cfg, c2 = r.config;
        c1.n_layers = c2.n_layers = layers;
        CHECK(compare_forward(m, c1, r.model, c2, 20, 12, rng) <= 1e-8);
      }
    }
  }
  SUBCASE("property over random models") {
    for (int inst = 0; inst < 20; ++inst) {
      const std::size_t layers = std::vector<std::size_t>{1, 2, 4}[static_cast<std::size_t>(inst % 3)];
      const ArchConfig cfg = shared_cfg(inst % 2 ? 16 : 8, inst % 4 < 2 ? 2 : 4, layers, inst % 5 < 2);
      const ModelWeights m = model::random_model(cfg, rng);
      const EliminationResult r = eliminate_query_weight_shared(m, cfg);
      CHECK(r.report.max_logit_rel_err <= 1e-8);
      CHECK(compare_forward(m, cfg, r.model, r.config, 10, 12, rng) <= 1e-8);
    }
  }
  SUBCASE("hypotheses are enforced") {
    const ArchConfig per = make_cfg(8, 2, 2, model::Skips::kBoth, model::Sharing::kPerLayer, false);
    CHECK(kind_of([&] { (void)eliminate_query_weight_shared(model::random_model(per, rng), per); }) ==
          ErrorKind::kConfigMismatch);
    const ArchConfig attn_only = make_cfg(8, 2, 2, model::Skips::kAttnOnly, model::Sharing::kShared, false);
    CHECK(kind_of([&] { (void)eliminate_query_weight_shared(model::random_model(attn_only, rng), attn_only); }) ==
          ErrorKind::kConfigMismatch);
  }
}

TEST_CASE("verify_equivalence") {
  Rng rng(55);
  const ArchConfig cfg = attn_skip_cfg(8, 2, 2, false);
  const ModelWeights m = model::random_model(cfg, rng);
  Rng a(1), b(1);
  CHECK(verify_equivalence(m, m, cfg, cfg, 10, 12, a) == 0.0);

  ModelWeights p = m;
  p.blocks[1].attn.w_v(3, 4) += 1e-3;
  const double e1 = verify_equivalence(m, p, cfg, cfg, 10, 12, a);
  CHECK(e1 > 1e-6);
  Rng a2(1);
  (void)a2.next_u64();
  CHECK(verify_equivalence(m, p, cfg, cfg, 10, 12, a2) == e1);

  ArchConfig other = cfg;
  other.vocab = 18;
  CHECK(kind_of([&] { (void)verify_equivalence(m, m, cfg, other, 1, 4, b); }) == ErrorKind::kConfigMismatch);
  CHECK(kind_of([&] { (void)verify_equivalence(m, m, cfg, cfg, 1, 13, b); }) == ErrorKind::kInvalidArgument);

  ModelWeights nan = m;
  nan.e(0, 0) = std::nan("");
  Rng c(3);
  CHECK(std::isinf(verify_equivalence(m, nan, cfg, cfg, 20, 12, c)));
}

TEST_CASE("elimination report json") {
  Rng rng(56);
  const ArchConfig cfg = shared_cfg(8, 2, 2, true);
  const ModelWeights m = model::random_model(cfg, rng);
  EliminationOptions opts;
  opts.seed = 99;
  const std::string j1 = to_json(eliminate_query_weight_shared(m, cfg, opts).report);
  CHECK(j1 == to_json(eliminate_query_weight_shared(m, cfg, opts).report));
  CHECK(j1.find("\"mode\": \"weight-shared\"") != std::string::npos);
  CHECK(j1.find("\"source_tied\": true") != std::string::npos);
  CHECK(j1.find("\"trials\": 10") != std::string::npos);
}
