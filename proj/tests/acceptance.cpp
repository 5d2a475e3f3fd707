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

// Acceptance runner. Prints one PASS/FAIL line per criterion and writes the
// JSON evidence for each to --out. Exit status is 0 only if every selected
// criterion passes.

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <functional>
#include <iostream>
#include <map>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include "cli.hpp"
#include "oracles.hpp"
#include "qelim/io.hpp"
#include "qelim/mlpexp.hpp"
#include "qelim/model.hpp"
#include "qelim/reluskip.hpp"
#include "qelim/reparam.hpp"

using namespace qelim;
using json = nlohmann::ordered_json;
namespace fs = std::filesystem;

namespace {

struct Outcome {
  bool pass = false;
  std::string detail;
};

// Runs the command-line tool in-process; stdout is returned, stderr dropped.
struct CliRun {
  int code;
  std::string out;
};

CliRun tool(const std::vector<std::string>& args) {
  std::ostringstream out, err;
  const int code = cli::run_cli(args, out, err);
  return {code, out.str()};
}

json read_json(const fs::path& p) { return json::parse(io::read_text(p)); }

void write_json(const fs::path& p, const json& j) { io::write_text_atomic(p, j.dump(2) + "\n"); }

std::string fmt(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.3g", v);
  return buf;
}

double seconds_since(std::chrono::steady_clock::time_point t0) {
  return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
}

// --- model equivalence ------------------------------------------------------

struct ModelSpec {
  std::size_t d, h, layers;
  bool tied;
  bool half_scale;
  bool shared;
};

json arch_json(const ModelSpec& s) {
  json j{{"d_model", s.d},
         {"h", s.h},
         {"n_layers", s.layers},
         {"norm", {{"type", "none"}, {"eps", nullptr}}},
         {"skips", s.shared ? "both" : "attn_only"},
         {"sharing", s.shared ? "shared" : "per_layer"}};
  if (s.half_scale) j["attn_scale"] = 0.5 / std::sqrt(static_cast<double>(s.d / s.h));
  j["vocab"] = 17;
  j["max_seq"] = 12;
  j["tied"] = s.tied;
  return j;
}

// gen -> transform -> verify through the tool, plus direct checks on the
// rewritten checkpoint: every W_Q is the identity and every source W_Q meets
// the conditioning bound (by the Jacobi oracle).
json run_equivalence(const std::vector<ModelSpec>& specs, const std::string& mode, const fs::path& dir,
                     double& worst, bool& all_ok) {
  fs::create_directories(dir);
  json rows = json::array();
  worst = 0.0;
  all_ok = true;
  for (std::size_t i = 0; i < specs.size(); ++i) {
    const ModelSpec& s = specs[i];
    const std::string stem = (dir / ("m" + std::to_string(i))).string();
    write_json(stem + ".cfg.json", arch_json(s));
    const std::string seed = std::to_string(100 + i);
    const int g = tool({"gen", "--config", stem + ".cfg.json", "--seed", seed, "--out", stem + ".qec"}).code;
    const int t = tool({"transform", "--in", stem + ".qec", "--out", stem + ".qe.qec", "--mode", mode, "--report",
                       stem + ".transform.json", "--max-cond", "100", "--seed", seed})
                      .code;
    const int v = tool({"verify", "--a", stem + ".qec", "--b", stem + ".qe.qec", "--trials", "50", "--seq-len", "12",
                       "--tol", "1e-8", "--seed", seed, "--out", stem + ".verify.json"})
                      .code;
    json row{{"model", i}, {"arch", arch_json(s)}, {"exit_codes", {g, t, v}}};
    bool ok = g == 0 && t == 0 && v == 0;
    if (ok) {
      const json rep = read_json(stem + ".verify.json");
      const double err = rep["max_logit_rel_err"].get<double>();
      const auto [src, src_cfg] = model::load_checkpoint(stem + ".qec");
      const auto [dst, dst_cfg] = model::load_checkpoint(stem + ".qe.qec");
      double cond = 0.0, q_dev = 0.0;
      for (const auto& b : src.blocks) cond = std::max(cond, oracle::jacobi_condition(b.attn.w_q));
      for (const auto& b : dst.blocks) q_dev = std::max(q_dev, max_abs_diff(b.attn.w_q, Matrix::identity(s.d)));
      worst = std::max(worst, err);
      ok = err <= 1e-8 && cond <= 100.0 && q_dev == 0.0 && dst_cfg.attn_scale == src_cfg.attn_scale;
      row["max_logit_rel_err"] = err;
      row["max_cond_w_q"] = cond;
      row["rewritten_w_q_max_dev_from_identity"] = q_dev;
      row["attn_scale"] = src_cfg.attn_scale;
    }
    row["pass"] = ok;
    all_ok = all_ok && ok;
    rows.push_back(row);
  }
  return rows;
}

std::vector<ModelSpec> attn_skip_specs() {
  // 2 widths x 2 head counts x 3 depths, then 8 more spread over the same grid;
  // tied alternates and every third model halves the attention scale.
  std::vector<ModelSpec> specs;
  for (std::size_t i = 0; i < 20; ++i) {
    const std::size_t d = (i % 2 == 0) ? 8 : 16;
    const std::size_t h = ((i / 2) % 2 == 0) ? 2 : 4;
    const std::size_t layers = 1 + (i / 4) % 3;
    specs.push_back({d, h, layers, (i / 3) % 2 == 0, i % 3 == 0, false});
  }
  return specs;
}

std::vector<ModelSpec> shared_specs() {
  std::vector<ModelSpec> specs;
  std::size_t i = 0;
  for (std::size_t layers : {1, 2, 4})
    for (std::size_t d : {8, 16})
      for (bool tied : {true, false}) {
        specs.push_back({d, i % 2 == 0 ? std::size_t{2} : std::size_t{4}, layers, tied, i % 3 == 0, true});
        ++i;
      }
  return specs;
}

bool c1_half_scale_ok = false;

Outcome criterion1(const fs::path& out) {
  const auto t0 = std::chrono::steady_clock::now();
  const auto specs = attn_skip_specs();
  double worst = 0.0;
  bool ok = false;
  const json rows = run_equivalence(specs, "attn-skip", out / "c1", worst, ok);
  const double secs = seconds_since(t0);
  std::size_t tied = 0, half = 0;
  c1_half_scale_ok = true;
  for (std::size_t i = 0; i < specs.size(); ++i) {
    tied += specs[i].tied;
    if (specs[i].half_scale) {
      ++half;
      c1_half_scale_ok = c1_half_scale_ok && rows[i]["pass"].get<bool>();
    }
  }
  c1_half_scale_ok = c1_half_scale_ok && half > 0;
  write_json(out / "c1.json", json{{"models", rows}, {"max_logit_rel_err", worst}, {"pass", ok}});
  return {ok && tied > 0 && tied < specs.size() && secs < 60.0,
          "20 models (" + std::to_string(tied) + " tied, " + std::to_string(half) +
              " at half attn_scale), max rel logit err " + fmt(worst) + " <= 1e-8, " + fmt(secs) + " s < 60 s"};
}

Outcome criterion2(const fs::path& out) {
  const auto specs = shared_specs();
  double worst = 0.0;
  bool ok = false;
  const json rows = run_equivalence(specs, "weight-shared", out / "c2", worst, ok);
  write_json(out / "c2.json", json{{"models", rows}, {"max_logit_rel_err", worst}, {"pass", ok}});
  return {ok, std::to_string(specs.size()) + " shared-block models, L in {1,2,4}, max rel logit err " + fmt(worst) +
                  " <= 1e-8"};
}

// --- pointwise identities -----------------------------------------------------

Outcome criterion3(const fs::path& out) {
  constexpr int kInstances = 150;
  Rng rng(derive_seed(3, 0));
  double triplet = 0.0, merge = 0.0, gauge = 0.0;
  for (int i = 0; i < kInstances; ++i) {
    const std::size_t heads = std::size_t{1} << (i % 3);
    const std::size_t d = heads * (1 + rng.uniform_index(6));
    const std::size_t n = 1 + rng.uniform_index(12);
    const Matrix q = oracle::random_with_condition(d, 1.0 + 99.0 * rng.uniform(), rng);
    const Matrix k = oracle::random_matrix(d, d, 1.0, rng);
    const Matrix v = oracle::random_matrix(d, d, 1.0, rng);
    const Matrix x = oracle::random_matrix(n, d, 1.0, rng);
    const double scale = 1.0 / std::sqrt(static_cast<double>(d / heads));
    const auto t = reparam::reparametrize_triplet(q, k, v);
    triplet = std::max(triplet, max_abs_diff(oracle::naive_mha_scores(x, q, k, v, heads, scale),
                                             oracle::naive_mha_scores(oracle::naive_matmul(x, t.theta),
                                                                      Matrix::identity(d), t.w_k, t.w_v, heads,
                                                                      scale)));
  }
  for (int i = 0; i < kInstances; ++i) {
    const std::size_t d = 2 + rng.uniform_index(7);
    const Matrix q = oracle::random_matrix(d, d, 0.5, rng);
    const Matrix k = oracle::random_matrix(d, d, 0.5, rng);
    const Matrix v = oracle::random_matrix(d, d, 1.0, rng);
    const Matrix o = oracle::random_matrix(d, d, 1.0, rng);
    const Matrix x = oracle::random_matrix(1 + rng.uniform_index(12), d, 1.0, rng);
    const double c = std::sqrt(static_cast<double>(d));
    merge = std::max(merge, max_abs_diff(oracle::naive_single_head_attention(x, q, k, v, o, c),
                                         oracle::naive_single_head_attention(
                                             x, Matrix::identity(d), reparam::merge_qk_single_head(q, k), v, o, c)));
  }
  for (int i = 0; i < kInstances; ++i) {
    const std::size_t heads = 1 + rng.uniform_index(4);
    const std::size_t dk = 1 + rng.uniform_index(4);
    const auto layout = attention::HeadLayout::make(heads * dk, heads);
    const std::size_t d = layout.d_model;
    const attention::AttnWeights w{oracle::random_matrix(d, d, 0.5, rng), oracle::random_matrix(d, d, 0.5, rng),
                                   oracle::random_matrix(d, d, 0.5, rng), oracle::random_matrix(d, d, 0.5, rng)};
    Matrix blocks(d, d);
    for (std::size_t b = 0; b < heads; ++b)
      blocks.set_block(b * dk, b * dk, oracle::random_with_condition(dk, 1.0 + 9.0 * rng.uniform(), rng));
    const auto g = reparam::gauge_transform(w, blocks, layout);
    const Matrix x = oracle::random_matrix(1 + rng.uniform_index(12), d, 1.0, rng);
    const double s = layout.default_scale();
    gauge = std::max(gauge, max_abs_diff(oracle::naive_mha_scores(x, w.w_q, w.w_k, w.w_v, heads, s),
                                         oracle::naive_mha_scores(x, g.w_q, g.w_k, g.w_v, heads, s)));
  }
  const bool ok = triplet <= 1e-9 && merge <= 1e-9 && gauge <= 1e-9;
  write_json(out / "c3.json", json{{"instances_each", kInstances},
                                   {"reparametrize_triplet_max_abs_dev", triplet},
                                   {"merge_qk_single_head_max_abs_dev", merge},
                                   {"gauge_transform_max_abs_dev", gauge},
                                   {"pass", ok}});
  return {ok, std::to_string(kInstances) + " instances each, max abs dev triplet " + fmt(triplet) + ", merge " +
                  fmt(merge) + ", gauge " + fmt(gauge) + " <= 1e-9"};
}

// --- LayerNorm -------------------------------------------------------------------

Outcome criterion4(const fs::path& out) {
  fs::create_directories(out / "c4");
  json rows = json::array();
  double conj = 0.0, prime = 0.0, shift = 0.0;
  bool ok = true;
  std::uint64_t seed = 40;
  for (std::size_t d : {4, 8, 16})
    for (const char* eps : {"0.01", "0.1", "1"}) {
      const fs::path p = out / "c4" / ("d" + std::to_string(d) + "_eps" + eps + ".json");
      const int code = tool({"lnconj", "--dim", std::to_string(d), "--eps", eps, "--samples", "1000", "--tol", "1e-9",
                            "--shift-tol", "1e-12", "--seed", std::to_string(seed++), "--out", p.string()})
                           .code;
      if (code != 0 && !fs::exists(p)) {
        ok = false;
        rows.push_back({{"d", d}, {"eps", eps}, {"exit_code", code}});
        continue;
      }
      const json r = read_json(p);
      const double c = r["max_conjugacy_err"].get<double>();
      const double m = r["max_mlp_prime_err"].get<double>();
      const double s = r["max_shift_invariance_err"].get<double>();
      conj = std::max(conj, c);
      prime = std::max(prime, m);
      shift = std::max(shift, s);
      ok = ok && code == 0 && r["samples"] == 1000 && c <= 1e-9 && m <= 1e-9 && s <= 1e-12;
      rows.push_back(r);
    }
  write_json(out / "c4.json", json{{"settings", rows}, {"pass", ok}});
  return {ok, "9 settings x 1000 samples, conjugacy " + fmt(conj) + ", two-sided " + fmt(prime) +
                  " <= 1e-9, mean shift " + fmt(shift) + " <= 1e-12"};
}

Outcome criterion5(const fs::path& out) {
  fs::create_directories(out / "c5");
  json rows = json::array();
  bool ok = true;
  std::string detail;
  for (int seed = 0; seed < 5; ++seed) {
    const fs::path p = out / "c5" / ("seed" + std::to_string(seed) + ".csv");
    const int code = tool({"probe", "--dims", "16,256", "--eps", "0.1", "--seed", std::to_string(seed), "--out",
                          p.string()})
                         .code;
    if (code != 0) {
      ok = false;
      rows.push_back({{"seed", seed}, {"exit_code", code}});
      continue;
    }
    std::istringstream csv(io::read_text(p));
    std::string line;
    std::getline(csv, line);
    std::map<std::size_t, double> mean;
    while (std::getline(csv, line)) {
      std::istringstream cells(line);
      std::string d, eps, samples, m;
      std::getline(cells, d, ',');
      std::getline(cells, eps, ',');
      std::getline(cells, samples, ',');
      std::getline(cells, m, ',');
      mean[std::stoul(d)] = std::stod(m);
    }
    const bool smaller = mean.count(16) && mean.count(256) && mean[256] < mean[16];
    ok = ok && smaller;
    rows.push_back({{"seed", seed}, {"mean_rel_dev_d16", mean[16]}, {"mean_rel_dev_d256", mean[256]},
                    {"strictly_smaller", smaller}});
    detail += (detail.empty() ? "" : ", ") + fmt(mean[256]) + " < " + fmt(mean[16]);
  }
  write_json(out / "c5.json", json{{"eps", 0.1}, {"seeds", rows}, {"pass", ok}});
  return {ok, "mean rel dev d=256 vs d=16 per seed: " + detail};
}

// --- ReLU skip absorption --------------------------------------------------------

Outcome criterion6(const fs::path& out) {
  using namespace reluskip;
  json planted = json::array(), generic = json::array();
  bool ok = true;
  double worst_verify = 0.0, worst_alg = 0.0;
  std::size_t recovered = 0, planted_total = 0, generic_empty = 0, generic_total = 0;
  for (std::size_t h : {2, 3, 4}) {
    const std::size_t m = 4 * h;
    for (std::uint64_t seed = 0; seed < 10; ++seed) {
      Rng rng(derive_seed(600 + h, seed));
      IndexSet j;
      for (std::size_t i = 0; i < m && j.size() < h; ++i)
        if (rng.uniform_index(m - i) < h - j.size()) j.push_back(i);
      const AbsorptionInstance inst = plant_instance(h, m, j, rng);
      const SearchResult found = find_absorbing_subsets(inst);
      const bool hit = std::find(found.subsets.begin(), found.subsets.end(), j) != found.subsets.end();
      const auto [v1, v2] = absorb_construct(inst, j);
      const double dev = verify_absorption(inst, v1, v2, 10000, rng);
      // Column convention: W1 is m x h, W2 is h x m, so the products are h x h.
      Matrix expected = oracle::naive_matmul(inst.w2, inst.w1);
      for (std::size_t i = 0; i < h; ++i) expected(i, i) += 2.0;
      const double alg = max_abs_diff(oracle::naive_matmul(v2, v1), expected);
      worst_verify = std::max(worst_verify, dev);
      worst_alg = std::max(worst_alg, alg);
      const bool good = hit && dev <= 1e-9 && alg <= 1e-10;
      recovered += hit;
      ++planted_total;
      ok = ok && good;
      planted.push_back({{"h", h}, {"seed", seed}, {"planted_j", j}, {"recovered", hit},
                         {"subsets_found", found.subsets.size()}, {"max_deviation", dev},
                         {"algebraic_dev", alg}, {"pass", good}});
    }
    for (std::uint64_t seed = 0; seed < 10; ++seed) {
      Rng rng(derive_seed(700 + h, seed));
      const AbsorptionInstance inst = random_instance(h, m, rng);
      const SearchResult found = find_absorbing_subsets(inst, 1e-6);
      generic_empty += found.subsets.empty();
      ++generic_total;
      ok = ok && found.subsets.empty();
      generic.push_back({{"h", h}, {"seed", seed}, {"subsets_found", found.subsets.size()}});
    }
  }
  write_json(out / "c6.json", json{{"planted", planted}, {"generic", generic}, {"pass", ok}});
  return {ok, std::to_string(recovered) + "/" + std::to_string(planted_total) + " planted J recovered, verify " +
                  fmt(worst_verify) + " <= 1e-9, V2V1 dev " + fmt(worst_alg) + " <= 1e-10, " +
                  std::to_string(generic_empty) + "/" + std::to_string(generic_total) + " generic empty"};
}

// --- MLP skip experiment ------------------------------------------------------------

std::vector<std::string> mlpexp_args(int seed, const fs::path& dir) {
  const std::string stem = (dir / ("seed" + std::to_string(seed))).string();
  return {"mlpexp", "--h", "64", "--steps", "3000", "--batch", "2048", "--eval", "4096", "--seed",
          std::to_string(seed), "--out", stem + ".json", "--csv", stem + ".csv"};
}

Outcome criterion7(const fs::path& out) {
  fs::create_directories(out / "c7");
  const auto t0 = std::chrono::steady_clock::now();
  double trained = 0.0, linear = 0.0, cos_t = 0.0, cos_l = 0.0;
  json seeds = json::array();
  bool ran = true;
  for (int seed = 0; seed < 3; ++seed) {
    if (tool(mlpexp_args(seed, out / "c7")).code != 0) {
      ran = false;
      continue;
    }
    const json r = read_json(out / "c7" / ("seed" + std::to_string(seed) + ".json"));
    trained += r["trained"]["mean_rel_err"].get<double>() / 3.0;
    linear += r["linear"]["mean_rel_err"].get<double>() / 3.0;
    cos_t += r["trained"]["mean_cos"].get<double>() / 3.0;
    cos_l += r["linear"]["mean_cos"].get<double>() / 3.0;
    seeds.push_back({{"seed", seed}, {"trained", r["trained"]}, {"linear", r["linear"]}});
  }
  const double secs = seconds_since(t0);
  const bool ok = ran && trained <= 0.8 * linear && cos_t > cos_l && secs < 900.0;
  write_json(out / "c7.json", json{{"per_seed", seeds},
                                   {"trained_mean_rel_err", trained},
                                   {"linear_mean_rel_err", linear},
                                   {"ratio", linear > 0.0 ? trained / linear : 0.0},
                                   {"trained_mean_cos", cos_t},
                                   {"linear_mean_cos", cos_l},
                                   {"pass", ok}});
  return {ok, "h=64, 3 seeds: trained err " + fmt(trained) + " vs linear " + fmt(linear) + " (ratio " +
                  fmt(linear > 0.0 ? trained / linear : 0.0) + " <= 0.8), cos " + fmt(cos_t) + " > " +
                  fmt(cos_l) + ", " + fmt(secs) + " s < 900 s"};
}

// --- gradient check ------------------------------------------------------------------

double fd_rel_err(const Matrix& x, const Matrix& y, mlpexp::MlpParams p, Matrix mlpexp::MlpParams::*which,
                  const Matrix& analytic) {
  constexpr double kStep = 1e-5;
  Matrix& w = p.*which;
  Matrix fd(w.rows(), w.cols());
  for (std::size_t i = 0; i < w.size(); ++i) {
    const double keep = w.data()[i];
    w.data()[i] = keep + kStep;
    const double up = mlpexp::relative_loss(mlpexp::model_forward(x, p), y);
    w.data()[i] = keep - kStep;
    const double down = mlpexp::relative_loss(mlpexp::model_forward(x, p), y);
    w.data()[i] = keep;
    fd.data()[i] = (up - down) / (2.0 * kStep);
  }
  // Entries far below the gradient scale are measured against that scale.
  const double scale = max_abs(fd);
  double worst = 0.0;
  for (std::size_t i = 0; i < fd.size(); ++i) {
    const double a = analytic.data()[i], f = fd.data()[i];
    worst = std::max(worst, std::abs(a - f) / std::max({std::abs(a), std::abs(f), 1e-3 * scale}));
  }
  return worst;
}

Outcome criterion8(const fs::path& out) {
  double worst = 0.0;
  json draws = json::array();
  for (std::uint64_t draw = 0; draw < 100; ++draw) {
    Rng rng(derive_seed(8, draw));
    const mlpexp::MlpParams p = mlpexp::init_params(8, rng);
    const Matrix x = oracle::random_matrix(16, 8, 1.0, rng);
    const Matrix y = oracle::random_matrix(16, 8, 1.0, rng);
    const mlpexp::LossGrad lg = mlpexp::model_backward(x, y, p);
    const double e1 = fd_rel_err(x, y, p, &mlpexp::MlpParams::w1, lg.grad_w1);
    const double e2 = fd_rel_err(x, y, p, &mlpexp::MlpParams::w2, lg.grad_w2);
    worst = std::max({worst, e1, e2});
    draws.push_back({{"draw", draw}, {"w1_rel_err", e1}, {"w2_rel_err", e2}});
  }
  const bool ok = worst <= 1e-6;
  write_json(out / "c8.json", json{{"h", 8}, {"batch", 16}, {"step", 1e-5}, {"draws", draws},
                                   {"max_rel_err", worst}, {"pass", ok}});
  return {ok, "h=8, 100 draws, max rel err " + fmt(worst) + " <= 1e-6"};
}

// --- substitution note ---------------------------------------------------------------

Outcome criterion9(const fs::path& out, bool ran_c1_to_c3) {
  const std::string note =
      "Pretraining validation losses at 124M-163M parameters on OpenWebText are not reproduced here. "
      "Criteria 1-3 establish the exact-equivalence claim those runs approximate, and the adjusted "
      "attention scale 1/(2 sqrt(d_k)) is a config field exercised by criterion 1's forward passes.";
  // The config field must round-trip through the sidecar format.
  model::ArchConfig cfg = model::config_from_json(arch_json({8, 2, 1, false, true, false}).dump());
  const bool field_ok = std::abs(cfg.attn_scale - 0.5 / 2.0) <= 1e-15 &&
                        model::config_from_json(model::config_to_json(cfg)).attn_scale == cfg.attn_scale;
  const bool ok = field_ok && ran_c1_to_c3 && c1_half_scale_ok;
  write_json(out / "c9.json", json{{"substitution", note},
                                   {"attn_scale_field_round_trips", field_ok},
                                   {"half_scale_models_equivalent", c1_half_scale_ok},
                                   {"pass", ok}});
  std::cout << "  substitution: " << note << "\n";
  return {ok, ran_c1_to_c3 ? "documented substitution; half attn_scale models passed criterion 1"
                           : "needs criteria 1-3 in the same run"};
}

// --- determinism ------------------------------------------------------------------------

// Every regular file under a, compared byte-for-byte with its twin under b.
std::vector<std::string> tree_differences(const fs::path& a, const fs::path& b, std::size_t& files) {
  std::vector<std::string> diffs;
  files = 0;
  std::vector<fs::path> paths;
  for (const auto& e : fs::recursive_directory_iterator(a))
    if (e.is_regular_file()) paths.push_back(fs::relative(e.path(), a));
  std::sort(paths.begin(), paths.end());
  for (const auto& rel : paths) {
    ++files;
    if (!fs::exists(b / rel) || io::read_file(a / rel) != io::read_file(b / rel)) diffs.push_back(rel.string());
  }
  return diffs;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"qelim acceptance runner"};
  std::string out_dir = "acceptance_out";
  std::vector<int> only;
  app.add_option("--out", out_dir, "directory for JSON evidence");
  app.add_option("--only", only, "run only these criteria (comma list)")->delimiter(',')->check(CLI::Range(1, 10));
  CLI11_PARSE(app, argc, argv);

  auto selected = [&](int c) { return only.empty() || std::find(only.begin(), only.end(), c) != only.end(); };
  const fs::path out = fs::absolute(out_dir);
  fs::remove_all(out);
  fs::create_directories(out / "run1");

  using Fn = std::function<Outcome(const fs::path&)>;
  const std::vector<std::pair<int, Fn>> criteria{
      {1, criterion1}, {2, criterion2}, {3, criterion3}, {4, criterion4},
      {5, criterion5}, {6, criterion6}, {7, criterion7}, {8, criterion8}};

  int failures = 0;
  auto report = [&](int c, const Outcome& o) {
    std::cout << "criterion " << c << ": " << (o.pass ? "PASS" : "FAIL") << "  " << o.detail << std::endl;
    failures += !o.pass;
  };
  auto guarded = [&](const Fn& fn, const fs::path& dir) -> Outcome {
    try {
      return fn(dir);
    } catch (const std::exception& e) {
      return {false, std::string("error: ") + e.what()};
    }
  };

  for (const auto& [c, fn] : criteria)
    if (selected(c)) report(c, guarded(fn, out / "run1"));
  if (selected(9))
    report(9, guarded([&](const fs::path& d) { return criterion9(d, selected(1) && selected(2) && selected(3)); },
                      out / "run1"));

  if (selected(10)) {
    // Snapshot the evidence, regenerate every cheap criterion and the first
    // h=64 seed at the same paths (manifests record paths), then compare the
    // snapshot byte-for-byte with what is on disk.
    const Outcome o = guarded(
        [&](const fs::path& run1) -> Outcome {
          const fs::path seed0 = run1 / "c7";
          for (const auto& [c, fn] : criteria)
            if (c != 7 && !selected(c)) (void)fn(run1);
          if (!fs::exists(seed0 / "seed0.json")) {
            fs::create_directories(seed0);
            if (tool(mlpexp_args(0, seed0)).code != 0) return {false, "mlpexp run failed"};
          }
          const fs::path snapshot = out / "first_run";
          fs::copy(run1, snapshot, fs::copy_options::recursive);
          for (const auto& e : fs::directory_iterator(run1))
            if (e.path().filename() != "c7" && e.path().filename() != "c7.json" &&
                e.path().filename() != "c9.json")
              fs::remove_all(e.path());
          for (const char* name : {"seed0.json", "seed0.csv", "seed0.json.manifest.json"}) fs::remove(seed0 / name);

          for (const auto& [c, fn] : criteria)
            if (c != 7) (void)fn(run1);
          if (tool(mlpexp_args(0, seed0)).code != 0) return {false, "mlpexp rerun failed"};

          std::size_t files = 0;
          const auto diffs = tree_differences(snapshot, run1, files);
          std::string detail = std::to_string(files) + " evidence files compared after rerun, " +
                               std::to_string(diffs.size()) + " differ";
          for (const auto& d : diffs) detail += " " + d;
          return {diffs.empty() && files > 0, detail};
        },
        out / "run1");
    report(10, o);
  }

  std::cout << (failures == 0 ? "all selected criteria PASS" : std::to_string(failures) + " criteria FAIL")
            << std::endl;
  return failures == 0 ? 0 : 1;
}
