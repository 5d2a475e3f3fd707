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

#include "cli.hpp"

#include <chrono>
#include <cstdint>
#include <ostream>
#include <span>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include "qelim/io.hpp"
#include "qelim/mlpexp.hpp"
#include "qelim/model.hpp"
#include "qelim/normconj.hpp"
#include "qelim/reluskip.hpp"
#include "qelim/reparam.hpp"

namespace qelim::cli {
namespace {

using nlohmann::ordered_json;
// Everything the manifest records about one invocation.
class Run {
 public:
  Run(std::string subcommand, std::ostream& out, std::ostream& err)
      : subcommand_(std::move(subcommand)), out_(out), err_(err) {}

  ordered_json config = ordered_json::object();
  ordered_json seeds = ordered_json::object();

  void input(const std::string& path) { inputs_.push_back(digest(path, false)); }
  void input_checkpoint(const std::string& path) { inputs_.push_back(digest(path, true)); }

  /// Records a file that something else has already written.
  void output_file(const std::string& path) { outputs_.push_back(digest(path, false)); }
  void output_checkpoint(const std::string& path) { outputs_.push_back(digest(path, true)); }

  /// Writes text to path, or to stdout when path is empty or "-".
  void emit(const std::string& path, const std::string& text) {
    if (path.empty() || path == "-") {
      out_ << text;
      out_.flush();
      outputs_.push_back({{"path", "-"}, {"crc32", io::hex32(io::crc32(text))}});
      return;
    }
    io::write_text_atomic(path, text);
    outputs_.push_back({{"path", path}, {"crc32", io::hex32(io::crc32(text))}});
  }

  /// Manifest goes next to `primary` when that is a file, else to stderr.
  void finish(const std::string& primary) {
    ordered_json m;
    m["tool"] = "qelim";
    m["version"] = QELIM_VERSION;
    m["subcommand"] = subcommand_;
    m["config"] = config;
    m["seeds"] = seeds;
    m["inputs"] = inputs_;
    m["outputs"] = outputs_;
    const std::string text = m.dump(2) + "\n";
    if (primary.empty() || primary == "-")
      err_ << text;
    else
      io::write_text_atomic(primary + ".manifest.json", text);
  }

  std::ostream& log() { return err_; }

 private:
  // A checkpoint ends with the CRC of everything before it, which makes the
  // CRC of the whole file a constant. Its digest covers the payload instead.
  static ordered_json digest(const std::string& path, bool checkpoint) {
    const io::Bytes bytes = io::read_file(path);
    std::span<const std::uint8_t> covered(bytes);
    if (checkpoint && covered.size() >= 4) covered = covered.first(covered.size() - 4);
    return {{"path", path}, {"bytes", bytes.size()}, {"crc32", io::hex32(io::crc32(covered))}};
  }

  std::string subcommand_;
  std::ostream& out_;
  std::ostream& err_;
  ordered_json inputs_ = ordered_json::array();
  ordered_json outputs_ = ordered_json::array();
};

struct GenOpts {
  std::string config, out;
  std::uint64_t seed = 0;
  double max_cond = model::kDefaultMaxCond;
};

struct TransformOpts {
  std::string in, out, mode, report;
  std::uint64_t seed = 0;
  std::size_t trials = 10, seq_len = 0;
  double max_cond = 1e4, tol = 1e-8;
};

struct VerifyOpts {
  std::string a, b, out;
  std::uint64_t seed = 0;
  std::size_t trials = 10, seq_len = 0;
  double tol = 1e-8;
};

struct LnconjOpts {
  std::size_t dim = 8, samples = 1000;
  double eps = 0.1, tol = 1e-9, shift_tol = 1e-12;
  std::uint64_t seed = 0;
  std::string out;
};

struct ProbeOpts {
  std::vector<std::size_t> dims;
  double eps = 0.1;
  std::size_t samples = 2000;
  std::uint64_t seed = 0;
  std::string out;
};

struct ReluGenOpts {
  std::size_t h = 2, m = 0;
  std::vector<std::size_t> planted;
  std::uint64_t seed = 0;
  std::string out;
};

struct ReluSearchOpts {
  std::string in, out;
  double tol = reluskip::kSearchTol;
  std::size_t max_m = reluskip::kMaxExhaustiveWidth;
};

struct ReluVerifyOpts {
  std::string in, out;
  std::vector<std::size_t> j;
  std::size_t samples = 10000;
  std::uint64_t seed = 0;
  double tol = reluskip::kConstructTol, max_dev = 1e-9;
};

struct MlpOpts {
  mlpexp::ExperimentConfig cfg;
  std::string out, csv;
  bool timing = false;
};

int cmd_gen(const GenOpts& o, Run& run) {
  run.input(o.config);
  const model::ArchConfig cfg = model::config_from_json(io::read_text(o.config));
  run.config = {{"config", o.config}, {"arch", ordered_json::parse(model::config_to_json(cfg))},
                {"max_cond", o.max_cond}, {"out", o.out}};
  run.seeds["model"] = o.seed;
  Rng rng(o.seed);
  const model::ModelWeights m = model::random_model(cfg, rng, o.max_cond);
  model::save_checkpoint(m, cfg, o.out);
  run.output_checkpoint(o.out);
  run.output_file(model::sidecar_path(o.out).string());
  run.log() << "gen: wrote " << o.out << "\n";
  run.finish(o.out);
  return kExitOk;
}

int cmd_transform(const TransformOpts& o, Run& run) {
  run.input_checkpoint(o.in);
  run.input(model::sidecar_path(o.in).string());
  const auto [m, cfg] = model::load_checkpoint(o.in);
  reparam::EliminationOptions opts;
  opts.max_cond = o.max_cond;
  opts.trials = o.trials;
  opts.seq_len = o.seq_len;
  opts.seed = o.seed;
  run.config = {{"in", o.in}, {"out", o.out}, {"mode", o.mode},      {"trials", o.trials},
                {"seq_len", o.seq_len}, {"max_cond", o.max_cond}, {"tol", o.tol}, {"report", o.report}};
  run.seeds["verify"] = o.seed;
  const reparam::EliminationResult r = o.mode == "attn-skip" ? reparam::eliminate_query_attn_skip(m, cfg, opts)
                                                             : reparam::eliminate_query_weight_shared(m, cfg, opts);
  model::save_checkpoint(r.model, r.config, o.out);
  run.output_checkpoint(o.out);
  run.output_file(model::sidecar_path(o.out).string());
  run.emit(o.report, reparam::to_json(r.report));
  const bool pass = r.report.max_logit_rel_err <= o.tol;
  run.log() << "transform: " << o.mode << " max_logit_rel_err " << io::format_double(r.report.max_logit_rel_err)
            << (pass ? "" : " exceeds tol") << "\n";
  run.finish(o.out);
  return pass ? kExitOk : kExitVerifyFailed;
}

int cmd_verify(const VerifyOpts& o, Run& run) {
  run.input_checkpoint(o.a);
  run.input(model::sidecar_path(o.a).string());
  run.input_checkpoint(o.b);
  run.input(model::sidecar_path(o.b).string());
  const auto [ma, ca] = model::load_checkpoint(o.a);
  const auto [mb, cb] = model::load_checkpoint(o.b);
  const std::size_t seq_len = o.seq_len == 0 ? ca.max_seq : o.seq_len;
  run.config = {{"a", o.a}, {"b", o.b}, {"trials", o.trials}, {"seq_len", seq_len}, {"tol", o.tol}};
  run.seeds["tokens"] = o.seed;
  require(o.trials >= 1, ErrorKind::kInvalidArgument, "--trials must be at least 1");
  Rng rng(o.seed);
  const double e = reparam::verify_equivalence(ma, mb, ca, cb, o.trials, seq_len, rng);
  const bool pass = e <= o.tol;
  ordered_json j;
  j["a"] = o.a;
  j["b"] = o.b;
  j["trials"] = o.trials;
  j["seq_len"] = seq_len;
  j["seed"] = o.seed;
  j["tol"] = o.tol;
  j["max_logit_rel_err"] = std::isfinite(e) ? ordered_json(e) : ordered_json("inf");
  j["pass"] = pass;
  run.emit(o.out, j.dump(2) + "\n");
  run.log() << "verify: max_logit_rel_err " << io::format_double(e) << (pass ? " PASS" : " FAIL") << "\n";
  run.finish(o.out);
  return pass ? kExitOk : kExitVerifyFailed;
}

int cmd_lnconj(const LnconjOpts& o, Run& run) {
  run.config = {{"dim", o.dim}, {"eps", o.eps}, {"samples", o.samples}, {"tol", o.tol}, {"shift_tol", o.shift_tol}};
  run.seeds["check"] = o.seed;
  const normconj::ConjugacyCheck c = normconj::check_conjugacy(o.dim, o.eps, o.samples, o.seed);
  run.emit(o.out, normconj::to_json(c));
  const bool pass = c.conjugacy_err <= o.tol && c.mlp_prime_err <= o.tol && c.shift_invariance_err <= o.shift_tol;
  run.log() << "lnconj: conjugacy " << io::format_double(c.conjugacy_err) << ", mlp' "
            << io::format_double(c.mlp_prime_err) << ", shift " << io::format_double(c.shift_invariance_err)
            << (pass ? " PASS" : " FAIL") << "\n";
  run.finish(o.out);
  return pass ? kExitOk : kExitVerifyFailed;
}

int cmd_probe(const ProbeOpts& o, Run& run) {
  run.config = {{"dims", o.dims}, {"eps", o.eps}, {"samples", o.samples}};
  run.seeds["probe"] = o.seed;
  const auto rows = normconj::linearity_probe(o.dims, o.eps, o.samples, o.seed);
  run.emit(o.out, normconj::probe_csv(rows));
  for (const auto& r : rows)
    run.log() << "probe: d=" << r.d << " mean_rel_dev " << io::format_double(r.mean_rel_dev) << "\n";
  run.finish(o.out);
  return kExitOk;
}

int cmd_reluskip_gen(const ReluGenOpts& o, Run& run) {
  const std::size_t m = o.m == 0 ? 4 * o.h : o.m;
  run.config = {{"h", o.h}, {"m", m}, {"planted", o.planted}};
  run.seeds["instance"] = o.seed;
  Rng rng(o.seed);
  const reluskip::AbsorptionInstance inst =
      o.planted.empty() ? reluskip::random_instance(o.h, m, rng) : reluskip::plant_instance(o.h, m, o.planted, rng);
  run.emit(o.out, reluskip::instance_to_json(inst));
  run.finish(o.out);
  return kExitOk;
}

int cmd_reluskip_search(const ReluSearchOpts& o, Run& run) {
  run.input(o.in);
  run.config = {{"in", o.in}, {"tol", o.tol}, {"max_m", o.max_m}};
  const reluskip::AbsorptionInstance inst = reluskip::instance_from_json(io::read_text(o.in));
  const reluskip::SearchResult r = reluskip::find_absorbing_subsets(inst, o.tol, o.max_m);
  run.emit(o.out, reluskip::search_report_json(inst, o.tol, r));
  run.log() << "reluskip search: " << r.subsets.size() << " absorbing subset(s)\n";
  run.finish(o.out);
  return kExitOk;
}

int cmd_reluskip_verify(const ReluVerifyOpts& o, Run& run) {
  run.input(o.in);
  run.config = {{"in", o.in}, {"j", o.j}, {"samples", o.samples}, {"tol", o.tol}, {"max_dev", o.max_dev}};
  run.seeds["samples"] = o.seed;
  const reluskip::AbsorptionInstance inst = reluskip::instance_from_json(io::read_text(o.in));
  if (o.j.size() < inst.h)
    fail(ErrorKind::kSubsetTooSmall, "|J| = " + std::to_string(o.j.size()) + " is below h = " + std::to_string(inst.h));
  const double residual = reluskip::subset_residual(inst, o.j);
  ordered_json j;
  j["h"] = inst.h;
  j["m"] = inst.m;
  j["j"] = o.j;
  j["residual"] = residual;
  j["tol"] = o.tol;
  j["samples"] = o.samples;
  j["seed"] = o.seed;
  bool pass = residual <= o.tol;
  if (pass) {
    const auto [v1, v2] = reluskip::absorb_construct(inst, o.j, o.tol);
    Rng rng(o.seed);
    const double dev = reluskip::verify_absorption(inst, v1, v2, o.samples, rng);
    j["max_deviation"] = dev;
    pass = dev <= o.max_dev;
  } else {
    j["max_deviation"] = nullptr;
  }
  j["max_dev_tol"] = o.max_dev;
  j["degenerate"] = o.samples == 0;
  j["pass"] = pass;
  run.emit(o.out, j.dump(2) + "\n");
  run.log() << "reluskip verify: residual " << io::format_double(residual) << (pass ? " PASS" : " FAIL") << "\n";
  run.finish(o.out);
  return pass ? kExitOk : kExitVerifyFailed;
}

int cmd_mlpexp(const MlpOpts& o, Run& run) {
  const auto& c = o.cfg;
  run.config = {{"h", c.h},
                {"steps", c.train.steps},
                {"batch", c.train.batch},
                {"lr_peak", c.train.lr_peak},
                {"weight_decay", c.train.weight_decay},
                {"beta1", c.train.beta1},
                {"beta2", c.train.beta2},
                {"adam_eps", c.train.adam_eps},
                {"grad_clip_norm", c.train.grad_clip_norm},
                {"eval_samples", c.eval_samples},
                {"baseline_samples", c.baseline_samples},
                {"ridge_lambda", c.ridge_lambda},
                {"timing", o.timing}};
  const mlpexp::Seeds s = mlpexp::derive_seeds(c.seed);
  run.seeds = {{"base", c.seed}, {"target", s.target}, {"model", s.model}, {"baseline", s.baseline}, {"eval", s.eval}};
  const auto t0 = std::chrono::steady_clock::now();
  mlpexp::ExperimentReport r = mlpexp::run_experiment(c);
  if (o.timing) r.runtime_s = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  run.emit(o.out, mlpexp::report_json(r));
  if (!o.csv.empty()) run.emit(o.csv, mlpexp::samples_csv(r));
  run.log() << "mlpexp: trained " << io::format_double(r.trained.mean_rel_err) << " vs linear "
            << io::format_double(r.linear.mean_rel_err) << " mean relative error\n";
  run.finish(o.out);
  return kExitOk;
}

}  // namespace

int exit_code_for(ErrorKind kind) noexcept {
  switch (kind) {
    case ErrorKind::kConfigParse:
    case ErrorKind::kInvalidArgument:
    case ErrorKind::kConfigMismatch:
    case ErrorKind::kShape:
    case ErrorKind::kDimensionTooSmall:
    case ErrorKind::kTokenOutOfRange:
    case ErrorKind::kSequenceTooLong:
    case ErrorKind::kSubsetTooSmall:
    case ErrorKind::kWidthTooLargeForExhaustiveSearch:
      return kExitConfig;
    case ErrorKind::kSingularMatrix:
    case ErrorKind::kNotPositiveDefinite:
    case ErrorKind::kConditioningFailure:
    case ErrorKind::kNotZeroMean:
    case ErrorKind::kOutsideImageBall:
    case ErrorKind::kZeroEntryInV:
    case ErrorKind::kConditionNotSatisfied:
    case ErrorKind::kAllTargetsDegenerate:
      return kExitNumerical;
    case ErrorKind::kBadMagic:
    case ErrorKind::kVersionMismatch:
    case ErrorKind::kTruncatedFile:
    case ErrorKind::kChecksumMismatch:
    case ErrorKind::kIo:
      return kExitIo;
  }
  return kExitNumerical;
}

int run_cli(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  CLI::App app{"Query-weight elimination toolkit", "qelim"};
  // Long-form flags only; this also frees "h" for the dimension options.
  app.set_help_flag("--help", "Print this help message and exit");
  app.require_subcommand(1);
  app.set_version_flag("--version", std::string(QELIM_VERSION));

  GenOpts gen;
  auto* gen_cmd = app.add_subcommand("gen", "Draw a random model from an architecture config");
  gen_cmd->add_option("--config", gen.config, "Architecture config JSON")->required();
  gen_cmd->add_option("--seed", gen.seed, "Weight seed")->required();
  gen_cmd->add_option("--out", gen.out, "Checkpoint path (config sidecar at <out>.json)")->required();
  gen_cmd->add_option("--max-cond", gen.max_cond, "Redraw W_Q until cond_2 <= this")->capture_default_str();

  TransformOpts tr;
  auto* tr_cmd = app.add_subcommand("transform", "Rewrite a checkpoint so every W_Q is the identity");
  tr_cmd->add_option("--in", tr.in, "Input checkpoint")->required();
  tr_cmd->add_option("--out", tr.out, "Output checkpoint")->required();
  tr_cmd->add_option("--mode", tr.mode, "attn-skip or weight-shared")
      ->required()
      ->check(CLI::IsMember({"attn-skip", "weight-shared"}));
  tr_cmd->add_option("--report", tr.report, "Report path (default stdout)");
  tr_cmd->add_option("--seed", tr.seed, "Verification token seed")->capture_default_str();
  tr_cmd->add_option("--trials", tr.trials, "Verification sequences")->capture_default_str();
  tr_cmd->add_option("--seq-len", tr.seq_len, "Longest verification sequence (0: max_seq)")->capture_default_str();
  tr_cmd->add_option("--max-cond", tr.max_cond, "Reject any W_Q with larger cond_2")->capture_default_str();
  tr_cmd->add_option("--tol", tr.tol, "Exit 1 if the verification error exceeds this")->capture_default_str();

  VerifyOpts ve;
  auto* ve_cmd = app.add_subcommand("verify", "Compare the logits of two checkpoints");
  ve_cmd->add_option("--a", ve.a, "First checkpoint")->required();
  ve_cmd->add_option("--b", ve.b, "Second checkpoint")->required();
  ve_cmd->add_option("--trials", ve.trials, "Random sequences")->capture_default_str();
  ve_cmd->add_option("--seq-len", ve.seq_len, "Longest sequence (0: max_seq)")->capture_default_str();
  ve_cmd->add_option("--tol", ve.tol, "Pass threshold on max relative logit error")->capture_default_str();
  ve_cmd->add_option("--seed", ve.seed, "Token seed")->required();
  ve_cmd->add_option("--out", ve.out, "Report path (default stdout)");

  LnconjOpts ln;
  auto* ln_cmd = app.add_subcommand("lnconj", "Check LayerNorm conjugacy on a random instance");
  ln_cmd->add_option("--dim", ln.dim, "Dimension d")->capture_default_str();
  ln_cmd->add_option("--eps", ln.eps, "LayerNorm epsilon")->capture_default_str();
  ln_cmd->add_option("--samples", ln.samples, "Random inputs")->capture_default_str();
  ln_cmd->add_option("--tol", ln.tol, "Pass threshold for the conjugacy identities")->capture_default_str();
  ln_cmd->add_option("--shift-tol", ln.shift_tol, "Pass threshold for mean-shift invariance")->capture_default_str();
  ln_cmd->add_option("--seed", ln.seed, "Instance seed")->required();
  ln_cmd->add_option("--out", ln.out, "Report path (default stdout)");

  ProbeOpts pr;
  auto* pr_cmd = app.add_subcommand("probe", "Measure how far the LayerNorm-conjugate map is from linear");
  pr_cmd->add_option("--dims", pr.dims, "Dimensions, comma separated")->required()->delimiter(',');
  pr_cmd->add_option("--eps", pr.eps, "LayerNorm epsilon")->capture_default_str();
  pr_cmd->add_option("--samples", pr.samples, "Points per dimension")->capture_default_str();
  pr_cmd->add_option("--seed", pr.seed, "Base seed")->required();
  pr_cmd->add_option("--out", pr.out, "CSV path (default stdout)");

  auto* rs_cmd = app.add_subcommand("reluskip", "Fold a skip connection into a ReLU MLP");
  rs_cmd->require_subcommand(1);
  ReluGenOpts rg;
  auto* rg_cmd = rs_cmd->add_subcommand("gen", "Write a random or planted instance");
  rg_cmd->add_option("--h", rg.h, "Dimension h")->capture_default_str();
  rg_cmd->add_option("--m", rg.m, "Width m (0: 4h)")->capture_default_str();
  rg_cmd->add_option("--planted", rg.planted, "Plant the condition on these indices")->delimiter(',');
  rg_cmd->add_option("--seed", rg.seed, "Instance seed")->required();
  rg_cmd->add_option("--out", rg.out, "Instance JSON path (default stdout)");
  ReluSearchOpts rsrch;
  auto* rsrch_cmd = rs_cmd->add_subcommand("search", "List every absorbing index set");
  rsrch_cmd->add_option("--in", rsrch.in, "Instance JSON")->required();
  rsrch_cmd->add_option("--tol", rsrch.tol, "Residual tolerance")->capture_default_str();
  rsrch_cmd->add_option("--max-m", rsrch.max_m, "Refuse wider instances")->capture_default_str();
  rsrch_cmd->add_option("--out", rsrch.out, "Report path (default stdout)");
  ReluVerifyOpts rv;
  auto* rv_cmd = rs_cmd->add_subcommand("verify", "Build the skip-free MLP for J and test it");
  rv_cmd->add_option("--in", rv.in, "Instance JSON")->required();
  rv_cmd->add_option("--j", rv.j, "Index set, comma separated")->required()->delimiter(',');
  rv_cmd->add_option("--samples", rv.samples, "Random inputs")->capture_default_str();
  rv_cmd->add_option("--seed", rv.seed, "Input seed")->required();
  rv_cmd->add_option("--tol", rv.tol, "Residual tolerance for J")->capture_default_str();
  rv_cmd->add_option("--max-dev", rv.max_dev, "Pass threshold on the deviation")->capture_default_str();
  rv_cmd->add_option("--out", rv.out, "Report path (default stdout)");

  MlpOpts ml;
  auto* ml_cmd = app.add_subcommand("mlpexp", "Train a skip MLP against a basis-changed target");
  ml_cmd->add_option("--h", ml.cfg.h, "Dimension h")->capture_default_str();
  ml_cmd->add_option("--steps", ml.cfg.train.steps, "Training steps")->capture_default_str();
  ml_cmd->add_option("--batch", ml.cfg.train.batch, "Batch size")->capture_default_str();
  ml_cmd->add_option("--eval", ml.cfg.eval_samples, "Held-out samples")->capture_default_str();
  ml_cmd->add_option("--baseline-samples", ml.cfg.baseline_samples, "Ridge samples")->capture_default_str();
  ml_cmd->add_option("--ridge-lambda", ml.cfg.ridge_lambda, "Ridge regulariser")->capture_default_str();
  ml_cmd->add_option("--lr", ml.cfg.train.lr_peak, "Peak learning rate")->capture_default_str();
  ml_cmd->add_option("--wd", ml.cfg.train.weight_decay, "Weight decay")->capture_default_str();
  ml_cmd->add_option("--beta1", ml.cfg.train.beta1, "Adam beta1")->capture_default_str();
  ml_cmd->add_option("--beta2", ml.cfg.train.beta2, "Adam beta2")->capture_default_str();
  ml_cmd->add_option("--adam-eps", ml.cfg.train.adam_eps, "Adam epsilon")->capture_default_str();
  ml_cmd->add_option("--clip", ml.cfg.train.grad_clip_norm, "Global gradient-norm clip")->capture_default_str();
  ml_cmd->add_option("--seed", ml.cfg.seed, "Base seed")->required();
  ml_cmd->add_option("--out", ml.out, "Report JSON path (default stdout)");
  ml_cmd->add_option("--csv", ml.csv, "Per-sample CSV path");
  ml_cmd->add_flag("--timing", ml.timing, "Add runtime_s to the report");

  try {
    std::vector<std::string> reversed(args.rbegin(), args.rend());
    app.parse(reversed);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e, out, err);
    return code == 0 ? kExitOk : kExitConfig;
  }

  try {
    if (*gen_cmd) {
      Run run("gen", out, err);
      return cmd_gen(gen, run);
    }
    if (*tr_cmd) {
      Run run("transform", out, err);
      return cmd_transform(tr, run);
    }
    if (*ve_cmd) {
      Run run("verify", out, err);
      return cmd_verify(ve, run);
    }
    if (*ln_cmd) {
      Run run("lnconj", out, err);
      return cmd_lnconj(ln, run);
    }
    if (*pr_cmd) {
      Run run("probe", out, err);
      return cmd_probe(pr, run);
    }
    if (*rg_cmd) {
      Run run("reluskip gen", out, err);
      return cmd_reluskip_gen(rg, run);
    }
    if (*rsrch_cmd) {
      Run run("reluskip search", out, err);
      return cmd_reluskip_search(rsrch, run);
    }
    if (*rv_cmd) {
      Run run("reluskip verify", out, err);
      return cmd_reluskip_verify(rv, run);
    }
    if (*ml_cmd) {
      Run run("mlpexp", out, err);
      return cmd_mlpexp(ml, run);
    }
  } catch (const Error& e) {
    err << "qelim: " << e.what() << "\n";
    return exit_code_for(e.kind());
  } catch (const std::exception& e) {
    err << "qelim: internal error: " << e.what() << "\n";
    return kExitNumerical;
  }
  return kExitConfig;
}

}  // namespace qelim::cli
