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

#include "qelim/model.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <map>
#include <string>

#include <json.hpp>

#include "qelim/activation.hpp"
#include "qelim/error.hpp"
#include "qelim/io.hpp"
#include "qelim/linalg.hpp"
#include "qelim/normconj.hpp"

namespace qelim::model {
namespace {

using nlohmann::ordered_json;

void require_shape(const Matrix& m, std::size_t rows, std::size_t cols, const std::string& what) {
  require(m.rows() == rows && m.cols() == cols, ErrorKind::kShape,
          what + ": expected " + std::to_string(rows) + "x" + std::to_string(cols) + ", got " +
              std::to_string(m.rows()) + "x" + std::to_string(m.cols()));
}

Matrix scaled_layernorm(const Matrix& x, const Vector& scale, double eps) {
  Matrix out = normconj::layernorm_rows(x, eps);
  for (std::size_t r = 0; r < out.rows(); ++r) {
    auto row = out.row(r);
    for (std::size_t c = 0; c < row.size(); ++c) row[c] *= scale[c];
  }
  return out;
}

Matrix mlp(const Matrix& x, const Matrix& w_up, const Matrix& w_down) {
  Matrix h = matmul(x, w_up);
  for (double& v : h.values()) v = gelu(v);
  return matmul(h, w_down);
}

// ---- JSON helpers --------------------------------------------------------

template <typename Enum, std::size_t N>
Enum parse_enum(const ordered_json& j, const char* key, const std::pair<const char*, Enum> (&names)[N]) {
  if (!j.is_string()) fail(ErrorKind::kConfigParse, std::string("'") + key + "' must be a string");
  const std::string s = j.get<std::string>();
  for (const auto& [name, value] : names)
    if (s == name) return value;
  std::string allowed;
  for (const auto& [name, value] : names) allowed += std::string(allowed.empty() ? "" : ", ") + name;
  fail(ErrorKind::kConfigParse, std::string("'") + key + "' must be one of: " + allowed + " (got '" + s + "')");
}

constexpr std::pair<const char*, NormType> kNormNames[] = {{"none", NormType::kNone},
                                                             {"layernorm", NormType::kLayerNorm}};
constexpr std::pair<const char*, Skips> kSkipNames[] = {{"attn_only", Skips::kAttnOnly}, {"both", Skips::kBoth}};
constexpr std::pair<const char*, Sharing> kSharingNames[] = {{"per_layer", Sharing::kPerLayer},
                                                               {"shared", Sharing::kShared}};

std::size_t get_count(const ordered_json& j, const char* key) {
  if (!j.contains(key)) fail(ErrorKind::kConfigParse, std::string("missing key '") + key + "'");
  const auto& v = j.at(key);
  if (!v.is_number_unsigned()) fail(ErrorKind::kConfigParse, std::string("'") + key + "' must be a non-negative integer");
  return v.get<std::size_t>();
}

const ordered_json& get_key(const ordered_json& j, const char* key) {
  if (!j.contains(key)) fail(ErrorKind::kConfigParse, std::string("missing key '") + key + "'");
  return j.at(key);
}

// ---- checkpoint encoding ---------------------------------------------------

constexpr std::uint8_t kMagic[4] = {0x51, 0x45, 0x43, 0x31};  // "QEC1"
constexpr std::uint32_t kVersion = 1;
constexpr std::uint8_t kDtypeF64 = 1;
constexpr std::size_t kAlign = 64;

std::size_t align_up(std::size_t v) { return (v + kAlign - 1) / kAlign * kAlign; }

class Writer {
 public:
  void u8(std::uint8_t v) { buf_.push_back(v); }
  void u16(std::uint16_t v) { le(v, 2); }
  void u32(std::uint32_t v) { le(v, 4); }
  void u64(std::uint64_t v) { le(v, 8); }
  void f64(double v) { le(std::bit_cast<std::uint64_t>(v), 8); }
  void bytes(const void* p, std::size_t n) {
    const auto* b = static_cast<const std::uint8_t*>(p);
    buf_.insert(buf_.end(), b, b + n);
  }
  void pad_to(std::size_t size) { buf_.resize(std::max(buf_.size(), size), 0); }
  std::size_t size() const { return buf_.size(); }
  io::Bytes take() { return std::move(buf_); }

 private:
  void le(std::uint64_t v, int n) {
    for (int i = 0; i < n; ++i) buf_.push_back(static_cast<std::uint8_t>(v >> (8 * i)));
  }
  io::Bytes buf_;
};

class Reader {
 public:
  Reader(const io::Bytes& b, std::size_t limit) : b_(b), limit_(limit) {}
  std::uint8_t u8() { return static_cast<std::uint8_t>(le(1)); }
  std::uint16_t u16() { return static_cast<std::uint16_t>(le(2)); }
  std::uint32_t u32() { return static_cast<std::uint32_t>(le(4)); }
  std::uint64_t u64() { return le(8); }
  std::string str(std::size_t n) {
    need(n);
    std::string s(b_.begin() + static_cast<std::ptrdiff_t>(pos_), b_.begin() + static_cast<std::ptrdiff_t>(pos_ + n));
    pos_ += n;
    return s;
  }
  std::size_t pos() const { return pos_; }

 private:
  void need(std::size_t n) {
    if (n > limit_ || pos_ > limit_ - n) fail(ErrorKind::kTruncatedFile, "checkpoint header ends early");
  }
  std::uint64_t le(int n) {
    need(static_cast<std::size_t>(n));
    std::uint64_t v = 0;
    for (int i = 0; i < n; ++i) v |= static_cast<std::uint64_t>(b_[pos_ + static_cast<std::size_t>(i)]) << (8 * i);
    pos_ += static_cast<std::size_t>(n);
    return v;
  }
  const io::Bytes& b_;
  std::size_t limit_;
  std::size_t pos_ = 0;
};

struct TensorRecord {
  std::vector<std::uint64_t> dims;
  std::uint64_t offset = 0;
  std::uint64_t count() const {
    std::uint64_t c = 1;
    for (auto d : dims) c *= d;
    return c;
  }
};

struct Layout {
  std::vector<std::pair<std::string, TensorRecord>> tensors;
  std::size_t data_start = 0;
  std::size_t total_size = 0;  // including the trailing CRC
};

Layout parse_layout(const io::Bytes& bytes) {
  Reader r(bytes, bytes.size());
  (void)r.str(4);
  (void)r.u32();
  const std::uint32_t count = r.u32();
  Layout lay;
  std::uint64_t data_len = 0;
  for (std::uint32_t t = 0; t < count; ++t) {
    const std::uint16_t name_len = r.u16();
    std::string name = r.str(name_len);
    const std::uint8_t dtype = r.u8();
    if (dtype != kDtypeF64)
      fail(ErrorKind::kVersionMismatch, "tensor '" + name + "' has unsupported dtype " + std::to_string(dtype));
    const std::uint8_t rank = r.u8();
    if (rank < 1 || rank > 2)
      fail(ErrorKind::kVersionMismatch, "tensor '" + name + "' has unsupported rank " + std::to_string(rank));
    TensorRecord rec;
    for (std::uint8_t i = 0; i < rank; ++i) rec.dims.push_back(r.u64());
    rec.offset = r.u64();
    for (auto d : rec.dims)
      if (d > (1ull << 32)) fail(ErrorKind::kTruncatedFile, "tensor '" + name + "' declares an implausible size");
    data_len = std::max<std::uint64_t>(data_len, rec.offset + rec.count() * 8);
    lay.tensors.emplace_back(std::move(name), std::move(rec));
  }
  lay.data_start = align_up(r.pos());
  lay.total_size = lay.data_start + static_cast<std::size_t>(data_len) + 4;
  return lay;
}

double read_f64(const io::Bytes& b, std::size_t pos) {
  std::uint64_t v = 0;
  for (int i = 0; i < 8; ++i) v |= static_cast<std::uint64_t>(b[pos + static_cast<std::size_t>(i)]) << (8 * i);
  return std::bit_cast<double>(v);
}

struct NamedTensor {
  std::string name;
  std::vector<std::size_t> dims;
  const double* data;
};

std::vector<NamedTensor> tensor_list(const ModelWeights& m, const ArchConfig& cfg) {
  std::vector<NamedTensor> out;
  auto add = [&](std::string name, const Matrix& x) {
    out.push_back({std::move(name), {x.rows(), x.cols()}, x.data()});
  };
  auto add_vec = [&](std::string name, const Vector& v) { out.push_back({std::move(name), {v.size()}, v.data()}); };
  add("e", m.e);
  add("e_p", m.e_p);
  for (std::size_t i = 0; i < m.blocks.size(); ++i) {
    const BlockWeights& b = m.blocks[i];
    const std::string p = "blocks." + std::to_string(i) + ".";
    add(p + "w_q", b.attn.w_q);
    add(p + "w_k", b.attn.w_k);
    add(p + "w_v", b.attn.w_v);
    add(p + "w_o", b.attn.w_o);
    add(p + "w_up", b.w_up);
    add(p + "w_down", b.w_down);
    if (cfg.norm.type == NormType::kLayerNorm) {
      add_vec(p + "ln1_scale", b.ln1_scale);
      add_vec(p + "ln2_scale", b.ln2_scale);
    }
  }
  if (m.w_lm) add("w_lm", *m.w_lm);
  return out;
}

}  // namespace

const char* to_string(NormType v) noexcept { return v == NormType::kNone ? "none" : "layernorm"; }
const char* to_string(Skips v) noexcept { return v == Skips::kAttnOnly ? "attn_only" : "both"; }
const char* to_string(Sharing v) noexcept { return v == Sharing::kPerLayer ? "per_layer" : "shared"; }

void ArchConfig::validate() const {
  const auto bad = [](const std::string& msg) { fail(ErrorKind::kInvalidArgument, msg); };
  if (layout.heads == 0) bad("h must be >= 1");
  if (layout.d_model == 0) bad("d_model must be >= 1");
  if (layout.d_model % layout.heads != 0)
    bad("d_model (" + std::to_string(layout.d_model) + ") must be divisible by h (" + std::to_string(layout.heads) +
        ")");
  if (layout.d_k * layout.heads != layout.d_model) bad("d_k must equal d_model / h");
  if (n_layers == 0) bad("n_layers must be >= 1");
  if (norm.type == NormType::kLayerNorm && !(norm.eps > 0.0 && std::isfinite(norm.eps)))
    bad("norm.eps must be > 0 for layernorm");
  if (!(attn_scale > 0.0 && std::isfinite(attn_scale))) bad("attn_scale must be > 0");
  if (vocab == 0) bad("vocab must be >= 1");
  if (max_seq == 0) bad("max_seq must be >= 1");
}

std::string config_to_json(const ArchConfig& cfg) {
  ordered_json j;
  j["d_model"] = cfg.layout.d_model;
  j["h"] = cfg.layout.heads;
  j["n_layers"] = cfg.n_layers;
  ordered_json norm;
  norm["type"] = to_string(cfg.norm.type);
  if (cfg.norm.type == NormType::kLayerNorm)
    norm["eps"] = cfg.norm.eps;
  else
    norm["eps"] = nullptr;
  j["norm"] = norm;
  j["skips"] = to_string(cfg.skips);
  j["sharing"] = to_string(cfg.sharing);
  j["attn_scale"] = cfg.attn_scale;
  j["vocab"] = cfg.vocab;
  j["max_seq"] = cfg.max_seq;
  j["tied"] = cfg.tied_lm_head;
  return j.dump(2) + "\n";
}

ArchConfig config_from_json(const std::string& text) {
  ordered_json j;
  try {
    j = ordered_json::parse(text);
  } catch (const ordered_json::parse_error& e) {
    fail(ErrorKind::kConfigParse, e.what());
  }
  if (!j.is_object()) fail(ErrorKind::kConfigParse, "architecture config must be a JSON object");
  static const char* const kKeys[] = {"d_model", "h",     "n_layers", "norm",    "skips", "sharing",
                                      "attn_scale", "vocab", "max_seq", "tied"};
  for (const auto& [key, value] : j.items())
    if (std::find_if(std::begin(kKeys), std::end(kKeys), [&](const char* k) { return key == k; }) == std::end(kKeys))
      fail(ErrorKind::kConfigParse, "unknown key '" + key + "'");

  ArchConfig cfg;
  const std::size_t d = get_count(j, "d_model");
  const std::size_t h = get_count(j, "h");
  cfg.layout = attention::HeadLayout{d, h, h > 0 ? d / h : 0};
  cfg.n_layers = get_count(j, "n_layers");
  const auto& norm = get_key(j, "norm");
  if (!norm.is_object()) fail(ErrorKind::kConfigParse, "'norm' must be an object {type, eps}");
  cfg.norm.type = parse_enum(get_key(norm, "type"), "norm.type", kNormNames);
  if (norm.contains("eps") && !norm.at("eps").is_null()) {
    if (!norm.at("eps").is_number()) fail(ErrorKind::kConfigParse, "'norm.eps' must be a number");
    cfg.norm.eps = norm.at("eps").get<double>();
  }
  if (cfg.norm.type == NormType::kNone) cfg.norm.eps = 0.0;
  cfg.skips = parse_enum(get_key(j, "skips"), "skips", kSkipNames);
  cfg.sharing = parse_enum(get_key(j, "sharing"), "sharing", kSharingNames);
  if (j.contains("attn_scale") && !j.at("attn_scale").is_null()) {
    if (!j.at("attn_scale").is_number()) fail(ErrorKind::kConfigParse, "'attn_scale' must be a number");
    cfg.attn_scale = j.at("attn_scale").get<double>();
  } else if (cfg.layout.d_k > 0) {
    cfg.attn_scale = cfg.layout.default_scale();
  }
  cfg.vocab = get_count(j, "vocab");
  cfg.max_seq = get_count(j, "max_seq");
  const auto& tied = get_key(j, "tied");
  if (!tied.is_boolean()) fail(ErrorKind::kConfigParse, "'tied' must be true or false");
  cfg.tied_lm_head = tied.get<bool>();
  cfg.validate();
  return cfg;
}

Matrix ModelWeights::lm_head() const { return w_lm ? *w_lm : transpose(e); }

void ModelWeights::validate(const ArchConfig& cfg) const {
  cfg.validate();
  const std::size_t d = cfg.d_model();
  require_shape(e, cfg.vocab, d, "e");
  require_shape(e_p, cfg.max_seq, d, "e_p");
  require(blocks.size() == cfg.stored_blocks(), ErrorKind::kConfigMismatch,
          "expected " + std::to_string(cfg.stored_blocks()) + " stored blocks, found " + std::to_string(blocks.size()));
  for (std::size_t i = 0; i < blocks.size(); ++i) {
    const BlockWeights& b = blocks[i];
    const std::string p = "blocks." + std::to_string(i) + ".";
    b.attn.validate(cfg.layout);
    require_shape(b.w_up, d, 4 * d, p + "w_up");
    require_shape(b.w_down, 4 * d, d, p + "w_down");
    if (cfg.norm.type == NormType::kLayerNorm) {
      require(b.ln1_scale.size() == d && b.ln2_scale.size() == d, ErrorKind::kShape,
              p + "ln scales must have d_model entries");
      for (double s : b.ln1_scale) require(s > 0.0, ErrorKind::kInvalidArgument, p + "ln1_scale must be positive");
      for (double s : b.ln2_scale) require(s > 0.0, ErrorKind::kInvalidArgument, p + "ln2_scale must be positive");
    } else {
      require(b.ln1_scale.empty() && b.ln2_scale.empty(), ErrorKind::kConfigMismatch,
              p + "ln scales present without layernorm");
    }
  }
  require(tied() == cfg.tied_lm_head, ErrorKind::kConfigMismatch,
          cfg.tied_lm_head ? "config is tied but an LM head is stored" : "config is untied but no LM head is stored");
  if (w_lm) require_shape(*w_lm, d, cfg.vocab, "w_lm");
}

Matrix block_forward(const Matrix& x, const BlockWeights& b, const ArchConfig& cfg) {
  const bool ln = cfg.norm.type == NormType::kLayerNorm;
  const Matrix a_in = ln ? scaled_layernorm(x, b.ln1_scale, cfg.norm.eps) : x;
  Matrix y = x + attention::attn_forward(a_in, b.attn, cfg.layout, cfg.attn_scale);
  const Matrix m_in = ln ? scaled_layernorm(y, b.ln2_scale, cfg.norm.eps) : y;
  Matrix m = mlp(m_in, b.w_up, b.w_down);
  if (cfg.skips == Skips::kBoth) m += y;
  return m;
}

Matrix forward(const TokenSeq& tokens, const ModelWeights& m, const ArchConfig& cfg) {
  require(!tokens.empty(), ErrorKind::kInvalidArgument, "token sequence is empty");
  if (tokens.size() > cfg.max_seq)
    fail(ErrorKind::kSequenceTooLong,
         "sequence of length " + std::to_string(tokens.size()) + " exceeds max_seq " + std::to_string(cfg.max_seq));
  const std::size_t d = cfg.d_model();
  Matrix x(tokens.size(), d);
  for (std::size_t i = 0; i < tokens.size(); ++i) {
    if (tokens[i] >= cfg.vocab)
      fail(ErrorKind::kTokenOutOfRange,
           "token " + std::to_string(tokens[i]) + " at position " + std::to_string(i) + " is not below vocab " +
               std::to_string(cfg.vocab));
    for (std::size_t c = 0; c < d; ++c) x(i, c) = m.e(tokens[i], c) + m.e_p(i, c);
  }
  for (std::size_t l = 0; l < cfg.n_layers; ++l)
    x = block_forward(x, m.blocks[cfg.sharing == Sharing::kShared ? 0 : l], cfg);
  return m.w_lm ? matmul(x, *m.w_lm) : matmul_nt(x, m.e);
}

ModelWeights random_model(const ArchConfig& cfg, Rng& rng, double max_cond) {
  cfg.validate();
  require(max_cond >= 1.0, ErrorKind::kInvalidArgument, "max_cond must be >= 1");
  const std::size_t d = cfg.d_model();
  const double s = 1.0 / std::sqrt(static_cast<double>(d));
  const double s4 = 1.0 / std::sqrt(static_cast<double>(4 * d));

  ModelWeights m;
  m.e = linalg::gaussian_matrix(cfg.vocab, d, 1.0, rng);
  m.e_p = linalg::gaussian_matrix(cfg.max_seq, d, 1.0, rng);
  for (std::size_t i = 0; i < cfg.stored_blocks(); ++i) {
    BlockWeights b;
    for (int attempt = 0;; ++attempt) {
      if (attempt == kMaxConditionDraws)
        fail(ErrorKind::kConditioningFailure, "no W_Q with condition number <= " + io::format_double(max_cond) +
                                                  " after " + std::to_string(kMaxConditionDraws) + " draws");
      b.attn.w_q = linalg::gaussian_matrix(d, d, s, rng);
      try {
        if (linalg::condition_number_2(b.attn.w_q) <= max_cond) break;
      } catch (const SingularMatrixError&) {
        // redraw
      }
    }
    b.attn.w_k = linalg::gaussian_matrix(d, d, s, rng);
    b.attn.w_v = linalg::gaussian_matrix(d, d, s, rng);
    b.attn.w_o = linalg::gaussian_matrix(d, d, s, rng);
    b.w_up = linalg::gaussian_matrix(d, 4 * d, s, rng);
    b.w_down = linalg::gaussian_matrix(4 * d, d, s4, rng);
    if (cfg.norm.type == NormType::kLayerNorm) {
      b.ln1_scale.resize(d);
      b.ln2_scale.resize(d);
      for (double& v : b.ln1_scale) v = std::exp(0.2 * rng.normal());
      for (double& v : b.ln2_scale) v = std::exp(0.2 * rng.normal());
    }
    m.blocks.push_back(std::move(b));
  }
  if (!cfg.tied_lm_head) m.w_lm = linalg::gaussian_matrix(d, cfg.vocab, s, rng);
  return m;
}

std::vector<std::uint8_t> encode_checkpoint(const ModelWeights& m, const ArchConfig& cfg) {
  m.validate(cfg);
  const auto tensors = tensor_list(m, cfg);

  std::vector<std::uint64_t> offsets;
  std::uint64_t off = 0;
  for (const auto& t : tensors) {
    offsets.push_back(off);
    std::uint64_t n = 1;
    for (auto dim : t.dims) n *= dim;
    off = align_up(static_cast<std::size_t>(off + n * 8));
  }

  Writer w;
  w.bytes(kMagic, 4);
  w.u32(kVersion);
  w.u32(static_cast<std::uint32_t>(tensors.size()));
  for (std::size_t i = 0; i < tensors.size(); ++i) {
    const auto& t = tensors[i];
    w.u16(static_cast<std::uint16_t>(t.name.size()));
    w.bytes(t.name.data(), t.name.size());
    w.u8(kDtypeF64);
    w.u8(static_cast<std::uint8_t>(t.dims.size()));
    for (auto dim : t.dims) w.u64(dim);
    w.u64(offsets[i]);
  }
  const std::size_t data_start = align_up(w.size());
  for (std::size_t i = 0; i < tensors.size(); ++i) {
    w.pad_to(data_start + offsets[i]);
    std::size_t n = 1;
    for (auto dim : tensors[i].dims) n *= dim;
    for (std::size_t k = 0; k < n; ++k) w.f64(tensors[i].data[k]);
  }
  io::Bytes out = w.take();
  const std::uint32_t crc = io::crc32(out);
  for (int i = 0; i < 4; ++i) out.push_back(static_cast<std::uint8_t>(crc >> (8 * i)));
  return out;
}

ModelWeights decode_checkpoint(const std::vector<std::uint8_t>& bytes, const ArchConfig& cfg) {
  cfg.validate();
  if (bytes.size() < 4) fail(ErrorKind::kTruncatedFile, "file is shorter than the magic number");
  if (!std::equal(bytes.begin(), bytes.begin() + 4, kMagic)) fail(ErrorKind::kBadMagic, "not a QEC1 checkpoint");
  if (bytes.size() < 12) fail(ErrorKind::kTruncatedFile, "file ends inside the header");
  const std::uint32_t version = static_cast<std::uint32_t>(bytes[4]) | (static_cast<std::uint32_t>(bytes[5]) << 8) |
                                (static_cast<std::uint32_t>(bytes[6]) << 16) |
                                (static_cast<std::uint32_t>(bytes[7]) << 24);
  if (version != kVersion)
    fail(ErrorKind::kVersionMismatch, "checkpoint version " + std::to_string(version) + ", expected 1");

  const std::size_t body = bytes.size() >= 4 ? bytes.size() - 4 : 0;
  std::uint32_t stored = 0;
  for (int i = 0; i < 4; ++i) stored |= static_cast<std::uint32_t>(bytes[body + static_cast<std::size_t>(i)]) << (8 * i);
  const bool intact = bytes.size() >= 16 && io::crc32(std::span(bytes.data(), body)) == stored;
  if (!intact) {
    // Tell a short file apart from a damaged one where the header allows it.
    Layout lay = parse_layout(bytes);
    if (lay.total_size > bytes.size())
      fail(ErrorKind::kTruncatedFile, "file has " + std::to_string(bytes.size()) + " bytes, header describes " +
                                          std::to_string(lay.total_size));
    fail(ErrorKind::kChecksumMismatch, "CRC32 does not match the file contents");
  }
  const Layout lay = parse_layout(bytes);
  if (lay.total_size != bytes.size())
    fail(ErrorKind::kTruncatedFile, "file length does not match the tensor table");

  std::map<std::string, const TensorRecord*> by_name;
  for (const auto& [name, rec] : lay.tensors) by_name[name] = &rec;

  std::size_t used = 0;
  auto take = [&](const std::string& name, std::vector<std::size_t> dims) -> Vector {
    const auto it = by_name.find(name);
    if (it == by_name.end()) fail(ErrorKind::kConfigMismatch, "checkpoint lacks tensor '" + name + "'");
    const TensorRecord& rec = *it->second;
    bool same = rec.dims.size() == dims.size();
    for (std::size_t i = 0; same && i < dims.size(); ++i) same = rec.dims[i] == dims[i];
    if (!same) fail(ErrorKind::kConfigMismatch, "tensor '" + name + "' has the wrong shape for the config");
    ++used;
    Vector v(static_cast<std::size_t>(rec.count()));
    const std::size_t base = lay.data_start + static_cast<std::size_t>(rec.offset);
    for (std::size_t k = 0; k < v.size(); ++k) v[k] = read_f64(bytes, base + 8 * k);
    return v;
  };
  auto take_m = [&](const std::string& name, std::size_t r, std::size_t c) { return Matrix(r, c, take(name, {r, c})); };

  const std::size_t d = cfg.d_model();
  ModelWeights m;
  m.e = take_m("e", cfg.vocab, d);
  m.e_p = take_m("e_p", cfg.max_seq, d);
  for (std::size_t i = 0; i < cfg.stored_blocks(); ++i) {
    const std::string p = "blocks." + std::to_string(i) + ".";
    BlockWeights b;
    b.attn.w_q = take_m(p + "w_q", d, d);
    b.attn.w_k = take_m(p + "w_k", d, d);
    b.attn.w_v = take_m(p + "w_v", d, d);
    b.attn.w_o = take_m(p + "w_o", d, d);
    b.w_up = take_m(p + "w_up", d, 4 * d);
    b.w_down = take_m(p + "w_down", 4 * d, d);
    if (cfg.norm.type == NormType::kLayerNorm) {
      b.ln1_scale = take(p + "ln1_scale", {d});
      b.ln2_scale = take(p + "ln2_scale", {d});
    }
    m.blocks.push_back(std::move(b));
  }
  if (!cfg.tied_lm_head) m.w_lm = take_m("w_lm", d, cfg.vocab);
  if (used != lay.tensors.size())
    fail(ErrorKind::kConfigMismatch, "checkpoint holds tensors the config does not describe");
  m.validate(cfg);
  return m;
}

std::filesystem::path sidecar_path(const std::filesystem::path& path) {
  std::filesystem::path p = path;
  p += ".json";
  return p;
}

void save_checkpoint(const ModelWeights& m, const ArchConfig& cfg, const std::filesystem::path& path) {
  const io::Bytes bytes = encode_checkpoint(m, cfg);
  io::write_text_atomic(sidecar_path(path), config_to_json(cfg));
  io::write_file_atomic(path, bytes);
}

std::pair<ModelWeights, ArchConfig> load_checkpoint(const std::filesystem::path& path) {
  const io::Bytes bytes = io::read_file(path);
  const ArchConfig cfg = config_from_json(io::read_text(sidecar_path(path)));
  ModelWeights m = decode_checkpoint(bytes, cfg);
  return {std::move(m), cfg};
}

}  // namespace qelim::model
