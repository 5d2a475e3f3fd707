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

#include "qelim/reluskip.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <string>

#include <json.hpp>

#include "qelim/error.hpp"
#include "qelim/io.hpp"
#include "qelim/linalg.hpp"
#include "qelim/parallel.hpp"

namespace qelim::reluskip {
namespace {

using nlohmann::ordered_json;

void check_indices(const IndexSet& j, std::size_t m) {
  std::vector<bool> seen(m, false);
  for (std::size_t k : j) {
    require(k < m, ErrorKind::kInvalidArgument, "index " + std::to_string(k) + " is outside 0.." + std::to_string(m - 1));
    require(!seen[k], ErrorKind::kInvalidArgument, "index " + std::to_string(k) + " appears twice");
    seen[k] = true;
  }
}

Vector relu_mlp(const Matrix& w1, const Matrix& w2, const Vector& x) {
  Vector hidden = matvec(w1, x);
  for (double& v : hidden) v = std::max(v, 0.0);
  return matvec(w2, hidden);
}

ordered_json matrix_json(const Matrix& a) {
  ordered_json rows = ordered_json::array();
  for (std::size_t r = 0; r < a.rows(); ++r) rows.push_back(std::vector<double>(a.row(r).begin(), a.row(r).end()));
  return rows;
}

Matrix matrix_from_json(const ordered_json& j, const char* key) {
  if (!j.is_array() || j.empty()) fail(ErrorKind::kConfigParse, std::string("'") + key + "' must be a non-empty array of rows");
  const std::size_t rows = j.size();
  std::size_t cols = 0;
  std::vector<double> data;
  for (const auto& row : j) {
    if (!row.is_array()) fail(ErrorKind::kConfigParse, std::string("'") + key + "' rows must be arrays");
    if (cols == 0) cols = row.size();
    if (row.size() != cols || cols == 0) fail(ErrorKind::kConfigParse, std::string("'") + key + "' rows differ in length");
    for (const auto& v : row) {
      if (!v.is_number()) fail(ErrorKind::kConfigParse, std::string("'") + key + "' entries must be numbers");
      data.push_back(v.get<double>());
    }
  }
  return Matrix(rows, cols, std::move(data));
}

}  // namespace

void AbsorptionInstance::validate() const {
  require(h >= 1 && m >= h, ErrorKind::kInvalidArgument, "instance needs m >= h >= 1");
  require(w1.rows() == m && w1.cols() == h, ErrorKind::kInvalidArgument, "W1 must be m x h");
  require(w2.rows() == h && w2.cols() == m, ErrorKind::kInvalidArgument, "W2 must be h x m");
  require(linalg::rank(w1) == h, ErrorKind::kInvalidArgument, "rank(W1) must equal h");
  require(linalg::rank(w2) == h, ErrorKind::kInvalidArgument, "rank(W2) must equal h");
  if (planted_j) check_indices(*planted_j, m);
}

AbsorptionInstance make_instance(Matrix w1, Matrix w2) {
  AbsorptionInstance inst;
  inst.h = w1.cols();
  inst.m = w1.rows();
  inst.w1 = std::move(w1);
  inst.w2 = std::move(w2);
  inst.validate();
  return inst;
}

AbsorptionInstance plant_instance(std::size_t h, std::size_t m, const IndexSet& j, Rng& rng) {
  require(h >= 2, ErrorKind::kInvalidArgument, "planted instances need h >= 2");
  require(m >= h, ErrorKind::kInvalidArgument, "planted instances need m >= h");
  require(j.size() == h, ErrorKind::kInvalidArgument, "planted index set must have exactly h entries");
  check_indices(j, m);
  for (int attempt = 0; attempt < 100; ++attempt) {
    AbsorptionInstance inst;
    inst.h = h;
    inst.m = m;
    inst.w1 = linalg::gaussian_matrix(m, h, 1.0, rng);
    inst.w2 = linalg::gaussian_matrix(h, m, 1.0, rng);
    for (std::size_t a = 0; a < h; ++a)
      for (std::size_t b = 0; b < h; ++b) {
        inst.w1(j[a], b) = a == b ? 1.0 : 0.0;
        inst.w2(b, j[a]) = a == b ? -1.0 : 0.0;
      }
    inst.planted_j = j;
    if (linalg::rank(inst.w1) == h && linalg::rank(inst.w2) == h) return inst;
  }
  fail(ErrorKind::kInvalidArgument, "could not draw a full-rank planted instance");
}

AbsorptionInstance random_instance(std::size_t h, std::size_t m, Rng& rng) {
  require(h >= 1 && m >= h, ErrorKind::kInvalidArgument, "instance needs m >= h >= 1");
  for (int attempt = 0; attempt < 100; ++attempt) {
    Matrix w1 = linalg::gaussian_matrix(m, h, 1.0, rng);
    Matrix w2 = linalg::gaussian_matrix(h, m, 1.0, rng);
    if (linalg::rank(w1) == h && linalg::rank(w2) == h) return make_instance(std::move(w1), std::move(w2));
  }
  fail(ErrorKind::kInvalidArgument, "could not draw a full-rank instance");
}

double subset_residual(const AbsorptionInstance& inst, const IndexSet& j) {
  check_indices(j, inst.m);
  Matrix s = Matrix::identity(inst.h);
  for (std::size_t k : j)
    for (std::size_t a = 0; a < inst.h; ++a)
      for (std::size_t b = 0; b < inst.h; ++b) s(a, b) += inst.w2(a, k) * inst.w1(k, b);
  return max_abs(s);
}

std::pair<Matrix, Matrix> sign_flip(const AbsorptionInstance& inst, const IndexSet& j) {
  check_indices(j, inst.m);
  Matrix v1 = inst.w1;
  for (std::size_t k : j)
    for (double& v : v1.row(k)) v = -v;
  return {std::move(v1), inst.w2};
}

std::pair<Matrix, Matrix> absorb_construct(const AbsorptionInstance& inst, const IndexSet& j, double tol) {
  if (j.size() < inst.h)
    fail(ErrorKind::kSubsetTooSmall,
         "|J| = " + std::to_string(j.size()) + " is below h = " + std::to_string(inst.h));
  const double r = subset_residual(inst, j);
  if (!(r <= tol))
    fail(ErrorKind::kConditionNotSatisfied, "W2[:,J] W1[J,:] + I has max entry " + io::format_double(r) +
                                                " above tol " + io::format_double(tol));
  return sign_flip(inst, j);
}

SearchResult find_absorbing_subsets(const AbsorptionInstance& inst, double tol, std::size_t max_m) {
  max_m = std::min(max_m, kMaxExhaustiveWidth);
  if (inst.m > max_m)
    fail(ErrorKind::kWidthTooLargeForExhaustiveSearch,
         "m = " + std::to_string(inst.m) + " exceeds the exhaustive-search cap of " + std::to_string(max_m));
  const std::size_t h = inst.h, m = inst.m;

  // Rank-one terms W2[:, k] W1[k, :], flattened.
  std::vector<Vector> outer(m, Vector(h * h));
  for (std::size_t k = 0; k < m; ++k)
    for (std::size_t a = 0; a < h; ++a)
      for (std::size_t b = 0; b < h; ++b) outer[k][a * h + b] = inst.w2(a, k) * inst.w1(k, b);

  const std::uint64_t total = std::uint64_t{1} << m;
  const std::size_t chunks = std::max<std::size_t>(1, std::min<std::uint64_t>(64, total / 1024));
  std::vector<std::vector<std::pair<std::uint64_t, double>>> found(chunks);
  parallel_for(chunks, [&](std::size_t c) {
    const std::uint64_t lo = total * c / chunks, hi = total * (c + 1) / chunks;
    Vector s(h * h);
    for (std::uint64_t mask = lo; mask < hi; ++mask) {
      if (static_cast<std::size_t>(std::popcount(mask)) < h) continue;
      std::fill(s.begin(), s.end(), 0.0);
      for (std::size_t a = 0; a < h; ++a) s[a * h + a] = 1.0;
      for (std::size_t k = 0; k < m; ++k)
        if (mask >> k & 1)
          for (std::size_t e = 0; e < h * h; ++e) s[e] += outer[k][e];
      double r = 0.0;
      for (double v : s) r = std::max(r, std::abs(v));
      if (r <= tol) found[c].emplace_back(mask, r);
    }
  });

  std::vector<std::pair<IndexSet, double>> all;
  for (const auto& f : found)
    for (const auto& [mask, r] : f) {
      IndexSet j;
      for (std::size_t k = 0; k < m; ++k)
        if (mask >> k & 1) j.push_back(k);
      all.emplace_back(std::move(j), r);
    }
  std::sort(all.begin(), all.end(), [](const auto& a, const auto& b) { return a.first < b.first; });
  SearchResult out;
  for (auto& [j, r] : all) {
    out.subsets.push_back(std::move(j));
    out.residuals.push_back(r);
  }
  return out;
}

double verify_absorption(const AbsorptionInstance& inst, const Matrix& v1, const Matrix& v2, std::size_t samples,
                         Rng& rng) {
  require(v1.rows() == inst.m && v1.cols() == inst.h && v2.rows() == inst.h && v2.cols() == inst.m,
          ErrorKind::kShape, "V1 must be m x h and V2 h x m");
  static constexpr double kScales[3] = {0.1, 1.0, 10.0};
  double worst = 0.0;
  Vector x(inst.h);
  for (std::size_t t = 0; t < samples; ++t) {
    for (double& v : x) v = kScales[t % 3] * rng.normal();
    Vector lhs = relu_mlp(inst.w1, inst.w2, x);
    for (std::size_t i = 0; i < inst.h; ++i) lhs[i] += x[i];
    worst = std::max(worst, max_abs_diff(lhs, relu_mlp(v1, v2, x)));
  }
  return worst;
}

std::string search_report_json(const AbsorptionInstance& inst, double tol, const SearchResult& r) {
  ordered_json j;
  j["h"] = inst.h;
  j["m"] = inst.m;
  j["tol"] = tol;
  j["subsets_found"] = r.subsets;
  j["residuals"] = r.residuals;
  return j.dump(2) + "\n";
}

std::string instance_to_json(const AbsorptionInstance& inst) {
  ordered_json j;
  j["h"] = inst.h;
  j["m"] = inst.m;
  j["w1"] = matrix_json(inst.w1);
  j["w2"] = matrix_json(inst.w2);
  j["planted_j"] = inst.planted_j ? ordered_json(*inst.planted_j) : ordered_json(nullptr);
  return j.dump(2) + "\n";
}

AbsorptionInstance instance_from_json(const std::string& text) {
  ordered_json j;
  try {
    j = ordered_json::parse(text);
  } catch (const ordered_json::parse_error& e) {
    fail(ErrorKind::kConfigParse, e.what());
  }
  if (!j.is_object() || !j.contains("w1") || !j.contains("w2"))
    fail(ErrorKind::kConfigParse, "instance JSON needs keys w1 and w2");
  AbsorptionInstance inst;
  inst.w1 = matrix_from_json(j.at("w1"), "w1");
  inst.w2 = matrix_from_json(j.at("w2"), "w2");
  inst.h = inst.w1.cols();
  inst.m = inst.w1.rows();
  for (const char* key : {"h", "m"})
    if (j.contains(key) && (!j.at(key).is_number_unsigned() ||
                            j.at(key).get<std::size_t>() != (key[0] == 'h' ? inst.h : inst.m)))
      fail(ErrorKind::kConfigParse, std::string("'") + key + "' disagrees with the shape of w1");
  if (j.contains("planted_j") && !j.at("planted_j").is_null()) {
    if (!j.at("planted_j").is_array()) fail(ErrorKind::kConfigParse, "'planted_j' must be an array of indices");
    IndexSet p;
    for (const auto& v : j.at("planted_j")) {
      if (!v.is_number_unsigned()) fail(ErrorKind::kConfigParse, "'planted_j' entries must be non-negative integers");
      p.push_back(v.get<std::size_t>());
    }
    inst.planted_j = std::move(p);
  }
  inst.validate();
  return inst;
}

}  // namespace qelim::reluskip
