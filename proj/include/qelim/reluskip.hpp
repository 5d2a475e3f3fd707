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

// When can a skip connection be folded into a one-hidden-layer ReLU MLP?
//
//   W2 relu(W1 x) + x = V2 relu(V1 x)   for all x in R^h
//
// holds with V1 = (I - 2 Pi_J) W1, V2 = W2 whenever W2[:, J] W1[J, :] = -I_h.
// Column-vector convention throughout: W1 is m x h, W2 is h x m.

#include <cstddef>
#include <cstdint>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "qelim/matrix.hpp"
#include "qelim/rng.hpp"

namespace qelim::reluskip {

using IndexSet = std::vector<std::size_t>;

inline constexpr double kConstructTol = 1e-9;
inline constexpr double kSearchTol = 1e-6;
inline constexpr std::size_t kMaxExhaustiveWidth = 20;

struct AbsorptionInstance {
  std::size_t h = 0;
  std::size_t m = 0;
  Matrix w1;  // m x h
  Matrix w2;  // h x m
  std::optional<IndexSet> planted_j;

  /// Checks shapes, m >= h and rank(w1) = rank(w2) = h; throws
  /// kInvalidArgument otherwise.
  void validate() const;
};

/// Wraps explicit weights, validating them.
AbsorptionInstance make_instance(Matrix w1, Matrix w2);

/// Gaussian W1, W2 with rows J of W1 set to I_h and columns J of W2 set to
/// -I_h. Redraws (up to 100 times) if a rank check fails.
AbsorptionInstance plant_instance(std::size_t h, std::size_t m, const IndexSet& j, Rng& rng);

/// Fully Gaussian instance of the given shape (generic: no absorbing J).
AbsorptionInstance random_instance(std::size_t h, std::size_t m, Rng& rng);

/// |W2[:, J] W1[J, :] + I|_max.
double subset_residual(const AbsorptionInstance& inst, const IndexSet& j);

/// ((I - 2 Pi_J) W1, W2) without checking the absorption condition.
std::pair<Matrix, Matrix> sign_flip(const AbsorptionInstance& inst, const IndexSet& j);

/// sign_flip after checking |J| >= h (kSubsetTooSmall) and
/// subset_residual <= tol (kConditionNotSatisfied, message carries the residual).
std::pair<Matrix, Matrix> absorb_construct(const AbsorptionInstance& inst, const IndexSet& j,
                                           double tol = kConstructTol);

struct SearchResult {
  std::vector<IndexSet> subsets;  // lexicographic order
  std::vector<double> residuals;  // matching subset_residual values
};

/// Every J with |J| >= h and subset_residual <= tol, by exhaustive
/// enumeration. Throws kWidthTooLargeForExhaustiveSearch when m > max_m
/// (max_m itself is capped at kMaxExhaustiveWidth).
SearchResult find_absorbing_subsets(const AbsorptionInstance& inst, double tol = kSearchTol,
                                    std::size_t max_m = kMaxExhaustiveWidth);

/// max over samples of |W2 relu(W1 x) + x - V2 relu(V1 x)|_max with Gaussian
/// x; sample t uses scale {0.1, 1, 10}[t % 3]. Zero samples give 0.
double verify_absorption(const AbsorptionInstance& inst, const Matrix& v1, const Matrix& v2, std::size_t samples,
                         Rng& rng);

/// {h, m, tol, subsets_found, residuals}.
std::string search_report_json(const AbsorptionInstance& inst, double tol, const SearchResult& r);

/// {h, m, w1, w2, planted_j}; matrices as arrays of rows.
std::string instance_to_json(const AbsorptionInstance& inst);
/// Throws kConfigParse on malformed input, kInvalidArgument if the weights
/// fail validation.
AbsorptionInstance instance_from_json(const std::string& text);

}  // namespace qelim::reluskip
