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

#include <cstdint>
#include <optional>

namespace qelim {

/// One step of splitmix64; advances `state` and returns the mixed output.
std::uint64_t splitmix64(std::uint64_t& state) noexcept;

/// Derives an independent child seed from (base, stream) through splitmix64.
std::uint64_t derive_seed(std::uint64_t base, std::uint64_t stream) noexcept;

/// xoshiro256** seeded through splitmix64, with Box-Muller normals.
///
/// The generator is fully specified by the 64-bit seed: the four state words
/// are four consecutive splitmix64 outputs, uniform doubles take the top 53
/// bits, and normals are produced in pairs (the second value of each pair is
/// cached). Identical seeds give bit-identical streams on every platform that
/// has IEEE-754 doubles and a correctly rounded log/sqrt/cos/sin.
class Rng {
 public:
  using result_type = std::uint64_t;

  explicit Rng(std::uint64_t seed) noexcept;

  static constexpr result_type min() noexcept { return 0; }
  static constexpr result_type max() noexcept { return ~result_type{0}; }

  result_type operator()() noexcept { return next_u64(); }
  result_type next_u64() noexcept;

  /// Uniform on [0, 1).
  double uniform() noexcept;
  /// Uniform integer on [0, n); n must be nonzero.
  std::uint64_t uniform_index(std::uint64_t n) noexcept;
  /// Standard normal.
  double normal() noexcept;

 private:
  std::uint64_t s_[4];
  std::optional<double> spare_;
};

}  // namespace qelim
