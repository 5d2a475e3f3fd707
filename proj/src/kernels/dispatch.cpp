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

#include <atomic>

#include "qelim/error.hpp"
#include "qelim/kernels.hpp"

namespace qelim::kernels {
namespace {

constexpr KernelTable kScalarTable{Isa::kScalar, &scalar::dot, &scalar::axpy, &scalar::gemm};
#ifdef QELIM_HAVE_AVX2_KERNELS
constexpr KernelTable kAvx2Table{Isa::kAvx2, &avx2::dot, &avx2::axpy, &avx2::gemm};
#endif

const KernelTable* detect() noexcept {
#ifdef QELIM_HAVE_AVX2_KERNELS
  if (isa_supported(Isa::kAvx2)) return &kAvx2Table;
#endif
  return &kScalarTable;
}

std::atomic<const KernelTable*>& current() noexcept {
  static std::atomic<const KernelTable*> ptr{detect()};
  return ptr;
}

}  // namespace

std::string_view to_string(Isa isa) noexcept {
  switch (isa) {
    case Isa::kScalar: return "scalar";
    case Isa::kAvx2: return "avx2";
  }
  return "unknown";
}

bool isa_supported(Isa isa) noexcept {
  switch (isa) {
    case Isa::kScalar: return true;
    case Isa::kAvx2:
#ifdef QELIM_HAVE_AVX2_KERNELS
      __builtin_cpu_init();
      return __builtin_cpu_supports("avx2") && __builtin_cpu_supports("fma");
#else
      return false;
#endif
  }
  return false;
}

const KernelTable& table(Isa isa) {
  require(isa_supported(isa), ErrorKind::kInvalidArgument,
          "kernel set '" + std::string(to_string(isa)) + "' is not supported on this CPU");
#ifdef QELIM_HAVE_AVX2_KERNELS
  if (isa == Isa::kAvx2) return kAvx2Table;
#endif
  return kScalarTable;
}

const KernelTable& active() noexcept { return *current().load(std::memory_order_relaxed); }

Isa active_isa() noexcept { return active().isa; }

void set_isa(Isa isa) { current().store(&table(isa), std::memory_order_relaxed); }

}  // namespace qelim::kernels
