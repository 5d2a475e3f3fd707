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

// Inner-loop kernels behind every dense product in the library.
//
// Each kernel has a scalar reference implementation and, on x86-64, an
// AVX2+FMA variant. The variant is picked once at startup from CPUID and can
// be overridden with set_isa() (tests use this to compare the two paths).
// Results of the two paths agree to rounding, not bitwise: the vector code
// reassociates sums and fuses multiply-adds.

#include <cstddef>
#include <string_view>

namespace qelim::kernels {

enum class Isa { kScalar, kAvx2 };

std::string_view to_string(Isa isa) noexcept;

struct KernelTable {
  Isa isa;
  double (*dot)(const double* a, const double* b, std::size_t n);
  /// y += alpha * x
  void (*axpy)(double alpha, const double* x, double* y, std::size_t n);
  /// C(m x n) += A(m x k) * B(k x n), all row-major with leading dimensions.
  void (*gemm)(std::size_t m, std::size_t n, std::size_t k, const double* a, std::size_t lda,
               const double* b, std::size_t ldb, double* c, std::size_t ldc);
};

bool isa_supported(Isa isa) noexcept;
const KernelTable& table(Isa isa);
const KernelTable& active() noexcept;
Isa active_isa() noexcept;
/// Throws Error(kInvalidArgument) when the CPU lacks the requested ISA.
void set_isa(Isa isa);

namespace scalar {
double dot(const double* a, const double* b, std::size_t n);
void axpy(double alpha, const double* x, double* y, std::size_t n);
void gemm(std::size_t m, std::size_t n, std::size_t k, const double* a, std::size_t lda,
          const double* b, std::size_t ldb, double* c, std::size_t ldc);
}  // namespace scalar

#if defined(__x86_64__) || defined(_M_X64)
#define QELIM_HAVE_AVX2_KERNELS 1
namespace avx2 {
double dot(const double* a, const double* b, std::size_t n);
void axpy(double alpha, const double* x, double* y, std::size_t n);
void gemm(std::size_t m, std::size_t n, std::size_t k, const double* a, std::size_t lda,
          const double* b, std::size_t ldb, double* c, std::size_t ldc);
}  // namespace avx2
#endif

}  // namespace qelim::kernels
