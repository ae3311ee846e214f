// Copyright 2026 The metaspoof Authors
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

#include <cstddef>
#include <string_view>
#include <vector>

namespace metaspoof::kernels {

// Dense double-precision inner loops used by the autodiff core.
//
// Every backend must reproduce the scalar reference bit-for-bit: vector
// lanes run across independent output elements and each output element sees
// the same sequence of adds and multiplies as the scalar loop. Reductions are
// never split across lanes.

enum class Backend { kScalar, kAvx2 };

struct KernelTable {
  Backend backend;
  const char* name;

  // c[m x n] = a[m x k] * b[k x n], all row-major.
  void (*gemm)(std::size_t m, std::size_t k, std::size_t n, const double* a,
               const double* b, double* c);

  // out[i][j] = sum_t (a[i][t] - bt[t][j])^2 with a: m x d, bt: d x n
  // (the second operand is passed transposed so lanes run over j).
  void (*sq_dist)(std::size_t m, std::size_t n, std::size_t d, const double* a,
                  const double* bt, double* out);

  void (*add)(std::size_t n, const double* a, const double* b, double* out);
  void (*sub)(std::size_t n, const double* a, const double* b, double* out);
  void (*mul)(std::size_t n, const double* a, const double* b, double* out);
  // y += alpha * x
  void (*axpy)(std::size_t n, double alpha, const double* x, double* y);
  // out = alpha * x
  void (*scale)(std::size_t n, double alpha, const double* x, double* out);
  void (*relu)(std::size_t n, const double* x, double* out);
  // gx += g where x > 0
  void (*relu_backward)(std::size_t n, const double* x, const double* g,
                        double* gx);
};

const KernelTable& scalar_kernels();
// nullptr when the backend was not compiled in.
const KernelTable* avx2_kernels();

bool cpu_supports(Backend backend);

// Backends that are both compiled in and supported by this CPU.
std::vector<Backend> available_backends();

// The table used by the tensor library. Chosen on first use: the best
// available backend, unless METASPOOF_SIMD=scalar is set in the environment.
const KernelTable& active();

// Overrides the runtime choice. Throws std::invalid_argument when the backend
// is unavailable. Not thread-safe against concurrent kernel use.
void set_backend(Backend backend);

std::string_view backend_name(Backend backend);

}  // namespace metaspoof::kernels
