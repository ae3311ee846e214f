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

#include <atomic>
#include <cstdlib>
#include <stdexcept>
#include <string>

#include "metaspoof/kernels.hpp"

namespace metaspoof::kernels {

#ifndef METASPOOF_WITH_AVX2
const KernelTable* avx2_kernels() { return nullptr; }
#endif

namespace {

const KernelTable* table_for(Backend backend) {
  switch (backend) {
    case Backend::kScalar:
      return &scalar_kernels();
    case Backend::kAvx2:
      return avx2_kernels();
  }
  return nullptr;
}

const KernelTable* choose_default() {
  if (const char* env = std::getenv("METASPOOF_SIMD")) {
    if (std::string(env) == "scalar") return &scalar_kernels();
  }
  if (cpu_supports(Backend::kAvx2) && avx2_kernels() != nullptr) {
    return avx2_kernels();
  }
  return &scalar_kernels();
}

std::atomic<const KernelTable*>& current() {
  static std::atomic<const KernelTable*> table{choose_default()};
  return table;
}

}  // namespace

bool cpu_supports(Backend backend) {
  switch (backend) {
    case Backend::kScalar:
      return true;
    case Backend::kAvx2:
#if defined(__x86_64__) && (defined(__GNUC__) || defined(__clang__))
      return __builtin_cpu_supports("avx2");
#else
      return false;
#endif
  }
  return false;
}

std::vector<Backend> available_backends() {
  std::vector<Backend> out;
  for (Backend b : {Backend::kScalar, Backend::kAvx2}) {
    if (table_for(b) != nullptr && cpu_supports(b)) out.push_back(b);
  }
  return out;
}

const KernelTable& active() { return *current().load(std::memory_order_acquire); }

void set_backend(Backend backend) {
  const KernelTable* table = table_for(backend);
  if (table == nullptr || !cpu_supports(backend)) {
    throw std::invalid_argument("kernel backend '" +
                                std::string(backend_name(backend)) +
                                "' is not available on this machine");
  }
  current().store(table, std::memory_order_release);
}

std::string_view backend_name(Backend backend) {
  switch (backend) {
    case Backend::kScalar:
      return "scalar";
    case Backend::kAvx2:
      return "avx2";
  }
  return "unknown";
}

}  // namespace metaspoof::kernels
