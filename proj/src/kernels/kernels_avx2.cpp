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

// Compiled with -mavx2 only (no -mfma): mul and add stay separate roundings so
// results match the scalar table exactly.

#include <immintrin.h>

#include "metaspoof/kernels.hpp"

namespace metaspoof::kernels {
namespace {

constexpr std::size_t kLanes = 4;

void gemm(std::size_t m, std::size_t k, std::size_t n, const double* a,
          const double* b, double* c) {
  const std::size_t nv = n - n % kLanes;
  for (std::size_t i = 0; i < m; ++i) {
    double* crow = c + i * n;
    for (std::size_t j = 0; j < n; ++j) crow[j] = 0.0;
    for (std::size_t p = 0; p < k; ++p) {
      const double av = a[i * k + p];
      const __m256d avv = _mm256_set1_pd(av);
      const double* brow = b + p * n;
      std::size_t j = 0;
      for (; j < nv; j += kLanes) {
        __m256d acc = _mm256_loadu_pd(crow + j);
        acc = _mm256_add_pd(acc, _mm256_mul_pd(avv, _mm256_loadu_pd(brow + j)));
        _mm256_storeu_pd(crow + j, acc);
      }
      for (; j < n; ++j) crow[j] = crow[j] + av * brow[j];
    }
  }
}

void sq_dist(std::size_t m, std::size_t n, std::size_t d, const double* a,
             const double* bt, double* out) {
  const std::size_t nv = n - n % kLanes;
  for (std::size_t i = 0; i < m; ++i) {
    double* orow = out + i * n;
    for (std::size_t j = 0; j < n; ++j) orow[j] = 0.0;
    for (std::size_t t = 0; t < d; ++t) {
      const double av = a[i * d + t];
      const __m256d avv = _mm256_set1_pd(av);
      const double* brow = bt + t * n;
      std::size_t j = 0;
      for (; j < nv; j += kLanes) {
        const __m256d diff = _mm256_sub_pd(avv, _mm256_loadu_pd(brow + j));
        __m256d acc = _mm256_loadu_pd(orow + j);
        acc = _mm256_add_pd(acc, _mm256_mul_pd(diff, diff));
        _mm256_storeu_pd(orow + j, acc);
      }
      for (; j < n; ++j) {
        const double diff = av - brow[j];
        orow[j] = orow[j] + diff * diff;
      }
    }
  }
}

template <typename VecOp, typename ScalarOp>
inline void binary(std::size_t n, const double* a, const double* b,
                   double* out, VecOp vop, ScalarOp sop) {
  const std::size_t nv = n - n % kLanes;
  std::size_t i = 0;
  for (; i < nv; i += kLanes) {
    _mm256_storeu_pd(out + i,
                     vop(_mm256_loadu_pd(a + i), _mm256_loadu_pd(b + i)));
  }
  for (; i < n; ++i) out[i] = sop(a[i], b[i]);
}

void add(std::size_t n, const double* a, const double* b, double* out) {
  binary(n, a, b, out, [](__m256d x, __m256d y) { return _mm256_add_pd(x, y); },
         [](double x, double y) { return x + y; });
}

void sub(std::size_t n, const double* a, const double* b, double* out) {
  binary(n, a, b, out, [](__m256d x, __m256d y) { return _mm256_sub_pd(x, y); },
         [](double x, double y) { return x - y; });
}

void mul(std::size_t n, const double* a, const double* b, double* out) {
  binary(n, a, b, out, [](__m256d x, __m256d y) { return _mm256_mul_pd(x, y); },
         [](double x, double y) { return x * y; });
}

void axpy(std::size_t n, double alpha, const double* x, double* y) {
  const __m256d av = _mm256_set1_pd(alpha);
  const std::size_t nv = n - n % kLanes;
  std::size_t i = 0;
  for (; i < nv; i += kLanes) {
    const __m256d yv = _mm256_loadu_pd(y + i);
    _mm256_storeu_pd(y + i,
                     _mm256_add_pd(yv, _mm256_mul_pd(av, _mm256_loadu_pd(x + i))));
  }
  for (; i < n; ++i) y[i] = y[i] + alpha * x[i];
}

void scale(std::size_t n, double alpha, const double* x, double* out) {
  const __m256d av = _mm256_set1_pd(alpha);
  const std::size_t nv = n - n % kLanes;
  std::size_t i = 0;
  for (; i < nv; i += kLanes) {
    _mm256_storeu_pd(out + i, _mm256_mul_pd(av, _mm256_loadu_pd(x + i)));
  }
  for (; i < n; ++i) out[i] = alpha * x[i];
}

void relu(std::size_t n, const double* x, double* out) {
  const std::size_t nv = n - n % kLanes;
  const __m256d zero = _mm256_setzero_pd();
  std::size_t i = 0;
  for (; i < nv; i += kLanes) {
    const __m256d xv = _mm256_loadu_pd(x + i);
    // Blend rather than max so -0.0 and NaN map like the scalar ternary.
    const __m256d keep = _mm256_cmp_pd(xv, zero, _CMP_GT_OQ);
    _mm256_storeu_pd(out + i, _mm256_and_pd(keep, xv));
  }
  for (; i < n; ++i) out[i] = x[i] > 0.0 ? x[i] : 0.0;
}

void relu_backward(std::size_t n, const double* x, const double* g,
                   double* gx) {
  const std::size_t nv = n - n % kLanes;
  const __m256d zero = _mm256_setzero_pd();
  std::size_t i = 0;
  for (; i < nv; i += kLanes) {
    const __m256d keep = _mm256_cmp_pd(_mm256_loadu_pd(x + i), zero, _CMP_GT_OQ);
    const __m256d gv = _mm256_loadu_pd(g + i);
    const __m256d cur = _mm256_loadu_pd(gx + i);
    // Untouched lanes must keep their exact bits (including -0.0).
    const __m256d summed = _mm256_add_pd(cur, gv);
    _mm256_storeu_pd(gx + i, _mm256_blendv_pd(cur, summed, keep));
  }
  for (; i < n; ++i) {
    if (x[i] > 0.0) gx[i] = gx[i] + g[i];
  }
}

}  // namespace

const KernelTable* avx2_kernels() {
  static const KernelTable table{Backend::kAvx2, "avx2", gemm, sq_dist,
                                 add, sub, mul, axpy, scale, relu,
                                 relu_backward};
  return &table;
}

}  // namespace metaspoof::kernels
