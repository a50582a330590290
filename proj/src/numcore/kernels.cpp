#include "eeg2text/numcore/kernels.hpp"

#include <algorithm>
#include <cmath>

#ifdef _OPENMP
#include <omp.h>
#endif

namespace eeg2text::numcore::kernels {

namespace {

template <class T>
inline void gemm_row(bool trans_a, bool trans_b, std::size_t i, std::size_t m, std::size_t n,
                     std::size_t k, const T* a, const T* b, T* c, bool accumulate) {
  T* crow = c + i * n;
  if (!accumulate) std::fill(crow, crow + n, T{0});
  if (!trans_b) {
    // Broadcast A(i, p) across row p of B: unit-stride inner loop.
    for (std::size_t p = 0; p < k; ++p) {
      const T aip = trans_a ? a[p * m + i] : a[i * k + p];
      const T* brow = b + p * n;
#pragma omp simd
      for (std::size_t j = 0; j < n; ++j) crow[j] += aip * brow[j];
    }
  } else {
    // B stored n x k: C(i, j) is a dot product of two contiguous rows when A is
    // not transposed.
    for (std::size_t j = 0; j < n; ++j) {
      const T* brow = b + j * k;
      T sum{0};
      if (!trans_a) {
        const T* arow = a + i * k;
#pragma omp simd reduction(+ : sum)
        for (std::size_t p = 0; p < k; ++p) sum += arow[p] * brow[p];
      } else {
        for (std::size_t p = 0; p < k; ++p) sum += a[p * m + i] * brow[p];
      }
      crow[j] += sum;
    }
  }
}

template <class T>
inline void softmax_row(const T* x, T* y, std::size_t cols) {
  T mx = x[0];
  for (std::size_t j = 1; j < cols; ++j) mx = std::max(mx, x[j]);
  T total{0};
  for (std::size_t j = 0; j < cols; ++j) {
    y[j] = std::exp(x[j] - mx);
    total += y[j];
  }
  const T inv = T{1} / total;
  for (std::size_t j = 0; j < cols; ++j) y[j] *= inv;
}

}  // namespace

int max_threads() {
#ifdef _OPENMP
  return omp_get_max_threads();
#else
  return 1;
#endif
}

template <class T>
void gemm(bool trans_a, bool trans_b, std::size_t m, std::size_t n, std::size_t k, const T* a,
          const T* b, T* c, bool accumulate) {
  const bool parallel = m > 1 && m * n * k >= kParallelGemmThreshold;
  const auto rows = static_cast<std::ptrdiff_t>(m);
#pragma omp parallel for schedule(static) if (parallel)
  for (std::ptrdiff_t i = 0; i < rows; ++i) {
    gemm_row(trans_a, trans_b, static_cast<std::size_t>(i), m, n, k, a, b, c, accumulate);
  }
}

template <class T>
void softmax_rows(const T* x, T* y, std::size_t rows, std::size_t cols) {
  const bool parallel = rows * cols >= kParallelGemmThreshold;
  const auto r = static_cast<std::ptrdiff_t>(rows);
#pragma omp parallel for schedule(static) if (parallel)
  for (std::ptrdiff_t i = 0; i < r; ++i) {
    softmax_row(x + i * cols, y + i * cols, cols);
  }
}

namespace serial {

template <class T>
void gemm(bool trans_a, bool trans_b, std::size_t m, std::size_t n, std::size_t k, const T* a,
          const T* b, T* c, bool accumulate) {
  for (std::size_t i = 0; i < m; ++i) {
    for (std::size_t j = 0; j < n; ++j) {
      T sum{0};
      for (std::size_t p = 0; p < k; ++p) {
        const T av = trans_a ? a[p * m + i] : a[i * k + p];
        const T bv = trans_b ? b[j * k + p] : b[p * n + j];
        sum += av * bv;
      }
      c[i * n + j] = accumulate ? c[i * n + j] + sum : sum;
    }
  }
}

template <class T>
void softmax_rows(const T* x, T* y, std::size_t rows, std::size_t cols) {
  for (std::size_t i = 0; i < rows; ++i) softmax_row(x + i * cols, y + i * cols, cols);
}

template void gemm<float>(bool, bool, std::size_t, std::size_t, std::size_t, const float*,
                          const float*, float*, bool);
template void gemm<double>(bool, bool, std::size_t, std::size_t, std::size_t, const double*,
                           const double*, double*, bool);
template void softmax_rows<float>(const float*, float*, std::size_t, std::size_t);
template void softmax_rows<double>(const double*, double*, std::size_t, std::size_t);

}  // namespace serial

template void gemm<float>(bool, bool, std::size_t, std::size_t, std::size_t, const float*,
                          const float*, float*, bool);
template void gemm<double>(bool, bool, std::size_t, std::size_t, std::size_t, const double*,
                           const double*, double*, bool);
template void softmax_rows<float>(const float*, float*, std::size_t, std::size_t);
template void softmax_rows<double>(const double*, double*, std::size_t, std::size_t);

}  // namespace eeg2text::numcore::kernels
