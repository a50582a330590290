#pragma once

#include <cstddef>

// Dense kernels used by the autodiff ops. The top-level versions are
// OpenMP-parallel over output rows; `serial` holds straightforward reference
// implementations kept for tests and benchmarks.
//
// gemm computes C[m x n] (+)= op(A) * op(B) where op(A) is m x k. When
// trans_a is set, A is stored k x m; when trans_b is set, B is stored n x k.
// Output rows are always produced by a single thread with a fixed summation
// order, so results do not depend on the thread count.

namespace eeg2text::numcore::kernels {

template <class T>
void gemm(bool trans_a, bool trans_b, std::size_t m, std::size_t n, std::size_t k, const T* a,
          const T* b, T* c, bool accumulate);

// Row-wise numerically stable softmax: y[r] = softmax(x[r]).
template <class T>
void softmax_rows(const T* x, T* y, std::size_t rows, std::size_t cols);

// Below this many multiply-adds gemm stays on the calling thread.
inline constexpr std::size_t kParallelGemmThreshold = 1u << 15;

int max_threads();

namespace serial {

template <class T>
void gemm(bool trans_a, bool trans_b, std::size_t m, std::size_t n, std::size_t k, const T* a,
          const T* b, T* c, bool accumulate);

template <class T>
void softmax_rows(const T* x, T* y, std::size_t rows, std::size_t cols);

}  // namespace serial

}  // namespace eeg2text::numcore::kernels
