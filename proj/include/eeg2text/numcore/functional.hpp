#pragma once

#include <algorithm>
#include <cmath>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include "eeg2text/numcore/tensor.hpp"

// Tape-free forms of the basic numeric functions, for callers that only need
// values (metrics, decoding, tests).

namespace eeg2text::numcore {

// Softmax along `axis` (0 = down columns, 1 = along rows) of a rank-2 tensor,
// with max subtraction.
template <class T>
Tensor<T> softmax(const Tensor<T>& x, int axis = 1) {
  if (axis != 0 && axis != 1) throw std::invalid_argument("softmax: axis must be 0 or 1");
  Tensor<T> y({x.rows(), x.cols()});
  const std::size_t outer = axis == 1 ? x.rows() : x.cols();
  const std::size_t inner = axis == 1 ? x.cols() : x.rows();
  auto idx = [&](std::size_t o, std::size_t i) { return axis == 1 ? o * x.cols() + i : i * x.cols() + o; };
  for (std::size_t o = 0; o < outer; ++o) {
    T mx = x[idx(o, 0)];
    for (std::size_t i = 1; i < inner; ++i) mx = std::max(mx, x[idx(o, i)]);
    T total{0};
    for (std::size_t i = 0; i < inner; ++i) total += (y[idx(o, i)] = std::exp(x[idx(o, i)] - mx));
    for (std::size_t i = 0; i < inner; ++i) y[idx(o, i)] /= total;
  }
  return y;
}

// log softmax of a single row, evaluated in double precision.
template <class T>
std::vector<double> log_softmax(std::span<const T> logits) {
  double mx = logits[0];
  for (T v : logits) mx = std::max(mx, static_cast<double>(v));
  double z = 0.0;
  for (T v : logits) z += std::exp(static_cast<double>(v) - mx);
  const double lse = mx + std::log(z);
  std::vector<double> out(logits.size());
  for (std::size_t i = 0; i < logits.size(); ++i) out[i] = static_cast<double>(logits[i]) - lse;
  return out;
}

template <class T>
double mse(const Tensor<T>& pred, const Tensor<T>& target) {
  if (!pred.same_shape(target)) {
    throw ShapeError("mse: shape mismatch " + shape_to_string(pred.shape()) + " vs " +
                     shape_to_string(target.shape()));
  }
  double total = 0.0;
  for (std::size_t i = 0; i < pred.size(); ++i) {
    const double d = static_cast<double>(pred[i]) - static_cast<double>(target[i]);
    total += d * d;
  }
  return total / static_cast<double>(pred.size());
}

// -log softmax(logits)[target].
template <class T>
double cross_entropy(std::span<const T> logits, std::size_t target) {
  if (target >= logits.size()) {
    throw std::out_of_range("cross_entropy: target index " + std::to_string(target) +
                            " outside vocabulary of size " + std::to_string(logits.size()));
  }
  return -log_softmax(logits)[target];
}

}  // namespace eeg2text::numcore
