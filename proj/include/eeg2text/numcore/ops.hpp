#pragma once

#include <span>
#include <vector>

#include "eeg2text/numcore/tape.hpp"

// Differentiable operations on rank-2 values. Shape violations throw
// ShapeError naming the offending shapes.

namespace eeg2text::numcore {

template <class T> Var<T> matmul(Var<T> a, Var<T> b);
// a * b^T
template <class T> Var<T> matmul_nt(Var<T> a, Var<T> b);

template <class T> Var<T> add(Var<T> a, Var<T> b);
template <class T> Var<T> sub(Var<T> a, Var<T> b);
template <class T> Var<T> mul(Var<T> a, Var<T> b);
template <class T> Var<T> scale(Var<T> a, T s);

// Broadcast a 1 x n row over every row of a.
template <class T> Var<T> add_row(Var<T> a, Var<T> row);
template <class T> Var<T> mul_row(Var<T> a, Var<T> row);

// Adds a constant tensor (e.g. an attention mask); no gradient flows into it.
template <class T> Var<T> add_constant(Var<T> a, const Tensor<T>& c);

template <class T> Var<T> tanh(Var<T> a);
template <class T> Var<T> sigmoid(Var<T> a);
// Exact GELU, x * Phi(x).
template <class T> Var<T> gelu(Var<T> a);

template <class T> Var<T> softmax_rows(Var<T> a);
template <class T> Var<T> layer_norm(Var<T> a, Var<T> gain, Var<T> bias, T eps = T(1e-5));

template <class T> Var<T> transpose(Var<T> a);
template <class T> Var<T> slice_rows(Var<T> a, std::size_t begin, std::size_t count);
template <class T> Var<T> slice_cols(Var<T> a, std::size_t begin, std::size_t count);
template <class T> Var<T> concat_rows(const std::vector<Var<T>>& parts);
template <class T> Var<T> concat_cols(const std::vector<Var<T>>& parts);

// Row lookup into an embedding table; gradients scatter-add back.
template <class T> Var<T> gather_rows(Var<T> table, std::span<const int> indices);

// Inverted dropout driven by the tape's stream; identity outside training.
template <class T> Var<T> dropout(Var<T> a, double p);

template <class T> Var<T> sum(Var<T> a);
template <class T> Var<T> mean(Var<T> a);

// Mean of squared elementwise differences, 1 x 1.
template <class T> Var<T> mse_loss(Var<T> pred, Var<T> target);

enum class Reduction { kMean, kSum };

// Row-wise -log softmax(logits[r])[targets[r]]; rows whose target equals
// ignore_index contribute nothing (and are not counted for the mean).
template <class T>
Var<T> cross_entropy(Var<T> logits, std::span<const int> targets, int ignore_index = -1,
                     Reduction reduction = Reduction::kMean);

// Runs a GRU over the rows of x (time-major, T x F) and returns the final
// hidden state (1 x H). Gate layout along the 3H axis is [reset | update |
// candidate]; the candidate uses r * (h W_hn + b_hn). When reverse is set the
// rows are consumed last to first. h_0 = 0.
template <class T>
Var<T> gru_last_state(Var<T> x, Var<T> w_x, Var<T> w_h, Var<T> b_x, Var<T> b_h, bool reverse);

}  // namespace eeg2text::numcore
