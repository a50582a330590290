#pragma once

#include <cstdint>
#include <string>

#include "eeg2text/numcore/ops.hpp"
#include "eeg2text/numcore/parameter.hpp"
#include "eeg2text/numcore/tape.hpp"

// Layers shared by the brain encoder and the sequence generator. Each layer
// registers its parameters in a ParamStore under a dotted name prefix and
// keeps non-owning pointers to them.

namespace eeg2text::nn {

using numcore::Parameter;
using numcore::ParamStore;
using numcore::Tape;
using numcore::Tensor;
using numcore::Var;

// y = x W + b with W stored in x out.
template <class T>
class Linear {
 public:
  Linear() = default;
  Linear(ParamStore<T>& store, const std::string& name, std::size_t in, std::size_t out,
         std::uint64_t seed, bool bias = true);

  Var<T> operator()(Tape<T>& tape, Var<T> x) const;

  Parameter<T>* weight = nullptr;
  Parameter<T>* bias = nullptr;
};

template <class T>
class LayerNorm {
 public:
  LayerNorm() = default;
  LayerNorm(ParamStore<T>& store, const std::string& name, std::size_t dim);

  Var<T> operator()(Tape<T>& tape, Var<T> x) const;

  Parameter<T>* gain = nullptr;
  Parameter<T>* bias = nullptr;
};

// Scaled dot-product attention with `heads` heads over d_model columns.
template <class T>
class MultiHeadAttention {
 public:
  MultiHeadAttention() = default;
  MultiHeadAttention(ParamStore<T>& store, const std::string& name, std::size_t d_model,
                     std::size_t heads, std::uint64_t seed);

  // mask, when given, is query_rows x key_rows and added to the scores.
  Var<T> operator()(Tape<T>& tape, Var<T> query, Var<T> keys,
                    const Tensor<T>* mask = nullptr) const;

 private:
  std::size_t d_model_ = 0, heads_ = 0;
  Linear<T> q_, k_, v_, o_;
};

template <class T>
class FeedForward {
 public:
  FeedForward() = default;
  FeedForward(ParamStore<T>& store, const std::string& name, std::size_t d_model,
              std::size_t hidden, std::uint64_t seed);

  Var<T> operator()(Tape<T>& tape, Var<T> x) const;

 private:
  Linear<T> up_, down_;
};

// Post-norm transformer encoder layer: self-attention, add & norm,
// feed-forward, add & norm. Dropout on both sublayer outputs.
template <class T>
class EncoderLayer {
 public:
  EncoderLayer() = default;
  EncoderLayer(ParamStore<T>& store, const std::string& name, std::size_t d_model,
               std::size_t heads, std::size_t ffn_hidden, double dropout, std::uint64_t seed);

  Var<T> operator()(Tape<T>& tape, Var<T> x) const;

  const MultiHeadAttention<T>& attention() const { return attn_; }
  const FeedForward<T>& ffn() const { return ffn_; }

 private:
  MultiHeadAttention<T> attn_;
  LayerNorm<T> norm1_, norm2_;
  FeedForward<T> ffn_;
  double dropout_ = 0.0;
};

// Post-norm decoder layer: causal self-attention, cross-attention over the
// encoder memory, feed-forward; each followed by add & norm.
template <class T>
class DecoderLayer {
 public:
  DecoderLayer() = default;
  DecoderLayer(ParamStore<T>& store, const std::string& name, std::size_t d_model,
               std::size_t heads, std::size_t ffn_hidden, double dropout, std::uint64_t seed);

  Var<T> operator()(Tape<T>& tape, Var<T> x, Var<T> memory) const;

  const MultiHeadAttention<T>& cross_attention() const { return cross_; }

 private:
  MultiHeadAttention<T> self_, cross_;
  LayerNorm<T> norm1_, norm2_, norm3_;
  FeedForward<T> ffn_;
  double dropout_ = 0.0;
};

// One direction of a GRU; returns the last hidden state for a time-major
// input (T x F).
template <class T>
class GruDirection {
 public:
  GruDirection() = default;
  GruDirection(ParamStore<T>& store, const std::string& name, std::size_t input,
               std::size_t hidden, std::uint64_t seed);

  Var<T> last_state(Tape<T>& tape, Var<T> x, bool reverse) const;

  Parameter<T>* w_x = nullptr;
  Parameter<T>* w_h = nullptr;
  Parameter<T>* b_x = nullptr;
  Parameter<T>* b_h = nullptr;
};

// rows x rows additive mask blocking attention to later positions.
template <class T>
Tensor<T> causal_mask(std::size_t rows);

}  // namespace eeg2text::nn
