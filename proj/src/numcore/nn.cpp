#include "eeg2text/numcore/nn.hpp"

#include <cmath>

#include "eeg2text/numcore/rng.hpp"

namespace eeg2text::nn {

using numcore::fan_in_uniform;
using numcore::make_rng;

template <class T>
Linear<T>::Linear(ParamStore<T>& store, const std::string& name, std::size_t in, std::size_t out,
                  std::uint64_t seed, bool with_bias) {
  auto rng = make_rng(seed, name + ".weight");
  weight = &store.add(name + ".weight", fan_in_uniform<T>(in, out, in, rng));
  if (with_bias) bias = &store.add(name + ".bias", Tensor<T>({1, out}));
}

template <class T>
Var<T> Linear<T>::operator()(Tape<T>& tape, Var<T> x) const {
  Var<T> y = numcore::matmul(x, tape.param(*weight));
  return bias ? numcore::add_row(y, tape.param(*bias)) : y;
}

template <class T>
LayerNorm<T>::LayerNorm(ParamStore<T>& store, const std::string& name, std::size_t dim) {
  gain = &store.add(name + ".gain", Tensor<T>({1, dim}, T{1}));
  bias = &store.add(name + ".bias", Tensor<T>({1, dim}));
}

template <class T>
Var<T> LayerNorm<T>::operator()(Tape<T>& tape, Var<T> x) const {
  return numcore::layer_norm(x, tape.param(*gain), tape.param(*bias));
}

template <class T>
MultiHeadAttention<T>::MultiHeadAttention(ParamStore<T>& store, const std::string& name,
                                          std::size_t d_model, std::size_t heads,
                                          std::uint64_t seed)
    : d_model_(d_model),
      heads_(heads),
      q_(store, name + ".q", d_model, d_model, seed),
      k_(store, name + ".k", d_model, d_model, seed),
      v_(store, name + ".v", d_model, d_model, seed),
      o_(store, name + ".o", d_model, d_model, seed) {
  if (heads == 0 || d_model % heads != 0) {
    throw std::invalid_argument(name + ": d_model " + std::to_string(d_model) +
                                " not divisible by heads " + std::to_string(heads));
  }
}

template <class T>
Var<T> MultiHeadAttention<T>::operator()(Tape<T>& tape, Var<T> query, Var<T> keys,
                                         const Tensor<T>* mask) const {
  const std::size_t dk = d_model_ / heads_;
  const T inv = T{1} / std::sqrt(static_cast<T>(dk));
  Var<T> q = q_(tape, query);
  Var<T> k = k_(tape, keys);
  Var<T> v = v_(tape, keys);
  std::vector<Var<T>> outs;
  outs.reserve(heads_);
  for (std::size_t h = 0; h < heads_; ++h) {
    Var<T> qh = numcore::slice_cols(q, h * dk, dk);
    Var<T> kh = numcore::slice_cols(k, h * dk, dk);
    Var<T> vh = numcore::slice_cols(v, h * dk, dk);
    Var<T> scores = numcore::scale(numcore::matmul_nt(qh, kh), inv);
    if (mask) scores = numcore::add_constant(scores, *mask);
    outs.push_back(numcore::matmul(numcore::softmax_rows(scores), vh));
  }
  Var<T> joined = heads_ == 1 ? outs[0] : numcore::concat_cols(outs);
  return o_(tape, joined);
}

template <class T>
FeedForward<T>::FeedForward(ParamStore<T>& store, const std::string& name, std::size_t d_model,
                            std::size_t hidden, std::uint64_t seed)
    : up_(store, name + ".up", d_model, hidden, seed),
      down_(store, name + ".down", hidden, d_model, seed) {}

template <class T>
Var<T> FeedForward<T>::operator()(Tape<T>& tape, Var<T> x) const {
  return down_(tape, numcore::gelu(up_(tape, x)));
}

template <class T>
EncoderLayer<T>::EncoderLayer(ParamStore<T>& store, const std::string& name, std::size_t d_model,
                              std::size_t heads, std::size_t ffn_hidden, double dropout,
                              std::uint64_t seed)
    : attn_(store, name + ".attn", d_model, heads, seed),
      norm1_(store, name + ".norm1", d_model),
      norm2_(store, name + ".norm2", d_model),
      ffn_(store, name + ".ffn", d_model, ffn_hidden, seed),
      dropout_(dropout) {}

template <class T>
Var<T> EncoderLayer<T>::operator()(Tape<T>& tape, Var<T> x) const {
  Var<T> a = numcore::dropout(attn_(tape, x, x), dropout_);
  x = norm1_(tape, numcore::add(x, a));
  Var<T> f = numcore::dropout(ffn_(tape, x), dropout_);
  return norm2_(tape, numcore::add(x, f));
}

template <class T>
DecoderLayer<T>::DecoderLayer(ParamStore<T>& store, const std::string& name, std::size_t d_model,
                              std::size_t heads, std::size_t ffn_hidden, double dropout,
                              std::uint64_t seed)
    : self_(store, name + ".self_attn", d_model, heads, seed),
      cross_(store, name + ".cross_attn", d_model, heads, seed),
      norm1_(store, name + ".norm1", d_model),
      norm2_(store, name + ".norm2", d_model),
      norm3_(store, name + ".norm3", d_model),
      ffn_(store, name + ".ffn", d_model, ffn_hidden, seed),
      dropout_(dropout) {}

template <class T>
Var<T> DecoderLayer<T>::operator()(Tape<T>& tape, Var<T> x, Var<T> memory) const {
  const Tensor<T> mask = causal_mask<T>(x.rows());
  Var<T> s = numcore::dropout(self_(tape, x, x, &mask), dropout_);
  x = norm1_(tape, numcore::add(x, s));
  Var<T> c = numcore::dropout(cross_(tape, x, memory), dropout_);
  x = norm2_(tape, numcore::add(x, c));
  Var<T> f = numcore::dropout(ffn_(tape, x), dropout_);
  return norm3_(tape, numcore::add(x, f));
}

template <class T>
GruDirection<T>::GruDirection(ParamStore<T>& store, const std::string& name, std::size_t input,
                              std::size_t hidden, std::uint64_t seed) {
  auto rx = make_rng(seed, name + ".w_x");
  auto rh = make_rng(seed, name + ".w_h");
  w_x = &store.add(name + ".w_x", fan_in_uniform<T>(input, 3 * hidden, input, rx));
  w_h = &store.add(name + ".w_h", fan_in_uniform<T>(hidden, 3 * hidden, hidden, rh));
  b_x = &store.add(name + ".b_x", Tensor<T>({1, 3 * hidden}));
  b_h = &store.add(name + ".b_h", Tensor<T>({1, 3 * hidden}));
}

template <class T>
Var<T> GruDirection<T>::last_state(Tape<T>& tape, Var<T> x, bool reverse) const {
  return numcore::gru_last_state(x, tape.param(*w_x), tape.param(*w_h), tape.param(*b_x),
                                 tape.param(*b_h), reverse);
}

template <class T>
Tensor<T> causal_mask(std::size_t rows) {
  Tensor<T> m({rows, rows});
  for (std::size_t r = 0; r < rows; ++r)
    for (std::size_t c = r + 1; c < rows; ++c) m.at(r, c) = T(-1e9);
  return m;
}

template class Linear<float>;
template class Linear<double>;
template class LayerNorm<float>;
template class LayerNorm<double>;
template class MultiHeadAttention<float>;
template class MultiHeadAttention<double>;
template class FeedForward<float>;
template class FeedForward<double>;
template class EncoderLayer<float>;
template class EncoderLayer<double>;
template class DecoderLayer<float>;
template class DecoderLayer<double>;
template class GruDirection<float>;
template class GruDirection<double>;
template Tensor<float> causal_mask<float>(std::size_t);
template Tensor<double> causal_mask<double>(std::size_t);

}  // namespace eeg2text::nn
