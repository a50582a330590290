#pragma once

#include <cstdint>
#include <map>
#include <span>
#include <string>
#include <vector>

#include "eeg2text/numcore/nn.hpp"
#include "eeg2text/numcore/parameter.hpp"
#include "eeg2text/numcore/tape.hpp"

namespace eeg2text::langmod {

using numcore::ParamStore;
using numcore::Tape;
using numcore::Tensor;
using numcore::Var;

struct Seq2SeqConfig {
  std::size_t input_dim = 64;    // width of the brain latent rows (D_e)
  std::size_t d_model = 128;
  std::size_t heads = 4;
  std::size_t enc_layers = 1;
  std::size_t dec_layers = 1;
  std::size_t ffn_mult = 4;
  std::size_t head_hidden = 128;
  std::size_t max_source = 64;   // latent rows accepted
  std::size_t max_target = 64;   // generated tokens, EOS included
  double dropout = 0.1;
  double word_dropout = 0.3;  // teacher-forced inputs replaced by <unk> while training

  void validate() const;
  std::map<std::string, std::string> to_meta() const;  // keys prefixed "seq2seq."
  static Seq2SeqConfig from_meta(const std::map<std::string, std::string>& meta);
};

// Encoder-decoder over brain latents. The encoder reads
// [bos_slot; input(Z); eos_slot] plus learned positions; the decoder has
// its own token embeddings, causal self-attention and cross-attention; an
// MLP head maps decoder states to vocabulary logits.
template <class T>
class Seq2Seq {
 public:
  Seq2Seq(const Seq2SeqConfig& config, std::size_t vocab_size, std::uint64_t seed);
  Seq2Seq(const Seq2Seq&) = delete;
  Seq2Seq& operator=(const Seq2Seq&) = delete;

  const Seq2SeqConfig& config() const noexcept { return config_; }
  std::size_t vocab_size() const noexcept { return vocab_size_; }
  ParamStore<T>& params() noexcept { return store_; }
  const ParamStore<T>& params() const noexcept { return store_; }

  // (M + 2) x d_model memory for M x input_dim latents.
  Var<T> encode(Tape<T>& tape, Var<T> z) const;
  // L x |V| logits for a decoder input prefix of L tokens (BOS first).
  Var<T> decode(Tape<T>& tape, Var<T> memory, std::span<const int> prefix) const;
  // Output head alone: rows x d_model -> rows x |V|.
  Var<T> head(Tape<T>& tape, Var<T> hidden) const;
  // Decoder stack alone (embeddings through the last layer), L x d_model.
  Var<T> decoder_states(Tape<T>& tape, Var<T> memory, std::span<const int> prefix) const;

  // Teacher-forced summed cross entropy of `target` (tokens ending in EOS,
  // no BOS) given z. Returns a 1x1 sum over positions.
  Var<T> loss(Tape<T>& tape, Var<T> z, std::span<const int> target) const;

  // Inference helpers on private tapes (dropout off).
  Tensor<T> memory(const Tensor<float>& z) const;
  // log p(. | memory, prefix) for the next token, in double precision.
  std::vector<double> next_log_probs(const Tensor<T>& memory, std::span<const int> prefix) const;
  // Per-position log p(target[n] | z, target[<n]) from one teacher-forced pass.
  std::vector<double> step_log_probs(const Tensor<float>& z, std::span<const int> target) const;
  // Sum of step_log_probs.
  double sequence_logprob(const Tensor<float>& z, std::span<const int> target) const;

 private:
  void check_tokens(std::span<const int> tokens) const;

  Seq2SeqConfig config_;
  std::size_t vocab_size_;
  ParamStore<T> store_;
  nn::Linear<T> input_;
  numcore::Parameter<T>* bos_slot_ = nullptr;
  numcore::Parameter<T>* eos_slot_ = nullptr;
  numcore::Parameter<T>* enc_pos_ = nullptr;
  numcore::Parameter<T>* tok_embed_ = nullptr;
  numcore::Parameter<T>* dec_pos_ = nullptr;
  std::vector<nn::EncoderLayer<T>> encoder_;
  std::vector<nn::DecoderLayer<T>> decoder_;
  nn::Linear<T> head_fc1_, head_fc2_;
};

extern template class Seq2Seq<float>;
extern template class Seq2Seq<double>;

}  // namespace eeg2text::langmod
