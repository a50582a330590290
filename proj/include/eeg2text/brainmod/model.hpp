#pragma once

#include <cstdint>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

#include "eeg2text/brainmod/config.hpp"
#include "eeg2text/dataio/dataset.hpp"
#include "eeg2text/numcore/nn.hpp"
#include "eeg2text/numcore/parameter.hpp"
#include "eeg2text/numcore/tape.hpp"

namespace eeg2text::brainmod {

using numcore::ParamStore;
using numcore::Tape;
using numcore::Tensor;
using numcore::Var;

class UnknownSubjectError : public std::out_of_range {
 public:
  using std::out_of_range::out_of_range;
};

// More words than the position table holds.
class CapacityError : public std::length_error {
 public:
  using std::length_error::length_error;
};

// Model-ready form of one sentence: the fixated words in order, each as a
// time-major (steps x step_width) matrix, plus their texts.
struct SentenceInput {
  std::vector<Tensor<float>> words;
  std::vector<std::string> texts;
};

// Drops unfixated words and converts the rest. Throws std::invalid_argument
// for a fixated word whose signal does not match `config`.
SentenceInput gather_inputs(const dataio::SentenceRecord& sentence, const BrainConfig& config);

// The brain encoder: per-word bidirectional GRU, projection, pointwise
// convolution, subject-specific row scaling, transformer encoder with
// learned positions, residual MLP. Produces one D_e row per word.
template <class T>
class BrainModel {
 public:
  BrainModel(const BrainConfig& config, std::vector<std::string> subjects, std::uint64_t seed);
  BrainModel(const BrainModel&) = delete;
  BrainModel& operator=(const BrainModel&) = delete;

  const BrainConfig& config() const noexcept { return config_; }
  const std::vector<std::string>& subjects() const noexcept { return subjects_; }
  bool has_subject(std::string_view id) const noexcept;
  std::uint64_t seed() const noexcept { return seed_; }

  ParamStore<T>& params() noexcept { return store_; }
  const ParamStore<T>& params() const noexcept { return store_; }

  // r_s; throws UnknownSubjectError.
  numcore::Parameter<T>& subject_vector(std::string_view id);
  void set_subject_layer_trainable(bool trainable);

  // Stages, usable on their own for testing.
  Var<T> encode_word(Tape<T>& tape, const Tensor<float>& steps) const;          // 1 x 2H
  Var<T> encode_words(Tape<T>& tape, const std::vector<Tensor<float>>& words) const;  // M x 2H
  Var<T> project_and_conv(Tape<T>& tape, Var<T> features) const;                // M x D
  Var<T> subject_layer(Tape<T>& tape, Var<T> features, std::string_view id) const;
  Var<T> transformer(Tape<T>& tape, Var<T> features) const;                     // M x d_h
  Var<T> residual_mlp(Tape<T>& tape, Var<T> hidden) const;                      // M x D_e

  // Full composition, M x D_e.
  Var<T> forward(Tape<T>& tape, const std::vector<Tensor<float>>& words, std::string_view id) const;

  // Inference on a private tape (dropout off); safe for concurrent callers.
  Tensor<T> infer(const std::vector<Tensor<float>>& words, std::string_view id) const;

 private:
  const numcore::Parameter<T>& subject_param(std::string_view id) const;

  BrainConfig config_;
  std::vector<std::string> subjects_;
  std::uint64_t seed_;
  ParamStore<T> store_;
  nn::GruDirection<T> gru_fwd_, gru_bwd_;
  nn::Linear<T> proj_, conv_, w_in_, mlp_fc1_, mlp_fc2_;
  numcore::Parameter<T>* positions_ = nullptr;
  numcore::Parameter<T>* shortcut_ = nullptr;
  std::vector<nn::EncoderLayer<T>> layers_;
};

extern template class BrainModel<float>;
extern template class BrainModel<double>;

}  // namespace eeg2text::brainmod
