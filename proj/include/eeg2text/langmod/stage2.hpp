#pragma once

#include <cstdint>
#include <functional>
#include <string>
#include <vector>

#include "eeg2text/brainmod/model.hpp"
#include "eeg2text/brainmod/stage1.hpp"
#include "eeg2text/dataio/dataset.hpp"
#include "eeg2text/langmod/embedding_table.hpp"
#include "eeg2text/langmod/seq2seq.hpp"
#include "eeg2text/langmod/vocabulary.hpp"

namespace eeg2text::langmod {

// One sentence prepared for sequence training: brain inputs, the decoder
// target (tokens followed by EOS) and the cached brain latent.
struct Stage2Example {
  std::string subject_id;
  std::string content;
  brainmod::SentenceInput input;
  std::vector<int> target;
  Tensor<float> latent;
};

struct Stage2Stats {
  std::size_t used = 0;
  std::size_t skipped = 0;  // no fixated words, no tokens, or over capacity
};

std::vector<Stage2Example> prepare_stage2(const dataio::DatasetManifest& manifest,
                                          const brainmod::BrainModel<float>& brain,
                                          const Seq2Seq<float>& seq2seq, const Vocabulary& vocab,
                                          Stage2Stats* stats = nullptr);

// Recomputes the cached latents with the current brain parameters.
void refresh_latents(const brainmod::BrainModel<float>& brain, std::vector<Stage2Example>& data);

// Token-mean cross entropy over every target position of `data`.
double evaluate_stage2(const Seq2Seq<float>& seq2seq, const std::vector<Stage2Example>& data);

struct Stage2Config {
  std::size_t epochs = 30;
  std::size_t batch_size = 8;
  double lr = 1e-3;
  double clip_norm = 1.0;  // <= 0 disables clipping
  bool finetune_brain = false;
  double brain_lr = 1e-4;  // used only when finetune_brain is set
  std::uint64_t seed = 1;
};

struct Stage2Result {
  std::vector<brainmod::EpochLoss> history;  // stage = 2
  Stage2Stats train_stats, dev_stats;
  std::uint64_t table_checksum_before = 0;
  std::uint64_t table_checksum_after = 0;
  std::uint64_t brain_checksum_before = 0;
  std::uint64_t brain_checksum_after = 0;
};

// Teacher-forced training of the sequence model on brain latents. The brain
// encoder stays frozen unless finetune_brain is set, in which case both
// models are updated from the same loss. Minibatch loss is the mean over all
// target tokens in the batch. Throws brainmod::TrainingError when no
// training sentence is usable.
Stage2Result train_stage2(brainmod::BrainModel<float>& brain, Seq2Seq<float>& seq2seq,
                          const dataio::DatasetManifest& train, const dataio::DatasetManifest& dev,
                          const Vocabulary& vocab, const EmbeddingTable& table,
                          const Stage2Config& config,
                          const std::function<void(const brainmod::EpochLoss&)>& on_epoch = {});

}  // namespace eeg2text::langmod
