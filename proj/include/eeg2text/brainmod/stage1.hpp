#pragma once

#include <cstdint>
#include <functional>
#include <string>
#include <vector>

#include "eeg2text/brainmod/model.hpp"
#include "eeg2text/dataio/dataset.hpp"
#include "eeg2text/langmod/embedding_table.hpp"
#include "eeg2text/langmod/vocabulary.hpp"

namespace eeg2text::brainmod {

// One aligned sentence: model inputs and the frozen-table regression target.
struct AlignedSentence {
  std::string subject_id;
  std::string content;
  SentenceInput input;
  std::vector<int> token_ids;
  Tensor<float> target;  // M x D_e
};

struct AlignmentStats {
  std::size_t used = 0;
  std::size_t skipped = 0;  // tokenized length differs from the fixated word count
};

// Pairs every sentence's fixated words with tokenize(content). Sentences whose
// counts disagree are skipped and counted.
std::vector<AlignedSentence> align_dataset(const dataio::DatasetManifest& manifest,
                                           const BrainConfig& config,
                                           const langmod::Vocabulary& vocab,
                                           const langmod::EmbeddingTable& table,
                                           AlignmentStats* stats = nullptr);

struct EpochLoss {
  int stage = 1;
  std::size_t epoch = 0;  // 0 = before any update
  double train_loss = 0.0;
  double dev_loss = 0.0;
};

struct Stage1Config {
  std::size_t epochs = 50;
  std::size_t batch_size = 8;
  double lr = 1e-3;
  double clip_norm = 1.0;  // <= 0 disables clipping
  bool train_subject_layer = true;
  std::uint64_t seed = 1;
  // Stop once dev loss <= stop_ratio * epoch-0 dev loss; 0 never stops early.
  double stop_ratio = 0.0;
};

struct Stage1Result {
  std::vector<EpochLoss> history;
  AlignmentStats train_stats, dev_stats;
  std::uint64_t table_checksum_before = 0;
  std::uint64_t table_checksum_after = 0;
};

class TrainingError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Mean over sentences of mse(Z, E) with dropout off.
double evaluate_stage1(const BrainModel<float>& model, const std::vector<AlignedSentence>& data);

// Minimizes the mean sentence MSE between the encoder output and the frozen
// token embeddings with Adam over shuffled minibatches. Per-sentence
// gradients are computed in parallel and reduced in a fixed order, so results
// do not depend on the thread count. Throws TrainingError if no training
// sentence survives alignment.
Stage1Result train_stage1(BrainModel<float>& model, const dataio::DatasetManifest& train,
                          const dataio::DatasetManifest& dev, const langmod::Vocabulary& vocab,
                          const langmod::EmbeddingTable& table, const Stage1Config& config,
                          const std::function<void(const EpochLoss&)>& on_epoch = {});

}  // namespace eeg2text::brainmod
