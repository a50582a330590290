#include "eeg2text/brainmod/stage1.hpp"

#include <algorithm>
#include <numeric>
#include <random>

#include "eeg2text/langmod/tokenizer.hpp"
#include "eeg2text/numcore/functional.hpp"
#include "eeg2text/numcore/ops.hpp"
#include "eeg2text/numcore/optim.hpp"
#include "eeg2text/numcore/rng.hpp"

namespace eeg2text::brainmod {

namespace nc = numcore;

std::vector<AlignedSentence> align_dataset(const dataio::DatasetManifest& manifest,
                                           const BrainConfig& config,
                                           const langmod::Vocabulary& vocab,
                                           const langmod::EmbeddingTable& table,
                                           AlignmentStats* stats) {
  std::vector<AlignedSentence> out;
  AlignmentStats local;
  for (const auto& subj : manifest.subjects) {
    for (const auto& sent : subj.sentences) {
      auto input = gather_inputs(sent, config);
      auto tokens = langmod::tokenize(sent.content);
      if (tokens.empty() || tokens.size() != input.words.size()) {
        ++local.skipped;
        continue;
      }
      AlignedSentence a;
      a.subject_id = subj.subject_id;
      a.content = sent.content;
      a.token_ids = vocab.encode(tokens);
      a.target = table.lookup(a.token_ids);
      a.input = std::move(input);
      out.push_back(std::move(a));
      ++local.used;
    }
  }
  if (stats) *stats = local;
  return out;
}

double evaluate_stage1(const BrainModel<float>& model, const std::vector<AlignedSentence>& data) {
  if (data.empty()) return 0.0;
  std::vector<double> losses(data.size());
  const auto n = static_cast<std::ptrdiff_t>(data.size());
#pragma omp parallel for schedule(dynamic)
  for (std::ptrdiff_t i = 0; i < n; ++i) {
    const auto& s = data[static_cast<std::size_t>(i)];
    losses[static_cast<std::size_t>(i)] = nc::mse(model.infer(s.input.words, s.subject_id), s.target);
  }
  return std::accumulate(losses.begin(), losses.end(), 0.0) / static_cast<double>(data.size());
}

Stage1Result train_stage1(BrainModel<float>& model, const dataio::DatasetManifest& train,
                          const dataio::DatasetManifest& dev, const langmod::Vocabulary& vocab,
                          const langmod::EmbeddingTable& table, const Stage1Config& cfg,
                          const std::function<void(const EpochLoss&)>& on_epoch) {
  Stage1Result result;
  result.table_checksum_before = table.checksum();
  const auto train_set = align_dataset(train, model.config(), vocab, table, &result.train_stats);
  const auto dev_set = align_dataset(dev, model.config(), vocab, table, &result.dev_stats);
  if (train_set.empty()) {
    throw TrainingError("stage 1: no usable training sentences (" +
                        std::to_string(result.train_stats.skipped) + " skipped by word alignment)");
  }
  if (cfg.batch_size == 0) throw TrainingError("stage 1: batch_size must be >= 1");

  model.set_subject_layer_trainable(cfg.train_subject_layer);
  auto& store = model.params();
  nc::Adam<float> adam(store, {.lr = cfg.lr});

  auto report = [&](const EpochLoss& e) {
    result.history.push_back(e);
    if (on_epoch) on_epoch(e);
  };
  const double dev0 = evaluate_stage1(model, dev_set);
  report({1, 0, evaluate_stage1(model, train_set), dev0});

  std::vector<std::size_t> order(train_set.size());
  std::iota(order.begin(), order.end(), 0);
  std::vector<nc::GradBuffer<float>> buffers;
  std::vector<double> losses;

  for (std::size_t epoch = 1; epoch <= cfg.epochs; ++epoch) {
    nc::Rng shuffle_rng(nc::derive_seed(cfg.seed, 0x5eed0001ull, epoch));
    std::shuffle(order.begin(), order.end(), shuffle_rng);
    double epoch_loss = 0.0;
    for (std::size_t start = 0; start < order.size(); start += cfg.batch_size) {
      const std::size_t count = std::min(cfg.batch_size, order.size() - start);
      if (buffers.size() < count) buffers.resize(count);
      losses.assign(count, 0.0);
      const auto n = static_cast<std::ptrdiff_t>(count);
#pragma omp parallel for schedule(dynamic)
      for (std::ptrdiff_t b = 0; b < n; ++b) {
        const std::size_t idx = order[start + static_cast<std::size_t>(b)];
        const auto& s = train_set[idx];
        auto& buf = buffers[static_cast<std::size_t>(b)];
        if (buf.empty()) buf = store.make_grad_buffer();
        for (auto& g : buf) g.fill(0.0f);
        nc::Tape<float> tape(true, nc::derive_seed(cfg.seed, epoch, idx));
        auto z = model.forward(tape, s.input.words, s.subject_id);
        auto loss = nc::mse_loss(z, tape.constant(s.target));
        losses[static_cast<std::size_t>(b)] = loss.value().item();
        tape.backward(loss, buf);
      }
      store.zero_grad();
      for (std::size_t b = 0; b < count; ++b) {
        store.accumulate(buffers[b], 1.0f / static_cast<float>(count));
        epoch_loss += losses[b];
      }
      nc::clip_grad_norm(store, cfg.clip_norm);
      adam.step();
    }
    const double dev_loss = evaluate_stage1(model, dev_set);
    report({1, epoch, epoch_loss / static_cast<double>(train_set.size()), dev_loss});
    if (cfg.stop_ratio > 0.0 && dev_loss <= cfg.stop_ratio * dev0) break;
  }
  result.table_checksum_after = table.checksum();
  return result;
}

}  // namespace eeg2text::brainmod
