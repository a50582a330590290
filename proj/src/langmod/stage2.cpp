#include "eeg2text/langmod/stage2.hpp"

#include <algorithm>
#include <numeric>
#include <optional>

#include "eeg2text/langmod/tokenizer.hpp"
#include "eeg2text/numcore/ops.hpp"
#include "eeg2text/numcore/optim.hpp"
#include "eeg2text/numcore/rng.hpp"

namespace eeg2text::langmod {

namespace nc = numcore;
using brainmod::EpochLoss;
using brainmod::TrainingError;

std::vector<Stage2Example> prepare_stage2(const dataio::DatasetManifest& manifest,
                                          const brainmod::BrainModel<float>& brain,
                                          const Seq2Seq<float>& seq2seq, const Vocabulary& vocab,
                                          Stage2Stats* stats) {
  std::vector<Stage2Example> out;
  Stage2Stats local;
  const auto& sc = seq2seq.config();
  for (const auto& subj : manifest.subjects) {
    for (const auto& sent : subj.sentences) {
      auto input = brainmod::gather_inputs(sent, brain.config());
      auto tokens = tokenize(sent.content);
      if (input.words.empty() || tokens.empty() || input.words.size() > sc.max_source ||
          input.words.size() > brain.config().max_words || tokens.size() + 1 > sc.max_target ||
          !brain.has_subject(subj.subject_id)) {
        ++local.skipped;
        continue;
      }
      Stage2Example e;
      e.subject_id = subj.subject_id;
      e.content = sent.content;
      e.target = vocab.encode(tokens);
      e.target.push_back(kEos);
      e.input = std::move(input);
      out.push_back(std::move(e));
      ++local.used;
    }
  }
  refresh_latents(brain, out);
  if (stats) *stats = local;
  return out;
}

void refresh_latents(const brainmod::BrainModel<float>& brain, std::vector<Stage2Example>& data) {
  const auto n = static_cast<std::ptrdiff_t>(data.size());
#pragma omp parallel for schedule(dynamic)
  for (std::ptrdiff_t i = 0; i < n; ++i) {
    auto& e = data[static_cast<std::size_t>(i)];
    e.latent = brain.infer(e.input.words, e.subject_id);
  }
}

double evaluate_stage2(const Seq2Seq<float>& seq2seq, const std::vector<Stage2Example>& data) {
  if (data.empty()) return 0.0;
  std::vector<double> sums(data.size());
  const auto n = static_cast<std::ptrdiff_t>(data.size());
#pragma omp parallel for schedule(dynamic)
  for (std::ptrdiff_t i = 0; i < n; ++i) {
    const auto& e = data[static_cast<std::size_t>(i)];
    sums[static_cast<std::size_t>(i)] = -seq2seq.sequence_logprob(e.latent, e.target);
  }
  std::size_t tokens = 0;
  for (const auto& e : data) tokens += e.target.size();
  return std::accumulate(sums.begin(), sums.end(), 0.0) / static_cast<double>(tokens);
}

Stage2Result train_stage2(brainmod::BrainModel<float>& brain, Seq2Seq<float>& seq2seq,
                          const dataio::DatasetManifest& train, const dataio::DatasetManifest& dev,
                          const Vocabulary& vocab, const EmbeddingTable& table,
                          const Stage2Config& cfg,
                          const std::function<void(const EpochLoss&)>& on_epoch) {
  Stage2Result result;
  result.table_checksum_before = table.checksum();
  result.brain_checksum_before = brain.params().checksum();
  if (seq2seq.vocab_size() != vocab.size()) {
    throw TrainingError("stage 2: sequence model has " + std::to_string(seq2seq.vocab_size()) +
                        " output classes but the vocabulary has " + std::to_string(vocab.size()));
  }
  if (seq2seq.config().input_dim != brain.config().embed_dim) {
    throw TrainingError("stage 2: sequence model expects latents of width " +
                        std::to_string(seq2seq.config().input_dim) + ", brain produces " +
                        std::to_string(brain.config().embed_dim));
  }
  if (cfg.batch_size == 0) throw TrainingError("stage 2: batch_size must be >= 1");
  auto train_set = prepare_stage2(train, brain, seq2seq, vocab, &result.train_stats);
  auto dev_set = prepare_stage2(dev, brain, seq2seq, vocab, &result.dev_stats);
  if (train_set.empty()) {
    throw TrainingError("stage 2: no usable training sentences (" +
                        std::to_string(result.train_stats.skipped) + " skipped)");
  }

  auto& seq_store = seq2seq.params();
  auto& brain_store = brain.params();
  nc::Adam<float> seq_adam(seq_store, {.lr = cfg.lr});
  std::optional<nc::Adam<float>> brain_adam;
  if (cfg.finetune_brain) brain_adam.emplace(brain_store, nc::AdamConfig{.lr = cfg.brain_lr});

  auto report = [&](const EpochLoss& e) {
    result.history.push_back(e);
    if (on_epoch) on_epoch(e);
  };
  report({2, 0, evaluate_stage2(seq2seq, train_set), evaluate_stage2(seq2seq, dev_set)});

  std::vector<std::size_t> order(train_set.size());
  std::iota(order.begin(), order.end(), 0);
  std::vector<nc::GradBuffer<float>> seq_buffers, brain_buffers;
  std::vector<double> losses;

  for (std::size_t epoch = 1; epoch <= cfg.epochs; ++epoch) {
    nc::Rng shuffle_rng(nc::derive_seed(cfg.seed, 0x5eed0002ull, epoch));
    std::shuffle(order.begin(), order.end(), shuffle_rng);
    double epoch_loss = 0.0;
    std::size_t epoch_tokens = 0;
    for (std::size_t start = 0; start < order.size(); start += cfg.batch_size) {
      const std::size_t count = std::min(cfg.batch_size, order.size() - start);
      if (seq_buffers.size() < count) seq_buffers.resize(count);
      if (cfg.finetune_brain && brain_buffers.size() < count) brain_buffers.resize(count);
      losses.assign(count, 0.0);
      std::size_t batch_tokens = 0;
      for (std::size_t b = 0; b < count; ++b) batch_tokens += train_set[order[start + b]].target.size();

      const auto n = static_cast<std::ptrdiff_t>(count);
#pragma omp parallel for schedule(dynamic)
      for (std::ptrdiff_t b = 0; b < n; ++b) {
        const auto bi = static_cast<std::size_t>(b);
        const std::size_t idx = order[start + bi];
        const auto& e = train_set[idx];
        auto& sbuf = seq_buffers[bi];
        if (sbuf.empty()) sbuf = seq_store.make_grad_buffer();
        for (auto& g : sbuf) g.fill(0.0f);
        nc::Tape<float> tape(true, nc::derive_seed(cfg.seed ^ 0x2ull, epoch, idx));
        if (cfg.finetune_brain) {
          auto& bbuf = brain_buffers[bi];
          if (bbuf.empty()) bbuf = brain_store.make_grad_buffer();
          for (auto& g : bbuf) g.fill(0.0f);
          auto z = brain.forward(tape, e.input.words, e.subject_id);
          auto loss = seq2seq.loss(tape, z, e.target);
          losses[bi] = loss.value().item();
          tape.backward(loss, [&](nc::Parameter<float>& p) -> Tensor<float>& {
            const bool in_brain = p.slot < brain_store.size() && &brain_store[p.slot] == &p;
            return in_brain ? bbuf[p.slot] : sbuf[p.slot];
          });
        } else {
          auto loss = seq2seq.loss(tape, tape.constant(e.latent), e.target);
          losses[bi] = loss.value().item();
          tape.backward(loss, sbuf);
        }
      }
      const float inv = 1.0f / static_cast<float>(batch_tokens);
      seq_store.zero_grad();
      for (std::size_t b = 0; b < count; ++b) seq_store.accumulate(seq_buffers[b], inv);
      nc::clip_grad_norm(seq_store, cfg.clip_norm);
      seq_adam.step();
      if (brain_adam) {
        brain_store.zero_grad();
        for (std::size_t b = 0; b < count; ++b) brain_store.accumulate(brain_buffers[b], inv);
        nc::clip_grad_norm(brain_store, cfg.clip_norm);
        brain_adam->step();
      }
      for (double l : losses) epoch_loss += l;
      epoch_tokens += batch_tokens;
    }
    if (cfg.finetune_brain) {
      refresh_latents(brain, train_set);
      refresh_latents(brain, dev_set);
    }
    report({2, epoch, epoch_loss / static_cast<double>(epoch_tokens),
            evaluate_stage2(seq2seq, dev_set)});
  }
  result.table_checksum_after = table.checksum();
  result.brain_checksum_after = brain_store.checksum();
  return result;
}

}  // namespace eeg2text::langmod
