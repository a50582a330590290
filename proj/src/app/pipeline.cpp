#include "eeg2text/app/pipeline.hpp"

#include <cstdio>
#include <exception>
#include <sstream>

#include "eeg2text/langmod/decode.hpp"
#include "eeg2text/langmod/tokenizer.hpp"
#include "eeg2text/numcore/checkpoint.hpp"
#include "eeg2text/numcore/rng.hpp"
#include "json.hpp"

namespace eeg2text::app {

namespace nc = numcore;

namespace {

constexpr std::string_view kBrainPrefix = "brain/";
constexpr std::string_view kSeqPrefix = "seq2seq/";

std::string join(const std::vector<std::string>& items) {
  std::string out;
  for (const auto& s : items) out += (out.empty() ? "" : ",") + s;
  return out;
}

std::vector<std::string> split_list(const std::string& s) {
  std::vector<std::string> out;
  std::stringstream in(s);
  std::string item;
  while (std::getline(in, item, ',')) {
    if (!item.empty()) out.push_back(item);
  }
  return out;
}

const std::string& meta_value(const nc::Checkpoint& ckpt, const std::string& key) {
  auto it = ckpt.meta.find(key);
  if (it == ckpt.meta.end()) throw nc::CheckpointError("checkpoint metadata lacks " + key);
  return it->second;
}

nc::Checkpoint with_prefix(const nc::Checkpoint& src, std::string_view prefix) {
  nc::Checkpoint out;
  out.seed = src.seed;
  for (auto e : src.entries) {
    e.name = std::string(prefix) + e.name;
    out.entries.push_back(std::move(e));
  }
  return out;
}

nc::Checkpoint strip_prefix(const nc::Checkpoint& src, std::string_view prefix) {
  nc::Checkpoint out;
  out.seed = src.seed;
  out.meta = src.meta;
  for (const auto& e : src.entries) {
    if (std::string_view(e.name).substr(0, prefix.size()) == prefix) {
      auto copy = e;
      copy.name = e.name.substr(prefix.size());
      out.entries.push_back(std::move(copy));
    }
  }
  return out;
}

std::unique_ptr<brainmod::BrainModel<float>> brain_from(const nc::Checkpoint& ckpt) {
  auto cfg = brainmod::BrainConfig::from_meta(ckpt.meta);
  auto subjects = split_list(meta_value(ckpt, "brain.subjects"));
  auto brain = std::make_unique<brainmod::BrainModel<float>>(cfg, subjects, ckpt.seed);
  nc::restore(brain->params(), ckpt);
  return brain;
}

}  // namespace

std::string response_json(const DecodeResponse& r) {
  nlohmann::ordered_json j;
  j["version"] = kVersion;
  j["subject_id"] = r.subject_id;
  j["reference"] = r.reference;
  j["raw_text"] = r.raw_text;
  j["refined_text"] = r.refined_text;
  j["refine_source"] = std::string(refine::refine_source_name(r.refine_source));
  j["logprob"] = r.logprob;
  return j.dump();
}

void save_stage1(const std::filesystem::path& path, const brainmod::BrainModel<float>& brain) {
  auto meta = brain.config().to_meta();
  meta["brain.subjects"] = join(brain.subjects());
  nc::save_checkpoint(path, nc::snapshot(brain.params(), brain.seed(), meta));
}

std::unique_ptr<brainmod::BrainModel<float>> load_stage1(const std::filesystem::path& path) {
  if (!std::filesystem::exists(path)) throw MissingPrerequisiteError(path, "stage-1 checkpoint");
  return brain_from(nc::load_checkpoint(path));
}

void save_stage2(const std::filesystem::path& path, const brainmod::BrainModel<float>& brain,
                 const langmod::Seq2Seq<float>& seq2seq) {
  nc::Checkpoint ckpt = with_prefix(nc::snapshot(brain.params(), brain.seed()), kBrainPrefix);
  for (auto& e : with_prefix(nc::snapshot(seq2seq.params(), 0), kSeqPrefix).entries) {
    ckpt.entries.push_back(std::move(e));
  }
  ckpt.meta = brain.config().to_meta();
  ckpt.meta["brain.subjects"] = join(brain.subjects());
  for (auto& [k, v] : seq2seq.config().to_meta()) ckpt.meta[k] = v;
  ckpt.meta["vocab.size"] = std::to_string(seq2seq.vocab_size());
  nc::save_checkpoint(path, ckpt);
}

Pipeline::Pipeline(RunConfig config, langmod::Vocabulary vocab,
                   std::unique_ptr<brainmod::BrainModel<float>> brain,
                   std::unique_ptr<langmod::Seq2Seq<float>> seq2seq)
    : config_(std::move(config)), vocab_(std::move(vocab)), brain_(std::move(brain)), seq2seq_(std::move(seq2seq)) {
  if (seq2seq_->vocab_size() != vocab_.size()) {
    throw ConfigError("sequence model has " + std::to_string(seq2seq_->vocab_size()) +
                      " output classes but the vocabulary has " + std::to_string(vocab_.size()) + " tokens");
  }
}

std::unique_ptr<Pipeline> Pipeline::load(const RunConfig& config) {
  const auto path = config.stage2_checkpoint();
  if (!std::filesystem::exists(path)) throw MissingPrerequisiteError(path, "stage-2 checkpoint");
  if (!std::filesystem::exists(config.vocab)) throw MissingPrerequisiteError(config.vocab, "vocabulary");
  auto vocab = langmod::Vocabulary::load(config.vocab);
  const auto ckpt = nc::load_checkpoint(path);
  auto brain = brain_from(strip_prefix(ckpt, kBrainPrefix));
  const auto seq_cfg = langmod::Seq2SeqConfig::from_meta(ckpt.meta);
  const auto vocab_size = static_cast<std::size_t>(std::stoull(meta_value(ckpt, "vocab.size")));
  auto seq = std::make_unique<langmod::Seq2Seq<float>>(seq_cfg, vocab_size, 0);
  nc::restore(seq->params(), strip_prefix(ckpt, kSeqPrefix));
  return std::make_unique<Pipeline>(config, std::move(vocab), std::move(brain), std::move(seq));
}

std::uint64_t Pipeline::checksum() const {
  return nc::splitmix64(brain_->params().checksum() ^ nc::splitmix64(seq2seq_->params().checksum()));
}

std::vector<int> Pipeline::decode_tokens(const nc::Tensor<float>& latent, double* logprob) const {
  const auto memory = seq2seq_->memory(latent);
  const langmod::NextTokenScorer scorer = [&](std::span<const int> prefix) {
    return seq2seq_->next_log_probs(memory, prefix);
  };
  const auto& dc = config_.decode;
  const auto h = dc.width == 1 ? langmod::greedy_decode(scorer, dc.max_len) : langmod::beam_decode(scorer, dc);
  if (logprob) *logprob = h.logprob;
  std::vector<int> out(h.tokens.begin() + 1, h.tokens.end());
  if (!out.empty() && out.back() == langmod::kEos) out.pop_back();
  return out;
}

DecodeResponse Pipeline::decode(const std::string& subject_id, const dataio::SentenceRecord& sentence) const {
  if (!brain_->has_subject(subject_id)) {
    throw brainmod::UnknownSubjectError("unknown subject '" + subject_id + "'");
  }
  auto violations = dataio::validate_sentence(sentence, brain_->config().channels, subject_id, 0);
  if (!violations.empty()) throw InvalidRecordError(std::move(violations));

  DecodeResponse r;
  r.subject_id = subject_id;
  r.reference = sentence.content;
  const auto input = brainmod::gather_inputs(sentence, brain_->config());
  if (input.words.size() > brain_->config().max_words) {
    throw DecodeError("sentence has " + std::to_string(input.words.size()) +
                      " fixated words; the model accepts at most " +
                      std::to_string(brain_->config().max_words));
  }
  if (!input.words.empty()) {
    const auto latent = brain_->infer(input.words, subject_id);
    const auto tokens = decode_tokens(latent, &r.logprob);
    r.raw_text = langmod::detokenize(vocab_.decode(tokens));
  }
  auto refined = refine::refine(r.raw_text, config_.refine);
  r.refined_text = std::move(refined.text);
  r.refine_source = refined.source;
  return r;
}

std::vector<DecodeResponse> Pipeline::decode_manifest(const dataio::DatasetManifest& manifest,
                                                      const std::optional<std::string>& subject) const {
  if (subject && !manifest.find_subject(*subject)) {
    throw brainmod::UnknownSubjectError("subject '" + *subject + "' is not in the dataset");
  }
  auto violations = dataio::validate_dataset(manifest);
  if (manifest.channels != brain_->config().channels) {
    violations.push_back({"", std::nullopt, std::nullopt, dataio::rule::kChannelCount,
                          "dataset has " + std::to_string(manifest.channels) + " channels, model expects " +
                              std::to_string(brain_->config().channels)});
  }
  if (!violations.empty()) throw InvalidRecordError(std::move(violations));

  struct Job {
    const std::string* subject;
    const dataio::SentenceRecord* sentence;
  };
  std::vector<Job> jobs;
  for (const auto& s : manifest.subjects) {
    if (subject && s.subject_id != *subject) continue;
    if (!brain_->has_subject(s.subject_id)) {
      throw brainmod::UnknownSubjectError("unknown subject '" + s.subject_id + "'");
    }
    for (const auto& sent : s.sentences) jobs.push_back({&s.subject_id, &sent});
  }
  std::vector<DecodeResponse> out(jobs.size());
  std::vector<std::exception_ptr> errors(jobs.size());
  const auto n = static_cast<std::ptrdiff_t>(jobs.size());
#pragma omp parallel for schedule(dynamic)
  for (std::ptrdiff_t i = 0; i < n; ++i) {
    const auto k = static_cast<std::size_t>(i);
    try {
      out[k] = decode(*jobs[k].subject, *jobs[k].sentence);
    } catch (...) {
      errors[k] = std::current_exception();
    }
  }
  for (const auto& e : errors) {
    if (e) std::rethrow_exception(e);
  }
  return out;
}

}  // namespace eeg2text::app
