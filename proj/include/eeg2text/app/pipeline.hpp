#pragma once

#include <filesystem>
#include <memory>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include "eeg2text/app/config.hpp"
#include "eeg2text/brainmod/model.hpp"
#include "eeg2text/dataio/dataset.hpp"
#include "eeg2text/dataio/validate.hpp"
#include "eeg2text/langmod/seq2seq.hpp"
#include "eeg2text/langmod/vocabulary.hpp"
#include "eeg2text/refine/external.hpp"

namespace eeg2text::app {

// A file the command needs does not exist yet (an earlier step was skipped).
class MissingPrerequisiteError : public std::runtime_error {
 public:
  explicit MissingPrerequisiteError(const std::filesystem::path& path, const std::string& what)
      : std::runtime_error(what + " not found: " + path.string()), path_(path) {}
  const std::filesystem::path& path() const noexcept { return path_; }

 private:
  std::filesystem::path path_;
};

// A record failed validation against the loaded model.
class InvalidRecordError : public std::runtime_error {
 public:
  explicit InvalidRecordError(std::vector<dataio::Violation> violations)
      : std::runtime_error(dataio::format_violations(violations)), violations_(std::move(violations)) {}
  const std::vector<dataio::Violation>& violations() const noexcept { return violations_; }

 private:
  std::vector<dataio::Violation> violations_;
};

// A valid record the model cannot decode (too many words).
class DecodeError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

struct DecodeResponse {
  std::string subject_id;
  std::string reference;  // the record's content
  std::string raw_text;
  std::string refined_text;
  refine::RefineSource refine_source = refine::RefineSource::kRuleBased;
  double logprob = 0.0;
};

// Canonical single-line JSON shared by the CLI and the service:
// {version, subject_id, reference, raw_text, refined_text, refine_source, logprob}.
std::string response_json(const DecodeResponse& response);

// Stage-1 checkpoint: brain parameters with "brain.*" metadata and the
// subject list.
void save_stage1(const std::filesystem::path& path, const brainmod::BrainModel<float>& brain);
std::unique_ptr<brainmod::BrainModel<float>> load_stage1(const std::filesystem::path& path);

// Stage-2 checkpoint: brain and sequence-model parameters under "brain/" and
// "seq2seq/" prefixes, with both configurations and the vocabulary size.
void save_stage2(const std::filesystem::path& path, const brainmod::BrainModel<float>& brain,
                 const langmod::Seq2Seq<float>& seq2seq);

// Loaded models plus decoding and refinement settings. Decoding is const
// and safe to call concurrently.
class Pipeline {
 public:
  Pipeline(RunConfig config, langmod::Vocabulary vocab,
           std::unique_ptr<brainmod::BrainModel<float>> brain,
           std::unique_ptr<langmod::Seq2Seq<float>> seq2seq);

  // Reads the vocabulary and the stage-2 checkpoint named by `config`.
  static std::unique_ptr<Pipeline> load(const RunConfig& config);

  const RunConfig& config() const noexcept { return config_; }
  const langmod::Vocabulary& vocab() const noexcept { return vocab_; }
  const brainmod::BrainModel<float>& brain() const noexcept { return *brain_; }
  const langmod::Seq2Seq<float>& seq2seq() const noexcept { return *seq2seq_; }
  bool has_subject(std::string_view id) const noexcept { return brain_->has_subject(id); }

  // Checksum over both models' parameters.
  std::uint64_t checksum() const;

  // Throws brainmod::UnknownSubjectError, InvalidRecordError, DecodeError,
  // or refine::RefineError when the external refiner fails without fallback.
  DecodeResponse decode(const std::string& subject_id, const dataio::SentenceRecord& sentence) const;

  // Every sentence of every subject (or of `subject` only), in manifest
  // order. Validates the whole manifest first.
  std::vector<DecodeResponse> decode_manifest(const dataio::DatasetManifest& manifest,
                                              const std::optional<std::string>& subject = {}) const;

  // Tokens of the best hypothesis for an already gathered sentence, with
  // BOS and any EOS removed.
  std::vector<int> decode_tokens(const numcore::Tensor<float>& latent, double* logprob = nullptr) const;

 private:
  RunConfig config_;
  langmod::Vocabulary vocab_;
  std::unique_ptr<brainmod::BrainModel<float>> brain_;
  std::unique_ptr<langmod::Seq2Seq<float>> seq2seq_;
};

}  // namespace eeg2text::app
