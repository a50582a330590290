#pragma once

#include <filesystem>
#include <map>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

#include "eeg2text/brainmod/config.hpp"
#include "eeg2text/brainmod/stage1.hpp"
#include "eeg2text/dataio/split.hpp"
#include "eeg2text/dataio/synth.hpp"
#include "eeg2text/langmod/decode.hpp"
#include "eeg2text/langmod/seq2seq.hpp"
#include "eeg2text/langmod/stage2.hpp"
#include "eeg2text/refine/external.hpp"

namespace eeg2text::app {

inline constexpr const char* kVersion = EEG2TEXT_VERSION;

class ConfigError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Everything a run needs. Text form is one "key = value" per line with
// dotted section keys; '#' starts a comment. Every key has a default.
struct RunConfig {
  std::uint64_t seed = 1;

  std::filesystem::path dataset = "data/dataset.jsonl";
  std::filesystem::path vocab = "data/vocab.txt";
  std::filesystem::path embeddings = "data/embeddings.bin";
  std::filesystem::path truth = "data/truth.json";
  std::filesystem::path output_dir = "runs/default";
  dataio::SplitRatios split;

  dataio::SynthConfig synth;
  brainmod::BrainConfig brain;
  langmod::Seq2SeqConfig seq2seq;
  brainmod::Stage1Config stage1;
  langmod::Stage2Config stage2;
  langmod::BeamConfig decode{.width = 1, .max_len = 64, .length_alpha = 0.0};
  refine::RefinePolicy refine;

  std::string serve_host = "127.0.0.1";
  int serve_port = 8080;

  std::filesystem::path stage1_checkpoint() const { return output_dir / "stage1.ckpt"; }
  std::filesystem::path stage2_checkpoint() const { return output_dir / "stage2.ckpt"; }
  std::filesystem::path loss_log(int stage) const {
    return output_dir / ("stage" + std::to_string(stage) + "_losses.jsonl");
  }

  // The sequence model reads brain latents, so its input width and source
  // capacity follow the brain settings.
  langmod::Seq2SeqConfig seq2seq_config() const;

  // Cross-field checks; throws ConfigError.
  void validate() const;
  // Canonical text form listing every key.
  std::string to_text() const;
};

// Applies one "key = value" assignment. Throws ConfigError for an unknown
// key or a value that does not parse.
void apply_setting(RunConfig& config, std::string_view key, std::string_view value);

// Parses the text form on top of `config`.
void apply_text(RunConfig& config, std::string_view text, std::string_view origin = "config");

// Defaults, then the file (if given), then each "key=value" override in
// order; finally validate().
RunConfig load_config(const std::filesystem::path& file, const std::vector<std::string>& overrides);

// Every key with its default value and a one-line description.
struct KeyDoc {
  std::string key;
  std::string default_value;
  std::string description;
};
const std::vector<KeyDoc>& config_keys();

}  // namespace eeg2text::app
