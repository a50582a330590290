#pragma once

#include <filesystem>
#include <iosfwd>
#include <optional>
#include <string>

#include "eeg2text/app/config.hpp"

namespace eeg2text::app {

enum ExitCode : int {
  kExitOk = 0,
  kExitFailure = 1,
  kExitConfig = 2,
  kExitMissing = 3,
  kExitUnknownSubject = 4,
  kExitEvalMismatch = 5,
};

// Writes the dataset, vocabulary, embedding table and ground truth named in
// the config.
int cmd_synth(const RunConfig& config, std::ostream& out, std::ostream& err);

// Stage 1 writes stage1.ckpt; stage 2 needs it and writes stage2.ckpt. Each
// stage rewrites its loss log, one JSON record per epoch.
int cmd_train(const RunConfig& config, int stage, std::ostream& out, std::ostream& err);

struct DecodeOptions {
  std::optional<std::string> subject;
  std::string split = "test";  // train, dev, test or all
  std::filesystem::path dataset;  // empty: the config's dataset
  std::filesystem::path output;   // empty: <output.dir>/decode_<split>.jsonl
};
int cmd_decode(const RunConfig& config, const DecodeOptions& options, std::ostream& out, std::ostream& err);

struct EvalOptions {
  std::filesystem::path predictions;  // one sentence per line
  std::filesystem::path references;   // one sentence per line
  std::filesystem::path decoded;      // alternatively, a decode output file
  std::string field = "refined_text";  // decode field used as the prediction
  std::string model = "model";
  std::filesystem::path json_output;  // optional JSON-lines report
  bool one_hot = false;               // ignore the configured embedding table
};
int cmd_eval(const RunConfig& config, const EvalOptions& options, std::ostream& out, std::ostream& err);

// Blocks serving requests.
int cmd_serve(const RunConfig& config, std::ostream& out, std::ostream& err);

}  // namespace eeg2text::app
