// eeg2text: synthesize data, train, decode, evaluate and serve.

#include <iostream>

#include "CLI11.hpp"
#include "eeg2text/app/commands.hpp"
#include "eeg2text/app/config.hpp"

namespace app = eeg2text::app;

int main(int argc, char** argv) {
  CLI::App cli{"EEG-to-text decoding: synthetic data, two-stage training, decoding, evaluation and serving"};
  cli.set_version_flag("--version", std::string(app::kVersion));
  cli.require_subcommand(1);

  std::string config_path;
  std::vector<std::string> overrides;
  cli.add_option("-c,--config", config_path, "flat key = value config file")->check(CLI::ExistingFile);
  cli.add_option("-s,--set", overrides, "override one config key, e.g. --set brain.d_h=64 (repeatable)")
      ->take_all();

  auto* keys = cli.add_subcommand("config", "print every config key with its effective value");
  bool describe = false;
  keys->add_flag("--describe", describe, "list keys with defaults and descriptions instead");

  cli.add_subcommand("synth", "write a synthetic dataset, vocabulary, embedding table and ground truth");

  auto* train = cli.add_subcommand("train", "run one training stage and write its checkpoint and loss log");
  int stage = 1;
  train->add_option("--stage", stage, "1 = alignment to the embedding table, 2 = sequence generation")
      ->required()
      ->check(CLI::IsMember({1, 2}));

  auto* decode = cli.add_subcommand("decode", "decode a dataset split to JSON lines");
  app::DecodeOptions dopts;
  std::string subject;
  std::string dataset, output;
  decode->add_option("--subject", subject, "only this subject's records");
  decode->add_option("--split", dopts.split, "train, dev, test or all")
      ->check(CLI::IsMember({"train", "dev", "test", "all"}));
  decode->add_option("--dataset", dataset, "dataset file instead of data.dataset");
  decode->add_option("-o,--out", output, "output file (default <output.dir>/decode_<split>.jsonl)");

  auto* eval = cli.add_subcommand("eval", "score predictions against references");
  app::EvalOptions eopts;
  std::string predictions, references, decoded, json_out;
  eval->add_option("--predictions", predictions, "one predicted sentence per line");
  eval->add_option("--references", references, "one reference sentence per line");
  eval->add_option("--decoded", decoded, "a decode output file (instead of the two files above)");
  eval->add_option("--field", eopts.field, "decode field to score: raw_text or refined_text");
  eval->add_option("--model", eopts.model, "row label in the report");
  eval->add_option("--json", json_out, "also write the report as JSON lines");
  eval->add_flag("--one-hot", eopts.one_hot, "score BERTScore with one-hot token vectors");

  cli.add_subcommand("serve", "serve /health, /decode and /decode-file over HTTP");

  try {
    cli.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = cli.exit(e);
    return code == 0 ? 0 : app::kExitConfig;
  }

  app::RunConfig config;
  try {
    config = app::load_config(config_path, overrides);
  } catch (const app::ConfigError& e) {
    std::cerr << "config error: " << e.what() << '\n';
    return app::kExitConfig;
  }

  auto& out = std::cout;
  auto& err = std::cerr;
  if (*keys) {
    if (describe) {
      for (const auto& k : app::config_keys()) {
        out << k.key << " = " << k.default_value << "\n    " << k.description << '\n';
      }
    } else {
      out << config.to_text();
    }
    return app::kExitOk;
  }
  if (cli.got_subcommand("synth")) return app::cmd_synth(config, out, err);
  if (*train) return app::cmd_train(config, stage, out, err);
  if (*decode) {
    if (!subject.empty()) dopts.subject = subject;
    dopts.dataset = dataset;
    dopts.output = output;
    return app::cmd_decode(config, dopts, out, err);
  }
  if (*eval) {
    eopts.predictions = predictions;
    eopts.references = references;
    eopts.decoded = decoded;
    eopts.json_output = json_out;
    return app::cmd_eval(config, eopts, out, err);
  }
  return app::cmd_serve(config, out, err);
}
