#include "eeg2text/app/commands.hpp"

#include <fstream>
#include <iomanip>
#include <iostream>

#include "eeg2text/app/pipeline.hpp"
#include "eeg2text/app/service.hpp"
#include "eeg2text/brainmod/stage1.hpp"
#include "eeg2text/dataio/format.hpp"
#include "eeg2text/dataio/split.hpp"
#include "eeg2text/dataio/synth.hpp"
#include "eeg2text/langmod/stage2.hpp"
#include "eeg2text/langmod/tokenizer.hpp"
#include "eeg2text/metrics/metrics.hpp"
#include "eeg2text/numcore/checkpoint.hpp"
#include "eeg2text/numcore/rng.hpp"
#include "json.hpp"

namespace eeg2text::app {

namespace {

namespace fs = std::filesystem;

void ensure_parent(const fs::path& p) {
  if (p.has_parent_path()) fs::create_directories(p.parent_path());
}

void require_file(const fs::path& p, const std::string& what) {
  if (!fs::exists(p)) throw MissingPrerequisiteError(p, what);
}

struct TrainingData {
  dataio::DatasetManifest manifest;
  langmod::Vocabulary vocab;
  langmod::EmbeddingTable table;
  dataio::DatasetSplit split;
};

TrainingData load_training_data(const RunConfig& c) {
  require_file(c.dataset, "dataset");
  require_file(c.vocab, "vocabulary");
  require_file(c.embeddings, "embedding table");
  auto space = langmod::load_token_space(c.embeddings, c.vocab);
  auto manifest = dataio::load_dataset(c.dataset);
  auto violations = dataio::validate_dataset(manifest);
  if (!violations.empty()) throw InvalidRecordError(std::move(violations));
  if (manifest.channels != c.brain.channels) {
    throw ConfigError("dataset has " + std::to_string(manifest.channels) +
                      " channels but brain.channels is " + std::to_string(c.brain.channels));
  }
  if (space.table.dim() != c.brain.embed_dim) {
    throw ConfigError("embedding table width " + std::to_string(space.table.dim()) +
                      " differs from brain.embed_dim " + std::to_string(c.brain.embed_dim));
  }
  auto split = dataio::split_dataset(manifest, c.split, c.seed);
  return {std::move(manifest), std::move(space.vocab), std::move(space.table), std::move(split)};
}

std::string loss_record(const brainmod::EpochLoss& e) {
  nlohmann::ordered_json j;
  j["stage"] = e.stage;
  j["epoch"] = e.epoch;
  j["train_loss"] = e.train_loss;
  j["dev_loss"] = e.dev_loss;
  return j.dump();
}

std::vector<std::string> read_lines(const fs::path& p, const std::string& what) {
  require_file(p, what);
  std::ifstream in(p);
  std::vector<std::string> lines;
  std::string line;
  while (std::getline(in, line)) {
    if (!line.empty() && line.back() == '\r') line.pop_back();
    lines.push_back(line);
  }
  return lines;
}

// Runs `body`, mapping exceptions onto the documented exit codes.
template <class Fn>
int guarded(std::ostream& err, Fn&& body) {
  try {
    return body();
  } catch (const ConfigError& e) {
    err << "config error: " << e.what() << '\n';
    return kExitConfig;
  } catch (const MissingPrerequisiteError& e) {
    err << "missing prerequisite: " << e.what() << '\n';
    return kExitMissing;
  } catch (const brainmod::UnknownSubjectError& e) {
    err << "error: " << e.what() << '\n';
    return kExitUnknownSubject;
  } catch (const InvalidRecordError& e) {
    err << "invalid dataset:\n" << e.what();
    return kExitFailure;
  } catch (const std::invalid_argument& e) {
    err << "config error: " << e.what() << '\n';
    return kExitConfig;
  } catch (const std::exception& e) {
    err << "error: " << e.what() << '\n';
    return kExitFailure;
  }
}

}  // namespace

int cmd_synth(const RunConfig& config, std::ostream& out, std::ostream& err) {
  return guarded(err, [&] {
    auto sc = config.synth;
    sc.seed = config.seed;
    const auto result = dataio::synth_generate(sc);
    for (const auto& p : {config.dataset, config.vocab, config.embeddings, config.truth}) ensure_parent(p);
    dataio::save_dataset(result.manifest, config.dataset);
    result.vocab.save(config.vocab);
    langmod::save_embedding_table(config.embeddings, result.table);
    dataio::save_ground_truth(result.truth, config.truth);
    out << "wrote " << config.dataset.string() << " (" << result.manifest.subjects.size() << " subjects, "
        << result.manifest.sentence_count() << " records), " << config.vocab.string() << " ("
        << result.vocab.size() << " tokens), " << config.embeddings.string() << ", "
        << config.truth.string() << '\n';
    return kExitOk;
  });
}

int cmd_train(const RunConfig& config, int stage, std::ostream& out, std::ostream& err) {
  return guarded(err, [&]() -> int {
    if (stage != 1 && stage != 2) throw ConfigError("--stage must be 1 or 2");
    std::unique_ptr<brainmod::BrainModel<float>> brain;
    if (stage == 2) brain = load_stage1(config.stage1_checkpoint());
    auto data = load_training_data(config);
    fs::create_directories(config.output_dir);
    std::ofstream log(config.loss_log(stage), std::ios::trunc);
    if (!log) throw std::runtime_error("cannot write " + config.loss_log(stage).string());
    auto on_epoch = [&](const brainmod::EpochLoss& e) {
      log << loss_record(e) << '\n' << std::flush;
      out << "stage " << e.stage << " epoch " << e.epoch << " train " << std::setprecision(6)
          << e.train_loss << " dev " << e.dev_loss << '\n';
    };

    if (stage == 1) {
      brain = std::make_unique<brainmod::BrainModel<float>>(config.brain, data.manifest.subject_ids(),
                                                            config.seed);
      auto tc = config.stage1;
      tc.seed = config.seed;
      const auto res = brainmod::train_stage1(*brain, data.split.train, data.split.dev, data.vocab,
                                              data.table, tc, on_epoch);
      save_stage1(config.stage1_checkpoint(), *brain);
      out << "aligned " << res.train_stats.used << " training sentences (" << res.train_stats.skipped
          << " skipped); wrote " << config.stage1_checkpoint().string() << '\n';
      return kExitOk;
    }

    for (const auto& id : data.manifest.subject_ids()) {
      if (!brain->has_subject(id)) {
        throw brainmod::UnknownSubjectError("dataset subject '" + id + "' is not in the stage-1 checkpoint");
      }
    }
    langmod::Seq2Seq<float> seq(config.seq2seq_config(), data.vocab.size(),
                                numcore::derive_seed(config.seed, "seq2seq"));
    auto tc = config.stage2;
    tc.seed = config.seed;
    const auto res = langmod::train_stage2(*brain, seq, data.split.train, data.split.dev, data.vocab,
                                           data.table, tc, on_epoch);
    save_stage2(config.stage2_checkpoint(), *brain, seq);
    out << "trained on " << res.train_stats.used << " sentences (" << res.train_stats.skipped
        << " skipped); wrote " << config.stage2_checkpoint().string() << '\n';
    return kExitOk;
  });
}

int cmd_decode(const RunConfig& config, const DecodeOptions& options, std::ostream& out, std::ostream& err) {
  return guarded(err, [&] {
    const auto pipeline = Pipeline::load(config);
    const auto dataset = options.dataset.empty() ? config.dataset : options.dataset;
    require_file(dataset, "dataset");
    auto manifest = dataio::load_dataset(dataset);
    dataio::DatasetManifest selected;
    if (options.split == "all") {
      selected = std::move(manifest);
    } else {
      auto split = dataio::split_dataset(manifest, config.split, config.seed);
      if (options.split == "train") selected = std::move(split.train);
      else if (options.split == "dev") selected = std::move(split.dev);
      else if (options.split == "test") selected = std::move(split.test);
      else throw ConfigError("--split must be train, dev, test or all");
    }
    if (options.subject && !pipeline->has_subject(*options.subject)) {
      throw brainmod::UnknownSubjectError("unknown subject '" + *options.subject + "'");
    }
    const auto responses = pipeline->decode_manifest(selected, options.subject);
    const auto path = options.output.empty() ? config.output_dir / ("decode_" + options.split + ".jsonl")
                                             : options.output;
    ensure_parent(path);
    std::ofstream file(path, std::ios::trunc);
    if (!file) throw std::runtime_error("cannot write " + path.string());
    for (const auto& r : responses) file << response_json(r) << '\n';
    out << "decoded " << responses.size() << " sentences to " << path.string() << '\n';
    return kExitOk;
  });
}

int cmd_eval(const RunConfig& config, const EvalOptions& options, std::ostream& out, std::ostream& err) {
  return guarded(err, [&] {
    std::vector<std::string> preds, refs;
    if (!options.decoded.empty()) {
      if (options.field != "raw_text" && options.field != "refined_text") {
        throw ConfigError("--field must be raw_text or refined_text");
      }
      for (const auto& line : read_lines(options.decoded, "decode output")) {
        if (line.empty()) continue;
        const auto j = nlohmann::json::parse(line);
        preds.push_back(j.at(options.field).get<std::string>());
        refs.push_back(j.at("reference").get<std::string>());
      }
    } else {
      if (options.predictions.empty() || options.references.empty()) {
        throw ConfigError("eval needs --predictions and --references, or --decoded");
      }
      preds = read_lines(options.predictions, "predictions file");
      refs = read_lines(options.references, "references file");
    }
    if (preds.size() != refs.size()) {
      err << "line count mismatch: " << preds.size() << " predictions, " << refs.size() << " references\n";
      return static_cast<int>(kExitEvalMismatch);
    }
    if (preds.empty()) throw ConfigError("nothing to evaluate");

    std::unique_ptr<metrics::Embedder> embedder;
    if (!options.one_hot && fs::exists(config.vocab) && fs::exists(config.embeddings)) {
      auto space = langmod::load_token_space(config.embeddings, config.vocab);
      embedder = std::make_unique<metrics::TableEmbedder>(std::move(space.vocab), std::move(space.table));
    } else {
      std::vector<metrics::Tokens> corpora;
      for (const auto& s : preds) corpora.push_back(langmod::tokenize(s));
      for (const auto& s : refs) corpora.push_back(langmod::tokenize(s));
      embedder = std::make_unique<metrics::OneHotEmbedder>(corpora);
    }
    metrics::CorpusReport report;
    report.rows.push_back(metrics::corpus_eval(options.model, preds, refs, *embedder));
    out << report.to_text();
    if (!options.json_output.empty()) {
      ensure_parent(options.json_output);
      std::ofstream j(options.json_output, std::ios::trunc);
      j << report.to_jsonl();
    }
    return static_cast<int>(kExitOk);
  });
}

int cmd_serve(const RunConfig& config, std::ostream& out, std::ostream& err) {
  return guarded(err, [&] {
    const auto pipeline = Pipeline::load(config);
    Service service(*pipeline);
    const int port = service.bind(config.serve_host, config.serve_port);
    out << "serving on http://" << config.serve_host << ":" << port << '\n' << std::flush;
    service.run();
    return kExitOk;
  });
}

}  // namespace eeg2text::app
