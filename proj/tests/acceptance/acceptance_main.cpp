// Acceptance run: one PASS/FAIL line per criterion, non-zero exit if any
// criterion fails. Each line also reports the measured values.

#include <array>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <functional>
#include <iterator>
#include <optional>
#include <random>
#include <sstream>
#include <string>
#include <vector>

#include "app_fixture.hpp"
#include "eeg2text/app/commands.hpp"
#include "eeg2text/brainmod/stage1.hpp"
#include "eeg2text/dataio/format.hpp"
#include "eeg2text/dataio/split.hpp"
#include "eeg2text/dataio/synth.hpp"
#include "eeg2text/dataio/validate.hpp"
#include "eeg2text/langmod/decode.hpp"
#include "eeg2text/langmod/stage2.hpp"
#include "eeg2text/langmod/tokenizer.hpp"
#include "eeg2text/metrics/metrics.hpp"
#include "eeg2text/refine/external.hpp"
#include "eeg2text/refine/rule_based.hpp"
#include "grad_suite.hpp"
#include "httplib.h"
#include "json.hpp"
#include "mock_endpoint.hpp"
#include "refine_corpus.hpp"

using namespace eeg2text;
namespace fs = std::filesystem;

namespace {

struct Outcome {
  bool pass = false;
  std::string detail;
};

std::string fmt(const char* format, auto... args) {
  char buf[512];
  std::snprintf(buf, sizeof buf, format, args...);
  return buf;
}

std::string slurp(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

std::vector<std::string> lines_of(const fs::path& path) {
  std::vector<std::string> lines;
  std::istringstream in(slurp(path));
  for (std::string line; std::getline(in, line);)
    if (!line.empty()) lines.push_back(line);
  return lines;
}

metrics::Tokens words(std::string_view text) { return langmod::tokenize(text); }

// ---------------------------------------------------------------- metrics

Outcome metric_oracle() {
  const auto cand = words("He He He");
  const auto ref = words("He eats an apple");
  const double clipped = metrics::clipped_precision(cand, ref, 1);
  const double unclipped = metrics::unclipped_precision(cand, ref, 1);
  return {clipped == 1.0 / 3.0 && unclipped == 1.0, fmt("clipped %.17g, unclipped %.17g", clipped, unclipped)};
}

Outcome metric_hand_oracles() {
  const auto r = metrics::rouge_1(words("he eats"), words("he eats an apple"));
  const bool rouge_ok = r.precision == 1.0 && r.recall == 0.5 && r.f1 == 2.0 / 3.0;

  const auto b = metrics::corpus_bleu({words("he eats")}, {words("he eats an apple")}, 1);
  const double bleu_err = std::abs(b.bleu[0] - std::exp(-1.0));

  const auto sentence = words("the quick brown fox jumps");
  const metrics::OneHotEmbedder onehot({sentence});
  const double f1 = metrics::bertscore(sentence, sentence, onehot).f1;
  const auto table_set = dataio::synth_generate(dataio::SynthConfig{.n_sentences = 2, .vocab_size = 10});
  const metrics::TableEmbedder table(table_set.vocab, table_set.table);
  const auto in_vocab = words(table_set.manifest.subjects[0].sentences[0].content);
  const double table_f1 = metrics::bertscore(in_vocab, in_vocab, table).f1;

  const bool pass = rouge_ok && bleu_err <= 1e-9 && std::abs(f1 - 1.0) <= 1e-6 && std::abs(table_f1 - 1.0) <= 1e-6;
  return {pass, fmt("rouge P %.17g R %.17g F %.17g; BLEU-1 - e^-1 = %.3g; bertscore f1 %.12f (one-hot), %.12f (table)",
                    r.precision, r.recall, r.f1, bleu_err, f1, table_f1)};
}

// ---------------------------------------------------------------- gradients

Outcome gradient_suite() {
  const std::array<std::uint64_t, 5> seeds{101, 202, 303, 404, 505};
  const auto cases = testing::run_grad_suite(seeds, 1e-4);
  double worst = 0.0;
  std::string worst_at;
  bool pass = cases.size() == testing::grad_suite_layers().size() * seeds.size();
  for (const auto& c : cases) {
    pass = pass && c.entries_checked >= 2 && c.max_rel_error <= 1e-4;
    if (c.max_rel_error >= worst) {
      worst = c.max_rel_error;
      worst_at = c.layer + " seed " + std::to_string(c.seed) + " (" + c.worst_param + ")";
    }
  }
  return {pass, fmt("%zu layer types x %zu seeds, worst rel error %.3g at %s", testing::grad_suite_layers().size(),
                    seeds.size(), worst, worst_at.c_str())};
}

// ---------------------------------------------------------------- stage 1

struct Stage1Data {
  dataio::SynthResult synth;
  dataio::DatasetSplit split;
};

Stage1Data stage1_data(double gain_ratio) {
  dataio::SynthConfig sc;  // 2 subjects, 200 sentences, vocab 120, noiseless
  sc.seed = 7;
  sc.gain_ratio = gain_ratio;
  Stage1Data d{dataio::synth_generate(sc), {}};
  d.split = dataio::split_dataset(d.synth.manifest, {0.8, 0.1, 0.1}, 7);
  return d;
}

Outcome stage1_learnability() {
  const auto d = stage1_data(1.0);
  brainmod::BrainConfig bc;
  brainmod::BrainModel<float> model(bc, d.synth.manifest.subject_ids(), 11);
  brainmod::Stage1Config c;
  c.epochs = 50;
  c.stop_ratio = 0.1;
  const auto res = brainmod::train_stage1(model, d.split.train, d.split.dev, d.synth.vocab, d.synth.table, c);
  const double first = res.history.front().dev_loss;
  const double last = res.history.back().dev_loss;
  const std::size_t epochs = res.history.back().epoch;
  return {epochs <= 50 && last < 0.1 * first,
          fmt("dev MSE %.5f -> %.5f (%.1f%% of epoch 0) after %zu epochs", first, last, 100.0 * last / first, epochs)};
}

Outcome subject_layer_ablation() {
  const auto d = stage1_data(4.0);
  brainmod::BrainConfig bc;
  bc.gru_hidden = 32;
  bc.proj_dim = 64;
  bc.d_h = 64;
  bc.dropout = 0.0;
  std::string detail;
  int wins = 0;
  for (std::uint64_t seed : {21u, 22u, 23u}) {
    double final_loss[2] = {0.0, 0.0};
    for (int trainable = 0; trainable < 2; ++trainable) {
      brainmod::BrainModel<float> model(bc, d.synth.manifest.subject_ids(), seed);
      brainmod::Stage1Config c;
      c.epochs = 6;
      c.seed = seed;
      c.train_subject_layer = trainable == 1;
      const auto res = brainmod::train_stage1(model, d.split.train, d.split.dev, d.synth.vocab, d.synth.table, c);
      final_loss[trainable] = res.history.back().dev_loss;
    }
    if (final_loss[0] > final_loss[1]) ++wins;
    detail += fmt("%sseed %llu frozen %.5f vs trainable %.5f", detail.empty() ? "" : "; ",
                  static_cast<unsigned long long>(seed), final_loss[0], final_loss[1]);
  }
  return {wins == 3, fmt("%d/3 seeds; ", wins) + detail};
}

// ---------------------------------------------------------------- stage 2

// Default synthetic corpus with a reduced brain encoder; the same run feeds
// the decoding and service checks.
std::vector<std::string> end_to_end_overrides() {
  return {"brain.gru_hidden=32", "brain.proj_dim=64", "brain.d_h=64", "stage1.epochs=6", "stage2.epochs=40"};
}

std::optional<app::RunConfig> g_e2e;

Outcome stage2_end_to_end() {
  const auto config = testing::config_in(testing::scratch_dir("acceptance_e2e"), end_to_end_overrides());
  testing::synth_and_train(config);
  g_e2e = config;

  std::ostringstream out, err;
  app::DecodeOptions opts;  // greedy (beam width 1) over the test split
  if (app::cmd_decode(config, opts, out, err) != app::kExitOk) return {false, "decode failed: " + err.str()};
  std::vector<metrics::Tokens> cands, refs;
  std::size_t exact = 0;
  for (const auto& line : lines_of(config.output_dir / "decode_test.jsonl")) {
    const auto j = nlohmann::json::parse(line);
    cands.push_back(words(j.at("raw_text").get<std::string>()));
    refs.push_back(words(j.at("reference").get<std::string>()));
    if (cands.back() == refs.back()) ++exact;
  }
  if (cands.empty()) return {false, "no test sentences"};
  const double bleu1 = metrics::corpus_bleu(cands, refs, 1).bleu[0];
  const double rate = static_cast<double>(exact) / static_cast<double>(cands.size());
  return {bleu1 >= 0.80 && rate >= 0.50,
          fmt("held-out BLEU-1 %.4f, exact match %zu/%zu (%.1f%%)", bleu1, exact, cands.size(), 100.0 * rate)};
}

langmod::NextTokenScorer scorer_for(const langmod::Seq2Seq<float>& model, const numcore::Tensor<float>& latent) {
  auto memory = std::make_shared<numcore::Tensor<float>>(model.memory(latent));
  return [&model, memory](std::span<const int> prefix) { return model.next_log_probs(*memory, prefix); };
}

Outcome decoding_consistency() {
  if (!g_e2e) return {false, "needs the stage-2 model"};
  const auto pipeline = app::Pipeline::load(*g_e2e);
  const auto manifest = dataio::load_dataset(g_e2e->dataset);
  const auto split = dataio::split_dataset(manifest, g_e2e->split, g_e2e->seed);

  // Held-out sentences first, topped up from training to reach 100.
  std::vector<langmod::Stage2Example> pool;
  for (const auto* part : {&split.test, &split.dev, &split.train}) {
    auto ex = langmod::prepare_stage2(*part, pipeline->brain(), pipeline->seq2seq(), pipeline->vocab());
    for (auto& e : ex)
      if (pool.size() < 100) pool.push_back(std::move(e));
  }
  std::size_t same_w1 = 0, beam_ge = 0;
  double worst_gap = 0.0;
  for (const auto& e : pool) {
    const auto scorer = scorer_for(pipeline->seq2seq(), e.latent);
    const auto greedy = langmod::greedy_decode(scorer, 64);
    const auto w1 = langmod::beam_decode(scorer, {.width = 1, .max_len = 64, .length_alpha = 0.0});
    const auto w4 = langmod::beam_decode(scorer, {.width = 4, .max_len = 64, .length_alpha = 0.0});
    if (w1.tokens == greedy.tokens) ++same_w1;
    if (w4.logprob >= greedy.logprob) ++beam_ge;
    worst_gap = std::min(worst_gap, w4.logprob - greedy.logprob);
  }

  // Enumerable toy: four word tokens plus the specials, three steps.
  std::size_t toy_match = 0;
  const std::size_t toy_trials = 50;
  std::mt19937_64 rng(99);
  std::normal_distribution<double> normal(0.0, 1.0);
  langmod::Seq2SeqConfig tc;
  tc.input_dim = 4;
  tc.d_model = 8;
  tc.heads = 2;
  tc.ffn_mult = 2;
  tc.head_hidden = 8;
  tc.max_source = 8;
  tc.max_target = 8;
  tc.dropout = 0.0;
  for (std::size_t t = 0; t < toy_trials; ++t) {
    langmod::Seq2Seq<float> toy(tc, 8, 1000 + t);
    for (std::size_t i = 0; i < toy.params().size(); ++i)
      for (auto& v : toy.params()[i].value.values()) v = static_cast<float>(normal(rng));
    numcore::Tensor<float> z({1 + t % 4, tc.input_dim});
    for (auto& v : z.values()) v = static_cast<float>(normal(rng));
    const auto scorer = scorer_for(toy, z);
    const auto beam = langmod::beam_decode(scorer, {.width = 8, .max_len = 3, .length_alpha = 0.0});
    const auto brute = langmod::exhaustive_decode(scorer, 3, 0.0);
    if (beam.tokens == brute.tokens) ++toy_match;
  }

  const std::size_t n = pool.size();
  return {n == 100 && same_w1 == n && beam_ge == n && toy_match == toy_trials,
          fmt("width 1 == greedy %zu/%zu; beam 4 >= greedy %zu/%zu (worst gap %.3g); beam 8 == exhaustive %zu/%zu",
              same_w1, n, beam_ge, n, worst_gap, toy_match, toy_trials)};
}

Outcome probability_law() {
  std::mt19937_64 rng(2024);
  std::normal_distribution<double> normal(0.0, 1.0);
  double worst_sum = 0.0, worst_norm = 0.0;
  std::size_t inputs = 0;
  for (std::uint64_t m = 0; m < 10; ++m) {
    langmod::Seq2SeqConfig c;
    c.input_dim = 6;
    c.d_model = 16;
    c.heads = 2;
    c.ffn_mult = 2;
    c.head_hidden = 16;
    c.max_source = 10;
    c.max_target = 12;
    const std::size_t vocab = 12 + 2 * m;
    langmod::Seq2Seq<float> model(c, vocab, 500 + m);
    std::uniform_int_distribution<int> token(4, static_cast<int>(vocab) - 1);
    std::uniform_int_distribution<std::size_t> rows(1, c.max_source), length(0, c.max_target - 1);
    for (int k = 0; k < 100; ++k, ++inputs) {
      numcore::Tensor<float> z({rows(rng), c.input_dim});
      for (auto& v : z.values()) v = static_cast<float>(normal(rng));
      std::vector<int> target(length(rng));
      for (auto& t : target) t = token(rng);
      target.push_back(langmod::kEos);

      const auto memory = model.memory(z);
      std::vector<int> prefix{langmod::kBos};
      double stepwise = 0.0;
      for (int t : target) {
        const auto lp = model.next_log_probs(memory, prefix);
        double mass = 0.0;
        for (double v : lp) mass += std::exp(v);
        worst_norm = std::max(worst_norm, std::abs(mass - 1.0));
        stepwise += lp[static_cast<std::size_t>(t)];
        prefix.push_back(t);
      }
      worst_sum = std::max(worst_sum, std::abs(model.sequence_logprob(z, target) - stepwise));
    }
  }
  return {worst_sum <= 1e-6 && worst_norm <= 1e-9,
          fmt("%zu inputs: max |sequence - stepwise| %.3g, max |sum p - 1| %.3g", inputs, worst_sum, worst_norm)};
}

// ---------------------------------------------------------------- refiner

Outcome refiner_properties() {
  std::size_t idempotent = 0;
  const auto corpus = testing::noisy_sentences(200, 17);
  for (const auto& s : corpus) {
    const auto once = refine::refine_rule_based(s);
    if (refine::refine_rule_based(once) == once) ++idempotent;
  }

  const std::vector<std::pair<std::string, std::string>> collapse{
      {"the the cat sat", "The cat sat."},
      {"The the THE cat", "The cat."},
      {"he eats eats an apple apple", "He eats an apple."},
      {"go go, go", "Go, go."},
      {"yes yes yes!", "Yes!"},
      {"a b a b", "A b a b."},
      {"ok", "Ok."},
  };
  std::size_t collapsed = 0;
  for (const auto& [in, want] : collapse)
    if (refine::refine_rule_based(in) == want) ++collapsed;

  testing::SilentEndpoint silent;
  refine::RefinePolicy policy;
  policy.kind = refine::PolicyKind::kExternal;
  policy.endpoint = silent.url();
  policy.model = "test";
  policy.timeout_seconds = 1.0;
  policy.fallback = true;
  const std::string raw = "the the model model said hello";
  const auto t0 = std::chrono::steady_clock::now();
  const auto result = refine::refine(raw, policy);
  const double waited = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  const bool fell_back =
      result.source == refine::RefineSource::kExternalFallback && result.text == refine::refine_rule_based(raw);

  return {idempotent == corpus.size() && collapsed == collapse.size() && fell_back,
          fmt("idempotent %zu/%zu; collapse cases %zu/%zu; silent endpoint -> %s after %.1fs", idempotent,
              corpus.size(), collapsed, collapse.size(),
              std::string(refine::refine_source_name(result.source)).c_str(), waited)};
}

// ---------------------------------------------------------------- data layer

dataio::DatasetManifest clean_fixture() {
  dataio::SynthConfig sc;
  sc.n_sentences = 3;
  sc.vocab_size = 12;
  sc.channels = 6;
  sc.embed_dim = 4;
  sc.seed = 3;
  return dataio::synth_generate(sc).manifest;
}

dataio::WordRecord& first_fixated(dataio::DatasetManifest& m) {
  for (auto& w : m.subjects[0].sentences[0].words)
    if (w.has_fixation) return w;
  throw std::logic_error("fixture has no fixated word");
}

bool only_rule(const std::vector<dataio::Violation>& v, const std::string& rule) {
  if (v.empty()) return false;
  for (const auto& x : v)
    if (x.rule != rule) return false;
  return true;
}

Outcome data_layer() {
  const auto dir = testing::scratch_dir("acceptance_data");
  std::mt19937_64 rng(5);
  std::size_t identical = 0;
  for (int i = 0; i < 50; ++i) {
    dataio::SynthConfig sc;
    sc.n_subjects = 1 + rng() % 3;
    sc.n_sentences = 1 + rng() % 4;
    sc.vocab_size = 5 + rng() % 20;
    sc.channels = 2 + rng() % 6;
    sc.embed_dim = 2 + rng() % 4;
    sc.sigma = (rng() % 2) * 0.5;
    sc.min_samples = 2 + rng() % 4;
    sc.max_samples = sc.min_samples + rng() % 6;
    sc.min_words = 1 + rng() % 3;
    sc.max_words = sc.min_words + rng() % 4;
    sc.seed = rng();
    const auto manifest = dataio::synth_generate(sc).manifest;
    const auto path = dir / ("m" + std::to_string(i) + ".jsonl");
    dataio::save_dataset(manifest, path);
    if (dataio::load_dataset(path) == manifest) ++identical;
  }

  const double nyquist = dataio::nyquist_min_rate(100.0);

  const auto clean = clean_fixture();
  const bool clean_ok = dataio::validate_dataset(clean).empty();
  auto channels = clean;
  auto& w1 = first_fixated(channels);
  w1.raw_eeg = dataio::Matrix({w1.raw_eeg.rows() - 1, w1.raw_eeg.cols()});
  auto bands = clean;
  auto& w2 = first_fixated(bands);
  w2.band_features.begin()->second = dataio::Matrix({7, clean.channels});
  auto rate = clean;
  rate.sampling_rate = dataio::nyquist_min_rate(dataio::highest_band_edge()) - 1.0;
  const bool c_ok = only_rule(dataio::validate_dataset(channels), dataio::rule::kChannelCount);
  const bool b_ok = only_rule(dataio::validate_dataset(bands), dataio::rule::kBandShape);
  const bool n_ok = only_rule(dataio::validate_dataset(rate), dataio::rule::kNyquist);

  return {identical == 50 && nyquist == 200.0 && clean_ok && c_ok && b_ok && n_ok,
          fmt("round trips %zu/50; nyquist_min_rate(100) = %g; clean fixture %s; channel %s, band %s, nyquist %s",
              identical, nyquist, clean_ok ? "valid" : "INVALID", c_ok ? "caught" : "missed",
              b_ok ? "caught" : "missed", n_ok ? "caught" : "missed")};
}

// ---------------------------------------------------------------- service

Outcome service_parity() {
  if (!g_e2e) return {false, "needs the stage-2 model"};
  const auto& config = *g_e2e;
  const auto manifest = dataio::load_dataset(config.dataset);
  const auto test = dataio::split_dataset(manifest, config.split, config.seed).test;

  // Twenty held-out records, in manifest order.
  dataio::DatasetManifest picked;
  picked.channels = manifest.channels;
  picked.sampling_rate = manifest.sampling_rate;
  std::size_t taken = 0;
  for (const auto& s : test.subjects) {
    dataio::SubjectData sub{s.subject_id, {}};
    for (const auto& sentence : s.sentences)
      if (taken < 20) {
        sub.sentences.push_back(sentence);
        ++taken;
      }
    if (!sub.sentences.empty()) picked.subjects.push_back(std::move(sub));
  }
  const auto dir = config.output_dir.parent_path();
  dataio::save_dataset(picked, dir / "parity.jsonl");
  std::ostringstream out, err;
  app::DecodeOptions opts;
  opts.split = "all";
  opts.dataset = dir / "parity.jsonl";
  opts.output = dir / "parity_cli.jsonl";
  if (app::cmd_decode(config, opts, out, err) != app::kExitOk) return {false, "decode failed: " + err.str()};
  const auto cli = lines_of(opts.output);

  const auto pipeline = app::Pipeline::load(config);
  testing::RunningService svc(*pipeline);
  httplib::Client client("127.0.0.1", svc.port());
  std::size_t identical = 0, i = 0;
  for (const auto& s : picked.subjects)
    for (const auto& sentence : s.sentences) {
      const auto res = client.Post("/decode", dataio::record_to_json(s.subject_id, sentence).dump(), "application/json");
      if (res && res->status == 200 && i < cli.size() && res->body == cli[i]) ++identical;
      ++i;
    }

  // A record with one channel missing from a word signal.
  dataio::DatasetManifest broken;
  broken.channels = manifest.channels;
  broken.sampling_rate = manifest.sampling_rate;
  broken.subjects.push_back({picked.subjects[0].subject_id, {picked.subjects[0].sentences[0]}});
  for (auto& w : broken.subjects[0].sentences[0].words)
    if (w.has_fixation) {
      w.raw_eeg = dataio::Matrix({w.raw_eeg.rows() - 1, w.raw_eeg.cols()});
      break;
    }
  std::vector<std::string> expected;
  for (const auto& v : dataio::validate_dataset(broken)) expected.push_back(v.to_string());
  const auto bad = client.Post("/decode",
                               dataio::record_to_json(broken.subjects[0].subject_id, broken.subjects[0].sentences[0]).dump(),
                               "application/json");
  bool same_violations = false;
  int status = 0;
  if (bad) {
    status = bad->status;
    const auto j = nlohmann::json::parse(bad->body, nullptr, false);
    same_violations = !expected.empty() && j.contains("violations") &&
                      j["violations"].get<std::vector<std::string>>() == expected;
  }
  return {taken == 20 && cli.size() == 20 && identical == 20 && status == 400 && same_violations,
          fmt("%zu/%zu responses byte-identical to the CLI; malformed record -> %d, violations %s", identical, taken,
              status, same_violations ? "match the validator" : "DIFFER")};
}

}  // namespace

int main() {
  const std::vector<std::pair<const char*, std::function<Outcome()>>> criteria{
      {"metric oracle", metric_oracle},
      {"metric hand oracles", metric_hand_oracles},
      {"gradient suite", gradient_suite},
      {"stage-1 learnability", stage1_learnability},
      {"subject-layer ablation", subject_layer_ablation},
      {"stage-2 end-to-end", stage2_end_to_end},
      {"decoding consistency", decoding_consistency},
      {"probability law", probability_law},
      {"refiner properties", refiner_properties},
      {"data layer", data_layer},
      {"service parity", service_parity},
  };
  int failed = 0;
  for (const auto& [name, run] : criteria) {
    const auto t0 = std::chrono::steady_clock::now();
    Outcome o;
    try {
      o = run();
    } catch (const std::exception& e) {
      o = {false, std::string("exception: ") + e.what()};
    }
    const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    if (!o.pass) ++failed;
    std::printf("%s %s: %s [%.1fs]\n", o.pass ? "PASS" : "FAIL", name, o.detail.c_str(), secs);
    std::fflush(stdout);
  }
  std::printf("%zu criteria, %d failed\n", criteria.size(), failed);
  return failed == 0 ? 0 : 1;
}
