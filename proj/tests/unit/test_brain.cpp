#include <algorithm>
#include <random>

#include "doctest.h"
#include "eeg2text/brainmod/stage1.hpp"
#include "eeg2text/dataio/split.hpp"
#include "eeg2text/dataio/synth.hpp"
#include "eeg2text/numcore/checkpoint.hpp"
#include "eeg2text/numcore/gradcheck.hpp"
#include "eeg2text/numcore/ops.hpp"

using namespace eeg2text;
using brainmod::BrainConfig;
using brainmod::BrainModel;
using numcore::Tape;
using numcore::Tensor;
using numcore::Var;

namespace {

BrainConfig tiny_config() {
  BrainConfig c;
  c.channels = 3;
  c.gru_hidden = 2;
  c.proj_dim = 4;
  c.d_h = 4;
  c.layers = 1;
  c.heads = 2;
  c.ffn_mult = 2;
  c.dropout = 0.0;
  c.embed_dim = 3;
  c.max_words = 5;
  return c;
}

template <class T>
Tensor<T> random_tensor(std::size_t r, std::size_t c, std::mt19937_64& rng, double scale = 1.0) {
  std::normal_distribution<double> d(0.0, scale);
  Tensor<T> t({r, c});
  for (auto& v : t.values()) v = static_cast<T>(d(rng));
  return t;
}

std::vector<Tensor<float>> random_words(std::size_t m, std::size_t channels, std::mt19937_64& rng) {
  std::vector<Tensor<float>> words;
  std::uniform_int_distribution<std::size_t> len(1, 6);
  for (std::size_t i = 0; i < m; ++i) words.push_back(random_tensor<float>(len(rng), channels, rng));
  return words;
}

template <class T>
void randomize(numcore::ParamStore<T>& store, std::mt19937_64& rng, double scale = 0.5) {
  std::normal_distribution<double> d(0.0, scale);
  for (std::size_t i = 0; i < store.size(); ++i)
    for (auto& v : store[i].value.values()) v = static_cast<T>(d(rng));
}

template <class T>
Tensor<T> half(const Tensor<T>& row, std::size_t which) {
  const std::size_t h = row.cols() / 2;
  std::vector<T> out(row.values().begin() + which * h, row.values().begin() + (which + 1) * h);
  return Tensor<T>({1, h}, std::move(out));
}

template <class T>
void copy_direction(BrainModel<T>& m) {
  for (const char* p : {".w_x", ".w_h", ".b_x", ".b_h"}) {
    m.params().get(std::string("gru.bwd") + p).value = m.params().get(std::string("gru.fwd") + p).value;
  }
}

}  // namespace

TEST_CASE("config validation") {
  auto c = tiny_config();
  CHECK_NOTHROW(c.validate());
  c.heads = 3;
  CHECK_THROWS_AS(c.validate(), std::invalid_argument);
  c = tiny_config();
  c.dropout = 1.0;
  CHECK_THROWS_AS(c.validate(), std::invalid_argument);
  c = tiny_config();
  c.input = brainmod::InputMode::kBands;
  const auto back = BrainConfig::from_meta(c.to_meta());
  CHECK(back.input == brainmod::InputMode::kBands);
  CHECK(back.channels == 3);
  CHECK(back.step_width() == 24);
}

TEST_CASE("bidirectional word encoder") {
  std::mt19937_64 rng(1);
  BrainModel<double> m(tiny_config(), {"A"}, 5);
  randomize(m.params(), rng);
  copy_direction(m);

  SUBCASE("single step: both halves come from the same column") {
    Tape<double> tape;
    const auto x = random_tensor<float>(1, 3, rng);
    const auto out = m.encode_word(tape, x).value();
    CHECK(half(out, 0) == half(out, 1));
  }
  SUBCASE("reversing time swaps the halves") {
    const auto x = random_tensor<float>(5, 3, rng);
    Tensor<float> rev({5, 3});
    for (std::size_t t = 0; t < 5; ++t)
      for (std::size_t c = 0; c < 3; ++c) rev.at(t, c) = x.at(4 - t, c);
    Tape<double> tape;
    const auto a = m.encode_word(tape, x).value();
    const auto b = m.encode_word(tape, rev).value();
    CHECK(half(a, 0) == half(b, 1));
    CHECK(half(a, 1) == half(b, 0));
  }
  SUBCASE("zero signal with zero biases gives zero") {
    for (const char* p : {"gru.fwd.b_x", "gru.fwd.b_h", "gru.bwd.b_x", "gru.bwd.b_h"}) m.params().get(p).value.fill(0.0);
    Tape<double> tape;
    const auto out = m.encode_word(tape, Tensor<float>({7, 3})).value();
    for (double v : out.values()) CHECK(v == 0.0);
  }
  SUBCASE("empty signal is rejected") {
    Tape<double> tape;
    CHECK_THROWS_AS(m.encode_word(tape, Tensor<float>()), std::invalid_argument);
    CHECK_THROWS_AS(m.encode_word(tape, Tensor<float>({2, 4})), std::invalid_argument);
  }
}

TEST_CASE("projection and pointwise convolution") {
  std::mt19937_64 rng(2);
  auto cfg = tiny_config();
  BrainModel<double> m(cfg, {"A"}, 5);
  randomize(m.params(), rng);
  const auto feats = random_tensor<double>(4, 4, rng);

  SUBCASE("identity convolution leaves the projection") {
    auto& w = m.params().get("conv.weight").value;
    w.fill(0.0);
    for (std::size_t i = 0; i < 4; ++i) w.at(i, i) = 1.0;
    m.params().get("conv.bias").value.fill(0.0);
    Tape<double> tape;
    auto x = tape.constant(feats);
    auto proj = numcore::add_row(numcore::matmul(x, tape.param(m.params().get("proj.weight"))),
                                 tape.param(m.params().get("proj.bias")));
    CHECK(m.project_and_conv(tape, x).value() == proj.value());
  }
  SUBCASE("row permutation commutes") {
    const std::vector<std::size_t> perm{2, 0, 3, 1};
    Tensor<double> permuted({4, 4});
    for (std::size_t r = 0; r < 4; ++r)
      for (std::size_t c = 0; c < 4; ++c) permuted.at(r, c) = feats.at(perm[r], c);
    Tape<double> tape;
    const auto a = m.project_and_conv(tape, tape.constant(feats)).value();
    const auto b = m.project_and_conv(tape, tape.constant(permuted)).value();
    for (std::size_t r = 0; r < 4; ++r)
      for (std::size_t c = 0; c < a.cols(); ++c) CHECK(b.at(r, c) == a.at(perm[r], c));
  }
}

TEST_CASE("subject layer") {
  std::mt19937_64 rng(3);
  BrainModel<double> m(tiny_config(), {"A", "B"}, 5);
  const auto feats = random_tensor<double>(3, 4, rng);
  Tape<double> tape;
  auto x = tape.constant(feats);
  CHECK(m.subject_layer(tape, x, "A").value() == feats);

  m.subject_vector("B").value.fill(2.0);
  {
    Tape<double> t2;
    const auto out = m.subject_layer(t2, t2.constant(feats), "B").value();
    for (std::size_t i = 0; i < feats.size(); ++i) CHECK(out[i] == 2.0 * feats[i]);
  }
  m.subject_vector("B").value = Tensor<double>::matrix(1, 4, {1.0, 0.5, 1.0, -3.0});
  {
    Tape<double> t3;
    const auto a = m.subject_layer(t3, t3.constant(feats), "A").value();
    const auto b = m.subject_layer(t3, t3.constant(feats), "B").value();
    for (std::size_t r = 0; r < 3; ++r) {
      CHECK(a.at(r, 0) == b.at(r, 0));
      CHECK(a.at(r, 1) != b.at(r, 1));
      CHECK(a.at(r, 2) == b.at(r, 2));
      CHECK(a.at(r, 3) != b.at(r, 3));
    }
  }
  Tape<double> t4;
  CHECK_THROWS_AS(m.subject_layer(t4, t4.constant(feats), "C"), brainmod::UnknownSubjectError);
  CHECK_THROWS_AS(m.subject_vector("C"), brainmod::UnknownSubjectError);
}

TEST_CASE("brain transformer encoder") {
  std::mt19937_64 rng(4);
  BrainModel<double> m(tiny_config(), {"A"}, 5);
  randomize(m.params(), rng, 0.4);
  const auto feats = random_tensor<double>(4, 4, rng);
  const std::vector<std::size_t> perm{3, 1, 0, 2};
  Tensor<double> permuted({4, 4});
  for (std::size_t r = 0; r < 4; ++r)
    for (std::size_t c = 0; c < 4; ++c) permuted.at(r, c) = feats.at(perm[r], c);

  auto run = [&](const Tensor<double>& x) {
    Tape<double> tape;
    return m.transformer(tape, tape.constant(x)).value();
  };
  auto is_permuted = [&](const Tensor<double>& a, const Tensor<double>& b) {
    for (std::size_t r = 0; r < 4; ++r)
      for (std::size_t c = 0; c < a.cols(); ++c)
        if (std::abs(b.at(r, c) - a.at(perm[r], c)) > 1e-12) return false;
    return true;
  };
  CHECK(run(feats) == run(feats));
  CHECK_FALSE(is_permuted(run(feats), run(permuted)));
  m.params().get("bte.positions").value.fill(0.0);
  CHECK(is_permuted(run(feats), run(permuted)));

  Tape<double> tape;
  CHECK_THROWS_AS(m.transformer(tape, tape.constant(Tensor<double>({6, 4}))), brainmod::CapacityError);
}

TEST_CASE("residual MLP") {
  std::mt19937_64 rng(5);
  auto cfg = tiny_config();
  BrainModel<double> m(cfg, {"A"}, 5);
  randomize(m.params(), rng);
  for (std::size_t rows : {1, 2, 5}) {
    Tape<double> tape;
    CHECK(m.residual_mlp(tape, tape.constant(random_tensor<double>(rows, 4, rng))).value().shape() ==
          numcore::Shape{rows, 3});
  }
  for (const char* p : {"mlp.fc1.weight", "mlp.fc1.bias", "mlp.fc2.weight", "mlp.fc2.bias"}) {
    m.params().get(p).value.fill(0.0);
  }
  const auto h = random_tensor<double>(3, 4, rng);
  Tape<double> tape;
  const auto out = m.residual_mlp(tape, tape.constant(h)).value();
  const auto short_cut = numcore::matmul(tape.constant(h), tape.param(m.params().get("mlp.shortcut"))).value();
  CHECK(out == short_cut);
  CHECK_FALSE(m.params().get("mlp.shortcut").trainable);
}

TEST_CASE("brain blocks pass grad_check") {
  std::mt19937_64 rng(6);
  BrainModel<double> m(tiny_config(), {"A", "B"}, 9);
  randomize(m.params(), rng, 0.5);
  auto& store = m.params();
  auto& input = store.add("test.input", random_tensor<double>(3, 4, rng));
  const auto words = random_words(3, 3, rng);
  const auto weights = random_tensor<double>(3, 4, rng);
  const auto w3 = random_tensor<double>(3, 3, rng);

  auto check = [&](const char* name, auto&& f) {
    const auto r = numcore::grad_check(store, f, 1e-4);
    INFO(name, ": worst ", r.worst_param, "[", r.worst_index, "] analytic ", r.analytic, " numeric ", r.numeric);
    CHECK(r.max_rel_error <= 1e-4);
  };
  check("projection+conv", [&](Tape<double>& t) {
    return numcore::sum(numcore::mul(m.project_and_conv(t, t.param(input)), t.constant(weights)));
  });
  check("subject layer", [&](Tape<double>& t) {
    return numcore::sum(numcore::mul(m.subject_layer(t, t.param(input), "B"), t.constant(weights)));
  });
  check("transformer", [&](Tape<double>& t) {
    return numcore::sum(numcore::mul(m.transformer(t, t.param(input)), t.constant(weights)));
  });
  check("residual mlp", [&](Tape<double>& t) {
    return numcore::sum(numcore::mul(m.residual_mlp(t, t.param(input)), t.constant(w3)));
  });
  check("full encoder", [&](Tape<double>& t) {
    return numcore::sum(numcore::mul(m.forward(t, words, "A"), t.constant(w3)));
  });
}

TEST_CASE("full encoder contract") {
  std::mt19937_64 rng(7);
  BrainModel<float> m(tiny_config(), {"A", "B"}, 5);
  const auto words = random_words(4, 3, rng);
  const auto za = m.infer(words, "A");
  CHECK(za.shape() == numcore::Shape{4, 3});
  CHECK(za == m.infer(words, "A"));
  m.subject_vector("B").value = random_tensor<float>(1, 4, rng);
  CHECK_FALSE(za == m.infer(words, "B"));
  CHECK_THROWS_AS(m.infer(words, "nobody"), brainmod::UnknownSubjectError);
  CHECK_THROWS_AS(m.infer({}, "A"), std::invalid_argument);
}

TEST_CASE("checkpoint round-trip preserves every parameter") {
  BrainModel<float> a(tiny_config(), {"A", "B"}, 5);
  std::mt19937_64 rng(8);
  randomize(a.params(), rng);
  const auto bytes = numcore::encode_checkpoint(numcore::snapshot(a.params(), 5, tiny_config().to_meta()));
  const auto ckpt = numcore::decode_checkpoint(bytes);
  BrainModel<float> b(BrainConfig::from_meta(ckpt.meta), {"A", "B"}, 77);
  numcore::restore(b.params(), ckpt);
  CHECK(a.params().checksum() == b.params().checksum());
}

TEST_CASE("gather_inputs gates on fixation and supports band features") {
  dataio::SynthConfig sc;
  sc.n_subjects = 1;
  sc.n_sentences = 2;
  sc.vocab_size = 10;
  sc.channels = 3;
  sc.embed_dim = 3;
  sc.min_samples = 4;
  sc.max_samples = 6;
  auto syn = dataio::synth_generate(sc);
  auto sent = syn.manifest.subjects[0].sentences[0];
  const std::size_t n = sent.words.size();
  sent.words[1].has_fixation = false;
  sent.words[1].raw_eeg = Tensor<float>();
  auto cfg = tiny_config();
  const auto in = brainmod::gather_inputs(sent, cfg);
  CHECK(in.words.size() == n - 1);
  CHECK(in.texts[1] == sent.words[2].text);
  CHECK(in.words[0].shape() == numcore::Shape{sent.words[0].raw_eeg.cols(), 3});
  cfg.input = brainmod::InputMode::kBands;
  const auto bands = brainmod::gather_inputs(sent, cfg);
  CHECK(bands.words[0].shape() == numcore::Shape{3, 24});
  cfg.channels = 4;
  cfg.input = brainmod::InputMode::kRaw;
  CHECK_THROWS_AS(brainmod::gather_inputs(sent, cfg), std::invalid_argument);
}

TEST_CASE("stage 1 training") {
  dataio::SynthConfig sc;
  sc.n_subjects = 2;
  sc.n_sentences = 30;
  sc.vocab_size = 12;
  sc.channels = 8;
  sc.embed_dim = 4;
  sc.min_samples = 4;
  sc.max_samples = 8;
  sc.seed = 4;
  auto syn = dataio::synth_generate(sc);
  // A sentence whose content does not tokenize to its word count is skipped.
  syn.manifest.subjects[0].sentences[0].content += " extra";
  auto split = dataio::split_dataset(syn.manifest, {0.8, 0.1, 0.1}, 1);

  BrainConfig cfg;
  cfg.channels = 8;
  cfg.gru_hidden = 8;
  cfg.proj_dim = 8;
  cfg.d_h = 8;
  cfg.layers = 1;
  cfg.heads = 2;
  cfg.ffn_mult = 2;
  cfg.embed_dim = 4;
  cfg.max_words = 16;
  BrainModel<float> m(cfg, syn.manifest.subject_ids(), 3);
  brainmod::Stage1Config tc;
  tc.epochs = 4;
  tc.lr = 3e-3;
  std::size_t calls = 0;
  const auto res = brainmod::train_stage1(m, split.train, split.dev, syn.vocab, syn.table, tc,
                                          [&](const brainmod::EpochLoss&) { ++calls; });
  REQUIRE(res.history.size() == 5);
  CHECK(calls == 5);
  for (std::size_t i = 0; i < res.history.size(); ++i) CHECK(res.history[i].epoch == i);
  CHECK(res.history.back().train_loss < res.history.front().train_loss);
  CHECK(res.history.back().dev_loss < res.history.front().dev_loss);
  CHECK(res.table_checksum_before == res.table_checksum_after);
  CHECK(res.train_stats.skipped + res.dev_stats.skipped == 1);

  // Same seed, same result.
  BrainModel<float> m2(cfg, syn.manifest.subject_ids(), 3);
  const auto res2 = brainmod::train_stage1(m2, split.train, split.dev, syn.vocab, syn.table, tc);
  CHECK(m2.params().checksum() == m.params().checksum());

  // Frozen subject layer stays at ones.
  BrainModel<float> m3(cfg, syn.manifest.subject_ids(), 3);
  tc.train_subject_layer = false;
  brainmod::train_stage1(m3, split.train, split.dev, syn.vocab, syn.table, tc);
  for (float v : m3.subject_vector("S01").value.values()) CHECK(v == 1.0f);

  dataio::DatasetManifest empty = split.train;
  for (auto& s : empty.subjects) s.sentences.clear();
  CHECK_THROWS_AS(brainmod::train_stage1(m3, empty, split.dev, syn.vocab, syn.table, tc), brainmod::TrainingError);
}
