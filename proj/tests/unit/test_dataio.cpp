#include <cmath>
#include <filesystem>
#include <set>

#include "doctest.h"
#include "eeg2text/dataio/format.hpp"
#include "eeg2text/dataio/split.hpp"
#include "eeg2text/dataio/synth.hpp"
#include "eeg2text/dataio/validate.hpp"
#include "eeg2text/langmod/tokenizer.hpp"

using namespace eeg2text::dataio;
using nlohmann::json;

namespace {

SynthConfig small_config(std::uint64_t seed = 3) {
  SynthConfig c;
  c.n_subjects = 2;
  c.n_sentences = 6;
  c.vocab_size = 20;
  c.channels = 6;
  c.embed_dim = 4;
  c.min_samples = 5;
  c.max_samples = 9;
  c.seed = seed;
  return c;
}

std::size_t count_rule(const std::vector<Violation>& v, const std::string& rule) {
  std::size_t n = 0;
  for (const auto& x : v) n += x.rule == rule;
  return n;
}

}  // namespace

TEST_CASE("nyquist_min_rate examples") {
  CHECK(nyquist_min_rate(100.0) == 200.0);
  CHECK(nyquist_min_rate(0.0) == 0.0);
  CHECK(nyquist_min_rate(49.5) == 99.0);
  CHECK_THROWS_AS(nyquist_min_rate(-1.0), std::domain_error);
}

TEST_CASE("frequency bands") {
  CHECK(kBands.size() == 8);
  for (const auto& b : kBands) CHECK(b.lo < b.hi);
  CHECK(kBands[7].name == "gamma2");
  CHECK(highest_band_edge() == 49.5);
}

TEST_CASE("validate_dataset examples") {
  auto m = synth_generate(small_config()).manifest;
  CHECK(validate_dataset(m).empty());

  SUBCASE("one short word") {
    auto& raw = m.subjects[1].sentences[2].words[1].raw_eeg;
    raw = Matrix({m.channels - 1, raw.cols()}, 0.5f);
    const auto v = validate_dataset(m);
    REQUIRE(v.size() == 1);
    CHECK(v[0].rule == rule::kChannelCount);
    CHECK(v[0].subject_id == "S02");
    CHECK(v[0].sentence == 2u);
    CHECK(v[0].word == 1u);
    CHECK(v[0].to_string() == "subject S02 sentence 2 word 1: channel_count: raw_eeg has 5 rows, expected 6");
  }
  SUBCASE("sampling rate under the band limit") {
    m.sampling_rate = 90.0;
    const auto v = validate_dataset(m);
    REQUIRE(v.size() == 1);
    CHECK(v[0].rule == rule::kNyquist);
  }
  SUBCASE("band features of the wrong shape") {
    m.subjects[0].sentences[0].words[0].band_features[Window::GD] = Matrix({7, m.channels});
    const auto v = validate_dataset(m);
    REQUIRE(v.size() == 1);
    CHECK(v[0].rule == rule::kBandShape);
  }
  SUBCASE("fixated word without signal, unfixated word without signal") {
    auto& w = m.subjects[0].sentences[0].words;
    w[0].raw_eeg = Matrix();
    w[1].raw_eeg = Matrix();
    w[1].has_fixation = false;
    const auto v = validate_dataset(m);
    REQUIRE(v.size() == 1);
    CHECK(v[0].rule == rule::kEmptySignal);
    CHECK(v[0].word == 0u);
  }
  SUBCASE("structural rules") {
    m.subjects[1].subject_id = "S01";
    m.subjects[0].sentences[0].content = " ";
    m.subjects[0].sentences[1].words.clear();
    const auto v = validate_dataset(m);
    CHECK(count_rule(v, rule::kDuplicateSubject) == 1);
    CHECK(count_rule(v, rule::kEmptyContent) == 1);
    CHECK(count_rule(v, rule::kEmptyWords) == 1);
    CHECK(v.size() == 3);
  }
}

TEST_CASE("base64 round-trip") {
  for (const std::string& s : std::vector<std::string>{"", "a", "ab", "abc", "abcd", std::string("\0\xff\x10", 3)}) {
    CHECK(base64_decode(base64_encode(s)) == s);
  }
  CHECK(base64_encode("hello") == "aGVsbG8=");
  CHECK_THROWS_AS(base64_decode("abc"), PayloadError);
  CHECK_THROWS_AS(base64_decode("a$c="), PayloadError);
}

TEST_CASE("save/load round-trip is the identity on randomized manifests") {
  const auto dir = std::filesystem::temp_directory_path() / "e2t_test_dataio";
  std::filesystem::create_directories(dir);
  for (std::uint64_t seed = 1; seed <= 50; ++seed) {
    auto cfg = small_config(seed);
    cfg.sigma = 0.1 * static_cast<double>(seed % 4);
    cfg.n_subjects = 1 + seed % 3;
    auto m = synth_generate(cfg).manifest;
    if (seed % 5 == 0) {
      m.subjects[0].sentences[0].sentence_eeg = Matrix({m.channels, 3}, -2.5f);
      m.subjects[0].sentences[0].words[0].has_fixation = false;
      m.subjects[0].sentences[0].words[0].raw_eeg = Matrix();
      m.subjects[0].sentences[0].words[0].band_features.clear();
    }
    save_dataset(m, dir / "m.ndjson");
    CHECK(load_dataset(dir / "m.ndjson") == m);
  }
}

TEST_CASE("load errors are distinct") {
  auto m = synth_generate(small_config()).manifest;
  const auto text = encode_dataset(m);
  const auto first_nl = text.find('\n');
  auto header = json::parse(text.substr(0, first_nl));
  const std::string body = text.substr(first_nl + 1);

  SUBCASE("unknown format version") {
    header["format_version"] = 99;
    CHECK_THROWS_AS(decode_dataset(header.dump() + "\n" + body), VersionError);
  }
  SUBCASE("payload length disagrees with its shape") {
    auto lines = body;
    auto rec = json::parse(lines.substr(0, lines.find('\n')));
    rec["words"][0]["raw_eeg"]["shape"][1] = rec["words"][0]["raw_eeg"]["shape"][1].get<int>() + 1;
    try {
      decode_dataset(header.dump() + "\n" + rec.dump() + "\n");
      FAIL("expected PayloadError");
    } catch (const PayloadError& e) {
      const std::string msg = e.what();
      CHECK(msg.find("record 1") != std::string::npos);
      CHECK(msg.find("word 0 raw_eeg") != std::string::npos);
    }
  }
  SUBCASE("truncated payload") {
    auto rec = json::parse(body.substr(0, body.find('\n')));
    auto data = rec["words"][0]["raw_eeg"]["data"].get<std::string>();
    rec["words"][0]["raw_eeg"]["data"] = data.substr(0, data.size() - 8);
    CHECK_THROWS_AS(decode_dataset(header.dump() + "\n" + rec.dump() + "\n"), PayloadError);
  }
  SUBCASE("malformed record") {
    CHECK_THROWS_AS(decode_dataset(header.dump() + "\n{\"subject_id\": \"S01\"}\n"), FormatError);
    CHECK_THROWS_AS(decode_dataset(header.dump() + "\n{not json\n"), FormatError);
    CHECK_THROWS_AS(decode_dataset(text.substr(0, text.size() - 20)), FormatError);
  }
}

TEST_CASE("split_dataset examples and partition property") {
  auto cfg = small_config();
  cfg.n_sentences = 10;
  const auto m = synth_generate(cfg).manifest;
  const auto a = split_dataset(m, {0.8, 0.1, 0.1}, 7);
  CHECK(a.train.subjects[0].sentences.size() == 8);
  CHECK(a.dev.subjects[0].sentences.size() == 1);
  CHECK(a.test.subjects[0].sentences.size() == 1);
  const auto b = split_dataset(m, {0.8, 0.1, 0.1}, 7);
  CHECK(a.train == b.train);
  CHECK(a.dev == b.dev);
  CHECK(a.test == b.test);

  auto contents = [](const DatasetManifest& d) {
    std::set<std::string> out;
    for (const auto& s : d.subjects)
      for (const auto& x : s.sentences) out.insert(x.content);
    return out;
  };
  for (std::uint64_t seed = 0; seed < 20; ++seed) {
    const auto s = split_dataset(m, {0.6, 0.25, 0.15}, seed);
    const auto tr = contents(s.train), dv = contents(s.dev), te = contents(s.test);
    std::set<std::string> all;
    for (const auto* part : {&tr, &dv, &te}) {
      for (const auto& c : *part) CHECK(all.insert(c).second);
    }
    CHECK(all == contents(m));
    // Both subjects' copies of a sentence land together.
    CHECK(s.train.subjects[0].sentences.size() == s.train.subjects[1].sentences.size());
    CHECK(s.train.sentence_count() + s.dev.sentence_count() + s.test.sentence_count() == m.sentence_count());
  }
  CHECK_THROWS_AS(split_dataset(m, {0.8, 0.2, 0.0}, 1), std::invalid_argument);
  CHECK_THROWS_AS(split_dataset(m, {0.8, 0.1, 0.2}, 1), std::invalid_argument);
}

TEST_CASE("synth_generate examples") {
  SUBCASE("noiseless signals are constant over time and equal the generative map") {
    auto r = synth_generate(small_config());
    for (std::size_t s = 0; s < r.manifest.subjects.size(); ++s) {
      for (const auto& sent : r.manifest.subjects[s].sentences) {
        for (const auto& w : sent.words) {
          const auto& e = r.table.row(r.vocab.index(w.text));
          for (std::size_t c = 0; c < r.manifest.channels; ++c) {
            double acc = 0.0;
            for (std::size_t k = 0; k < e.size(); ++k) {
              acc += static_cast<double>(r.truth.mixing.at(c, k)) * e[k];
            }
            const float expected = static_cast<float>(static_cast<double>(r.truth.gains[s][c]) * acc);
            for (std::size_t t = 0; t < w.raw_eeg.cols(); ++t) CHECK(w.raw_eeg.at(c, t) == expected);
          }
        }
      }
    }
  }
  SUBCASE("same seed gives byte-identical files") {
    auto cfg = small_config();
    cfg.sigma = 0.3;
    CHECK(encode_dataset(synth_generate(cfg).manifest) == encode_dataset(synth_generate(cfg).manifest));
    cfg.seed += 1;
    CHECK(encode_dataset(synth_generate(cfg).manifest) != encode_dataset(synth_generate(small_config()).manifest));
  }
  SUBCASE("channel means differ by the gain ratio") {
    auto cfg = small_config();
    cfg.sigma = 0.5;
    cfg.gain_ratio = 4.0;
    cfg.n_sentences = 40;
    cfg.min_samples = 60;
    cfg.max_samples = 80;
    auto r = synth_generate(cfg);
    // Per word occurrence, the mean over time estimates g_s[c] * (A e)[c];
    // the ratio of the two subjects' sums over occurrences estimates the
    // gain ratio for channels with a large enough clean signal.
    for (std::size_t c = 0; c < cfg.channels; ++c) {
      const double expected = r.truth.gains[1][c] / r.truth.gains[0][c];
      CHECK(std::max(expected, 1.0 / expected) >= 4.0);
      double num = 0.0, den = 0.0;
      for (std::size_t i = 0; i < cfg.n_sentences; ++i) {
        const auto& s0 = r.manifest.subjects[0].sentences[i];
        const auto& s1 = r.manifest.subjects[1].sentences[i];
        for (std::size_t wi = 0; wi < s0.words.size(); ++wi) {
          const auto clean0 = eeg2text::dataio::clean_signal(r.truth, r.table, 0, r.vocab.index(s0.words[wi].text));
          const double sign = clean0[c] >= 0 ? 1.0 : -1.0;
          double m0 = 0.0, m1 = 0.0;
          for (float v : s0.words[wi].raw_eeg.row(c)) m0 += v;
          for (float v : s1.words[wi].raw_eeg.row(c)) m1 += v;
          num += sign * m1 / static_cast<double>(s1.words[wi].raw_eeg.cols());
          den += sign * m0 / static_cast<double>(s0.words[wi].raw_eeg.cols());
        }
      }
      CHECK(num / den == doctest::Approx(expected).epsilon(0.05));
    }
  }
  SUBCASE("outputs validate and tokenize to their word lists") {
    auto cfg = small_config();
    cfg.sigma = 1.0;
    auto r = synth_generate(cfg);
    CHECK(validate_dataset(r.manifest).empty());
    CHECK(r.vocab.size() == cfg.vocab_size + 4);
    CHECK(r.table.rows() == r.vocab.size());
    CHECK(r.table.dim() == cfg.embed_dim);
    for (const auto& sent : r.manifest.subjects[0].sentences) {
      const auto toks = eeg2text::langmod::tokenize(sent.content);
      REQUIRE(toks.size() == sent.words.size());
      CHECK(toks.size() >= cfg.min_words);
      CHECK(toks.size() <= cfg.max_words);
      for (std::size_t i = 0; i < toks.size(); ++i) CHECK(toks[i] == sent.words[i].text);
    }
  }
  SUBCASE("ground truth round-trips") {
    auto r = synth_generate(small_config());
    const auto t = truth_from_json(truth_to_json(r.truth));
    CHECK(t.mixing == r.truth.mixing);
    CHECK(t.gains == r.truth.gains);
    CHECK(t.subject_ids == r.truth.subject_ids);
  }
  CHECK_THROWS_AS(synth_generate([] { auto c = small_config(); c.sigma = -1; return c; }()), std::invalid_argument);
}

TEST_CASE("band features follow the documented reduction") {
  Matrix raw({1, 24});
  for (std::size_t t = 0; t < 24; ++t) raw.at(0, t) = static_cast<float>(t);
  const auto f = band_features_from_signal(raw);
  // TRT: 24 samples, 3 per band; band 0 = mean(0, 1, 2) = 1.
  CHECK(f.at(Window::TRT).at(0, 0) == 1.0f);
  CHECK(f.at(Window::TRT).at(7, 0) == 22.0f);
  // FFD: first 8 samples, one per band.
  CHECK(f.at(Window::FFD).at(3, 0) == 3.0f);
  // GD: first 16 samples, two per band.
  CHECK(f.at(Window::GD).at(7, 0) == 14.5f);
}
