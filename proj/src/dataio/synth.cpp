#include "eeg2text/dataio/synth.hpp"

#include <cmath>
#include <cstdio>
#include <algorithm>
#include <fstream>
#include <numeric>
#include <random>
#include <set>
#include <stdexcept>

#include "eeg2text/dataio/format.hpp"
#include "eeg2text/numcore/rng.hpp"

namespace eeg2text::dataio {

namespace {

using numcore::derive_seed;
using numcore::make_rng;
using numcore::Rng;

std::vector<std::string> make_words(std::size_t count, Rng& rng) {
  static constexpr std::string_view kConsonants = "bdfgklmnprstvz";
  static constexpr std::string_view kVowels = "aeiou";
  std::uniform_int_distribution<std::size_t> pick_c(0, kConsonants.size() - 1);
  std::uniform_int_distribution<std::size_t> pick_v(0, kVowels.size() - 1);
  std::uniform_int_distribution<int> syllables(2, 3);
  std::set<std::string> seen;
  std::vector<std::string> words;
  while (words.size() < count) {
    std::string w;
    const int n = syllables(rng) + static_cast<int>(words.size() / 4000);
    for (int i = 0; i < n; ++i) {
      w.push_back(kConsonants[pick_c(rng)]);
      w.push_back(kVowels[pick_v(rng)]);
    }
    if (seen.insert(w).second) words.push_back(std::move(w));
  }
  return words;
}

std::string subject_name(std::size_t i) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "S%02zu", i + 1);
  return buf;
}

}  // namespace

std::vector<float> clean_signal(const SynthGroundTruth& truth, const langmod::EmbeddingTable& table,
                                std::size_t subject_index, int token) {
  const auto e = table.row(token);
  const std::size_t channels = truth.mixing.rows(), dim = truth.mixing.cols();
  if (e.size() != dim) throw std::invalid_argument("clean_signal: embedding width mismatch");
  const auto& g = truth.gains.at(subject_index);
  std::vector<float> out(channels);
  for (std::size_t c = 0; c < channels; ++c) {
    double acc = 0.0;
    for (std::size_t k = 0; k < dim; ++k) {
      acc += static_cast<double>(truth.mixing.at(c, k)) * static_cast<double>(e[k]);
    }
    out[c] = static_cast<float>(static_cast<double>(g[c]) * acc);
  }
  return out;
}

std::map<Window, Matrix> band_features_from_signal(const Matrix& raw) {
  std::map<Window, Matrix> out;
  if (raw.empty()) return out;
  const std::size_t channels = raw.rows(), samples = raw.cols();
  const std::size_t lengths[3] = {(samples + 2) / 3, (2 * samples + 2) / 3, samples};
  for (std::size_t wi = 0; wi < kWindows.size(); ++wi) {
    const std::size_t w = lengths[wi];
    Matrix bands({kNumBands, channels});
    for (std::size_t b = 0; b < kNumBands; ++b) {
      const std::size_t lo = b * w / kNumBands;
      std::size_t hi = (b + 1) * w / kNumBands;
      if (hi <= lo) hi = lo + 1;
      for (std::size_t c = 0; c < channels; ++c) {
        double acc = 0.0;
        for (std::size_t t = lo; t < hi; ++t) acc += raw.at(c, t);
        bands.at(b, c) = static_cast<float>(acc / static_cast<double>(hi - lo));
      }
    }
    out.emplace(kWindows[wi], std::move(bands));
  }
  return out;
}

SynthResult synth_generate(const SynthConfig& cfg) {
  if (cfg.n_subjects == 0 || cfg.n_sentences == 0 || cfg.vocab_size == 0 || cfg.channels == 0 ||
      cfg.embed_dim == 0) {
    throw std::invalid_argument("synth: subject, sentence, vocabulary, channel and embedding counts must be >= 1");
  }
  if (!(cfg.sigma >= 0.0)) throw std::invalid_argument("synth: sigma must be >= 0");
  if (cfg.min_samples == 0 || cfg.min_samples > cfg.max_samples) {
    throw std::invalid_argument("synth: sample range must satisfy 1 <= min <= max");
  }
  if (cfg.min_words == 0 || cfg.min_words > cfg.max_words) {
    throw std::invalid_argument("synth: word range must satisfy 1 <= min <= max");
  }
  if (!(cfg.gain_ratio >= 1.0)) throw std::invalid_argument("synth: gain_ratio must be >= 1");

  SynthResult res;
  std::normal_distribution<double> normal(0.0, 1.0);

  // Vocabulary and frozen embedding table.
  {
    auto rng = make_rng(cfg.seed, "synth.vocab");
    res.vocab = langmod::Vocabulary::from_words(make_words(cfg.vocab_size, rng));
    auto erng = make_rng(cfg.seed, "synth.embedding");
    numcore::Tensor<float> w({res.vocab.size(), cfg.embed_dim});
    for (auto& v : w.values()) v = static_cast<float>(normal(erng));
    res.table = langmod::EmbeddingTable(std::move(w));
  }

  // Mixing matrix and subject gains.
  auto& truth = res.truth;
  truth.seed = cfg.seed;
  truth.sigma = cfg.sigma;
  {
    auto rng = make_rng(cfg.seed, "synth.mixing");
    std::normal_distribution<double> mix(0.0, 1.0 / std::sqrt(static_cast<double>(cfg.embed_dim)));
    truth.mixing = numcore::Tensor<float>({cfg.channels, cfg.embed_dim});
    for (auto& v : truth.mixing.values()) v = static_cast<float>(mix(rng));
  }
  // Gain levels are geometrically spaced; each channel deals the levels to
  // subjects in its own random order and jitters them by U[1, 1.25].
  const double spread = 1.25 * cfg.gain_ratio;
  std::vector<double> levels(cfg.n_subjects);
  for (std::size_t s = 0; s < cfg.n_subjects; ++s) {
    truth.subject_ids.push_back(subject_name(s));
    const double pos = cfg.n_subjects == 1
                           ? 0.0
                           : static_cast<double>(s) / static_cast<double>(cfg.n_subjects - 1) - 0.5;
    levels[s] = std::pow(spread, pos);
  }
  truth.gains.assign(cfg.n_subjects, std::vector<float>(cfg.channels));
  {
    auto rng = make_rng(cfg.seed, "synth.gain");
    std::uniform_real_distribution<double> jitter(1.0, 1.25);
    std::vector<std::size_t> deal(cfg.n_subjects);
    for (std::size_t c = 0; c < cfg.channels; ++c) {
      std::iota(deal.begin(), deal.end(), std::size_t{0});
      std::shuffle(deal.begin(), deal.end(), rng);
      for (std::size_t s = 0; s < cfg.n_subjects; ++s) {
        truth.gains[s][c] = static_cast<float>(levels[deal[s]] * jitter(rng));
      }
    }
  }

  // Sentences, shared by all subjects.
  std::vector<std::vector<int>> sentences(cfg.n_sentences);
  {
    const std::uint64_t base = derive_seed(cfg.seed, "synth.sentences");
    std::uniform_int_distribution<std::size_t> len(cfg.min_words, cfg.max_words);
    std::uniform_int_distribution<int> word(langmod::kNumSpecials,
                                            static_cast<int>(res.vocab.size()) - 1);
    for (std::size_t i = 0; i < cfg.n_sentences; ++i) {
      Rng rng(derive_seed(base, i));
      sentences[i].resize(len(rng));
      for (auto& t : sentences[i]) t = word(rng);
    }
  }

  auto& m = res.manifest;
  m.channels = cfg.channels;
  m.sampling_rate = cfg.sampling_rate;
  m.provenance = "synthetic: seed=" + std::to_string(cfg.seed) +
                 " subjects=" + std::to_string(cfg.n_subjects) +
                 " sentences=" + std::to_string(cfg.n_sentences) +
                 " vocab=" + std::to_string(cfg.vocab_size);
  const std::uint64_t noise_base = derive_seed(cfg.seed, "synth.samples");
  for (std::size_t s = 0; s < cfg.n_subjects; ++s) {
    SubjectData subj{truth.subject_ids[s], {}};
    std::vector<std::vector<float>> clean(res.vocab.size());
    for (std::size_t i = 0; i < cfg.n_sentences; ++i) {
      SentenceRecord rec;
      for (std::size_t wi = 0; wi < sentences[i].size(); ++wi) {
        const int tok = sentences[i][wi];
        if (clean[static_cast<std::size_t>(tok)].empty()) {
          clean[static_cast<std::size_t>(tok)] = clean_signal(truth, res.table, s, tok);
        }
        const auto& x = clean[static_cast<std::size_t>(tok)];
        Rng rng(derive_seed(noise_base, s * 1000003ull + i, wi));
        std::uniform_int_distribution<std::size_t> tdist(cfg.min_samples, cfg.max_samples);
        const std::size_t samples = tdist(rng);
        Matrix raw({cfg.channels, samples});
        for (std::size_t c = 0; c < cfg.channels; ++c) {
          for (std::size_t t = 0; t < samples; ++t) {
            raw.at(c, t) = cfg.sigma == 0.0
                               ? x[c]
                               : static_cast<float>(x[c] + cfg.sigma * normal(rng));
          }
        }
        WordRecord w;
        w.text = res.vocab.token(tok);
        w.has_fixation = true;
        w.band_features = band_features_from_signal(raw);
        w.raw_eeg = std::move(raw);
        if (!rec.content.empty()) rec.content.push_back(' ');
        rec.content += w.text;
        rec.words.push_back(std::move(w));
      }
      subj.sentences.push_back(std::move(rec));
    }
    m.subjects.push_back(std::move(subj));
  }
  return res;
}

nlohmann::json truth_to_json(const SynthGroundTruth& t) {
  nlohmann::json gains = nlohmann::json::array();
  for (const auto& g : t.gains) gains.push_back(matrix_to_json(Matrix({1, g.size()}, g)));
  return nlohmann::json{{"seed", t.seed},       {"sigma", t.sigma},
                        {"subjects", t.subject_ids}, {"gains", std::move(gains)},
                        {"mixing", matrix_to_json(t.mixing)}};
}

SynthGroundTruth truth_from_json(const nlohmann::json& j) {
  SynthGroundTruth t;
  try {
    t.seed = j.at("seed").get<std::uint64_t>();
    t.sigma = j.at("sigma").get<double>();
    t.subject_ids = j.at("subjects").get<std::vector<std::string>>();
    for (std::size_t i = 0; i < j.at("gains").size(); ++i) {
      const auto g = matrix_from_json(j["gains"][i], "gains " + std::to_string(i));
      t.gains.emplace_back(g.values().begin(), g.values().end());
    }
    t.mixing = matrix_from_json(j.at("mixing"), "mixing");
  } catch (const nlohmann::json::exception& e) {
    throw FormatError(std::string("ground truth: ") + e.what());
  }
  if (t.gains.size() != t.subject_ids.size()) throw FormatError("ground truth: gains/subjects count mismatch");
  return t;
}

void save_ground_truth(const SynthGroundTruth& truth, const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw DatasetError("cannot open " + path.string() + " for writing");
  out << truth_to_json(truth).dump() << '\n';
}

SynthGroundTruth load_ground_truth(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DatasetError("cannot open ground truth " + path.string());
  try {
    return truth_from_json(nlohmann::json::parse(in));
  } catch (const nlohmann::json::parse_error& e) {
    throw FormatError("ground truth " + path.string() + ": " + e.what());
  }
}

}  // namespace eeg2text::dataio
