#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "eeg2text/dataio/dataset.hpp"
#include "eeg2text/langmod/embedding_table.hpp"
#include "eeg2text/langmod/vocabulary.hpp"
#include "json.hpp"

// Synthetic reading corpus with a known linear generative map. Every
// subject reads the same sentences; each word sample is
//   x_t = g_s * (A e(w)) + sigma * eps_t
// with A a C x D_e mixing matrix, e(w) the token embedding, g_s a positive
// per-subject channel gain and eps_t standard Gaussian noise.

namespace eeg2text::dataio {

struct SynthConfig {
  std::size_t n_subjects = 2;
  std::size_t n_sentences = 200;
  std::size_t vocab_size = 120;  // word tokens; the four specials come on top
  double sigma = 0.0;
  std::uint64_t seed = 1;
  std::size_t channels = kDefaultChannels;
  double sampling_rate = kDefaultSamplingRate;
  std::size_t embed_dim = 64;
  std::size_t min_samples = 20;
  std::size_t max_samples = 80;
  std::size_t min_words = 4;
  std::size_t max_words = 12;
  // Lower bound on the max/min gain ratio across subjects for every channel.
  // Gain levels are geometrically spaced; each channel assigns them to
  // subjects in an independent random order and jitters them by U[1, 1.25].
  double gain_ratio = 1.0;
};

struct SynthGroundTruth {
  numcore::Tensor<float> mixing;            // C x D_e
  std::vector<std::string> subject_ids;
  std::vector<std::vector<float>> gains;    // per subject, length C, all > 0
  double sigma = 0.0;
  std::uint64_t seed = 0;
};

struct SynthResult {
  DatasetManifest manifest;
  SynthGroundTruth truth;
  langmod::Vocabulary vocab;
  langmod::EmbeddingTable table;
};

// Throws std::invalid_argument for zero counts, negative sigma or an empty
// word-length or sample-count range.
SynthResult synth_generate(const SynthConfig& config);

// Noise-free channel vector g_s * (A e(token)) for one subject, accumulated
// in double and rounded once to float.
std::vector<float> clean_signal(const SynthGroundTruth& truth, const langmod::EmbeddingTable& table,
                                std::size_t subject_index, int token);

// Band features of a C x T signal. Windows: FFD covers the first ceil(T/3)
// samples, GD the first ceil(2T/3), TRT all T. Band b of a window of W
// samples is the per-channel mean over the b-th of 8 contiguous
// sub-segments [floor(bW/8), floor((b+1)W/8)); a sub-segment that would be
// empty uses the single sample at floor(bW/8).
std::map<Window, Matrix> band_features_from_signal(const Matrix& raw);

nlohmann::json truth_to_json(const SynthGroundTruth& truth);
SynthGroundTruth truth_from_json(const nlohmann::json& j);
void save_ground_truth(const SynthGroundTruth& truth, const std::filesystem::path& path);
SynthGroundTruth load_ground_truth(const std::filesystem::path& path);

}  // namespace eeg2text::dataio
