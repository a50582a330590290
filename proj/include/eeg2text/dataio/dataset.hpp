#pragma once

#include <array>
#include <cstddef>
#include <map>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "eeg2text/numcore/tensor.hpp"

namespace eeg2text::dataio {

using Matrix = numcore::Tensor<float>;

inline constexpr int kFormatVersion = 1;
inline constexpr std::size_t kDefaultChannels = 105;
inline constexpr double kDefaultSamplingRate = 500.0;

struct FrequencyBand {
  std::string_view name;
  double lo;
  double hi;
};

inline constexpr std::size_t kNumBands = 8;
inline constexpr std::array<FrequencyBand, kNumBands> kBands{{
    {"theta1", 4.0, 6.0},
    {"theta2", 6.5, 8.0},
    {"alpha1", 8.5, 10.0},
    {"alpha2", 10.5, 13.0},
    {"beta1", 13.5, 18.0},
    {"beta2", 18.5, 30.0},
    {"gamma1", 30.5, 40.0},
    {"gamma2", 40.0, 49.5},
}};

// Minimum sampling rate that resolves content up to f_max Hz. Throws
// std::domain_error for negative input.
double nyquist_min_rate(double f_max);

// Upper edge of the highest band, 49.5 Hz.
double highest_band_edge() noexcept;

// Eye-tracking windows over which band features are aggregated.
enum class Window { FFD, GD, TRT };
inline constexpr std::array<Window, 3> kWindows{Window::FFD, Window::GD, Window::TRT};
std::string_view window_name(Window w) noexcept;
std::optional<Window> parse_window(std::string_view name) noexcept;

struct WordRecord {
  std::string text;
  bool has_fixation = false;
  Matrix raw_eeg;  // C x T; empty when the word was not fixated
  std::map<Window, Matrix> band_features;  // each 8 x C

  friend bool operator==(const WordRecord&, const WordRecord&) = default;
};

struct SentenceRecord {
  std::string content;
  std::optional<Matrix> sentence_eeg;  // C x T, carried but unused by the model
  std::optional<Matrix> answer_eeg;    // opaque, carried only
  std::vector<WordRecord> words;

  friend bool operator==(const SentenceRecord&, const SentenceRecord&) = default;
};

struct SubjectData {
  std::string subject_id;
  std::vector<SentenceRecord> sentences;

  friend bool operator==(const SubjectData&, const SubjectData&) = default;
};

struct DatasetManifest {
  int format_version = kFormatVersion;
  std::size_t channels = kDefaultChannels;
  double sampling_rate = kDefaultSamplingRate;
  std::vector<SubjectData> subjects;
  std::string provenance;

  const SubjectData* find_subject(std::string_view id) const noexcept;
  std::vector<std::string> subject_ids() const;
  std::size_t sentence_count() const noexcept;

  friend bool operator==(const DatasetManifest&, const DatasetManifest&) = default;
};

}  // namespace eeg2text::dataio
