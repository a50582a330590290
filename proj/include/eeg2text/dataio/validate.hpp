#pragma once

#include <optional>
#include <string>
#include <vector>

#include "eeg2text/dataio/dataset.hpp"

namespace eeg2text::dataio {

// Rule identifiers carried by violations.
namespace rule {
inline constexpr const char* kChannelCount = "channel_count";
inline constexpr const char* kEmptySignal = "empty_signal";
inline constexpr const char* kBandShape = "band_shape";
inline constexpr const char* kNyquist = "nyquist";
inline constexpr const char* kDuplicateSubject = "duplicate_subject";
inline constexpr const char* kEmptyContent = "empty_content";
inline constexpr const char* kEmptyWords = "empty_words";
inline constexpr const char* kNonFinite = "non_finite";
}  // namespace rule

struct Violation {
  std::string subject_id;               // empty for manifest-level rules
  std::optional<std::size_t> sentence;  // index within the subject
  std::optional<std::size_t> word;      // index within the sentence
  std::string rule;
  std::string detail;

  // "subject S01 sentence 3 word 2: channel_count: raw_eeg has 104 rows, expected 105"
  std::string to_string() const;

  friend bool operator==(const Violation&, const Violation&) = default;
};

std::vector<Violation> validate_dataset(const DatasetManifest& manifest);

// Checks one sentence against a channel count. Indices are copied into the
// reported violations.
std::vector<Violation> validate_sentence(const SentenceRecord& sentence, std::size_t channels,
                                         const std::string& subject_id,
                                         std::size_t sentence_index);

std::string format_violations(const std::vector<Violation>& violations);

}  // namespace eeg2text::dataio
