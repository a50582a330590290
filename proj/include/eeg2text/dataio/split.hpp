#pragma once

#include <cstdint>
#include <string_view>

#include "eeg2text/dataio/dataset.hpp"

namespace eeg2text::dataio {

struct SplitRatios {
  double train = 0.8;
  double dev = 0.1;
  double test = 0.1;
};

struct DatasetSplit {
  DatasetManifest train;
  DatasetManifest dev;
  DatasetManifest test;
};

// Stable 64-bit hash of (content, seed) used to order sentences.
std::uint64_t content_hash(std::string_view content, std::uint64_t seed) noexcept;

// Partitions at sentence-content granularity: distinct contents are ordered
// by content_hash and cut into train/dev/test counts by largest-remainder
// rounding of the ratios, so a sentence read by several subjects lands in one
// split. Throws std::invalid_argument unless all ratios are positive and sum
// to 1 within 1e-9. Every output keeps the full subject list.
DatasetSplit split_dataset(const DatasetManifest& manifest, SplitRatios ratios, std::uint64_t seed);

}  // namespace eeg2text::dataio
