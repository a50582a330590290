#pragma once

#include <cstdint>
#include <string>
#include <vector>

namespace eeg2text::testing {

// Noisy decoder-style sentences: repeated words in varying case, runs of
// punctuation, irregular spacing, missing capitals and terminal marks.
std::vector<std::string> noisy_sentences(std::size_t count, std::uint64_t seed);

}  // namespace eeg2text::testing
