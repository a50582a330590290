#pragma once

#include <string>
#include <string_view>
#include <vector>

namespace eeg2text::langmod {

// Lowercases, splits on whitespace and detaches leading/trailing
// . , ; : ! ? ' " ( ) as separate tokens.
std::vector<std::string> tokenize(std::string_view text);

// Joins tokens with single spaces and drops the space before closing
// punctuation (. , ; : ! ? )).
std::string detokenize(const std::vector<std::string>& tokens);

// Lowercased, single-spaced form of `text` with no leading/trailing space.
std::string normalize(std::string_view text);

}  // namespace eeg2text::langmod
