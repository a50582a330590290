#pragma once

#include <string>
#include <string_view>
#include <vector>

namespace eeg2text::refine {

// Tokens as the rule-based refiner sees them: whitespace-separated chunks
// with leading and trailing sentence punctuation (. , ; : ! ?) split off one
// mark at a time.
std::vector<std::string> refine_tokens(std::string_view sentence);

// Deterministic offline cleanup, applied in order:
//   collapse immediately repeated tokens (case-insensitive, first kept),
//   which also collapses repeated punctuation marks;
//   join with single spaces and no space before punctuation;
//   capitalize the first alphabetic character;
//   append "." unless the text already ends in . ! or ?
// Blank input yields an empty string. The function is idempotent.
std::string refine_rule_based(std::string_view sentence);

}  // namespace eeg2text::refine
