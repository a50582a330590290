#include "eeg2text/langmod/tokenizer.hpp"

#include <cctype>

namespace eeg2text::langmod {

namespace {

bool is_split_punct(char c) {
  switch (c) {
    case '.': case ',': case ';': case ':': case '!': case '?':
    case '\'': case '"': case '(': case ')':
      return true;
    default:
      return false;
  }
}

bool attaches_left(const std::string& tok) {
  if (tok.size() != 1) return false;
  switch (tok[0]) {
    case '.': case ',': case ';': case ':': case '!': case '?': case ')':
      return true;
    default:
      return false;
  }
}

std::string lower(std::string_view s) {
  std::string out(s);
  for (auto& c : out) c = static_cast<char>(std::tolower(static_cast<unsigned char>(c)));
  return out;
}

}  // namespace

std::vector<std::string> tokenize(std::string_view text) {
  std::vector<std::string> out;
  std::size_t i = 0;
  while (i < text.size()) {
    while (i < text.size() && std::isspace(static_cast<unsigned char>(text[i]))) ++i;
    std::size_t j = i;
    while (j < text.size() && !std::isspace(static_cast<unsigned char>(text[j]))) ++j;
    if (j == i) break;
    std::string_view word = text.substr(i, j - i);
    i = j;

    std::size_t lead = 0;
    while (lead < word.size() && is_split_punct(word[lead])) ++lead;
    std::size_t trail = word.size();
    while (trail > lead && is_split_punct(word[trail - 1])) --trail;

    for (std::size_t k = 0; k < lead; ++k) out.emplace_back(1, word[k]);
    if (trail > lead) out.push_back(lower(word.substr(lead, trail - lead)));
    for (std::size_t k = trail; k < word.size(); ++k) out.emplace_back(1, word[k]);
  }
  return out;
}

std::string detokenize(const std::vector<std::string>& tokens) {
  std::string out;
  for (const auto& tok : tokens) {
    if (!out.empty() && !attaches_left(tok)) out.push_back(' ');
    out += tok;
  }
  return out;
}

std::string normalize(std::string_view text) {
  std::string out;
  std::size_t i = 0;
  while (i < text.size()) {
    while (i < text.size() && std::isspace(static_cast<unsigned char>(text[i]))) ++i;
    std::size_t j = i;
    while (j < text.size() && !std::isspace(static_cast<unsigned char>(text[j]))) ++j;
    if (j == i) break;
    if (!out.empty()) out.push_back(' ');
    out += lower(text.substr(i, j - i));
    i = j;
  }
  return out;
}

}  // namespace eeg2text::langmod
