#include "eeg2text/refine/rule_based.hpp"

#include <algorithm>
#include <cctype>
#include <sstream>

namespace eeg2text::refine {

namespace {

bool is_mark(char c) {
  switch (c) {
    case '.': case ',': case ';': case ':': case '!': case '?':
      return true;
    default:
      return false;
  }
}

bool is_mark_token(const std::string& t) { return t.size() == 1 && is_mark(t[0]); }

bool same_folded(const std::string& a, const std::string& b) {
  return a.size() == b.size() &&
         std::equal(a.begin(), a.end(), b.begin(), [](unsigned char x, unsigned char y) {
           return std::tolower(x) == std::tolower(y);
         });
}

}  // namespace

std::vector<std::string> refine_tokens(std::string_view sentence) {
  std::vector<std::string> out;
  std::istringstream in{std::string(sentence)};
  std::string chunk;
  while (in >> chunk) {
    std::size_t b = 0, e = chunk.size();
    while (b < e && is_mark(chunk[b])) out.emplace_back(1, chunk[b++]);
    std::size_t tail = e;
    while (tail > b && is_mark(chunk[tail - 1])) --tail;
    if (tail > b) out.push_back(chunk.substr(b, tail - b));
    for (std::size_t i = tail; i < e; ++i) out.emplace_back(1, chunk[i]);
  }
  return out;
}

std::string refine_rule_based(std::string_view sentence) {
  std::vector<std::string> kept;
  for (auto& t : refine_tokens(sentence)) {
    if (!kept.empty() && same_folded(kept.back(), t)) continue;
    kept.push_back(std::move(t));
  }
  std::string text;
  for (const auto& t : kept) {
    if (!text.empty() && !is_mark_token(t)) text += ' ';
    text += t;
  }
  if (text.empty()) return text;
  for (auto& c : text) {
    const auto u = static_cast<unsigned char>(c);
    // Non-ASCII letters are left alone rather than skipped past.
    if (u >= 0x80) break;
    if (std::isalpha(u)) {
      c = static_cast<char>(std::toupper(u));
      break;
    }
  }
  const char last = text.back();
  if (last != '.' && last != '!' && last != '?') text += '.';
  return text;
}

}  // namespace eeg2text::refine
