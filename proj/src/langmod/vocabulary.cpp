#include "eeg2text/langmod/vocabulary.hpp"

#include <fstream>
#include <iterator>
#include <sstream>

namespace eeg2text::langmod {

Vocabulary::Vocabulary()
    : Vocabulary(std::vector<std::string>{std::string(kPadToken), std::string(kBosToken),
                                          std::string(kEosToken), std::string(kUnkToken)}) {}

Vocabulary::Vocabulary(std::vector<std::string> tokens) : tokens_(std::move(tokens)) {
  const std::string_view specials[] = {kPadToken, kBosToken, kEosToken, kUnkToken};
  if (tokens_.size() < kNumSpecials) throw VocabularyError("vocabulary is missing special tokens");
  for (int i = 0; i < kNumSpecials; ++i) {
    if (tokens_[i] != specials[i]) {
      throw VocabularyError("vocabulary index " + std::to_string(i) + " must be " +
                            std::string(specials[i]) + ", found " + tokens_[i]);
    }
  }
  for (std::size_t i = 0; i < tokens_.size(); ++i) {
    if (tokens_[i].empty()) throw VocabularyError("empty token at index " + std::to_string(i));
    if (!index_.emplace(tokens_[i], static_cast<int>(i)).second) {
      throw VocabularyError("duplicate token '" + tokens_[i] + "' at index " + std::to_string(i));
    }
  }
}

Vocabulary Vocabulary::from_words(const std::vector<std::string>& words) {
  Vocabulary v;
  for (const auto& w : words) v.add(w);
  return v;
}

int Vocabulary::add(const std::string& token) {
  if (token.empty()) throw VocabularyError("cannot add an empty token");
  auto [it, inserted] = index_.emplace(token, static_cast<int>(tokens_.size()));
  if (inserted) tokens_.push_back(token);
  return it->second;
}

std::optional<int> Vocabulary::find(std::string_view token) const {
  auto it = index_.find(std::string(token));
  if (it == index_.end()) return std::nullopt;
  return it->second;
}

int Vocabulary::index(std::string_view token) const { return find(token).value_or(kUnk); }

const std::string& Vocabulary::token(int index) const {
  if (index < 0 || static_cast<std::size_t>(index) >= tokens_.size()) {
    throw std::out_of_range("token index " + std::to_string(index) + " outside vocabulary of size " +
                            std::to_string(tokens_.size()));
  }
  return tokens_[static_cast<std::size_t>(index)];
}

std::vector<int> Vocabulary::encode(const std::vector<std::string>& tokens) const {
  std::vector<int> out;
  out.reserve(tokens.size());
  for (const auto& t : tokens) out.push_back(index(t));
  return out;
}

std::vector<std::string> Vocabulary::decode(std::span<const int> ids) const {
  std::vector<std::string> out;
  for (int id : ids) {
    if (id == kPad || id == kBos || id == kEos) continue;
    out.push_back(token(id));
  }
  return out;
}

std::string Vocabulary::to_sidecar() const {
  std::string out;
  for (const auto& t : tokens_) {
    out += t;
    out.push_back('\n');
  }
  return out;
}

Vocabulary Vocabulary::from_sidecar(std::string_view text) {
  std::vector<std::string> tokens;
  std::size_t pos = 0;
  while (pos < text.size()) {
    auto nl = text.find('\n', pos);
    if (nl == std::string_view::npos) nl = text.size();
    std::string_view line = text.substr(pos, nl - pos);
    if (!line.empty() && line.back() == '\r') line.remove_suffix(1);
    tokens.emplace_back(line);
    pos = nl + 1;
  }
  return Vocabulary(std::move(tokens));
}

void Vocabulary::save(const std::filesystem::path& path) const {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw VocabularyError("cannot open " + path.string() + " for writing");
  out << to_sidecar();
}

Vocabulary Vocabulary::load(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw VocabularyError("cannot open vocabulary " + path.string());
  std::string text((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
  return from_sidecar(text);
}

}  // namespace eeg2text::langmod
