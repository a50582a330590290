#pragma once

#include <filesystem>
#include <optional>
#include <span>
#include <stdexcept>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

namespace eeg2text::langmod {

inline constexpr int kPad = 0;
inline constexpr int kBos = 1;
inline constexpr int kEos = 2;
inline constexpr int kUnk = 3;
inline constexpr int kNumSpecials = 4;

inline constexpr std::string_view kPadToken = "<pad>";
inline constexpr std::string_view kBosToken = "<bos>";
inline constexpr std::string_view kEosToken = "<eos>";
inline constexpr std::string_view kUnkToken = "<unk>";

class VocabularyError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Ordered token set with the four special tokens at indices 0-3.
class Vocabulary {
 public:
  Vocabulary();

  // `tokens` must start with the specials in order and contain no duplicates.
  explicit Vocabulary(std::vector<std::string> tokens);

  // Specials followed by `words` in first-occurrence order.
  static Vocabulary from_words(const std::vector<std::string>& words);

  // Appends `token` if absent; returns its index either way.
  int add(const std::string& token);

  std::optional<int> find(std::string_view token) const;
  // Index of `token`, or kUnk when absent.
  int index(std::string_view token) const;
  const std::string& token(int index) const;

  std::size_t size() const noexcept { return tokens_.size(); }
  const std::vector<std::string>& tokens() const noexcept { return tokens_; }

  std::vector<int> encode(const std::vector<std::string>& tokens) const;
  // Token strings for `ids`, dropping PAD, BOS and EOS.
  std::vector<std::string> decode(std::span<const int> ids) const;

  static bool is_special(int index) noexcept { return index >= 0 && index < kNumSpecials; }

  // One token per line in index order.
  std::string to_sidecar() const;
  static Vocabulary from_sidecar(std::string_view text);
  void save(const std::filesystem::path& path) const;
  static Vocabulary load(const std::filesystem::path& path);

  friend bool operator==(const Vocabulary& a, const Vocabulary& b) { return a.tokens_ == b.tokens_; }

 private:
  std::vector<std::string> tokens_;
  std::unordered_map<std::string, int> index_;
};

}  // namespace eeg2text::langmod
