#pragma once

#include <cstdint>
#include <filesystem>
#include <span>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

#include "eeg2text/langmod/vocabulary.hpp"
#include "eeg2text/numcore/tensor.hpp"

namespace eeg2text::langmod {

class EmbeddingError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// The frozen |V| x D_e token embedding table used as the regression target
// of the brain encoder.
class EmbeddingTable {
 public:
  EmbeddingTable() = default;
  explicit EmbeddingTable(numcore::Tensor<float> weights, bool frozen = true);

  std::size_t rows() const noexcept { return weights_.rows(); }
  std::size_t dim() const noexcept { return weights_.cols(); }
  bool frozen() const noexcept { return frozen_; }
  const numcore::Tensor<float>& weights() const noexcept { return weights_; }

  std::span<const float> row(int index) const;

  // M x D_e matrix of the rows for `ids`.
  numcore::Tensor<float> lookup(std::span<const int> ids) const;

  // FNV-1a over the shape and the raw float bytes.
  std::uint64_t checksum() const;

  friend bool operator==(const EmbeddingTable& a, const EmbeddingTable& b) {
    return a.weights_ == b.weights_;
  }

 private:
  numcore::Tensor<float> weights_;
  bool frozen_ = true;
};

// Binary import format: magic tag, u32 |V|, u32 D_e, then |V| * D_e
// little-endian floats in row-major order.
std::string encode_embedding_table(const EmbeddingTable& table);
EmbeddingTable decode_embedding_table(std::string_view bytes);
void save_embedding_table(const std::filesystem::path& path, const EmbeddingTable& table);
EmbeddingTable load_embedding_table(const std::filesystem::path& path);

// Loads a table file plus its token sidecar and checks the row count matches.
struct TokenSpace {
  Vocabulary vocab;
  EmbeddingTable table;
};
TokenSpace load_token_space(const std::filesystem::path& table_path,
                            const std::filesystem::path& vocab_path);

// Stage-1 regression target: one table row per token, UNK for unknown words.
numcore::Tensor<float> target_embeddings(const std::vector<std::string>& tokens,
                                         const Vocabulary& vocab, const EmbeddingTable& table);

}  // namespace eeg2text::langmod
