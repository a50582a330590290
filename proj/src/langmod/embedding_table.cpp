#include "eeg2text/langmod/embedding_table.hpp"

#include <fstream>
#include <iterator>

#include "eeg2text/numcore/bytes.hpp"
#include "eeg2text/numcore/rng.hpp"

namespace eeg2text::langmod {

namespace {
constexpr std::string_view kMagic{"E2TEMB\0\0", 8};
}

EmbeddingTable::EmbeddingTable(numcore::Tensor<float> weights, bool frozen)
    : weights_(std::move(weights)), frozen_(frozen) {
  if (weights_.rank() != 2) throw EmbeddingError("embedding table must be a matrix");
}

std::span<const float> EmbeddingTable::row(int index) const {
  if (index < 0 || static_cast<std::size_t>(index) >= rows()) {
    throw std::out_of_range("embedding row " + std::to_string(index) + " outside table of " +
                            std::to_string(rows()) + " rows");
  }
  return weights_.row(static_cast<std::size_t>(index));
}

numcore::Tensor<float> EmbeddingTable::lookup(std::span<const int> ids) const {
  if (ids.empty()) throw EmbeddingError("lookup of an empty token list");
  numcore::Tensor<float> out({ids.size(), dim()});
  for (std::size_t i = 0; i < ids.size(); ++i) {
    auto r = row(ids[i]);
    std::copy(r.begin(), r.end(), out.data() + i * dim());
  }
  return out;
}

std::uint64_t EmbeddingTable::checksum() const {
  std::uint64_t h = numcore::fnv1a64({});
  for (std::size_t d : weights_.shape()) {
    const auto le = numcore::to_little_endian(static_cast<std::uint64_t>(d));
    h = numcore::fnv1a64({reinterpret_cast<const char*>(&le), sizeof le}, h);
  }
  return numcore::fnv1a64(
      {reinterpret_cast<const char*>(weights_.data()), weights_.size() * sizeof(float)}, h);
}

std::string encode_embedding_table(const EmbeddingTable& table) {
  numcore::ByteWriter w;
  w.bytes(kMagic);
  w.u32(static_cast<std::uint32_t>(table.rows()));
  w.u32(static_cast<std::uint32_t>(table.dim()));
  for (float f : table.weights().values()) w.f32(f);
  return w.take();
}

EmbeddingTable decode_embedding_table(std::string_view bytes) {
  numcore::ByteReader r(bytes);
  try {
    if (r.take(kMagic.size()) != kMagic) throw EmbeddingError("not an embedding table (bad magic)");
    const std::size_t rows = r.u32();
    const std::size_t dim = r.u32();
    if (rows == 0 || dim == 0) throw EmbeddingError("embedding table has a zero dimension");
    if (r.remaining() != rows * dim * 4) {
      throw EmbeddingError("embedding payload holds " + std::to_string(r.remaining()) +
                           " bytes, expected " + std::to_string(rows * dim * 4));
    }
    std::vector<float> data(rows * dim);
    for (auto& f : data) f = r.f32();
    return EmbeddingTable(numcore::Tensor<float>({rows, dim}, std::move(data)));
  } catch (const numcore::TruncatedError& e) {
    throw EmbeddingError(std::string("truncated embedding table: ") + e.what());
  }
}

void save_embedding_table(const std::filesystem::path& path, const EmbeddingTable& table) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw EmbeddingError("cannot open " + path.string() + " for writing");
  const auto bytes = encode_embedding_table(table);
  out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
  if (!out) throw EmbeddingError("failed writing " + path.string());
}

EmbeddingTable load_embedding_table(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw EmbeddingError("cannot open embedding table " + path.string());
  std::string bytes((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
  return decode_embedding_table(bytes);
}

TokenSpace load_token_space(const std::filesystem::path& table_path,
                            const std::filesystem::path& vocab_path) {
  TokenSpace ts{Vocabulary::load(vocab_path), load_embedding_table(table_path)};
  if (ts.vocab.size() != ts.table.rows()) {
    throw EmbeddingError("vocabulary " + vocab_path.string() + " has " +
                         std::to_string(ts.vocab.size()) + " tokens but table " +
                         table_path.string() + " has " + std::to_string(ts.table.rows()) + " rows");
  }
  return ts;
}

numcore::Tensor<float> target_embeddings(const std::vector<std::string>& tokens,
                                         const Vocabulary& vocab, const EmbeddingTable& table) {
  const auto ids = vocab.encode(tokens);
  return table.lookup(ids);
}

}  // namespace eeg2text::langmod
