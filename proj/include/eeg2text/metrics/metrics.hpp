#pragma once

#include <cstddef>
#include <memory>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

#include "eeg2text/langmod/embedding_table.hpp"
#include "eeg2text/langmod/vocabulary.hpp"

namespace eeg2text::metrics {

using Tokens = std::vector<std::string>;

struct NgramCounts {
  std::size_t matches = 0;  // clipped
  std::size_t total = 0;    // candidate n-grams
};

// Candidate n-gram matches clipped by the reference counts.
NgramCounts clipped_counts(const Tokens& candidate, const Tokens& reference, std::size_t n);

// matches / total over candidate n-grams; 0 when the candidate has none.
double clipped_precision(const Tokens& candidate, const Tokens& reference, std::size_t n);

// Same ratio without the clip: every candidate n-gram present in the
// reference counts as a match.
double unclipped_precision(const Tokens& candidate, const Tokens& reference, std::size_t n);

struct BleuReport {
  std::vector<double> precisions;  // p_1..p_N
  double brevity_penalty = 0.0;
  std::vector<double> bleu;  // cumulative BLEU-1..BLEU-N
  std::size_t candidate_length = 0;
  std::size_t reference_length = 0;
};

// Corpus BLEU: n-gram matches and totals are summed over all pairs before
// dividing; BP = min(1, exp(1 - ref_len / cand_len)) on corpus totals.
// Throws std::invalid_argument on a size mismatch or N = 0.
BleuReport corpus_bleu(const std::vector<Tokens>& candidates, const std::vector<Tokens>& references,
                       std::size_t max_n = 4);

// Single-pair BLEU with add-one smoothing of numerator and denominator for
// n >= 2.
BleuReport sentence_bleu(const Tokens& candidate, const Tokens& reference, std::size_t max_n = 4);

struct PrfReport {
  double precision = 0.0;
  double recall = 0.0;
  double f1 = 0.0;
};

// 2pr / (p + r), or 0 when p + r <= 0.
double harmonic_f1(double precision, double recall);

// Unigram overlap with clipping; an empty side yields zeros.
PrfReport rouge_1(const Tokens& candidate, const Tokens& reference);

// Maps a token to a fixed-width vector.
class Embedder {
 public:
  virtual ~Embedder() = default;
  virtual std::size_t dim() const = 0;
  virtual std::vector<double> embed(const std::string& token) const = 0;
};

// Rows of a token-embedding table; unknown tokens use the <unk> row.
class TableEmbedder : public Embedder {
 public:
  TableEmbedder(langmod::Vocabulary vocab, langmod::EmbeddingTable table);
  std::size_t dim() const override;
  std::vector<double> embed(const std::string& token) const override;

 private:
  langmod::Vocabulary vocab_;
  langmod::EmbeddingTable table_;
};

// One axis per distinct token of a fixed word list, so distinct known tokens
// are orthogonal. Tokens outside the list get the zero vector.
class OneHotEmbedder : public Embedder {
 public:
  explicit OneHotEmbedder(const std::vector<Tokens>& corpora);
  std::size_t dim() const override { return index_.size(); }
  std::vector<double> embed(const std::string& token) const override;

 private:
  std::unordered_map<std::string, std::size_t> index_;
};

// Greedy-matching BERTScore over cosine similarities without idf weighting.
// Zero-norm embeddings have similarity 0 to everything; an empty side yields
// zeros.
PrfReport bertscore(const Tokens& candidate, const Tokens& reference, const Embedder& embedder);

// One evaluated model: percentages in report column order.
struct CorpusRow {
  std::string model;
  std::vector<double> bleu;              // cumulative BLEU-1..4, corpus level
  std::vector<double> precisions;        // clipped p_1..p_4, corpus level
  std::vector<double> sentence_bleu;     // mean smoothed sentence BLEU-1..4
  PrfReport rouge;                       // mean over sentences
  PrfReport bert;                        // mean over sentences
};

// Tokenizes both sides with the decoder tokenizer and aggregates corpus
// BLEU, mean sentence ROUGE-1 and mean sentence BERTScore. Throws
// std::invalid_argument on empty input or a size mismatch.
CorpusRow corpus_eval(std::string model, const std::vector<std::string>& candidates,
                      const std::vector<std::string>& references, const Embedder& embedder,
                      std::size_t max_n = 4);

struct CorpusReport {
  std::vector<CorpusRow> rows;

  static const std::vector<std::string>& columns();
  // Aligned text table (two decimals) followed by the clipped precisions.
  std::string to_text() const;
  // One JSON object per row, keyed by the column headers plus "model" and
  // "p_1".."p_4".
  std::string to_jsonl() const;
};

}  // namespace eeg2text::metrics
