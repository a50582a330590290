#include "eeg2text/metrics/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <map>
#include <numeric>
#include <sstream>
#include <stdexcept>

#include "eeg2text/langmod/tokenizer.hpp"
#include "json.hpp"

namespace eeg2text::metrics {

namespace {

using NgramMap = std::map<std::vector<std::string>, std::size_t>;

NgramMap ngrams(const Tokens& tokens, std::size_t n) {
  NgramMap out;
  if (n == 0 || tokens.size() < n) return out;
  for (std::size_t i = 0; i + n <= tokens.size(); ++i) {
    ++out[std::vector<std::string>(tokens.begin() + static_cast<std::ptrdiff_t>(i),
                                   tokens.begin() + static_cast<std::ptrdiff_t>(i + n))];
  }
  return out;
}

void require_n(std::size_t n) {
  if (n == 0) throw std::invalid_argument("n-gram order must be >= 1");
}

double brevity_penalty(std::size_t cand_len, std::size_t ref_len) {
  if (cand_len == 0) return ref_len == 0 ? 1.0 : 0.0;
  return std::min(1.0, std::exp(1.0 - static_cast<double>(ref_len) / static_cast<double>(cand_len)));
}

std::vector<double> cumulative(const std::vector<double>& p, double bp) {
  std::vector<double> out;
  double log_sum = 0.0;
  bool zero = false;
  for (std::size_t n = 0; n < p.size(); ++n) {
    if (p[n] <= 0.0) zero = true;
    if (!zero) log_sum += std::log(p[n]);
    out.push_back(zero ? 0.0 : bp * std::exp(log_sum / static_cast<double>(n + 1)));
  }
  return out;
}

double cosine(const std::vector<double>& a, const std::vector<double>& b) {
  double dot = 0.0, na = 0.0, nb = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    dot += a[i] * b[i];
    na += a[i] * a[i];
    nb += b[i] * b[i];
  }
  if (na <= 0.0 || nb <= 0.0) return 0.0;
  return dot / (std::sqrt(na) * std::sqrt(nb));
}

std::string pct(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.2f", 100.0 * v);
  return buf;
}

}  // namespace

NgramCounts clipped_counts(const Tokens& candidate, const Tokens& reference, std::size_t n) {
  require_n(n);
  const auto cand = ngrams(candidate, n);
  const auto ref = ngrams(reference, n);
  NgramCounts c;
  for (const auto& [g, count] : cand) {
    c.total += count;
    auto it = ref.find(g);
    if (it != ref.end()) c.matches += std::min(count, it->second);
  }
  return c;
}

double clipped_precision(const Tokens& candidate, const Tokens& reference, std::size_t n) {
  const auto c = clipped_counts(candidate, reference, n);
  return c.total == 0 ? 0.0 : static_cast<double>(c.matches) / static_cast<double>(c.total);
}

double unclipped_precision(const Tokens& candidate, const Tokens& reference, std::size_t n) {
  require_n(n);
  const auto cand = ngrams(candidate, n);
  const auto ref = ngrams(reference, n);
  std::size_t matches = 0, total = 0;
  for (const auto& [g, count] : cand) {
    total += count;
    if (ref.count(g)) matches += count;
  }
  return total == 0 ? 0.0 : static_cast<double>(matches) / static_cast<double>(total);
}

BleuReport corpus_bleu(const std::vector<Tokens>& candidates, const std::vector<Tokens>& references,
                       std::size_t max_n) {
  require_n(max_n);
  if (candidates.size() != references.size()) {
    throw std::invalid_argument("corpus_bleu: " + std::to_string(candidates.size()) +
                                " candidates but " + std::to_string(references.size()) + " references");
  }
  BleuReport r;
  std::vector<NgramCounts> sums(max_n);
  for (std::size_t i = 0; i < candidates.size(); ++i) {
    r.candidate_length += candidates[i].size();
    r.reference_length += references[i].size();
    for (std::size_t n = 1; n <= max_n; ++n) {
      const auto c = clipped_counts(candidates[i], references[i], n);
      sums[n - 1].matches += c.matches;
      sums[n - 1].total += c.total;
    }
  }
  for (const auto& s : sums) {
    r.precisions.push_back(s.total == 0 ? 0.0 : static_cast<double>(s.matches) / static_cast<double>(s.total));
  }
  r.brevity_penalty = brevity_penalty(r.candidate_length, r.reference_length);
  r.bleu = cumulative(r.precisions, r.brevity_penalty);
  return r;
}

BleuReport sentence_bleu(const Tokens& candidate, const Tokens& reference, std::size_t max_n) {
  require_n(max_n);
  BleuReport r;
  r.candidate_length = candidate.size();
  r.reference_length = reference.size();
  for (std::size_t n = 1; n <= max_n; ++n) {
    const auto c = clipped_counts(candidate, reference, n);
    if (n == 1) {
      r.precisions.push_back(c.total == 0 ? 0.0 : static_cast<double>(c.matches) / static_cast<double>(c.total));
    } else {
      r.precisions.push_back(static_cast<double>(c.matches + 1) / static_cast<double>(c.total + 1));
    }
  }
  r.brevity_penalty = brevity_penalty(r.candidate_length, r.reference_length);
  r.bleu = cumulative(r.precisions, r.brevity_penalty);
  return r;
}

double harmonic_f1(double precision, double recall) {
  const double s = precision + recall;
  return s <= 0.0 ? 0.0 : 2.0 * precision * recall / s;
}

PrfReport rouge_1(const Tokens& candidate, const Tokens& reference) {
  PrfReport r;
  if (candidate.empty() || reference.empty()) return r;
  const auto c = clipped_counts(candidate, reference, 1);
  r.precision = static_cast<double>(c.matches) / static_cast<double>(candidate.size());
  r.recall = static_cast<double>(c.matches) / static_cast<double>(reference.size());
  r.f1 = harmonic_f1(r.precision, r.recall);
  return r;
}

TableEmbedder::TableEmbedder(langmod::Vocabulary vocab, langmod::EmbeddingTable table)
    : vocab_(std::move(vocab)), table_(std::move(table)) {
  if (table_.rows() != vocab_.size()) {
    throw langmod::EmbeddingError("embedding table has " + std::to_string(table_.rows()) +
                                  " rows but the vocabulary has " + std::to_string(vocab_.size()) +
                                  " tokens");
  }
}

std::size_t TableEmbedder::dim() const { return table_.dim(); }

std::vector<double> TableEmbedder::embed(const std::string& token) const {
  const auto row = table_.row(vocab_.index(token));
  return {row.begin(), row.end()};
}

OneHotEmbedder::OneHotEmbedder(const std::vector<Tokens>& corpora) {
  for (const auto& tokens : corpora)
    for (const auto& t : tokens) index_.emplace(t, index_.size());
}

std::vector<double> OneHotEmbedder::embed(const std::string& token) const {
  std::vector<double> v(index_.size(), 0.0);
  if (auto it = index_.find(token); it != index_.end()) v[it->second] = 1.0;
  return v;
}

PrfReport bertscore(const Tokens& candidate, const Tokens& reference, const Embedder& embedder) {
  PrfReport r;
  if (candidate.empty() || reference.empty()) return r;
  std::vector<std::vector<double>> ce, re;
  for (const auto& t : candidate) ce.push_back(embedder.embed(t));
  for (const auto& t : reference) re.push_back(embedder.embed(t));
  std::vector<double> row_max(ce.size(), -1.0), col_max(re.size(), -1.0);
  for (std::size_t i = 0; i < ce.size(); ++i) {
    for (std::size_t j = 0; j < re.size(); ++j) {
      const double s = cosine(ce[i], re[j]);
      row_max[i] = std::max(row_max[i], s);
      col_max[j] = std::max(col_max[j], s);
    }
  }
  r.precision = std::accumulate(row_max.begin(), row_max.end(), 0.0) / static_cast<double>(ce.size());
  r.recall = std::accumulate(col_max.begin(), col_max.end(), 0.0) / static_cast<double>(re.size());
  r.f1 = harmonic_f1(r.precision, r.recall);
  return r;
}

CorpusRow corpus_eval(std::string model, const std::vector<std::string>& candidates,
                      const std::vector<std::string>& references, const Embedder& embedder,
                      std::size_t max_n) {
  if (candidates.empty()) throw std::invalid_argument("corpus_eval: no sentence pairs");
  if (candidates.size() != references.size()) {
    throw std::invalid_argument("corpus_eval: " + std::to_string(candidates.size()) +
                                " predictions but " + std::to_string(references.size()) + " references");
  }
  std::vector<Tokens> cand, ref;
  for (const auto& s : candidates) cand.push_back(langmod::tokenize(s));
  for (const auto& s : references) ref.push_back(langmod::tokenize(s));

  CorpusRow row;
  row.model = std::move(model);
  const auto bleu = corpus_bleu(cand, ref, max_n);
  row.bleu = bleu.bleu;
  row.precisions = bleu.precisions;
  row.sentence_bleu.assign(max_n, 0.0);
  const double count = static_cast<double>(cand.size());
  for (std::size_t i = 0; i < cand.size(); ++i) {
    const auto sb = sentence_bleu(cand[i], ref[i], max_n);
    for (std::size_t n = 0; n < max_n; ++n) row.sentence_bleu[n] += sb.bleu[n] / count;
    const auto rg = rouge_1(cand[i], ref[i]);
    const auto bs = bertscore(cand[i], ref[i], embedder);
    row.rouge.precision += rg.precision / count;
    row.rouge.recall += rg.recall / count;
    row.rouge.f1 += rg.f1 / count;
    row.bert.precision += bs.precision / count;
    row.bert.recall += bs.recall / count;
    row.bert.f1 += bs.f1 / count;
  }
  return row;
}

const std::vector<std::string>& CorpusReport::columns() {
  static const std::vector<std::string> cols = {
      "BLEU-1",    "BLEU-2",    "BLEU-3",    "BLEU-4",        "ROUGE-1 R",
      "ROUGE-1 P", "ROUGE-1 F", "BERTScore R", "BERTScore P", "BERTScore F"};
  return cols;
}

namespace {

std::vector<double> row_values(const CorpusRow& r) {
  std::vector<double> v;
  for (std::size_t n = 0; n < 4; ++n) v.push_back(n < r.bleu.size() ? r.bleu[n] : 0.0);
  v.insert(v.end(), {r.rouge.recall, r.rouge.precision, r.rouge.f1, r.bert.recall, r.bert.precision,
                     r.bert.f1});
  return v;
}

std::string pad(const std::string& s, std::size_t w, bool left) {
  if (s.size() >= w) return s;
  return left ? s + std::string(w - s.size(), ' ') : std::string(w - s.size(), ' ') + s;
}

}  // namespace

std::string CorpusReport::to_text() const {
  const auto& cols = columns();
  std::size_t name_w = 5;
  for (const auto& r : rows) name_w = std::max(name_w, r.model.size());
  std::ostringstream out;
  out << pad("Model", name_w, true);
  for (const auto& c : cols) out << "  " << pad(c, std::max<std::size_t>(c.size(), 6), false);
  out << '\n';
  for (const auto& r : rows) {
    out << pad(r.model, name_w, true);
    const auto v = row_values(r);
    for (std::size_t i = 0; i < cols.size(); ++i) {
      out << "  " << pad(pct(v[i]), std::max<std::size_t>(cols[i].size(), 6), false);
    }
    out << '\n';
  }
  out << '\n' << pad("Model", name_w, true);
  for (std::size_t n = 1; n <= 4; ++n) out << "  " << pad("p_" + std::to_string(n), 6, false);
  out << '\n';
  for (const auto& r : rows) {
    out << pad(r.model, name_w, true);
    for (std::size_t n = 0; n < 4; ++n) {
      out << "  " << pad(pct(n < r.precisions.size() ? r.precisions[n] : 0.0), 6, false);
    }
    out << '\n';
  }
  return out.str();
}

std::string CorpusReport::to_jsonl() const {
  std::string out;
  for (const auto& r : rows) {
    nlohmann::ordered_json j;
    j["model"] = r.model;
    const auto v = row_values(r);
    for (std::size_t i = 0; i < columns().size(); ++i) j[columns()[i]] = std::stod(pct(v[i]));
    for (std::size_t n = 0; n < 4; ++n) {
      j["p_" + std::to_string(n + 1)] = std::stod(pct(n < r.precisions.size() ? r.precisions[n] : 0.0));
    }
    out += j.dump() + '\n';
  }
  return out;
}

}  // namespace eeg2text::metrics
