#pragma once

#include <cstddef>
#include <functional>
#include <span>
#include <vector>

namespace eeg2text::langmod {

// Returns log p(next | prefix) over the whole vocabulary. The prefix always
// starts with BOS.
using NextTokenScorer = std::function<std::vector<double>(std::span<const int> prefix)>;

struct Hypothesis {
  std::vector<int> tokens;  // BOS first; EOS last unless max_len was reached
  double logprob = 0.0;     // sum of step log-probabilities
  double score = 0.0;       // logprob / generated_length^alpha

  std::size_t generated() const noexcept { return tokens.empty() ? 0 : tokens.size() - 1; }
  bool finished() const noexcept;
};

// Decoding never emits PAD or BOS; generation stops after EOS or after
// max_len generated tokens.
Hypothesis greedy_decode(const NextTokenScorer& scorer, std::size_t max_len);

struct BeamConfig {
  std::size_t width = 4;
  std::size_t max_len = 64;
  double length_alpha = 0.0;
};

// Beam search. Candidates are ranked by length-normalized score with ties
// broken by parent rank and then token index. An EOS candidate ranked inside
// the beam leaves it and joins the finished set; the beam is refilled from
// the remaining live candidates. The search ends once `width` hypotheses have
// finished, at max_len, or (alpha = 0 only) when no live hypothesis can beat
// the best finished one.
Hypothesis beam_decode(const NextTokenScorer& scorer, const BeamConfig& config);

// Exhaustive search over every sequence the decoders can produce; the
// reference for small vocabularies.
Hypothesis exhaustive_decode(const NextTokenScorer& scorer, std::size_t max_len, double length_alpha);

double length_normalized(double logprob, std::size_t generated, double alpha);

}  // namespace eeg2text::langmod
