#include "eeg2text/langmod/decode.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <stdexcept>
#include <string>

#include "eeg2text/langmod/vocabulary.hpp"

namespace eeg2text::langmod {

namespace {

bool emittable(std::size_t token) { return token != kPad && token != kBos; }

std::vector<double> score_checked(const NextTokenScorer& scorer, std::span<const int> prefix) {
  auto lp = scorer(prefix);
  if (lp.size() <= static_cast<std::size_t>(kEos)) {
    throw std::invalid_argument("scorer returned " + std::to_string(lp.size()) +
                                " log-probabilities; the vocabulary must include the specials");
  }
  return lp;
}

// True when `a` ranks ahead of `b`: higher score first, equal scores keep
// the earlier position.
bool ahead(double a, double b) { return a > b; }

}  // namespace

bool Hypothesis::finished() const noexcept { return tokens.size() > 1 && tokens.back() == kEos; }

double length_normalized(double logprob, std::size_t generated, double alpha) {
  if (alpha == 0.0 || generated == 0) return logprob;
  return logprob / std::pow(static_cast<double>(generated), alpha);
}

Hypothesis greedy_decode(const NextTokenScorer& scorer, std::size_t max_len) {
  Hypothesis h;
  h.tokens.push_back(kBos);
  while (h.generated() < max_len) {
    const auto lp = score_checked(scorer, h.tokens);
    std::size_t best = lp.size();
    for (std::size_t v = 0; v < lp.size(); ++v) {
      if (!emittable(v)) continue;
      if (best == lp.size() || ahead(lp[v], lp[best])) best = v;
    }
    h.tokens.push_back(static_cast<int>(best));
    h.logprob += lp[best];
    if (best == static_cast<std::size_t>(kEos)) break;
  }
  h.score = h.logprob;
  return h;
}

Hypothesis beam_decode(const NextTokenScorer& scorer, const BeamConfig& config) {
  if (config.width == 0) throw std::invalid_argument("beam width must be >= 1");
  if (config.length_alpha < 0.0) throw std::invalid_argument("length_alpha must be >= 0");

  struct Candidate {
    std::size_t parent;
    int token;
    double logprob;
    double score;
  };

  std::vector<Hypothesis> live(1);
  live[0].tokens.push_back(kBos);
  std::vector<Hypothesis> finished;
  auto best_finished = [&]() -> const Hypothesis* {
    const Hypothesis* best = nullptr;
    for (const auto& h : finished) {
      if (!best || ahead(h.score, best->score)) best = &h;
    }
    return best;
  };

  for (std::size_t step = 1; step <= config.max_len && !live.empty(); ++step) {
    std::vector<Candidate> cands;
    for (std::size_t b = 0; b < live.size(); ++b) {
      const auto lp = score_checked(scorer, live[b].tokens);
      for (std::size_t v = 0; v < lp.size(); ++v) {
        if (!emittable(v)) continue;
        const double total = live[b].logprob + lp[v];
        cands.push_back({b, static_cast<int>(v), total,
                         length_normalized(total, step, config.length_alpha)});
      }
    }
    // Candidates were generated in (parent rank, token) order, so a stable
    // sort on score alone implements the tie-breaking rule.
    std::stable_sort(cands.begin(), cands.end(),
                     [](const Candidate& a, const Candidate& b) { return ahead(a.score, b.score); });

    std::vector<Hypothesis> next;
    for (std::size_t rank = 0; rank < cands.size() && next.size() < config.width; ++rank) {
      const auto& c = cands[rank];
      // An EOS candidate finishes only if it ranks inside the beam.
      if (c.token == kEos && rank >= config.width) continue;
      Hypothesis h;
      h.tokens = live[c.parent].tokens;
      h.tokens.push_back(c.token);
      h.logprob = c.logprob;
      h.score = c.score;
      (c.token == kEos ? finished : next).push_back(std::move(h));
    }
    if (step == config.max_len) {
      for (auto& h : next) finished.push_back(std::move(h));
      next.clear();
    }
    live = std::move(next);

    if (finished.size() >= config.width) break;
    if (config.length_alpha == 0.0 && !live.empty()) {
      // Log-probabilities only decrease as a hypothesis grows.
      const Hypothesis* best = best_finished();
      double live_best = -std::numeric_limits<double>::infinity();
      for (const auto& h : live) live_best = std::max(live_best, h.logprob);
      if (best && best->score >= live_best) live.clear();
    }
  }
  const Hypothesis* best = best_finished();
  if (!best) throw std::logic_error("beam search ended without a hypothesis");
  return *best;
}

Hypothesis exhaustive_decode(const NextTokenScorer& scorer, std::size_t max_len, double length_alpha) {
  Hypothesis best;
  bool have = false;
  Hypothesis cur;
  cur.tokens.push_back(kBos);
  auto consider = [&](const Hypothesis& h) {
    if (!have || ahead(h.score, best.score)) {
      best = h;
      have = true;
    }
  };
  std::function<void()> expand = [&]() {
    const auto lp = score_checked(scorer, cur.tokens);
    for (std::size_t v = 0; v < lp.size(); ++v) {
      if (!emittable(v)) continue;
      cur.tokens.push_back(static_cast<int>(v));
      const double saved = cur.logprob;
      cur.logprob += lp[v];
      cur.score = length_normalized(cur.logprob, cur.generated(), length_alpha);
      if (v == static_cast<std::size_t>(kEos) || cur.generated() == max_len) {
        consider(cur);
      } else {
        expand();
      }
      cur.logprob = saved;
      cur.tokens.pop_back();
    }
  };
  if (max_len == 0) throw std::invalid_argument("max_len must be >= 1");
  expand();
  return best;
}

}  // namespace eeg2text::langmod
