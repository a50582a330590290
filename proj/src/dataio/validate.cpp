#include "eeg2text/dataio/validate.hpp"

#include <cmath>
#include <set>
#include <sstream>

namespace eeg2text::dataio {

namespace {

bool all_finite(const Matrix& m) {
  for (float v : m.values())
    if (!std::isfinite(v)) return false;
  return true;
}

std::string shape_text(const Matrix& m) {
  return std::to_string(m.rows()) + "x" + std::to_string(m.cols());
}

}  // namespace

std::string Violation::to_string() const {
  std::ostringstream out;
  if (!subject_id.empty()) {
    out << "subject " << subject_id;
    if (sentence) out << " sentence " << *sentence;
    if (word) out << " word " << *word;
    out << ": ";
  }
  out << rule << ": " << detail;
  return out.str();
}

std::vector<Violation> validate_sentence(const SentenceRecord& s, std::size_t channels,
                                         const std::string& subject_id, std::size_t si) {
  std::vector<Violation> out;
  auto add = [&](std::optional<std::size_t> wi, const char* r, std::string detail) {
    out.push_back(Violation{subject_id, si, wi, r, std::move(detail)});
  };
  if (s.content.find_first_not_of(" \t\r\n") == std::string::npos) {
    add(std::nullopt, rule::kEmptyContent, "sentence content is empty");
  }
  if (s.words.empty()) add(std::nullopt, rule::kEmptyWords, "sentence has no words");
  if (s.sentence_eeg && !s.sentence_eeg->empty() && s.sentence_eeg->rows() != channels) {
    add(std::nullopt, rule::kChannelCount,
        "sentence_eeg has " + std::to_string(s.sentence_eeg->rows()) + " rows, expected " +
            std::to_string(channels));
  }
  for (std::size_t wi = 0; wi < s.words.size(); ++wi) {
    const auto& w = s.words[wi];
    if (w.raw_eeg.empty()) {
      if (w.has_fixation) add(wi, rule::kEmptySignal, "fixated word has an empty raw_eeg");
    } else {
      if (w.raw_eeg.rank() != 2 || w.raw_eeg.rows() != channels) {
        add(wi, rule::kChannelCount,
            "raw_eeg has " + std::to_string(w.raw_eeg.rows()) + " rows, expected " +
                std::to_string(channels));
      }
      if (!all_finite(w.raw_eeg)) add(wi, rule::kNonFinite, "raw_eeg contains non-finite values");
    }
    for (const auto& [win, m] : w.band_features) {
      if (m.rank() != 2 || m.rows() != kNumBands || m.cols() != channels) {
        add(wi, rule::kBandShape,
            std::string(window_name(win)) + " band features are " + shape_text(m) + ", expected " +
                std::to_string(kNumBands) + "x" + std::to_string(channels));
      } else if (!all_finite(m)) {
        add(wi, rule::kNonFinite,
            std::string(window_name(win)) + " band features contain non-finite values");
      }
    }
  }
  return out;
}

std::vector<Violation> validate_dataset(const DatasetManifest& m) {
  std::vector<Violation> out;
  const double need = nyquist_min_rate(highest_band_edge());
  if (!(m.sampling_rate >= need)) {
    std::ostringstream d;
    d << "sampling_rate " << m.sampling_rate << " Hz is below the minimum " << need
      << " Hz for the " << highest_band_edge() << " Hz band edge";
    out.push_back(Violation{"", std::nullopt, std::nullopt, rule::kNyquist, d.str()});
  }
  std::set<std::string> seen;
  for (const auto& subj : m.subjects) {
    if (!seen.insert(subj.subject_id).second) {
      out.push_back(Violation{"", std::nullopt, std::nullopt, rule::kDuplicateSubject,
                              "subject id " + subj.subject_id + " appears more than once"});
    }
  }
  for (const auto& subj : m.subjects) {
    for (std::size_t si = 0; si < subj.sentences.size(); ++si) {
      auto v = validate_sentence(subj.sentences[si], m.channels, subj.subject_id, si);
      out.insert(out.end(), std::make_move_iterator(v.begin()), std::make_move_iterator(v.end()));
    }
  }
  return out;
}

std::string format_violations(const std::vector<Violation>& violations) {
  std::string out;
  for (const auto& v : violations) {
    out += v.to_string();
    out.push_back('\n');
  }
  return out;
}

}  // namespace eeg2text::dataio
