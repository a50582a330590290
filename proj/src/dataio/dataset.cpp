#include "eeg2text/dataio/dataset.hpp"

#include <stdexcept>
#include <string>

namespace eeg2text::dataio {

double nyquist_min_rate(double f_max) {
  if (!(f_max >= 0.0)) {
    throw std::domain_error("nyquist_min_rate: frequency must be nonnegative, got " +
                            std::to_string(f_max));
  }
  return 2.0 * f_max;
}

double highest_band_edge() noexcept {
  double hi = 0.0;
  for (const auto& b : kBands) hi = b.hi > hi ? b.hi : hi;
  return hi;
}

std::string_view window_name(Window w) noexcept {
  switch (w) {
    case Window::FFD: return "FFD";
    case Window::GD: return "GD";
    case Window::TRT: return "TRT";
  }
  return "?";
}

std::optional<Window> parse_window(std::string_view name) noexcept {
  for (Window w : kWindows)
    if (window_name(w) == name) return w;
  return std::nullopt;
}

const SubjectData* DatasetManifest::find_subject(std::string_view id) const noexcept {
  for (const auto& s : subjects)
    if (s.subject_id == id) return &s;
  return nullptr;
}

std::vector<std::string> DatasetManifest::subject_ids() const {
  std::vector<std::string> out;
  out.reserve(subjects.size());
  for (const auto& s : subjects) out.push_back(s.subject_id);
  return out;
}

std::size_t DatasetManifest::sentence_count() const noexcept {
  std::size_t n = 0;
  for (const auto& s : subjects) n += s.sentences.size();
  return n;
}

}  // namespace eeg2text::dataio
