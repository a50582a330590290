#include "eeg2text/dataio/split.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <stdexcept>
#include <string>
#include <unordered_map>
#include <vector>

#include "eeg2text/numcore/rng.hpp"

namespace eeg2text::dataio {

std::uint64_t content_hash(std::string_view content, std::uint64_t seed) noexcept {
  return numcore::splitmix64(numcore::fnv1a64(content) ^ numcore::splitmix64(seed));
}

DatasetSplit split_dataset(const DatasetManifest& m, SplitRatios ratios, std::uint64_t seed) {
  const std::array<double, 3> r{ratios.train, ratios.dev, ratios.test};
  for (double v : r) {
    if (!(v > 0.0) || !std::isfinite(v)) {
      throw std::invalid_argument("split ratios must all be positive");
    }
  }
  if (std::abs(r[0] + r[1] + r[2] - 1.0) > 1e-9) {
    throw std::invalid_argument("split ratios must sum to 1");
  }

  std::vector<std::string> contents;
  {
    std::unordered_map<std::string, bool> seen;
    for (const auto& s : m.subjects)
      for (const auto& sent : s.sentences)
        if (seen.emplace(sent.content, true).second) contents.push_back(sent.content);
  }
  std::sort(contents.begin(), contents.end(), [seed](const std::string& a, const std::string& b) {
    const auto ha = content_hash(a, seed), hb = content_hash(b, seed);
    return ha != hb ? ha < hb : a < b;
  });

  // Largest-remainder apportionment; ties favour the earlier split.
  const std::size_t n = contents.size();
  std::array<std::size_t, 3> counts{};
  std::array<double, 3> rem{};
  std::size_t assigned = 0;
  for (std::size_t i = 0; i < 3; ++i) {
    const double exact = r[i] * static_cast<double>(n);
    counts[i] = static_cast<std::size_t>(std::floor(exact + 1e-9));
    rem[i] = exact - static_cast<double>(counts[i]);
    assigned += counts[i];
  }
  while (assigned < n) {
    std::size_t best = 0;
    for (std::size_t i = 1; i < 3; ++i)
      if (rem[i] > rem[best]) best = i;
    ++counts[best];
    rem[best] = -1.0;
    ++assigned;
  }

  std::unordered_map<std::string, int> which;
  for (std::size_t i = 0; i < n; ++i) {
    which[contents[i]] = i < counts[0] ? 0 : (i < counts[0] + counts[1] ? 1 : 2);
  }

  DatasetSplit out;
  std::array<DatasetManifest*, 3> parts{&out.train, &out.dev, &out.test};
  for (auto* p : parts) {
    p->format_version = m.format_version;
    p->channels = m.channels;
    p->sampling_rate = m.sampling_rate;
    p->provenance = m.provenance;
    for (const auto& s : m.subjects) p->subjects.push_back(SubjectData{s.subject_id, {}});
  }
  for (std::size_t si = 0; si < m.subjects.size(); ++si) {
    for (const auto& sent : m.subjects[si].sentences) {
      parts[static_cast<std::size_t>(which.at(sent.content))]->subjects[si].sentences.push_back(sent);
    }
  }
  return out;
}

}  // namespace eeg2text::dataio
