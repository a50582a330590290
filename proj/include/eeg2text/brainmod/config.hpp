#pragma once

#include <cstddef>
#include <map>
#include <stdexcept>
#include <string>
#include <string_view>

namespace eeg2text::brainmod {

// Which per-word signal feeds the recurrent encoder: the raw C x T samples,
// or the three band-feature windows as T = 3 pseudo-steps of width 8 * C.
enum class InputMode { kRaw, kBands };

std::string_view input_mode_name(InputMode mode) noexcept;
InputMode parse_input_mode(std::string_view name);

struct BrainConfig {
  std::size_t channels = 105;
  std::size_t gru_hidden = 64;
  std::size_t proj_dim = 128;  // D
  std::size_t d_h = 128;
  std::size_t layers = 2;
  std::size_t heads = 4;
  std::size_t ffn_mult = 4;
  double dropout = 0.1;
  std::size_t embed_dim = 64;  // D_e
  std::size_t max_words = 64;
  InputMode input = InputMode::kRaw;

  // Width of one recurrent input step.
  std::size_t step_width() const noexcept;

  // Throws std::invalid_argument naming the offending field.
  void validate() const;

  // Flat key/value form stored in checkpoints (keys prefixed "brain.").
  std::map<std::string, std::string> to_meta() const;
  static BrainConfig from_meta(const std::map<std::string, std::string>& meta);
};

}  // namespace eeg2text::brainmod
