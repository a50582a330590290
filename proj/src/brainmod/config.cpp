#include "eeg2text/brainmod/config.hpp"

#include <sstream>

namespace eeg2text::brainmod {

std::string_view input_mode_name(InputMode mode) noexcept {
  return mode == InputMode::kRaw ? "raw" : "bands";
}

InputMode parse_input_mode(std::string_view name) {
  if (name == "raw") return InputMode::kRaw;
  if (name == "bands") return InputMode::kBands;
  throw std::invalid_argument("unknown brain input mode '" + std::string(name) +
                              "' (expected raw or bands)");
}

std::size_t BrainConfig::step_width() const noexcept {
  return input == InputMode::kRaw ? channels : 8 * channels;
}

void BrainConfig::validate() const {
  auto positive = [](std::size_t v, const char* name) {
    if (v == 0) throw std::invalid_argument(std::string("brain.") + name + " must be >= 1");
  };
  positive(channels, "channels");
  positive(gru_hidden, "gru_hidden");
  positive(proj_dim, "proj_dim");
  positive(d_h, "d_h");
  positive(layers, "layers");
  positive(heads, "heads");
  positive(ffn_mult, "ffn_mult");
  positive(embed_dim, "embed_dim");
  positive(max_words, "max_words");
  if (d_h % heads != 0) {
    throw std::invalid_argument("brain.d_h (" + std::to_string(d_h) +
                                ") must be divisible by brain.heads (" + std::to_string(heads) + ")");
  }
  if (!(dropout >= 0.0 && dropout < 1.0)) throw std::invalid_argument("brain.dropout must be in [0, 1)");
}

std::map<std::string, std::string> BrainConfig::to_meta() const {
  std::ostringstream d;
  d.precision(17);
  d << dropout;
  return {{"brain.channels", std::to_string(channels)},
          {"brain.gru_hidden", std::to_string(gru_hidden)},
          {"brain.proj_dim", std::to_string(proj_dim)},
          {"brain.d_h", std::to_string(d_h)},
          {"brain.layers", std::to_string(layers)},
          {"brain.heads", std::to_string(heads)},
          {"brain.ffn_mult", std::to_string(ffn_mult)},
          {"brain.dropout", d.str()},
          {"brain.embed_dim", std::to_string(embed_dim)},
          {"brain.max_words", std::to_string(max_words)},
          {"brain.input", std::string(input_mode_name(input))}};
}

BrainConfig BrainConfig::from_meta(const std::map<std::string, std::string>& meta) {
  auto get = [&](const std::string& key) -> const std::string& {
    auto it = meta.find(key);
    if (it == meta.end()) throw std::invalid_argument("checkpoint metadata lacks " + key);
    return it->second;
  };
  auto size = [&](const std::string& key) { return static_cast<std::size_t>(std::stoull(get(key))); };
  BrainConfig c;
  c.channels = size("brain.channels");
  c.gru_hidden = size("brain.gru_hidden");
  c.proj_dim = size("brain.proj_dim");
  c.d_h = size("brain.d_h");
  c.layers = size("brain.layers");
  c.heads = size("brain.heads");
  c.ffn_mult = size("brain.ffn_mult");
  c.dropout = std::stod(get("brain.dropout"));
  c.embed_dim = size("brain.embed_dim");
  c.max_words = size("brain.max_words");
  c.input = parse_input_mode(get("brain.input"));
  c.validate();
  return c;
}

}  // namespace eeg2text::brainmod
