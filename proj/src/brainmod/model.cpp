#include "eeg2text/brainmod/model.hpp"

#include <algorithm>

#include "eeg2text/numcore/ops.hpp"
#include "eeg2text/numcore/rng.hpp"

namespace eeg2text::brainmod {

namespace nc = numcore;

SentenceInput gather_inputs(const dataio::SentenceRecord& sentence, const BrainConfig& config) {
  SentenceInput out;
  for (std::size_t wi = 0; wi < sentence.words.size(); ++wi) {
    const auto& w = sentence.words[wi];
    if (!w.has_fixation) continue;
    const std::string where = "word " + std::to_string(wi) + " ('" + w.text + "')";
    if (config.input == InputMode::kRaw) {
      if (w.raw_eeg.empty()) throw std::invalid_argument(where + ": fixated word has no signal");
      if (w.raw_eeg.rows() != config.channels) {
        throw std::invalid_argument(where + ": raw_eeg has " + std::to_string(w.raw_eeg.rows()) +
                                    " channels, model expects " + std::to_string(config.channels));
      }
      out.words.push_back(w.raw_eeg.transposed());
    } else {
      Tensor<float> steps({dataio::kWindows.size(), config.step_width()});
      for (std::size_t k = 0; k < dataio::kWindows.size(); ++k) {
        auto it = w.band_features.find(dataio::kWindows[k]);
        if (it == w.band_features.end()) {
          throw std::invalid_argument(where + ": missing " +
                                      std::string(dataio::window_name(dataio::kWindows[k])) +
                                      " band features");
        }
        if (it->second.size() != config.step_width()) {
          throw std::invalid_argument(where + ": band features do not match the model channels");
        }
        std::copy(it->second.values().begin(), it->second.values().end(),
                  steps.data() + k * config.step_width());
      }
      out.words.push_back(std::move(steps));
    }
    out.texts.push_back(w.text);
  }
  return out;
}

template <class T>
BrainModel<T>::BrainModel(const BrainConfig& config, std::vector<std::string> subjects,
                          std::uint64_t seed)
    : config_(config), subjects_(std::move(subjects)), seed_(seed) {
  config_.validate();
  const auto& c = config_;
  gru_fwd_ = nn::GruDirection<T>(store_, "gru.fwd", c.step_width(), c.gru_hidden, seed);
  gru_bwd_ = nn::GruDirection<T>(store_, "gru.bwd", c.step_width(), c.gru_hidden, seed);
  proj_ = nn::Linear<T>(store_, "proj", 2 * c.gru_hidden, c.proj_dim, seed);
  conv_ = nn::Linear<T>(store_, "conv", c.proj_dim, c.proj_dim, seed);
  for (const auto& id : subjects_) {
    if (id.empty()) throw std::invalid_argument("subject id must be nonempty");
    store_.add("subject." + id, Tensor<T>({1, c.proj_dim}, T{1}));
  }
  w_in_ = nn::Linear<T>(store_, "bte.input", c.proj_dim, c.d_h, seed, false);
  {
    auto rng = nc::make_rng(seed, "bte.positions");
    positions_ = &store_.add("bte.positions", nc::fan_in_uniform<T>(c.max_words, c.d_h, c.d_h, rng));
  }
  for (std::size_t l = 0; l < c.layers; ++l) {
    layers_.emplace_back(store_, "bte.layer" + std::to_string(l), c.d_h, c.heads,
                         c.d_h * c.ffn_mult, c.dropout, seed);
  }
  mlp_fc1_ = nn::Linear<T>(store_, "mlp.fc1", c.d_h, c.d_h, seed);
  mlp_fc2_ = nn::Linear<T>(store_, "mlp.fc2", c.d_h, c.embed_dim, seed);
  Tensor<T> shortcut({c.d_h, c.embed_dim});
  if (c.d_h == c.embed_dim) {
    for (std::size_t i = 0; i < c.d_h; ++i) shortcut.at(i, i) = T{1};
  } else {
    auto rng = nc::make_rng(seed, "mlp.shortcut");
    shortcut = nc::fan_in_uniform<T>(c.d_h, c.embed_dim, c.d_h, rng);
  }
  shortcut_ = &store_.add("mlp.shortcut", std::move(shortcut), false);
}

template <class T>
bool BrainModel<T>::has_subject(std::string_view id) const noexcept {
  return std::find(subjects_.begin(), subjects_.end(), id) != subjects_.end();
}

template <class T>
const numcore::Parameter<T>& BrainModel<T>::subject_param(std::string_view id) const {
  const auto* p = has_subject(id) ? store_.find("subject." + std::string(id)) : nullptr;
  if (!p) throw UnknownSubjectError("unknown subject '" + std::string(id) + "'");
  return *p;
}

template <class T>
numcore::Parameter<T>& BrainModel<T>::subject_vector(std::string_view id) {
  return const_cast<numcore::Parameter<T>&>(subject_param(id));
}

template <class T>
void BrainModel<T>::set_subject_layer_trainable(bool trainable) {
  store_.set_trainable_prefix("subject.", trainable);
}

template <class T>
Var<T> BrainModel<T>::encode_word(Tape<T>& tape, const Tensor<float>& steps) const {
  if (steps.empty() || steps.rows() == 0) throw std::invalid_argument("word signal is empty");
  if (steps.cols() != config_.step_width()) {
    throw std::invalid_argument("word signal has width " + std::to_string(steps.cols()) +
                                ", model expects " + std::to_string(config_.step_width()));
  }
  Var<T> x = tape.constant(steps.template cast<T>());
  Var<T> f = gru_fwd_.last_state(tape, x, false);
  Var<T> b = gru_bwd_.last_state(tape, x, true);
  return nc::concat_cols(std::vector<Var<T>>{f, b});
}

template <class T>
Var<T> BrainModel<T>::encode_words(Tape<T>& tape, const std::vector<Tensor<float>>& words) const {
  if (words.empty()) throw std::invalid_argument("sentence has no fixated words");
  std::vector<Var<T>> rows;
  rows.reserve(words.size());
  for (const auto& w : words) rows.push_back(encode_word(tape, w));
  return rows.size() == 1 ? rows[0] : nc::concat_rows(rows);
}

template <class T>
Var<T> BrainModel<T>::project_and_conv(Tape<T>& tape, Var<T> features) const {
  return conv_(tape, proj_(tape, features));
}

template <class T>
Var<T> BrainModel<T>::subject_layer(Tape<T>& tape, Var<T> features, std::string_view id) const {
  return nc::mul_row(features, tape.param(subject_param(id)));
}

template <class T>
Var<T> BrainModel<T>::transformer(Tape<T>& tape, Var<T> features) const {
  const std::size_t m = features.rows();
  if (m > config_.max_words) {
    throw CapacityError("sentence has " + std::to_string(m) + " words, position table holds " +
                        std::to_string(config_.max_words));
  }
  Var<T> h = nc::add(w_in_(tape, features), nc::slice_rows(tape.param(*positions_), 0, m));
  for (const auto& layer : layers_) h = layer(tape, h);
  return h;
}

template <class T>
Var<T> BrainModel<T>::residual_mlp(Tape<T>& tape, Var<T> hidden) const {
  Var<T> inner = mlp_fc2_(tape, nc::gelu(mlp_fc1_(tape, hidden)));
  return nc::add(inner, nc::matmul(hidden, tape.param(*shortcut_)));
}

template <class T>
Var<T> BrainModel<T>::forward(Tape<T>& tape, const std::vector<Tensor<float>>& words,
                              std::string_view id) const {
  subject_param(id);  // fail fast on an unknown subject before any work
  Var<T> f = project_and_conv(tape, encode_words(tape, words));
  return residual_mlp(tape, transformer(tape, subject_layer(tape, f, id)));
}

template <class T>
Tensor<T> BrainModel<T>::infer(const std::vector<Tensor<float>>& words, std::string_view id) const {
  Tape<T> tape;
  return forward(tape, words, id).value();
}

template class BrainModel<float>;
template class BrainModel<double>;

}  // namespace eeg2text::brainmod
