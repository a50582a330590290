#include "eeg2text/langmod/seq2seq.hpp"

#include <random>
#include <sstream>
#include <stdexcept>

#include "eeg2text/langmod/vocabulary.hpp"
#include "eeg2text/numcore/functional.hpp"
#include "eeg2text/numcore/ops.hpp"
#include "eeg2text/numcore/rng.hpp"

namespace eeg2text::langmod {

namespace nc = numcore;

void Seq2SeqConfig::validate() const {
  auto positive = [](std::size_t v, const char* name) {
    if (v == 0) throw std::invalid_argument(std::string("seq2seq.") + name + " must be >= 1");
  };
  positive(input_dim, "input_dim");
  positive(d_model, "d_model");
  positive(heads, "heads");
  positive(enc_layers, "enc_layers");
  positive(dec_layers, "dec_layers");
  positive(ffn_mult, "ffn_mult");
  positive(head_hidden, "head_hidden");
  positive(max_source, "max_source");
  positive(max_target, "max_target");
  if (d_model % heads != 0) {
    throw std::invalid_argument("seq2seq.d_model (" + std::to_string(d_model) +
                                ") must be divisible by seq2seq.heads (" + std::to_string(heads) + ")");
  }
  if (!(dropout >= 0.0 && dropout < 1.0)) throw std::invalid_argument("seq2seq.dropout must be in [0, 1)");
  if (!(word_dropout >= 0.0 && word_dropout < 1.0)) {
    throw std::invalid_argument("seq2seq.word_dropout must be in [0, 1)");
  }
}

std::map<std::string, std::string> Seq2SeqConfig::to_meta() const {
  std::ostringstream d, w;
  d.precision(17);
  w.precision(17);
  d << dropout;
  w << word_dropout;
  return {{"seq2seq.input_dim", std::to_string(input_dim)},
          {"seq2seq.d_model", std::to_string(d_model)},
          {"seq2seq.heads", std::to_string(heads)},
          {"seq2seq.enc_layers", std::to_string(enc_layers)},
          {"seq2seq.dec_layers", std::to_string(dec_layers)},
          {"seq2seq.ffn_mult", std::to_string(ffn_mult)},
          {"seq2seq.head_hidden", std::to_string(head_hidden)},
          {"seq2seq.max_source", std::to_string(max_source)},
          {"seq2seq.max_target", std::to_string(max_target)},
          {"seq2seq.dropout", d.str()},
          {"seq2seq.word_dropout", w.str()}};
}

Seq2SeqConfig Seq2SeqConfig::from_meta(const std::map<std::string, std::string>& meta) {
  auto get = [&](const std::string& key) -> const std::string& {
    auto it = meta.find(key);
    if (it == meta.end()) throw std::invalid_argument("checkpoint metadata lacks " + key);
    return it->second;
  };
  auto size = [&](const std::string& key) { return static_cast<std::size_t>(std::stoull(get(key))); };
  Seq2SeqConfig c;
  c.input_dim = size("seq2seq.input_dim");
  c.d_model = size("seq2seq.d_model");
  c.heads = size("seq2seq.heads");
  c.enc_layers = size("seq2seq.enc_layers");
  c.dec_layers = size("seq2seq.dec_layers");
  c.ffn_mult = size("seq2seq.ffn_mult");
  c.head_hidden = size("seq2seq.head_hidden");
  c.max_source = size("seq2seq.max_source");
  c.max_target = size("seq2seq.max_target");
  c.dropout = std::stod(get("seq2seq.dropout"));
  c.word_dropout = std::stod(get("seq2seq.word_dropout"));
  c.validate();
  return c;
}

template <class T>
Seq2Seq<T>::Seq2Seq(const Seq2SeqConfig& config, std::size_t vocab_size, std::uint64_t seed)
    : config_(config), vocab_size_(vocab_size) {
  config_.validate();
  if (vocab_size_ <= static_cast<std::size_t>(kNumSpecials)) {
    throw std::invalid_argument("seq2seq: vocabulary must contain at least one word token");
  }
  const auto& c = config_;
  const std::size_t d = c.d_model;
  auto init = [&](const std::string& name, std::size_t rows, std::size_t cols) {
    auto rng = nc::make_rng(seed, name);
    return &store_.add(name, nc::fan_in_uniform<T>(rows, cols, d, rng));
  };
  input_ = nn::Linear<T>(store_, "enc.input", c.input_dim, d, seed);
  bos_slot_ = init("enc.bos_slot", 1, d);
  eos_slot_ = init("enc.eos_slot", 1, d);
  enc_pos_ = init("enc.positions", c.max_source + 2, d);
  for (std::size_t l = 0; l < c.enc_layers; ++l) {
    encoder_.emplace_back(store_, "enc.layer" + std::to_string(l), d, c.heads, d * c.ffn_mult,
                          c.dropout, seed);
  }
  tok_embed_ = init("dec.embed", vocab_size_, d);
  dec_pos_ = init("dec.positions", c.max_target + 1, d);
  for (std::size_t l = 0; l < c.dec_layers; ++l) {
    decoder_.emplace_back(store_, "dec.layer" + std::to_string(l), d, c.heads, d * c.ffn_mult,
                          c.dropout, seed);
  }
  head_fc1_ = nn::Linear<T>(store_, "head.fc1", d, c.head_hidden, seed);
  head_fc2_ = nn::Linear<T>(store_, "head.fc2", c.head_hidden, vocab_size_, seed);
}

template <class T>
void Seq2Seq<T>::check_tokens(std::span<const int> tokens) const {
  for (int t : tokens) {
    if (t < 0 || static_cast<std::size_t>(t) >= vocab_size_) {
      throw std::out_of_range("token index " + std::to_string(t) + " outside vocabulary of size " +
                              std::to_string(vocab_size_));
    }
  }
}

template <class T>
Var<T> Seq2Seq<T>::encode(Tape<T>& tape, Var<T> z) const {
  const std::size_t m = z.rows();
  if (m == 0 || m > config_.max_source) {
    throw std::length_error("seq2seq: " + std::to_string(m) + " latent rows, capacity " +
                            std::to_string(config_.max_source));
  }
  if (z.cols() != config_.input_dim) {
    throw numcore::ShapeError("seq2seq: latent width " + std::to_string(z.cols()) + ", expected " +
                              std::to_string(config_.input_dim));
  }
  Var<T> x = nc::concat_rows(
      std::vector<Var<T>>{tape.param(*bos_slot_), input_(tape, z), tape.param(*eos_slot_)});
  x = nc::add(x, nc::slice_rows(tape.param(*enc_pos_), 0, m + 2));
  for (const auto& layer : encoder_) x = layer(tape, x);
  return x;
}

template <class T>
Var<T> Seq2Seq<T>::decoder_states(Tape<T>& tape, Var<T> memory, std::span<const int> prefix) const {
  if (prefix.empty() || prefix.size() > config_.max_target + 1) {
    throw std::length_error("seq2seq: decoder prefix of " + std::to_string(prefix.size()) +
                            " tokens, capacity " + std::to_string(config_.max_target + 1));
  }
  check_tokens(prefix);
  Var<T> x = nc::gather_rows(tape.param(*tok_embed_), prefix);
  x = nc::add(x, nc::slice_rows(tape.param(*dec_pos_), 0, prefix.size()));
  for (const auto& layer : decoder_) x = layer(tape, x, memory);
  return x;
}

template <class T>
Var<T> Seq2Seq<T>::head(Tape<T>& tape, Var<T> hidden) const {
  return head_fc2_(tape, nc::gelu(head_fc1_(tape, hidden)));
}

template <class T>
Var<T> Seq2Seq<T>::decode(Tape<T>& tape, Var<T> memory, std::span<const int> prefix) const {
  return head(tape, decoder_states(tape, memory, prefix));
}

template <class T>
Var<T> Seq2Seq<T>::loss(Tape<T>& tape, Var<T> z, std::span<const int> target) const {
  if (target.empty()) throw std::invalid_argument("seq2seq: empty target");
  check_tokens(target);
  std::vector<int> input;
  input.reserve(target.size());
  input.push_back(kBos);
  input.insert(input.end(), target.begin(), target.end() - 1);
  if (tape.training() && config_.word_dropout > 0.0) {
    std::bernoulli_distribution drop(config_.word_dropout);
    for (std::size_t i = 1; i < input.size(); ++i)
      if (drop(tape.rng())) input[i] = kUnk;
  }
  Var<T> logits = decode(tape, encode(tape, z), input);
  return nc::cross_entropy(logits, target, kPad, nc::Reduction::kSum);
}

template <class T>
Tensor<T> Seq2Seq<T>::memory(const Tensor<float>& z) const {
  Tape<T> tape;
  return encode(tape, tape.constant(z.template cast<T>())).value();
}

template <class T>
std::vector<double> Seq2Seq<T>::next_log_probs(const Tensor<T>& memory,
                                               std::span<const int> prefix) const {
  Tape<T> tape;
  const auto& logits = decode(tape, tape.constant(memory), prefix).value();
  return nc::log_softmax<T>(logits.row(logits.rows() - 1));
}

template <class T>
std::vector<double> Seq2Seq<T>::step_log_probs(const Tensor<float>& z,
                                               std::span<const int> target) const {
  if (target.empty()) throw std::invalid_argument("seq2seq: empty target");
  check_tokens(target);
  std::vector<int> input{kBos};
  input.insert(input.end(), target.begin(), target.end() - 1);
  Tape<T> tape;
  const auto& logits =
      decode(tape, encode(tape, tape.constant(z.template cast<T>())), input).value();
  std::vector<double> out(target.size());
  for (std::size_t n = 0; n < target.size(); ++n) {
    out[n] = nc::log_softmax<T>(logits.row(n))[static_cast<std::size_t>(target[n])];
  }
  return out;
}

template <class T>
double Seq2Seq<T>::sequence_logprob(const Tensor<float>& z, std::span<const int> target) const {
  double total = 0.0;
  for (double v : step_log_probs(z, target)) total += v;
  return total;
}

template class Seq2Seq<float>;
template class Seq2Seq<double>;

}  // namespace eeg2text::langmod
