#include "eeg2text/app/config.hpp"

#include <cctype>
#include <charconv>
#include <cmath>
#include <fstream>
#include <functional>
#include <sstream>

namespace eeg2text::app {

namespace {

std::string trim(std::string_view s) {
  const auto b = s.find_first_not_of(" \t\r\n");
  if (b == std::string_view::npos) return {};
  const auto e = s.find_last_not_of(" \t\r\n");
  return std::string(s.substr(b, e - b + 1));
}

[[noreturn]] void bad_value(std::string_view key, std::string_view value, std::string_view expected) {
  throw ConfigError("invalid value '" + std::string(value) + "' for " + std::string(key) +
                    " (expected " + std::string(expected) + ")");
}

std::uint64_t to_u64(std::string_view key, std::string_view v) {
  std::uint64_t out = 0;
  auto [p, ec] = std::from_chars(v.data(), v.data() + v.size(), out);
  if (ec != std::errc() || p != v.data() + v.size() || v.empty()) bad_value(key, v, "a non-negative integer");
  return out;
}

std::size_t to_size(std::string_view key, std::string_view v) { return static_cast<std::size_t>(to_u64(key, v)); }

double to_double(std::string_view key, std::string_view v) {
  try {
    std::size_t used = 0;
    const double d = std::stod(std::string(v), &used);
    if (used != v.size()) bad_value(key, v, "a number");
    return d;
  } catch (const std::logic_error&) {
    bad_value(key, v, "a number");
  }
}

bool to_bool(std::string_view key, std::string_view v) {
  if (v == "true" || v == "1" || v == "yes" || v == "on") return true;
  if (v == "false" || v == "0" || v == "no" || v == "off") return false;
  bad_value(key, v, "true or false");
}

std::string fmt(double v) {
  std::ostringstream o;
  o.precision(17);
  o << v;
  return o.str();
}

std::string fmt(bool v) { return v ? "true" : "false"; }

struct Field {
  std::string key;
  std::string description;
  std::function<void(RunConfig&, std::string_view)> set;
  std::function<std::string(const RunConfig&)> get;
};

#define E2T_SIZE(KEY, MEMBER, DESC)                                                       \
  Field {                                                                                 \
    KEY, DESC, [](RunConfig& c, std::string_view v) { c.MEMBER = to_size(KEY, v); },      \
        [](const RunConfig& c) { return std::to_string(c.MEMBER); }                        \
  }
#define E2T_DOUBLE(KEY, MEMBER, DESC)                                                     \
  Field {                                                                                 \
    KEY, DESC, [](RunConfig& c, std::string_view v) { c.MEMBER = to_double(KEY, v); },   \
        [](const RunConfig& c) { return fmt(static_cast<double>(c.MEMBER)); }             \
  }
#define E2T_BOOL(KEY, MEMBER, DESC)                                                       \
  Field {                                                                                 \
    KEY, DESC, [](RunConfig& c, std::string_view v) { c.MEMBER = to_bool(KEY, v); },     \
        [](const RunConfig& c) { return fmt(c.MEMBER); }                                  \
  }
#define E2T_PATH(KEY, MEMBER, DESC)                                                       \
  Field {                                                                                 \
    KEY, DESC, [](RunConfig& c, std::string_view v) { c.MEMBER = std::string(v); },      \
        [](const RunConfig& c) { return c.MEMBER.string(); }                              \
  }

const std::vector<Field>& fields() {
  static const std::vector<Field> all = {
      Field{"seed", "master seed for every stochastic step",
            [](RunConfig& c, std::string_view v) { c.seed = to_u64("seed", v); },
            [](const RunConfig& c) { return std::to_string(c.seed); }},
      E2T_PATH("data.dataset", dataset, "portable dataset file (JSON lines)"),
      E2T_PATH("data.vocab", vocab, "vocabulary sidecar, one token per line"),
      E2T_PATH("data.embeddings", embeddings, "frozen token-embedding table"),
      E2T_PATH("data.truth", truth, "synthetic ground-truth file written by synth"),
      E2T_PATH("output.dir", output_dir, "directory for checkpoints and loss logs"),
      E2T_DOUBLE("split.train", split.train, "fraction of distinct sentences used for training"),
      E2T_DOUBLE("split.dev", split.dev, "fraction used for development"),
      E2T_DOUBLE("split.test", split.test, "fraction held out for testing"),

      E2T_SIZE("synth.subjects", synth.n_subjects, "number of synthetic subjects"),
      E2T_SIZE("synth.sentences", synth.n_sentences, "sentences read by every subject"),
      E2T_SIZE("synth.vocab_size", synth.vocab_size, "word tokens, excluding the four specials"),
      E2T_DOUBLE("synth.sigma", synth.sigma, "standard deviation of additive sensor noise"),
      E2T_SIZE("synth.channels", synth.channels, "EEG channels"),
      E2T_DOUBLE("synth.sampling_rate", synth.sampling_rate, "sampling rate in Hz"),
      E2T_SIZE("synth.embed_dim", synth.embed_dim, "token-embedding width"),
      E2T_SIZE("synth.min_samples", synth.min_samples, "shortest word signal in samples"),
      E2T_SIZE("synth.max_samples", synth.max_samples, "longest word signal in samples"),
      E2T_SIZE("synth.min_words", synth.min_words, "shortest sentence in words"),
      E2T_SIZE("synth.max_words", synth.max_words, "longest sentence in words"),
      E2T_DOUBLE("synth.gain_ratio", synth.gain_ratio, "minimum cross-subject gain ratio per channel"),

      E2T_SIZE("brain.channels", brain.channels, "input channels expected by the encoder"),
      E2T_SIZE("brain.gru_hidden", brain.gru_hidden, "hidden units per GRU direction"),
      E2T_SIZE("brain.proj_dim", brain.proj_dim, "projection width after the GRU"),
      E2T_SIZE("brain.d_h", brain.d_h, "transformer width"),
      E2T_SIZE("brain.layers", brain.layers, "transformer encoder layers"),
      E2T_SIZE("brain.heads", brain.heads, "attention heads"),
      E2T_SIZE("brain.ffn_mult", brain.ffn_mult, "feed-forward width as a multiple of d_h"),
      E2T_DOUBLE("brain.dropout", brain.dropout, "dropout rate during training"),
      E2T_SIZE("brain.embed_dim", brain.embed_dim, "output width, equal to the embedding width"),
      E2T_SIZE("brain.max_words", brain.max_words, "longest sentence the encoder accepts"),
      Field{"brain.input", "raw (time-major signal) or bands (FFD/GD/TRT band features)",
            [](RunConfig& c, std::string_view v) {
              try {
                c.brain.input = brainmod::parse_input_mode(v);
              } catch (const std::exception&) {
                bad_value("brain.input", v, "raw or bands");
              }
            },
            [](const RunConfig& c) { return std::string(brainmod::input_mode_name(c.brain.input)); }},

      E2T_SIZE("seq2seq.d_model", seq2seq.d_model, "sequence model width"),
      E2T_SIZE("seq2seq.heads", seq2seq.heads, "attention heads"),
      E2T_SIZE("seq2seq.enc_layers", seq2seq.enc_layers, "encoder layers"),
      E2T_SIZE("seq2seq.dec_layers", seq2seq.dec_layers, "decoder layers"),
      E2T_SIZE("seq2seq.ffn_mult", seq2seq.ffn_mult, "feed-forward width as a multiple of d_model"),
      E2T_SIZE("seq2seq.head_hidden", seq2seq.head_hidden, "hidden width of the output head"),
      E2T_SIZE("seq2seq.max_target", seq2seq.max_target, "longest generated sequence, EOS included"),
      E2T_DOUBLE("seq2seq.dropout", seq2seq.dropout, "dropout rate during training"),
      E2T_DOUBLE("seq2seq.word_dropout", seq2seq.word_dropout,
                 "chance a teacher-forced input token is replaced by <unk> while training"),

      E2T_SIZE("stage1.epochs", stage1.epochs, "alignment training epochs"),
      E2T_SIZE("stage1.batch_size", stage1.batch_size, "sentences per update"),
      E2T_DOUBLE("stage1.lr", stage1.lr, "Adam learning rate"),
      E2T_DOUBLE("stage1.clip_norm", stage1.clip_norm, "global gradient-norm clip, 0 disables"),
      E2T_BOOL("stage1.train_subject_layer", stage1.train_subject_layer, "learn the per-subject scaling"),
      E2T_DOUBLE("stage1.stop_ratio", stage1.stop_ratio, "stop once dev loss <= ratio x epoch-0 dev loss, 0 never"),

      E2T_SIZE("stage2.epochs", stage2.epochs, "sequence training epochs"),
      E2T_SIZE("stage2.batch_size", stage2.batch_size, "sentences per update"),
      E2T_DOUBLE("stage2.lr", stage2.lr, "Adam learning rate"),
      E2T_DOUBLE("stage2.clip_norm", stage2.clip_norm, "global gradient-norm clip, 0 disables"),
      E2T_BOOL("stage2.finetune_brain", stage2.finetune_brain, "also update the brain encoder"),
      E2T_DOUBLE("stage2.brain_lr", stage2.brain_lr, "brain learning rate when fine-tuning"),

      E2T_SIZE("decode.beam_width", decode.width, "1 selects greedy decoding"),
      E2T_SIZE("decode.max_len", decode.max_len, "most tokens generated per sentence"),
      E2T_DOUBLE("decode.length_alpha", decode.length_alpha, "length-normalization exponent for beam scores"),

      Field{"refine.policy", "rule_based or external",
            [](RunConfig& c, std::string_view v) {
              try {
                c.refine.kind = refine::parse_policy_kind(v);
              } catch (const std::exception&) {
                bad_value("refine.policy", v, "rule_based or external");
              }
            },
            [](const RunConfig& c) { return std::string(refine::policy_kind_name(c.refine.kind)); }},
      Field{"refine.endpoint", "chat-completion URL for the external refiner",
            [](RunConfig& c, std::string_view v) { c.refine.endpoint = std::string(v); },
            [](const RunConfig& c) { return c.refine.endpoint; }},
      Field{"refine.model", "model name sent to the external refiner",
            [](RunConfig& c, std::string_view v) { c.refine.model = std::string(v); },
            [](const RunConfig& c) { return c.refine.model; }},
      Field{"refine.prompt_template", "prompt with one {sentence} placeholder",
            [](RunConfig& c, std::string_view v) { c.refine.prompt_template = std::string(v); },
            [](const RunConfig& c) { return c.refine.prompt_template; }},
      E2T_DOUBLE("refine.timeout_seconds", refine.timeout_seconds, "per-request timeout"),
      E2T_BOOL("refine.fallback", refine.fallback, "fall back to rule-based output on failure"),

      Field{"serve.host", "listen address",
            [](RunConfig& c, std::string_view v) { c.serve_host = std::string(v); },
            [](const RunConfig& c) { return c.serve_host; }},
      Field{"serve.port", "listen port, 0 picks a free one",
            [](RunConfig& c, std::string_view v) {
              const auto p = to_u64("serve.port", v);
              if (p > 65535) bad_value("serve.port", v, "a port number");
              c.serve_port = static_cast<int>(p);
            },
            [](const RunConfig& c) { return std::to_string(c.serve_port); }},
  };
  return all;
}

#undef E2T_SIZE
#undef E2T_DOUBLE
#undef E2T_BOOL
#undef E2T_PATH

}  // namespace

void apply_setting(RunConfig& config, std::string_view key, std::string_view value) {
  for (const auto& f : fields()) {
    if (f.key == key) {
      f.set(config, value);
      return;
    }
  }
  throw ConfigError("unknown config key '" + std::string(key) + "'");
}

void apply_text(RunConfig& config, std::string_view text, std::string_view origin) {
  std::istringstream in{std::string(text)};
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    const auto hash = line.find('#');
    // '#' opens a comment at line start or after whitespace, so values such
    // as URLs with fragments keep theirs.
    if (hash != std::string::npos &&
        (hash == 0 || std::isspace(static_cast<unsigned char>(line[hash - 1])))) {
      line.erase(hash);
    }
    const auto body = trim(line);
    if (body.empty()) continue;
    const auto eq = body.find('=');
    if (eq == std::string::npos) {
      throw ConfigError(std::string(origin) + ":" + std::to_string(lineno) + ": expected key = value");
    }
    try {
      apply_setting(config, trim(std::string_view(body).substr(0, eq)),
                    trim(std::string_view(body).substr(eq + 1)));
    } catch (const ConfigError& e) {
      throw ConfigError(std::string(origin) + ":" + std::to_string(lineno) + ": " + e.what());
    }
  }
}

RunConfig load_config(const std::filesystem::path& file, const std::vector<std::string>& overrides) {
  RunConfig c;
  if (!file.empty()) {
    std::ifstream in(file);
    if (!in) throw ConfigError("cannot read config file " + file.string());
    std::stringstream ss;
    ss << in.rdbuf();
    apply_text(c, ss.str(), file.string());
  }
  for (const auto& o : overrides) {
    const auto eq = o.find('=');
    if (eq == std::string::npos) throw ConfigError("override '" + o + "' is not key=value");
    apply_setting(c, trim(std::string_view(o).substr(0, eq)), trim(std::string_view(o).substr(eq + 1)));
  }
  c.validate();
  return c;
}

void RunConfig::validate() const {
  try {
    brain.validate();
    seq2seq_config().validate();
    refine.validate();
  } catch (const std::invalid_argument& e) {
    throw ConfigError(e.what());
  }
  const double total = split.train + split.dev + split.test;
  if (split.train <= 0.0 || split.dev < 0.0 || split.test < 0.0 || std::abs(total - 1.0) > 1e-9) {
    throw ConfigError("split.train/dev/test must be non-negative, train positive, and sum to 1");
  }
  if (decode.width == 0) throw ConfigError("decode.beam_width must be >= 1");
  if (decode.max_len == 0 || decode.max_len > seq2seq.max_target) {
    throw ConfigError("decode.max_len must be in [1, seq2seq.max_target]");
  }
  if (decode.length_alpha < 0.0) throw ConfigError("decode.length_alpha must be >= 0");
  if (stage1.batch_size == 0 || stage2.batch_size == 0) throw ConfigError("batch sizes must be >= 1");
  if (!(stage1.lr > 0.0) || !(stage2.lr > 0.0)) throw ConfigError("learning rates must be positive");
}

langmod::Seq2SeqConfig RunConfig::seq2seq_config() const {
  auto c = seq2seq;
  c.input_dim = brain.embed_dim;
  c.max_source = brain.max_words;
  return c;
}

std::string RunConfig::to_text() const {
  std::string out;
  for (const auto& f : fields()) out += f.key + " = " + f.get(*this) + "\n";
  return out;
}

const std::vector<KeyDoc>& config_keys() {
  static const std::vector<KeyDoc> docs = [] {
    std::vector<KeyDoc> d;
    const RunConfig defaults;
    for (const auto& f : fields()) d.push_back({f.key, f.get(defaults), f.description});
    return d;
  }();
  return docs;
}

}  // namespace eeg2text::app
