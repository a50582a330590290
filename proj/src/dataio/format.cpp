#include "eeg2text/dataio/format.hpp"

#include <openssl/evp.h>

#include <fstream>
#include <iterator>
#include <sstream>

#include "eeg2text/numcore/bytes.hpp"

namespace eeg2text::dataio {

using nlohmann::json;

std::string base64_encode(std::string_view bytes) {
  std::string out(4 * ((bytes.size() + 2) / 3), '\0');
  const int n = EVP_EncodeBlock(reinterpret_cast<unsigned char*>(out.data()),
                                reinterpret_cast<const unsigned char*>(bytes.data()),
                                static_cast<int>(bytes.size()));
  out.resize(static_cast<std::size_t>(n));
  return out;
}

std::string base64_decode(std::string_view text) {
  if (text.size() % 4 != 0) {
    throw PayloadError("base64 text length " + std::to_string(text.size()) +
                       " is not a multiple of 4");
  }
  std::string out(3 * (text.size() / 4), '\0');
  const int n = EVP_DecodeBlock(reinterpret_cast<unsigned char*>(out.data()),
                                reinterpret_cast<const unsigned char*>(text.data()),
                                static_cast<int>(text.size()));
  if (n < 0) throw PayloadError("invalid base64 payload");
  // EVP_DecodeBlock keeps the zero bytes produced by '=' padding.
  std::size_t pad = 0;
  if (!text.empty() && text.back() == '=') ++pad;
  if (text.size() >= 2 && text[text.size() - 2] == '=') ++pad;
  out.resize(static_cast<std::size_t>(n) - pad);
  return out;
}

json matrix_to_json(const Matrix& m) {
  numcore::ByteWriter w;
  for (float f : m.values()) w.f32(f);
  return json{{"shape", m.shape()}, {"data", base64_encode(w.buffer())}};
}

namespace {

template <class T>
T require(const json& j, const char* key, const std::string& where) {
  auto it = j.find(key);
  if (it == j.end()) throw FormatError(where + ": missing field '" + key + "'");
  try {
    return it->get<T>();
  } catch (const json::exception&) {
    throw FormatError(where + ": field '" + key + "' has the wrong type");
  }
}

const json& require_object(const json& j, const char* key, const std::string& where) {
  auto it = j.find(key);
  if (it == j.end()) throw FormatError(where + ": missing field '" + key + "'");
  if (!it->is_object()) throw FormatError(where + ": field '" + key + "' must be an object");
  return *it;
}

}  // namespace

Matrix matrix_from_json(const json& j, const std::string& where) {
  if (!j.is_object()) throw FormatError(where + ": array must be an object {shape, data}");
  const auto shape = require<std::vector<std::size_t>>(j, "shape", where);
  const auto data = require<std::string>(j, "data", where);
  std::string bytes;
  try {
    bytes = base64_decode(data);
  } catch (const PayloadError& e) {
    throw PayloadError(where + ": " + e.what());
  }
  std::size_t volume = shape.empty() ? 0 : 1;
  for (std::size_t d : shape) volume *= d;
  if (bytes.size() % 4 != 0) {
    throw PayloadError(where + ": payload of " + std::to_string(bytes.size()) +
                       " bytes is truncated (not a whole number of float32 values)");
  }
  if (bytes.size() / 4 != volume) {
    throw PayloadError(where + ": payload holds " + std::to_string(bytes.size() / 4) +
                       " values but shape " + numcore::shape_to_string(shape) + " needs " +
                       std::to_string(volume));
  }
  if (volume == 0) return Matrix();
  std::vector<float> values(volume);
  numcore::ByteReader r(bytes);
  for (auto& v : values) v = r.f32();
  return Matrix(shape, std::move(values));
}

json record_to_json(std::string_view subject_id, const SentenceRecord& sentence) {
  json words = json::array();
  for (const auto& w : sentence.words) {
    json bands = json::object();
    for (const auto& [win, m] : w.band_features) bands[std::string(window_name(win))] = matrix_to_json(m);
    words.push_back(json{{"text", w.text},
                         {"has_fixation", w.has_fixation},
                         {"raw_eeg", matrix_to_json(w.raw_eeg)},
                         {"band_features", std::move(bands)}});
  }
  json rec{{"subject_id", subject_id}, {"content", sentence.content}};
  if (sentence.sentence_eeg) rec["sentence_eeg"] = matrix_to_json(*sentence.sentence_eeg);
  if (sentence.answer_eeg) rec["answer_eeg"] = matrix_to_json(*sentence.answer_eeg);
  rec["words"] = std::move(words);
  return rec;
}

std::pair<std::string, SentenceRecord> record_from_json(const json& j, const std::string& where) {
  if (!j.is_object()) throw FormatError(where + ": record must be an object");
  std::pair<std::string, SentenceRecord> out;
  out.first = require<std::string>(j, "subject_id", where);
  const std::string at = where + " (subject " + out.first + ")";
  auto& s = out.second;
  s.content = require<std::string>(j, "content", at);
  if (j.contains("sentence_eeg")) s.sentence_eeg = matrix_from_json(j["sentence_eeg"], at + " sentence_eeg");
  if (j.contains("answer_eeg")) s.answer_eeg = matrix_from_json(j["answer_eeg"], at + " answer_eeg");
  auto wit = j.find("words");
  if (wit == j.end() || !wit->is_array()) throw FormatError(at + ": missing array field 'words'");
  for (std::size_t i = 0; i < wit->size(); ++i) {
    const json& wj = (*wit)[i];
    const std::string wat = at + " word " + std::to_string(i);
    if (!wj.is_object()) throw FormatError(wat + ": word must be an object");
    WordRecord w;
    w.text = require<std::string>(wj, "text", wat);
    w.has_fixation = require<bool>(wj, "has_fixation", wat);
    auto rit = wj.find("raw_eeg");
    if (rit == wj.end()) throw FormatError(wat + ": missing field 'raw_eeg'");
    w.raw_eeg = matrix_from_json(*rit, wat + " raw_eeg");
    for (const auto& [key, mj] : require_object(wj, "band_features", wat).items()) {
      const auto win = parse_window(key);
      if (!win) throw FormatError(wat + ": unknown band_features window '" + key + "'");
      w.band_features[*win] = matrix_from_json(mj, wat + " band_features " + key);
    }
    s.words.push_back(std::move(w));
  }
  return out;
}

std::string encode_dataset(const DatasetManifest& m) {
  std::string out;
  json header{{"format_version", m.format_version},
              {"channels", m.channels},
              {"sampling_rate", m.sampling_rate},
              {"subjects", m.subject_ids()},
              {"provenance", m.provenance}};
  out += header.dump();
  out.push_back('\n');
  for (const auto& subj : m.subjects) {
    for (const auto& sent : subj.sentences) {
      out += record_to_json(subj.subject_id, sent).dump();
      out.push_back('\n');
    }
  }
  return out;
}

DatasetManifest decode_dataset(std::string_view text) {
  std::size_t pos = 0, line_no = 0;
  auto next_line = [&](std::string_view& line) {
    while (pos < text.size()) {
      auto nl = text.find('\n', pos);
      if (nl == std::string_view::npos) nl = text.size();
      line = text.substr(pos, nl - pos);
      pos = nl + 1;
      ++line_no;
      if (!line.empty() && line.back() == '\r') line.remove_suffix(1);
      if (!line.empty()) return true;
    }
    return false;
  };
  auto parse = [&](std::string_view line) {
    try {
      return json::parse(line);
    } catch (const json::parse_error& e) {
      throw FormatError("line " + std::to_string(line_no) + ": invalid JSON (" + e.what() + ")");
    }
  };

  std::string_view line;
  if (!next_line(line)) throw FormatError("dataset is empty (no header record)");
  const json header = parse(line);
  if (!header.is_object()) throw FormatError("line 1: header must be an object");
  auto vit = header.find("format_version");
  if (vit == header.end() || !vit->is_number_integer()) {
    throw VersionError("header has no integer format_version");
  }
  if (vit->get<int>() != kFormatVersion) {
    throw VersionError("unsupported dataset format_version " + vit->dump() + " (expected " +
                       std::to_string(kFormatVersion) + ")");
  }

  DatasetManifest m;
  m.format_version = kFormatVersion;
  m.channels = require<std::size_t>(header, "channels", "header");
  m.sampling_rate = require<double>(header, "sampling_rate", "header");
  m.provenance = header.value("provenance", std::string());
  for (const auto& id : require<std::vector<std::string>>(header, "subjects", "header")) {
    m.subjects.push_back(SubjectData{id, {}});
  }

  std::size_t record = 0;
  while (next_line(line)) {
    ++record;
    const std::string where = "record " + std::to_string(record) + " (line " + std::to_string(line_no) + ")";
    auto [subject, sentence] = record_from_json(parse(line), where);
    SubjectData* target = nullptr;
    for (auto& s : m.subjects)
      if (s.subject_id == subject) target = &s;
    if (!target) throw FormatError(where + ": subject " + subject + " is not listed in the header");
    target->sentences.push_back(std::move(sentence));
  }
  return m;
}

void save_dataset(const DatasetManifest& manifest, const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw DatasetError("cannot open " + path.string() + " for writing");
  const auto text = encode_dataset(manifest);
  out.write(text.data(), static_cast<std::streamsize>(text.size()));
  if (!out) throw DatasetError("failed writing " + path.string());
}

DatasetManifest load_dataset(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DatasetError("cannot open dataset " + path.string());
  std::string text((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
  return decode_dataset(text);
}

}  // namespace eeg2text::dataio
