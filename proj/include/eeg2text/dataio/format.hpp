#pragma once

#include <filesystem>
#include <stdexcept>
#include <string>
#include <string_view>
#include <utility>

#include "eeg2text/dataio/dataset.hpp"
#include "json.hpp"

// Newline-delimited portable dataset format. The first line is a header
// object (format_version, channels, sampling_rate, subjects, provenance);
// every further line is one (subject, sentence) record. Numeric arrays are
// objects {shape: [..], data: base64 of little-endian float32}.

namespace eeg2text::dataio {

class DatasetError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Unknown or missing format_version.
class VersionError : public DatasetError {
 public:
  using DatasetError::DatasetError;
};

// Unparseable line, missing field or wrong field type.
class FormatError : public DatasetError {
 public:
  using DatasetError::DatasetError;
};

// Array payload that is not valid base64 or whose length disagrees with its
// shape.
class PayloadError : public DatasetError {
 public:
  using DatasetError::DatasetError;
};

std::string base64_encode(std::string_view bytes);
// Throws PayloadError on malformed input.
std::string base64_decode(std::string_view text);

nlohmann::json matrix_to_json(const Matrix& m);
// `where` names the field in error messages.
Matrix matrix_from_json(const nlohmann::json& j, const std::string& where);

nlohmann::json record_to_json(std::string_view subject_id, const SentenceRecord& sentence);
// Parses one record object; returns (subject_id, sentence). `where` names
// the record in error messages.
std::pair<std::string, SentenceRecord> record_from_json(const nlohmann::json& j,
                                                        const std::string& where);

std::string encode_dataset(const DatasetManifest& manifest);
DatasetManifest decode_dataset(std::string_view text);

void save_dataset(const DatasetManifest& manifest, const std::filesystem::path& path);
DatasetManifest load_dataset(const std::filesystem::path& path);

}  // namespace eeg2text::dataio
