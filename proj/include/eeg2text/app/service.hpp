#pragma once

#include <memory>
#include <string>

#include "eeg2text/app/pipeline.hpp"

namespace eeg2text::app {

// HTTP front end over a loaded Pipeline.
//
//   GET  /health       {status, model_checksum, version}
//   POST /decode       body: one portable-format record (with subject_id)
//                      -> the same JSON object `decode` writes per line
//   POST /decode-file  body: a portable dataset, raw or as the first file of
//                      a multipart form -> {version, records: [...]}
//
// Errors: 400 malformed body or failed validation (with the violation
// list), 404 unknown subject, 502 refiner failure without fallback. Every
// response carries the version in its JSON and in X-EEG2Text-Version.
class Service {
 public:
  explicit Service(const Pipeline& pipeline);
  ~Service();
  Service(const Service&) = delete;
  Service& operator=(const Service&) = delete;

  // Binds and returns the port (port 0 picks a free one). Throws
  // std::runtime_error when binding fails.
  int bind(const std::string& host, int port);
  // Serves until stop(); call after bind().
  void run();
  void stop();
  void wait_until_ready();

 private:
  struct Impl;
  std::unique_ptr<Impl> impl_;
};

}  // namespace eeg2text::app
