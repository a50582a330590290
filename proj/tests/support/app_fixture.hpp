#pragma once

#include <filesystem>
#include <memory>
#include <string>
#include <thread>
#include <vector>

#include "eeg2text/app/config.hpp"
#include "eeg2text/app/pipeline.hpp"
#include "eeg2text/app/service.hpp"

namespace eeg2text::testing {

// Fresh empty directory under the system temp directory. Any previous
// content with the same name is removed.
std::filesystem::path scratch_dir(const std::string& name);

// A config whose data and output paths all live under `dir`, with
// `overrides` ("key=value") applied on top.
app::RunConfig config_in(const std::filesystem::path& dir, const std::vector<std::string>& overrides);

// Overrides for a model small enough to train in seconds.
std::vector<std::string> tiny_overrides();

// Runs synth, stage-1 and stage-2 training. Throws std::runtime_error with
// the command's error output when a step fails.
void synth_and_train(const app::RunConfig& config);

// A Service on 127.0.0.1 with a free port, serving from a background thread
// until destroyed.
class RunningService {
 public:
  explicit RunningService(const app::Pipeline& pipeline);
  ~RunningService();
  RunningService(const RunningService&) = delete;
  RunningService& operator=(const RunningService&) = delete;

  int port() const noexcept { return port_; }

 private:
  app::Service service_;
  int port_ = 0;
  std::thread thread_;
};

}  // namespace eeg2text::testing
