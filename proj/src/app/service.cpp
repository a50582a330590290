#include "eeg2text/app/service.hpp"

#include <cstdio>

#include "eeg2text/dataio/format.hpp"
#include "httplib.h"
#include "json.hpp"

namespace eeg2text::app {

namespace {

using nlohmann::ordered_json;

void send_json(httplib::Response& res, int status, const std::string& body) {
  res.status = status;
  res.set_header("X-EEG2Text-Version", kVersion);
  res.set_content(body, "application/json");
}

void send_error(httplib::Response& res, int status, const std::string& kind, const std::string& message,
                const std::vector<dataio::Violation>* violations = nullptr) {
  ordered_json j;
  j["version"] = kVersion;
  j["error"] = kind;
  j["message"] = message;
  if (violations) {
    auto list = ordered_json::array();
    for (const auto& v : *violations) list.push_back(v.to_string());
    j["violations"] = std::move(list);
  }
  send_json(res, status, j.dump());
}

std::string hex64(std::uint64_t v) {
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(v));
  return buf;
}

// Maps pipeline failures onto status codes; `body` produces the success
// payload.
template <class Fn>
void guarded(httplib::Response& res, Fn&& body) {
  try {
    send_json(res, 200, body());
  } catch (const InvalidRecordError& e) {
    send_error(res, 400, "invalid_record", e.what(), &e.violations());
  } catch (const dataio::DatasetError& e) {
    send_error(res, 400, "malformed_body", e.what());
  } catch (const DecodeError& e) {
    send_error(res, 400, "undecodable", e.what());
  } catch (const brainmod::UnknownSubjectError& e) {
    send_error(res, 404, "unknown_subject", e.what());
  } catch (const refine::RefineError& e) {
    send_error(res, 502, "refine_failed", e.what());
  } catch (const std::exception& e) {
    send_error(res, 500, "internal", e.what());
  }
}

}  // namespace

struct Service::Impl {
  const Pipeline& pipeline;
  httplib::Server server;

  explicit Impl(const Pipeline& p) : pipeline(p) {
    server.Get("/health", [this](const httplib::Request&, httplib::Response& res) {
      ordered_json j;
      j["status"] = "ok";
      j["model_checksum"] = hex64(pipeline.checksum());
      j["version"] = kVersion;
      send_json(res, 200, j.dump());
    });

    server.Post("/decode", [this](const httplib::Request& req, httplib::Response& res) {
      guarded(res, [&] {
        const auto j = nlohmann::json::parse(req.body, nullptr, false);
        if (j.is_discarded()) throw dataio::FormatError("request body is not valid JSON");
        auto [subject, sentence] = dataio::record_from_json(j, "request record");
        return response_json(pipeline.decode(subject, sentence));
      });
    });

    server.Post("/decode-file", [this](const httplib::Request& req, httplib::Response& res) {
      guarded(res, [&] {
        std::string text = req.body;
        if (req.is_multipart_form_data()) {
          if (req.files.empty()) throw dataio::FormatError("multipart request carries no file");
          text = req.files.begin()->second.content;
        }
        const auto manifest = dataio::decode_dataset(text);
        ordered_json j;
        j["version"] = kVersion;
        auto records = ordered_json::array();
        for (const auto& r : pipeline.decode_manifest(manifest)) {
          records.push_back(ordered_json::parse(response_json(r)));
        }
        j["records"] = std::move(records);
        return j.dump();
      });
    });
  }
};

Service::Service(const Pipeline& pipeline) : impl_(std::make_unique<Impl>(pipeline)) {}

Service::~Service() { stop(); }

int Service::bind(const std::string& host, int port) {
  if (port == 0) {
    const int p = impl_->server.bind_to_any_port(host);
    if (p <= 0) throw std::runtime_error("cannot bind " + host);
    return p;
  }
  if (!impl_->server.bind_to_port(host, port)) {
    throw std::runtime_error("cannot bind " + host + ":" + std::to_string(port));
  }
  return port;
}

void Service::run() { impl_->server.listen_after_bind(); }

void Service::stop() {
  if (impl_ && impl_->server.is_running()) impl_->server.stop();
}

void Service::wait_until_ready() { impl_->server.wait_until_ready(); }

}  // namespace eeg2text::app
