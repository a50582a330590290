#pragma once

#include <functional>
#include <memory>
#include <mutex>
#include <string>
#include <thread>

namespace httplib {
class Server;
}

namespace eeg2text::testing {

// In-process HTTP server on 127.0.0.1 answering POST requests with a
// caller-supplied function of the request body. Records the last body seen.
class MockEndpoint {
 public:
  struct Reply {
    int status = 200;
    std::string body;
  };
  using Handler = std::function<Reply(const std::string& body)>;

  explicit MockEndpoint(Handler handler);
  ~MockEndpoint();
  MockEndpoint(const MockEndpoint&) = delete;
  MockEndpoint& operator=(const MockEndpoint&) = delete;

  int port() const noexcept { return port_; }
  std::string url(const std::string& path = "/v1/chat/completions") const;
  std::string last_body() const;
  std::string last_authorization() const;

  // Chat-completion reply carrying `text` in choices[0].message.content.
  static std::string chat_reply(const std::string& text);
  // The user message content from a chat-completion request body.
  static std::string prompt_of(const std::string& body);

 private:
  std::unique_ptr<httplib::Server> server_;
  std::thread thread_;
  int port_ = 0;
  mutable std::mutex mu_;
  std::string last_body_, last_auth_;
};

// A listening TCP socket that accepts connections into its backlog but never
// reads or answers, so clients hit their read timeout.
class SilentEndpoint {
 public:
  SilentEndpoint();
  ~SilentEndpoint();
  SilentEndpoint(const SilentEndpoint&) = delete;
  SilentEndpoint& operator=(const SilentEndpoint&) = delete;

  int port() const noexcept { return port_; }
  std::string url() const;

 private:
  int fd_ = -1;
  int port_ = 0;
};

}  // namespace eeg2text::testing
