#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace eeg2text::refine {

inline constexpr const char* kApiKeyEnv = "EEG2TEXT_REFINE_API_KEY";
inline constexpr const char* kDefaultPrompt =
    "As a text reconstructor, correct grammatical errors, repetitive words, and punctuation in "
    "the following sentence while preserving its original meaning with minimal changes: "
    "{sentence}";

enum class PolicyKind { kRuleBased, kExternal };
enum class RefineSource { kRuleBased, kExternal, kExternalFallback };

std::string_view policy_kind_name(PolicyKind kind);
PolicyKind parse_policy_kind(std::string_view name);
std::string_view refine_source_name(RefineSource source);

struct RefinePolicy {
  PolicyKind kind = PolicyKind::kRuleBased;
  std::string endpoint;  // full URL, e.g. https://host/v1/chat/completions
  std::string model;
  std::string prompt_template = kDefaultPrompt;
  double timeout_seconds = 10.0;
  bool fallback = true;

  // Throws std::invalid_argument unless the template holds exactly one
  // {sentence} placeholder and the timeout is positive; an external policy
  // also needs an http(s) endpoint and a model name.
  void validate() const;
};

struct RefineResult {
  std::string text;
  RefineSource source = RefineSource::kRuleBased;
};

class RefineError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};
class RefineTimeoutError : public RefineError {
 public:
  using RefineError::RefineError;
};
// Connection failures and non-success HTTP statuses.
class RefineTransportError : public RefineError {
 public:
  using RefineError::RefineError;
};
class RefineResponseError : public RefineError {
 public:
  using RefineError::RefineError;
};

std::string fill_prompt(std::string_view prompt_template, std::string_view sentence);

// JSON body sent to the endpoint:
//   {"model": <model>, "messages": [{"role": "user", "content": <prompt>}]}
std::string build_request_body(const RefinePolicy& policy, std::string_view sentence);

// Text of the first choice: choices[0].message.content or choices[0].text.
// Throws RefineResponseError on anything else.
std::string parse_reply(std::string_view body);

// POSTs the filled prompt. The API key, when the environment provides one,
// is sent as a bearer token and never appears in messages. On any failure
// with fallback on, returns the rule-based result marked external_fallback;
// with fallback off, throws the matching RefineError subclass.
RefineResult refine_external(std::string_view sentence, const RefinePolicy& policy);

// Dispatches on policy.kind.
RefineResult refine(std::string_view sentence, const RefinePolicy& policy);

}  // namespace eeg2text::refine
