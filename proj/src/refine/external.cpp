#include "eeg2text/refine/external.hpp"

#include <chrono>
#include <cmath>
#include <cstdlib>
#include <regex>

#include "httplib.h"
#include "json.hpp"
#include "eeg2text/refine/rule_based.hpp"

namespace eeg2text::refine {

namespace {

constexpr std::string_view kPlaceholder = "{sentence}";

std::size_t count_placeholders(std::string_view s) {
  std::size_t n = 0;
  for (auto pos = s.find(kPlaceholder); pos != std::string_view::npos;
       pos = s.find(kPlaceholder, pos + kPlaceholder.size())) {
    ++n;
  }
  return n;
}

struct Endpoint {
  std::string origin;  // scheme://host[:port]
  std::string path;
};

Endpoint split_url(const std::string& url) {
  static const std::regex re(R"(^(https?://[^/]+)(/.*)?$)", std::regex::icase);
  std::smatch m;
  if (!std::regex_match(url, m, re)) {
    throw std::invalid_argument("refine.endpoint must be an http:// or https:// URL, got '" + url + "'");
  }
  return {m[1].str(), m[2].matched ? m[2].str() : std::string("/")};
}

void set_timeout(httplib::Client& client, double seconds) {
  const auto whole = static_cast<time_t>(std::floor(seconds));
  const auto micros = static_cast<time_t>(std::llround((seconds - std::floor(seconds)) * 1e6));
  client.set_connection_timeout(whole, micros);
  client.set_read_timeout(whole, micros);
  client.set_write_timeout(whole, micros);
}

std::string call_endpoint(std::string_view sentence, const RefinePolicy& policy) {
  const auto ep = split_url(policy.endpoint);
  httplib::Client client(ep.origin);
  set_timeout(client, policy.timeout_seconds);
  httplib::Headers headers;
  if (const char* key = std::getenv(kApiKeyEnv); key && *key) {
    headers.emplace("Authorization", std::string("Bearer ") + key);
  }
  const auto started = std::chrono::steady_clock::now();
  auto res = client.Post(ep.path, headers, build_request_body(policy, sentence), "application/json");
  if (!res) {
    const auto err = res.error();
    const double elapsed =
        std::chrono::duration<double>(std::chrono::steady_clock::now() - started).count();
    // A read that fails only after the deadline is the read timeout firing.
    if (err == httplib::Error::ConnectionTimeout ||
        (err == httplib::Error::Read && elapsed >= policy.timeout_seconds)) {
      throw RefineTimeoutError("refine endpoint " + ep.origin + " did not respond within " +
                               std::to_string(policy.timeout_seconds) + " s");
    }
    throw RefineTransportError("refine endpoint " + ep.origin + ": " + httplib::to_string(err));
  }
  if (res->status < 200 || res->status >= 300) {
    throw RefineTransportError("refine endpoint " + ep.origin + " returned HTTP " +
                               std::to_string(res->status));
  }
  return parse_reply(res->body);
}

}  // namespace

std::string_view policy_kind_name(PolicyKind kind) {
  return kind == PolicyKind::kExternal ? "external" : "rule_based";
}

PolicyKind parse_policy_kind(std::string_view name) {
  if (name == "rule_based") return PolicyKind::kRuleBased;
  if (name == "external") return PolicyKind::kExternal;
  throw std::invalid_argument("unknown refine policy '" + std::string(name) +
                              "' (expected rule_based or external)");
}

std::string_view refine_source_name(RefineSource source) {
  switch (source) {
    case RefineSource::kExternal:
      return "external";
    case RefineSource::kExternalFallback:
      return "external_fallback";
    case RefineSource::kRuleBased:
      break;
  }
  return "rule_based";
}

void RefinePolicy::validate() const {
  if (count_placeholders(prompt_template) != 1) {
    throw std::invalid_argument("refine.prompt_template must contain {sentence} exactly once");
  }
  if (!(timeout_seconds > 0.0) || !std::isfinite(timeout_seconds)) {
    throw std::invalid_argument("refine.timeout_seconds must be positive");
  }
  if (kind == PolicyKind::kExternal) {
    split_url(endpoint);
    if (model.empty()) throw std::invalid_argument("refine.model is required for the external policy");
  }
}

std::string fill_prompt(std::string_view prompt_template, std::string_view sentence) {
  std::string out(prompt_template);
  const auto pos = out.find(kPlaceholder);
  if (pos == std::string::npos) throw std::invalid_argument("prompt template lacks {sentence}");
  out.replace(pos, kPlaceholder.size(), sentence);
  return out;
}

std::string build_request_body(const RefinePolicy& policy, std::string_view sentence) {
  nlohmann::json body = {
      {"model", policy.model},
      {"messages", nlohmann::json::array(
                       {{{"role", "user"}, {"content", fill_prompt(policy.prompt_template, sentence)}}})}};
  return body.dump();
}

std::string parse_reply(std::string_view body) {
  const auto j = nlohmann::json::parse(body, nullptr, false);
  if (j.is_discarded()) throw RefineResponseError("refine reply is not JSON");
  if (!j.is_object() || !j.contains("choices") || !j["choices"].is_array() || j["choices"].empty()) {
    throw RefineResponseError("refine reply has no choices");
  }
  const auto& first = j["choices"][0];
  if (first.is_object()) {
    if (first.contains("message") && first["message"].is_object() &&
        first["message"].contains("content") && first["message"]["content"].is_string()) {
      return first["message"]["content"].get<std::string>();
    }
    if (first.contains("text") && first["text"].is_string()) return first["text"].get<std::string>();
  }
  throw RefineResponseError("refine reply's first choice carries no text");
}

RefineResult refine_external(std::string_view sentence, const RefinePolicy& policy) {
  try {
    policy.validate();
    auto text = call_endpoint(sentence, policy);
    if (text.empty() && !sentence.empty()) throw RefineResponseError("refine reply text is empty");
    return {std::move(text), RefineSource::kExternal};
  } catch (const RefineError&) {
    if (!policy.fallback) throw;
  } catch (const std::exception&) {
    if (!policy.fallback) throw;
  }
  return {refine_rule_based(sentence), RefineSource::kExternalFallback};
}

RefineResult refine(std::string_view sentence, const RefinePolicy& policy) {
  if (policy.kind == PolicyKind::kExternal) return refine_external(sentence, policy);
  return {refine_rule_based(sentence), RefineSource::kRuleBased};
}

}  // namespace eeg2text::refine
