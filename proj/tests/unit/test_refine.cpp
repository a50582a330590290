#include <algorithm>
#include <cctype>
#include <cstdlib>
#include <future>

#include "doctest.h"
#include "eeg2text/refine/external.hpp"
#include "eeg2text/refine/rule_based.hpp"
#include "mock_endpoint.hpp"
#include "refine_corpus.hpp"

using namespace eeg2text;
using refine::RefinePolicy;
using refine::RefineSource;
using refine::refine_rule_based;
using testing::MockEndpoint;
using testing::SilentEndpoint;

namespace {

std::string fold(std::string s) {
  std::transform(s.begin(), s.end(), s.begin(), [](unsigned char c) { return static_cast<char>(std::tolower(c)); });
  return s;
}

std::vector<std::string> folded_collapsed(const std::string& s) {
  std::vector<std::string> out;
  for (auto& t : refine::refine_tokens(s)) {
    t = fold(t);
    if (out.empty() || out.back() != t) out.push_back(t);
  }
  return out;
}

RefinePolicy external_policy(const std::string& url, double timeout = 2.0, bool fallback = true) {
  RefinePolicy p;
  p.kind = refine::PolicyKind::kExternal;
  p.endpoint = url;
  p.model = "test-model";
  p.timeout_seconds = timeout;
  p.fallback = fallback;
  return p;
}

MockEndpoint::Reply uppercase_prompted(const std::string& body) {
  // Echo the sentence after the template prefix, uppercased.
  auto prompt = MockEndpoint::prompt_of(body);
  const auto prefix = refine::fill_prompt(refine::kDefaultPrompt, "");
  std::string sentence = prompt.substr(prefix.size());
  std::transform(sentence.begin(), sentence.end(), sentence.begin(),
                 [](unsigned char c) { return static_cast<char>(std::toupper(c)); });
  return {200, MockEndpoint::chat_reply(sentence)};
}

}  // namespace

TEST_CASE("rule-based refinement examples") {
  CHECK(refine_rule_based("was the member member of of the family .") == "Was the member of the family.");
  CHECK(refine_rule_based("He is here.") == "He is here.");
  CHECK(refine_rule_based("wait ,, what !!") == "Wait, what!");
  CHECK(refine_rule_based("hello...") == "Hello.");
  CHECK(refine_rule_based("really ?!") == "Really?!");
  CHECK(refine_rule_based("the The THE end") == "The end.");
  CHECK(refine_rule_based("  a   b \t c  ") == "A b c.");
  CHECK(refine_rule_based("3 3 apples") == "3 Apples.");
  CHECK(refine_rule_based("\xc3\xa9lan vital") == "\xc3\xa9lan vital.");
  CHECK(refine_rule_based("") == "");
  CHECK(refine_rule_based(" \t\n") == "");
}

TEST_CASE("refiner tokens split off edge punctuation") {
  CHECK(refine::refine_tokens("e.g., (well) done!?") ==
        std::vector<std::string>{"e.g", ".", ",", "(well)", "done", "!", "?"});
  CHECK(refine::refine_tokens(",,") == std::vector<std::string>{",", ","});
}

TEST_CASE("rule-based refinement is idempotent on a noisy corpus") {
  for (const auto& s : testing::noisy_sentences(200, 7)) {
    const auto once = refine_rule_based(s);
    INFO("input: [", s, "] once: [", once, "]");
    CHECK(refine_rule_based(once) == once);
  }
}

TEST_CASE("rule-based refinement only removes adjacent duplicates") {
  for (const auto& s : testing::noisy_sentences(200, 8)) {
    const auto out = refine_rule_based(s);
    auto expected = folded_collapsed(s);
    auto got = folded_collapsed(out);
    if (!expected.empty() && got.size() == expected.size() + 1 && got.back() == ".") got.pop_back();
    INFO("input: [", s, "] output: [", out, "]");
    CHECK(got == expected);
    if (!expected.empty()) {
      const char last = out.back();
      CHECK((last == '.' || last == '!' || last == '?'));
    }
  }
}

TEST_CASE("policy validation") {
  RefinePolicy p;
  CHECK_NOTHROW(p.validate());
  p.prompt_template = "fix {sentence} and {sentence}";
  CHECK_THROWS_AS(p.validate(), std::invalid_argument);
  p.prompt_template = "no placeholder";
  CHECK_THROWS_AS(p.validate(), std::invalid_argument);
  p = RefinePolicy{};
  p.timeout_seconds = 0.0;
  CHECK_THROWS_AS(p.validate(), std::invalid_argument);
  auto e = external_policy("ftp://example.org/x");
  CHECK_THROWS_AS(e.validate(), std::invalid_argument);
  e = external_policy("https://example.org/v1/chat");
  CHECK_NOTHROW(e.validate());
  e.model.clear();
  CHECK_THROWS_AS(e.validate(), std::invalid_argument);
  CHECK(refine::parse_policy_kind("external") == refine::PolicyKind::kExternal);
  CHECK_THROWS_AS(refine::parse_policy_kind("gpt"), std::invalid_argument);
}

TEST_CASE("reply parsing") {
  CHECK(refine::parse_reply(R"({"choices":[{"message":{"content":"Hi."}}]})") == "Hi.");
  CHECK(refine::parse_reply(R"({"choices":[{"text":"Hi."}]})") == "Hi.");
  CHECK_THROWS_AS(refine::parse_reply("not json"), refine::RefineResponseError);
  CHECK_THROWS_AS(refine::parse_reply(R"({"choices":[]})"), refine::RefineResponseError);
  CHECK_THROWS_AS(refine::parse_reply(R"({"choices":[{"message":{"content":7}}]})"), refine::RefineResponseError);
}

TEST_CASE("external refinement against a mock endpoint") {
  MockEndpoint mock(uppercase_prompted);
  const std::string sentence = "he said \"fine\" {twice} \xc3\xa9t\xc3\xa9";
  const auto policy = external_policy(mock.url());
  const auto r = refine::refine(sentence, policy);
  CHECK(r.source == RefineSource::kExternal);
  CHECK(r.text == "HE SAID \"FINE\" {TWICE} \xc3\xa9T\xc3\xa9");
  CHECK(MockEndpoint::prompt_of(mock.last_body()) == refine::fill_prompt(refine::kDefaultPrompt, sentence));
  CHECK(mock.last_body() == refine::build_request_body(policy, sentence));
  CHECK(mock.last_authorization().empty());

  SUBCASE("api key travels as a bearer token") {
    ::setenv(refine::kApiKeyEnv, "sekrit-123", 1);
    refine::refine(sentence, policy);
    CHECK(mock.last_authorization() == "Bearer sekrit-123");
    ::unsetenv(refine::kApiKeyEnv);
  }

  SUBCASE("concurrent calls") {
    std::vector<std::future<refine::RefineResult>> futures;
    for (int i = 0; i < 8; ++i) {
      futures.push_back(std::async(std::launch::async, [&, i] {
        return refine::refine("word " + std::to_string(i), policy);
      }));
    }
    for (int i = 0; i < 8; ++i) CHECK(futures[static_cast<std::size_t>(i)].get().text == "WORD " + std::to_string(i));
  }
}

TEST_CASE("external failures are distinct without fallback and recovered with it") {
  const std::string sentence = "the the cat sat";
  const auto rule = refine_rule_based(sentence);

  SUBCASE("non-responding endpoint times out") {
    SilentEndpoint silent;
    CHECK_THROWS_AS(refine::refine_external(sentence, external_policy(silent.url(), 0.3, false)),
                    refine::RefineTimeoutError);
    const auto r = refine::refine_external(sentence, external_policy(silent.url(), 0.3, true));
    CHECK(r.source == RefineSource::kExternalFallback);
    CHECK(r.text == rule);
  }
  SUBCASE("refused connection is a transport error") {
    std::string url;
    {
      SilentEndpoint closed;
      url = closed.url();
    }
    CHECK_THROWS_AS(refine::refine_external(sentence, external_policy(url, 1.0, false)),
                    refine::RefineTransportError);
    CHECK(refine::refine_external(sentence, external_policy(url, 1.0, true)).source ==
          RefineSource::kExternalFallback);
  }
  SUBCASE("non-success status is a transport error that hides the key") {
    MockEndpoint mock([](const std::string&) { return MockEndpoint::Reply{500, "{}"}; });
    ::setenv(refine::kApiKeyEnv, "sekrit-456", 1);
    try {
      refine::refine_external(sentence, external_policy(mock.url(), 1.0, false));
      FAIL("expected an error");
    } catch (const refine::RefineTransportError& e) {
      CHECK(std::string(e.what()).find("500") != std::string::npos);
      CHECK(std::string(e.what()).find("sekrit") == std::string::npos);
    }
    ::unsetenv(refine::kApiKeyEnv);
    CHECK(refine::refine_external(sentence, external_policy(mock.url(), 1.0, true)).text == rule);
  }
  SUBCASE("malformed reply") {
    MockEndpoint mock([](const std::string&) { return MockEndpoint::Reply{200, "{\"nope\":1}"}; });
    CHECK_THROWS_AS(refine::refine_external(sentence, external_policy(mock.url(), 1.0, false)),
                    refine::RefineResponseError);
    const auto r = refine::refine_external(sentence, external_policy(mock.url(), 1.0, true));
    CHECK(r.source == RefineSource::kExternalFallback);
    CHECK(r.text == rule);
  }
}
