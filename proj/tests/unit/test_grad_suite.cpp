#include <array>
#include <set>

#include "doctest.h"
#include "grad_suite.hpp"

using namespace eeg2text;

TEST_CASE("every layer type passes grad_check at five seeds") {
  const std::array<std::uint64_t, 5> seeds{11, 12, 13, 14, 15};
  const auto cases = testing::run_grad_suite(seeds);
  const auto layers = testing::grad_suite_layers();
  REQUIRE(cases.size() == layers.size() * seeds.size());
  std::set<std::string> seen;
  for (const auto& c : cases) {
    INFO(c.layer, " seed ", c.seed, ": worst ", c.worst_param, " rel ", c.max_rel_error);
    CHECK(c.entries_checked >= 2);
    CHECK(c.max_rel_error <= 1e-4);
    seen.insert(c.layer);
  }
  CHECK(seen == std::set<std::string>(layers.begin(), layers.end()));
}

TEST_CASE("a broken gradient is caught") {
  // A large step makes finite differences disagree with the analytic
  // gradient of the nonlinear blocks, so the threshold is not vacuous.
  const std::array<std::uint64_t, 1> seeds{11};
  const auto cases = testing::run_grad_suite(seeds, 0.5);
  double worst = 0.0;
  for (const auto& c : cases) worst = std::max(worst, c.max_rel_error);
  CHECK(worst > 1e-4);
}
