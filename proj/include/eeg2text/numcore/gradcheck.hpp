#pragma once

#include <algorithm>
#include <cmath>
#include <map>
#include <stdexcept>
#include <string>
#include <vector>

#include "eeg2text/numcore/parameter.hpp"
#include "eeg2text/numcore/tape.hpp"

namespace eeg2text::numcore {

class GradCheckError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

struct GradCheckResult {
  double max_rel_error = 0.0;
  std::string worst_param;
  std::size_t worst_index = 0;
  double analytic = 0.0;
  double numeric = 0.0;
  std::size_t entries_checked = 0;
  std::map<std::string, double> max_rel_by_param;
};

// Compares reverse-mode gradients of `loss` against central differences for
// every entry of every parameter in `params`. `loss` is called as
// loss(Tape<T>&) and must return a scalar Var recorded on that tape; it is
// re-evaluated twice per entry, so it must be deterministic.
//
// Relative error per entry is |a - n| / max(|a|, |n|, 1e-8).
template <class T, class LossFn>
GradCheckResult grad_check(ParamStore<T>& params, LossFn&& loss, double eps) {
  if (!(eps > 0.0)) throw std::invalid_argument("grad_check: eps must be positive");

  auto evaluate = [&]() -> double {
    Tape<T> tape;
    const double v = static_cast<double>(loss(tape).value().item());
    if (!std::isfinite(v)) throw GradCheckError("grad_check: loss evaluated to a non-finite value");
    return v;
  };

  params.zero_grad();
  {
    Tape<T> tape;
    Var<T> out = loss(tape);
    if (!std::isfinite(static_cast<double>(out.value().item()))) {
      throw GradCheckError("grad_check: loss evaluated to a non-finite value");
    }
    tape.backward(out);
  }

  GradCheckResult result;
  for (std::size_t i = 0; i < params.size(); ++i) {
    auto& p = params[i];
    const Tensor<T> analytic = p.grad;
    for (std::size_t j = 0; j < p.value.size(); ++j) {
      const T saved = p.value[j];
      p.value[j] = static_cast<T>(static_cast<double>(saved) + eps);
      const double plus = evaluate();
      p.value[j] = static_cast<T>(static_cast<double>(saved) - eps);
      const double minus = evaluate();
      p.value[j] = saved;

      const double numeric = (plus - minus) / (2.0 * eps);
      const double a = static_cast<double>(analytic[j]);
      const double denom = std::max({std::abs(a), std::abs(numeric), 1e-8});
      const double rel = std::abs(a - numeric) / denom;
      ++result.entries_checked;
      auto& worst_here = result.max_rel_by_param[p.name];
      worst_here = std::max(worst_here, rel);
      if (rel > result.max_rel_error) {
        result.max_rel_error = rel;
        result.worst_param = p.name;
        result.worst_index = j;
        result.analytic = a;
        result.numeric = numeric;
      }
    }
  }
  return result;
}

}  // namespace eeg2text::numcore
