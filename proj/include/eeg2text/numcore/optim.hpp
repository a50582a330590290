#pragma once

#include <cmath>
#include <cstdint>
#include <vector>

#include "eeg2text/numcore/parameter.hpp"

namespace eeg2text::numcore {

struct AdamConfig {
  double lr = 1e-3;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
};

// Bias-corrected Adam over the trainable entries of a ParamStore.
template <class T>
class Adam {
 public:
  Adam(ParamStore<T>& params, AdamConfig config) : params_(&params), config_(config) {
    for (std::size_t i = 0; i < params.size(); ++i) {
      first_.emplace_back(params[i].value.shape());
      second_.emplace_back(params[i].value.shape());
    }
  }

  void step() {
    ++steps_;
    const double c1 = 1.0 - std::pow(config_.beta1, static_cast<double>(steps_));
    const double c2 = 1.0 - std::pow(config_.beta2, static_cast<double>(steps_));
    const T b1 = static_cast<T>(config_.beta1), b2 = static_cast<T>(config_.beta2);
    for (std::size_t i = 0; i < params_->size(); ++i) {
      auto& p = (*params_)[i];
      if (!p.trainable) continue;
      auto& m = first_[i];
      auto& v = second_[i];
      for (std::size_t j = 0; j < p.value.size(); ++j) {
        const T g = p.grad[j];
        m[j] = b1 * m[j] + (T{1} - b1) * g;
        v[j] = b2 * v[j] + (T{1} - b2) * g * g;
        const double mhat = static_cast<double>(m[j]) / c1;
        const double vhat = static_cast<double>(v[j]) / c2;
        p.value[j] -= static_cast<T>(config_.lr * mhat / (std::sqrt(vhat) + config_.eps));
      }
    }
  }

  std::int64_t steps() const noexcept { return steps_; }
  const AdamConfig& config() const noexcept { return config_; }
  void set_lr(double lr) noexcept { config_.lr = lr; }

 private:
  ParamStore<T>* params_;
  AdamConfig config_;
  std::vector<Tensor<T>> first_, second_;
  std::int64_t steps_ = 0;
};

// Rescales trainable gradients so their global L2 norm is at most max_norm.
// Returns the norm before clipping. max_norm <= 0 disables clipping.
template <class T>
double clip_grad_norm(ParamStore<T>& params, double max_norm) {
  double sq = 0.0;
  for (std::size_t i = 0; i < params.size(); ++i) {
    if (!params[i].trainable) continue;
    for (T g : params[i].grad.values()) sq += static_cast<double>(g) * g;
  }
  const double norm = std::sqrt(sq);
  if (max_norm > 0.0 && norm > max_norm) {
    const T s = static_cast<T>(max_norm / norm);
    for (std::size_t i = 0; i < params.size(); ++i) {
      if (!params[i].trainable) continue;
      for (auto& g : params[i].grad.values()) g *= s;
    }
  }
  return norm;
}

}  // namespace eeg2text::numcore
