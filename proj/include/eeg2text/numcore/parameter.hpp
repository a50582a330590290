#pragma once

#include <cstdint>
#include <cstring>
#include <map>
#include <memory>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

#include "eeg2text/numcore/rng.hpp"
#include "eeg2text/numcore/tensor.hpp"

namespace eeg2text::numcore {

template <class T>
struct Parameter {
  std::string name;
  Tensor<T> value;
  Tensor<T> grad;
  bool trainable = true;
  std::size_t slot = 0;

  void zero_grad() { grad.fill(T{0}); }
};

// Per-parameter gradient accumulators indexed by Parameter::slot. Used when
// several tapes run concurrently and must not write into Parameter::grad.
template <class T>
using GradBuffer = std::vector<Tensor<T>>;

// Owns a model's parameters. Parameters are heap-allocated so the pointers
// handed to layers survive moves of the store.
template <class T>
class ParamStore {
 public:
  ParamStore() = default;
  ParamStore(const ParamStore&) = delete;
  ParamStore& operator=(const ParamStore&) = delete;
  ParamStore(ParamStore&&) noexcept = default;
  ParamStore& operator=(ParamStore&&) noexcept = default;

  Parameter<T>& add(std::string name, Tensor<T> init, bool trainable = true) {
    if (index_.count(name)) throw std::invalid_argument("duplicate parameter name: " + name);
    auto p = std::make_unique<Parameter<T>>();
    p->name = name;
    p->grad = Tensor<T>(init.shape());
    p->value = std::move(init);
    p->trainable = trainable;
    p->slot = params_.size();
    index_.emplace(std::move(name), params_.size());
    params_.push_back(std::move(p));
    return *params_.back();
  }

  Parameter<T>* find(std::string_view name) {
    auto it = index_.find(std::string(name));
    return it == index_.end() ? nullptr : params_[it->second].get();
  }
  const Parameter<T>* find(std::string_view name) const {
    auto it = index_.find(std::string(name));
    return it == index_.end() ? nullptr : params_[it->second].get();
  }
  Parameter<T>& get(std::string_view name) {
    auto* p = find(name);
    if (!p) throw std::out_of_range("no parameter named " + std::string(name));
    return *p;
  }
  const Parameter<T>& get(std::string_view name) const {
    auto* p = find(name);
    if (!p) throw std::out_of_range("no parameter named " + std::string(name));
    return *p;
  }

  std::size_t size() const noexcept { return params_.size(); }
  Parameter<T>& operator[](std::size_t i) { return *params_[i]; }
  const Parameter<T>& operator[](std::size_t i) const { return *params_[i]; }

  std::size_t value_count() const {
    std::size_t n = 0;
    for (const auto& p : params_) n += p->value.size();
    return n;
  }

  void zero_grad() {
    for (auto& p : params_) p->zero_grad();
  }

  GradBuffer<T> make_grad_buffer() const {
    GradBuffer<T> buf;
    buf.reserve(params_.size());
    for (const auto& p : params_) buf.emplace_back(p->value.shape());
    return buf;
  }

  // grad += scale * buffer, slot by slot.
  void accumulate(const GradBuffer<T>& buffer, T scale = T{1}) {
    for (std::size_t i = 0; i < params_.size(); ++i) {
      auto& g = params_[i]->grad;
      const auto& b = buffer[i];
      for (std::size_t j = 0; j < g.size(); ++j) g[j] += scale * b[j];
    }
  }

  void set_trainable_prefix(std::string_view prefix, bool trainable) {
    for (auto& p : params_) {
      if (std::string_view(p->name).substr(0, prefix.size()) == prefix) p->trainable = trainable;
    }
  }

  // FNV-1a over names and raw value bytes; used to prove frozen tables and
  // deployed models did not change.
  std::uint64_t checksum() const {
    std::uint64_t h = 0xcbf29ce484222325ull;
    for (const auto& p : params_) {
      h = fnv1a64(p->name, h);
      h = fnv1a64(std::string_view(reinterpret_cast<const char*>(p->value.data()),
                                   p->value.size() * sizeof(T)),
                  h);
    }
    return h;
  }

  template <class U>
  void copy_values_from(const ParamStore<U>& other) {
    if (other.size() != size()) throw std::invalid_argument("parameter stores differ in size");
    for (std::size_t i = 0; i < size(); ++i) {
      auto& dst = *params_[i];
      const auto& src = other[i];
      if (dst.name != src.name || !dst.value.same_shape(src.value)) {
        throw std::invalid_argument("parameter mismatch at " + dst.name);
      }
      for (std::size_t j = 0; j < dst.value.size(); ++j) dst.value[j] = static_cast<T>(src.value[j]);
    }
  }

 private:
  std::vector<std::unique_ptr<Parameter<T>>> params_;
  std::map<std::string, std::size_t> index_;
};

// Fan-in-scaled uniform init, U(-1/sqrt(fan_in), 1/sqrt(fan_in)).
template <class T>
Tensor<T> fan_in_uniform(std::size_t rows, std::size_t cols, std::size_t fan_in, Rng& rng) {
  const double bound = 1.0 / std::sqrt(static_cast<double>(fan_in));
  std::uniform_real_distribution<double> dist(-bound, bound);
  Tensor<T> t({rows, cols});
  for (auto& v : t.values()) v = static_cast<T>(dist(rng));
  return t;
}

}  // namespace eeg2text::numcore
