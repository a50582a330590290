#pragma once

#include <cmath>
#include <cstddef>
#include <initializer_list>
#include <numeric>
#include <span>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

namespace eeg2text::numcore {

using Shape = std::vector<std::size_t>;

class ShapeError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

inline std::string shape_to_string(const Shape& shape) {
  std::string out = "[";
  for (std::size_t i = 0; i < shape.size(); ++i) {
    if (i) out += "x";
    out += std::to_string(shape[i]);
  }
  return out + "]";
}

inline std::size_t shape_volume(const Shape& shape) {
  return std::accumulate(shape.begin(), shape.end(), std::size_t{1},
                         [](std::size_t a, std::size_t b) { return a * b; });
}

// Dense row-major tensor. Every tensor that flows through the autodiff tape is
// rank 2; rank-1 tensors are viewed as a single row.
template <class T>
class Tensor {
 public:
  using value_type = T;

  Tensor() = default;

  explicit Tensor(Shape shape, T fill = T{})
      : shape_(std::move(shape)), data_(shape_volume(shape_), fill) {
    check_dims();
  }

  Tensor(Shape shape, std::vector<T> data) : shape_(std::move(shape)), data_(std::move(data)) {
    check_dims();
    if (data_.size() != shape_volume(shape_)) {
      throw ShapeError("tensor data length " + std::to_string(data_.size()) +
                       " does not match shape " + shape_to_string(shape_));
    }
  }

  static Tensor matrix(std::size_t rows, std::size_t cols, std::initializer_list<T> values) {
    return Tensor({rows, cols}, std::vector<T>(values));
  }

  static Tensor zeros(std::size_t rows, std::size_t cols) { return Tensor({rows, cols}); }

  static Tensor scalar(T v) { return Tensor({1, 1}, std::vector<T>{v}); }

  const Shape& shape() const noexcept { return shape_; }
  std::size_t rank() const noexcept { return shape_.size(); }
  std::size_t size() const noexcept { return data_.size(); }
  bool empty() const noexcept { return data_.empty(); }

  std::size_t rows() const noexcept {
    if (shape_.empty()) return 0;
    return shape_.size() == 1 ? 1 : shape_[0];
  }
  std::size_t cols() const noexcept {
    if (shape_.empty()) return 0;
    return shape_.size() == 1 ? shape_[0] : shape_[1];
  }

  T* data() noexcept { return data_.data(); }
  const T* data() const noexcept { return data_.data(); }
  std::span<T> values() noexcept { return data_; }
  std::span<const T> values() const noexcept { return data_; }

  T& operator[](std::size_t i) { return data_[i]; }
  T operator[](std::size_t i) const { return data_[i]; }

  T& at(std::size_t r, std::size_t c) { return data_[r * cols() + c]; }
  T at(std::size_t r, std::size_t c) const { return data_[r * cols() + c]; }

  std::span<T> row(std::size_t r) { return {data_.data() + r * cols(), cols()}; }
  std::span<const T> row(std::size_t r) const { return {data_.data() + r * cols(), cols()}; }

  T item() const {
    if (data_.size() != 1) {
      throw ShapeError("item() on tensor of shape " + shape_to_string(shape_));
    }
    return data_[0];
  }

  void fill(T v) { std::fill(data_.begin(), data_.end(), v); }

  bool same_shape(const Tensor& other) const noexcept {
    return rows() == other.rows() && cols() == other.cols() && size() == other.size();
  }

  bool all_finite() const noexcept {
    for (T v : data_) {
      if (!std::isfinite(v)) return false;
    }
    return true;
  }

  template <class U>
  Tensor<U> cast() const {
    std::vector<U> out(data_.size());
    for (std::size_t i = 0; i < data_.size(); ++i) out[i] = static_cast<U>(data_[i]);
    return Tensor<U>(shape_, std::move(out));
  }

  Tensor transposed() const {
    Tensor out({cols(), rows()});
    for (std::size_t r = 0; r < rows(); ++r)
      for (std::size_t c = 0; c < cols(); ++c) out.at(c, r) = at(r, c);
    return out;
  }

  friend bool operator==(const Tensor& a, const Tensor& b) {
    return a.shape_ == b.shape_ && a.data_ == b.data_;
  }

 private:
  void check_dims() const {
    for (std::size_t d : shape_) {
      if (d == 0) throw ShapeError("zero-sized dimension in shape " + shape_to_string(shape_));
    }
  }

  Shape shape_;
  std::vector<T> data_;
};

}  // namespace eeg2text::numcore
