#ifndef GRNN_TENSOR_HPP
#define GRNN_TENSOR_HPP

#include <cstdint>
#include <initializer_list>
#include <string>
#include <vector>

#include "grnn/error.hpp"

namespace grnn {

// Shape of a dense 4-D tensor: (batch, channels, height, width).
struct Shape4 {
  int64_t b = 0;
  int64_t c = 0;
  int64_t h = 0;
  int64_t w = 0;

  int64_t numel() const { return b * c * h * w; }
  bool operator==(const Shape4&) const = default;
  std::string str() const {
    return "(" + std::to_string(b) + "," + std::to_string(c) + "," +
           std::to_string(h) + "," + std::to_string(w) + ")";
  }
};

// Dense 4-D array, row-major with layout index = ((b*C + c)*H + h)*W + w.
// float in production paths, double in gradient-check paths.
template <typename T>
class Tensor4T {
 public:
  Tensor4T() = default;

  Tensor4T(Shape4 shape, std::vector<T> data)
      : shape_(shape), data_(std::move(data)) {
    validate();
    if (static_cast<int64_t>(data_.size()) != shape_.numel())
      throw ShapeError("tensor data length " + std::to_string(data_.size()) +
                       " does not match shape " + shape_.str());
  }

  static Tensor4T zeros(int64_t b, int64_t c, int64_t h, int64_t w) {
    Tensor4T t;
    t.shape_ = {b, c, h, w};
    t.validate();
    t.data_.assign(static_cast<size_t>(t.shape_.numel()), T(0));
    return t;
  }

  static Tensor4T full(int64_t b, int64_t c, int64_t h, int64_t w, T value) {
    Tensor4T t = zeros(b, c, h, w);
    for (auto& v : t.data_) v = value;
    return t;
  }

  static Tensor4T from(int64_t b, int64_t c, int64_t h, int64_t w,
                       std::initializer_list<T> values) {
    return Tensor4T({b, c, h, w}, std::vector<T>(values));
  }

  const Shape4& shape() const { return shape_; }
  int64_t batch() const { return shape_.b; }
  int64_t channels() const { return shape_.c; }
  int64_t height() const { return shape_.h; }
  int64_t width() const { return shape_.w; }
  int64_t numel() const { return shape_.numel(); }

  T* data() { return data_.data(); }
  const T* data() const { return data_.data(); }
  std::vector<T>& vec() { return data_; }
  const std::vector<T>& vec() const { return data_; }

  int64_t index(int64_t b, int64_t c, int64_t h, int64_t w) const {
    return ((b * shape_.c + c) * shape_.h + h) * shape_.w + w;
  }
  T& at(int64_t b, int64_t c, int64_t h, int64_t w) {
    return data_[static_cast<size_t>(index(b, c, h, w))];
  }
  const T& at(int64_t b, int64_t c, int64_t h, int64_t w) const {
    return data_[static_cast<size_t>(index(b, c, h, w))];
  }

  bool same_shape(const Tensor4T& o) const { return shape_ == o.shape_; }

  template <typename U>
  Tensor4T<U> cast() const {
    std::vector<U> out(data_.size());
    for (size_t i = 0; i < data_.size(); ++i) out[i] = static_cast<U>(data_[i]);
    return Tensor4T<U>(shape_, std::move(out));
  }

 private:
  void validate() const {
    if (shape_.b < 1 || shape_.c < 1 || shape_.h < 1 || shape_.w < 1)
      throw ShapeError("all tensor dimensions must be >= 1, got " +
                       shape_.str());
  }

  Shape4 shape_;
  std::vector<T> data_;
};

using Tensor4 = Tensor4T<float>;
using Tensor4d = Tensor4T<double>;

}  // namespace grnn

#endif  // GRNN_TENSOR_HPP
