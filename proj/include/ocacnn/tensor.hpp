#pragma once

#include <algorithm>
#include <cstddef>
#include <cstdint>
#include <cstring>
#include <filesystem>
#include <iosfwd>
#include <span>
#include <string>
#include <type_traits>
#include <utility>
#include <vector>

#include "ocacnn/error.hpp"

namespace ocacnn {

using Shape = std::vector<std::size_t>;

std::size_t shape_numel(const Shape& shape);
std::string shape_str(const Shape& shape);

/// Dense row-major array. Shape is fixed once built; reshaped() returns a new
/// tensor that shares nothing with the original.
template <typename T>
class BasicTensor {
  static_assert(std::is_same_v<T, float> || std::is_same_v<T, double>,
                "tensors hold float or double");

 public:
  using value_type = T;

  BasicTensor() = default;

  explicit BasicTensor(Shape shape, T fill = T{0}) : shape_(std::move(shape)) {
    validate_shape(shape_);
    data_.assign(shape_numel(shape_), fill);
  }

  BasicTensor(Shape shape, std::vector<T> values)
      : shape_(std::move(shape)), data_(std::move(values)) {
    validate_shape(shape_);
    const std::size_t expected = shape_numel(shape_);
    if (data_.size() != expected) {
      throw ShapeError("tensor " + shape_str(shape_) + " expects " + std::to_string(expected) +
                       " values, got " + std::to_string(data_.size()));
    }
  }

  static BasicTensor scalar(T value) { return BasicTensor(Shape{1}, value); }

  const Shape& shape() const noexcept { return shape_; }
  std::size_t rank() const noexcept { return shape_.size(); }
  std::size_t dim(std::size_t axis) const { return shape_.at(axis); }
  std::size_t size() const noexcept { return data_.size(); }
  bool empty() const noexcept { return data_.empty(); }

  std::span<T> data() noexcept { return data_; }
  std::span<const T> data() const noexcept { return data_; }
  T* raw() noexcept { return data_.data(); }
  const T* raw() const noexcept { return data_.data(); }

  T& operator[](std::size_t i) noexcept { return data_[i]; }
  const T& operator[](std::size_t i) const noexcept { return data_[i]; }

  T item() const {
    if (data_.size() != 1) {
      throw ShapeError("item() on non-scalar tensor " + shape_str(shape_));
    }
    return data_[0];
  }

  BasicTensor reshaped(Shape shape) const& {
    BasicTensor out = *this;
    out.reshape_in_place(std::move(shape));
    return out;
  }
  BasicTensor reshaped(Shape shape) && {
    reshape_in_place(std::move(shape));
    return std::move(*this);
  }

  template <typename U>
  BasicTensor<U> cast() const {
    std::vector<U> values(data_.begin(), data_.end());
    return BasicTensor<U>(shape_, std::move(values));
  }

  void fill(T value) { std::fill(data_.begin(), data_.end(), value); }

 private:
  static void validate_shape(const Shape& shape) {
    if (shape.empty()) throw ShapeError("tensor shape must have at least one dimension");
    for (std::size_t d : shape) {
      if (d == 0) throw ShapeError("tensor dimensions must be >= 1, got " + shape_str(shape));
    }
  }

  void reshape_in_place(Shape shape) {
    validate_shape(shape);
    if (shape_numel(shape) != data_.size()) {
      throw ShapeError("cannot reshape " + shape_str(shape_) + " to " + shape_str(shape));
    }
    shape_ = std::move(shape);
  }

  Shape shape_;
  std::vector<T> data_;
};

using Tensor = BasicTensor<float>;
using Tensor64 = BasicTensor<double>;

template <typename T>
bool bitwise_equal(const BasicTensor<T>& a, const BasicTensor<T>& b) {
  return a.shape() == b.shape() &&
         (a.size() == 0 || std::memcmp(a.raw(), b.raw(), a.size() * sizeof(T)) == 0);
}

template <typename T>
bool all_finite(const BasicTensor<T>& t);

// Binary layout: "OCT1", u8 precision code (4 = f32, 8 = f64), u32 ndim,
// ndim x u64 dims, then little-endian elements in row-major order.
enum class Precision : std::uint8_t { f32 = 4, f64 = 8 };

template <typename T>
void write_tensor(std::ostream& out, const BasicTensor<T>& tensor);

/// Reads an OCT1 record; values stored in the other precision are converted.
template <typename T>
BasicTensor<T> read_tensor(std::istream& in);

template <typename T>
void save_tensor(const std::filesystem::path& path, const BasicTensor<T>& tensor);

template <typename T>
BasicTensor<T> load_tensor(const std::filesystem::path& path);

}  // namespace ocacnn
