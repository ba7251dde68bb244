#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <functional>
#include <numeric>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

namespace pacrr {

/// Dense row-major tensor. float is the training precision, double the
/// verification precision.
template <typename T>
class Tensor {
  public:
    Tensor() = default;

    explicit Tensor(std::vector<std::size_t> dims, T fill = T{0})
        : dims_(std::move(dims)), values_(element_count(dims_), fill) {}

    Tensor(std::vector<std::size_t> dims, std::vector<T> values) : dims_(std::move(dims)), values_(std::move(values)) {
        if (values_.size() != element_count(dims_)) {
            throw std::invalid_argument("tensor value count does not match its dimensions");
        }
    }

    const std::vector<std::size_t>& dims() const { return dims_; }
    std::size_t rank() const { return dims_.size(); }
    std::size_t dim(std::size_t axis) const { return dims_.at(axis); }
    std::size_t size() const { return values_.size(); }
    bool empty() const { return values_.empty(); }

    std::span<T> values() { return values_; }
    std::span<const T> values() const { return values_; }
    T* data() { return values_.data(); }
    const T* data() const { return values_.data(); }

    T& operator[](std::size_t i) { return values_[i]; }
    T operator[](std::size_t i) const { return values_[i]; }

    T& at(std::size_t r, std::size_t c) { return values_[r * dims_[1] + c]; }
    T at(std::size_t r, std::size_t c) const { return values_[r * dims_[1] + c]; }

    T& at(std::size_t f, std::size_t r, std::size_t c) { return values_[(f * dims_[1] + r) * dims_[2] + c]; }
    T at(std::size_t f, std::size_t r, std::size_t c) const { return values_[(f * dims_[1] + r) * dims_[2] + c]; }

    void fill(T value) { std::fill(values_.begin(), values_.end(), value); }

    bool all_finite() const {
        return std::all_of(values_.begin(), values_.end(), [](T v) { return std::isfinite(v); });
    }

    template <typename U>
    Tensor<U> cast() const {
        std::vector<U> out(values_.size());
        std::transform(values_.begin(), values_.end(), out.begin(), [](T v) { return static_cast<U>(v); });
        return Tensor<U>(dims_, std::move(out));
    }

    bool operator==(const Tensor&) const = default;

  private:
    static std::size_t element_count(const std::vector<std::size_t>& dims) {
        return std::accumulate(dims.begin(), dims.end(), std::size_t{1}, std::multiplies<>());
    }

    std::vector<std::size_t> dims_;
    std::vector<T> values_;
};

std::string format_dims(const std::vector<std::size_t>& dims);

}  // namespace pacrr
