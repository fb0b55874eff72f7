#pragma once

#include <cmath>
#include <cstddef>
#include <cstdint>
#include <string>
#include <vector>

#include "kd/errors.hpp"

namespace kd {

// Dense rank-3 array of C x W x H values stored channel-major row-major:
// index(c, x, y) = (c * W + x) * H + y.
//
// Backbone features are genuine C x W x H tensors; model parameters reuse the
// same container as 1 x 1 x N vectors and 1 x R x C matrices.
template <typename T>
class Tensor {
public:
    Tensor() = default;

    Tensor(std::size_t c, std::size_t w, std::size_t h, T fill = T(0))
        : channels_(c), width_(w), height_(h), values_(c * w * h, fill) {}

    Tensor(std::size_t c, std::size_t w, std::size_t h, std::vector<T> values)
        : channels_(c), width_(w), height_(h), values_(std::move(values)) {
        if (values_.size() != c * w * h) {
            throw DimensionError("tensor value count " + std::to_string(values_.size()) +
                                 " does not match shape " + shape_string(c, w, h));
        }
    }

    static Tensor vector(std::size_t n, T fill = T(0)) { return Tensor(1, 1, n, fill); }
    static Tensor vector(std::vector<T> values) {
        const std::size_t n = values.size();
        return Tensor(1, 1, n, std::move(values));
    }
    static Tensor scalar(T v) { return Tensor(1, 1, 1, std::vector<T>{v}); }
    static Tensor matrix(std::size_t rows, std::size_t cols, T fill = T(0)) {
        return Tensor(1, rows, cols, fill);
    }

    std::size_t channels() const { return channels_; }
    std::size_t width() const { return width_; }
    std::size_t height() const { return height_; }
    std::size_t size() const { return values_.size(); }
    bool empty() const { return values_.empty(); }

    T& at(std::size_t c, std::size_t x, std::size_t y) {
        return values_[(c * width_ + x) * height_ + y];
    }
    T at(std::size_t c, std::size_t x, std::size_t y) const {
        return values_[(c * width_ + x) * height_ + y];
    }

    T& operator[](std::size_t i) { return values_[i]; }
    T operator[](std::size_t i) const { return values_[i]; }

    T* data() { return values_.data(); }
    const T* data() const { return values_.data(); }
    const std::vector<T>& values() const { return values_; }

    bool same_shape(const Tensor& other) const {
        return channels_ == other.channels_ && width_ == other.width_ &&
               height_ == other.height_;
    }

    std::string shape_string() const { return shape_string(channels_, width_, height_); }

    bool all_finite() const {
        for (const T v : values_) {
            if (!std::isfinite(static_cast<double>(v))) return false;
        }
        return true;
    }

    template <typename U>
    Tensor<U> cast() const {
        std::vector<U> out(values_.size());
        for (std::size_t i = 0; i < values_.size(); ++i) out[i] = static_cast<U>(values_[i]);
        return Tensor<U>(channels_, width_, height_, std::move(out));
    }

    static std::string shape_string(std::size_t c, std::size_t w, std::size_t h) {
        return std::to_string(c) + "x" + std::to_string(w) + "x" + std::to_string(h);
    }

private:
    std::size_t channels_ = 0;
    std::size_t width_ = 0;
    std::size_t height_ = 0;
    std::vector<T> values_;
};

using TensorF = Tensor<float>;
using TensorD = Tensor<double>;

} // namespace kd
