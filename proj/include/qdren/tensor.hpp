#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <functional>
#include <numeric>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "qdren/errors.hpp"

namespace qdren {

using Shape = std::vector<std::size_t>;

inline std::string shape_to_string(const Shape& shape) {
    std::string out = "[";
    for (std::size_t i = 0; i < shape.size(); ++i) {
        if (i) out += "x";
        out += std::to_string(shape[i]);
    }
    return out + "]";
}

inline std::size_t shape_volume(const Shape& shape) {
    if (shape.empty()) throw DimensionError("tensor shape must have at least one extent");
    std::size_t n = 1;
    for (std::size_t e : shape) {
        if (e == 0) throw DimensionError("tensor extents must be positive, got " + shape_to_string(shape));
        n *= e;
    }
    return n;
}

/// Dense row-major array. Rank 1 is a vector, rank 2 a matrix; a scalar is
/// the one-element vector.
template <typename T>
class BasicTensor {
public:
    using value_type = T;

    BasicTensor() : shape_{1}, data_(1, T{0}) {}

    explicit BasicTensor(Shape shape, T fill = T{0})
        : shape_(std::move(shape)), data_(shape_volume(shape_), fill) {}

    BasicTensor(Shape shape, std::vector<T> data) : shape_(std::move(shape)), data_(std::move(data)) {
        if (data_.size() != shape_volume(shape_)) {
            throw DimensionError("data length " + std::to_string(data_.size()) + " does not match shape " +
                                 shape_to_string(shape_));
        }
    }

    static BasicTensor scalar(T value) { return BasicTensor(Shape{1}, std::vector<T>{value}); }
    static BasicTensor vector(std::vector<T> values) {
        Shape s{values.size()};
        return BasicTensor(std::move(s), std::move(values));
    }
    static BasicTensor matrix(std::size_t rows, std::size_t cols, std::vector<T> values) {
        return BasicTensor(Shape{rows, cols}, std::move(values));
    }
    static BasicTensor identity(std::size_t n) {
        BasicTensor t(Shape{n, n});
        for (std::size_t i = 0; i < n; ++i) t(i, i) = T{1};
        return t;
    }

    const Shape& shape() const noexcept { return shape_; }
    std::size_t rank() const noexcept { return shape_.size(); }
    std::size_t size() const noexcept { return data_.size(); }
    std::size_t rows() const noexcept { return shape_[0]; }
    std::size_t cols() const noexcept { return shape_.size() > 1 ? shape_[1] : 1; }

    std::span<T> data() noexcept { return data_; }
    std::span<const T> data() const noexcept { return data_; }
    const std::vector<T>& values() const noexcept { return data_; }

    T& operator[](std::size_t i) noexcept { return data_[i]; }
    const T& operator[](std::size_t i) const noexcept { return data_[i]; }
    T& operator()(std::size_t r, std::size_t c) noexcept { return data_[r * shape_[1] + c]; }
    const T& operator()(std::size_t r, std::size_t c) const noexcept { return data_[r * shape_[1] + c]; }

    std::span<T> row(std::size_t r) noexcept { return std::span<T>(data_).subspan(r * cols(), cols()); }
    std::span<const T> row(std::size_t r) const noexcept {
        return std::span<const T>(data_).subspan(r * cols(), cols());
    }

    T item() const {
        if (data_.size() != 1) throw DimensionError("item() on non-scalar tensor " + shape_to_string(shape_));
        return data_[0];
    }

    bool same_shape(const BasicTensor& other) const noexcept { return shape_ == other.shape_; }

    bool all_finite() const noexcept {
        return std::all_of(data_.begin(), data_.end(), [](T v) { return std::isfinite(v); });
    }

    void fill(T value) { std::fill(data_.begin(), data_.end(), value); }

    BasicTensor reshaped(Shape shape) const {
        BasicTensor out(std::move(shape));
        if (out.size() != size()) {
            throw DimensionError("cannot reshape " + shape_to_string(shape_) + " to " + shape_to_string(out.shape()));
        }
        out.data_ = data_;
        return out;
    }

    template <typename U>
    BasicTensor<U> cast() const {
        std::vector<U> out(data_.begin(), data_.end());
        return BasicTensor<U>(shape_, std::move(out));
    }

    friend bool operator==(const BasicTensor& a, const BasicTensor& b) {
        return a.shape_ == b.shape_ && a.data_ == b.data_;
    }

private:
    Shape shape_;
    std::vector<T> data_;
};

using Tensor = BasicTensor<float>;

template <typename T>
double squared_norm(const BasicTensor<T>& t) {
    double acc = 0.0;
    for (T v : t.data()) acc += static_cast<double>(v) * static_cast<double>(v);
    return acc;
}

}  // namespace qdren
