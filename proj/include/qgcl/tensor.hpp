#pragma once

#include <algorithm>
#include <cstddef>
#include <functional>
#include <initializer_list>
#include <numeric>
#include <span>
#include <sstream>
#include <string>
#include <utility>
#include <vector>

#include "qgcl/error.hpp"

namespace qgcl {

using Shape = std::vector<std::size_t>;

inline std::size_t shape_numel(const Shape& shape) {
    return std::accumulate(shape.begin(), shape.end(), std::size_t{1}, std::multiplies<>{});
}

inline std::string shape_str(const Shape& shape) {
    std::ostringstream os;
    os << '(';
    for (std::size_t i = 0; i < shape.size(); ++i) os << (i ? "," : "") << shape[i];
    os << ')';
    return os.str();
}

// Dense row-major array. Value semantics; copying copies the data.
template <class T>
class Tensor {
public:
    using value_type = T;

    Tensor() = default;

    explicit Tensor(Shape shape, T fill = T(0)) : shape_(std::move(shape)) {
        validate_shape();
        data_.assign(shape_numel(shape_), fill);
    }

    Tensor(Shape shape, std::vector<T> data) : shape_(std::move(shape)), data_(std::move(data)) {
        validate_shape();
        if (data_.size() != shape_numel(shape_))
            throw ShapeError("tensor data length " + std::to_string(data_.size()) +
                             " does not match shape " + shape_str(shape_));
    }

    static Tensor scalar(T v) { return Tensor(Shape{1}, std::vector<T>{v}); }

    const Shape& shape() const { return shape_; }
    std::size_t rank() const { return shape_.size(); }
    std::size_t dim(std::size_t i) const { return shape_.at(i); }
    std::size_t numel() const { return data_.size(); }
    bool empty() const { return data_.empty(); }
    bool is_scalar() const { return data_.size() == 1; }

    T* data() { return data_.data(); }
    const T* data() const { return data_.data(); }
    std::span<T> span() { return data_; }
    std::span<const T> span() const { return data_; }
    std::vector<T>& values() { return data_; }
    const std::vector<T>& values() const { return data_; }

    T& operator[](std::size_t i) { return data_[i]; }
    const T& operator[](std::size_t i) const { return data_[i]; }

    T item() const {
        if (data_.size() != 1) throw ShapeError("item() on tensor of shape " + shape_str(shape_));
        return data_[0];
    }

    // Multi-index access for rank <= 4; no bounds checks beyond rank.
    T& at(std::size_t i0, std::size_t i1) { return data_[i0 * shape_[1] + i1]; }
    const T& at(std::size_t i0, std::size_t i1) const { return data_[i0 * shape_[1] + i1]; }
    T& at(std::size_t i0, std::size_t i1, std::size_t i2) {
        return data_[(i0 * shape_[1] + i1) * shape_[2] + i2];
    }
    const T& at(std::size_t i0, std::size_t i1, std::size_t i2) const {
        return data_[(i0 * shape_[1] + i1) * shape_[2] + i2];
    }
    T& at(std::size_t i0, std::size_t i1, std::size_t i2, std::size_t i3) {
        return data_[((i0 * shape_[1] + i1) * shape_[2] + i2) * shape_[3] + i3];
    }
    const T& at(std::size_t i0, std::size_t i1, std::size_t i2, std::size_t i3) const {
        return data_[((i0 * shape_[1] + i1) * shape_[2] + i2) * shape_[3] + i3];
    }

    void fill(T v) { std::fill(data_.begin(), data_.end(), v); }

    Tensor reshaped(Shape shape) const {
        if (shape_numel(shape) != numel())
            throw ShapeError("cannot reshape " + shape_str(shape_) + " to " + shape_str(shape));
        return Tensor(std::move(shape), data_);
    }

    template <class U>
    Tensor<U> cast() const {
        std::vector<U> out(data_.begin(), data_.end());
        return Tensor<U>(shape_, std::move(out));
    }

    friend bool operator==(const Tensor& a, const Tensor& b) {
        return a.shape_ == b.shape_ && a.data_ == b.data_;
    }

private:
    void validate_shape() const {
        for (std::size_t d : shape_)
            if (d == 0) throw ShapeError("tensor dimensions must be positive, got " + shape_str(shape_));
    }

    Shape shape_;
    std::vector<T> data_;
};

}  // namespace qgcl

#include <map>

namespace qgcl {

// Name-keyed tensors. Ordered so iteration (and anything serialized from it)
// is deterministic.
template <class T>
using NamedTensors = std::map<std::string, Tensor<T>>;

}  // namespace qgcl
