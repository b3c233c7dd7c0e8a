#pragma once

#include <cassert>
#include <cmath>
#include <cstdint>
#include <initializer_list>
#include <numeric>
#include <sstream>
#include <string>
#include <vector>

#include "psnet/errors.hpp"

namespace psnet {

// Dense row-major tensor. Rank is dynamic but everything in this codebase is
// rank 1..4 (vectors, matrices, CHW images, NCHW batches).
template <typename T>
class Tensor {
public:
    Tensor() = default;

    explicit Tensor(std::vector<int> shape) : shape_(std::move(shape)) {
        data_.assign(static_cast<std::size_t>(numel_of(shape_)), T(0));
    }

    Tensor(std::initializer_list<int> shape) : Tensor(std::vector<int>(shape)) {}

    static Tensor full(std::vector<int> shape, T value) {
        Tensor t(std::move(shape));
        t.fill(value);
        return t;
    }

    int rank() const { return static_cast<int>(shape_.size()); }
    const std::vector<int>& shape() const { return shape_; }
    int dim(int i) const { return shape_[static_cast<std::size_t>(i)]; }
    std::int64_t numel() const { return numel_of(shape_); }
    bool empty() const { return data_.empty(); }

    T* data() { return data_.data(); }
    const T* data() const { return data_.data(); }

    T& operator[](std::int64_t i) { return data_[static_cast<std::size_t>(i)]; }
    const T& operator[](std::int64_t i) const { return data_[static_cast<std::size_t>(i)]; }

    // NCHW-style indexed access; the stride math assumes matching rank.
    T& at(int a, int b) { return data_[static_cast<std::size_t>(a) * shape_[1] + b]; }
    const T& at(int a, int b) const { return data_[static_cast<std::size_t>(a) * shape_[1] + b]; }
    T& at(int a, int b, int c) {
        return data_[(static_cast<std::size_t>(a) * shape_[1] + b) * shape_[2] + c];
    }
    const T& at(int a, int b, int c) const {
        return data_[(static_cast<std::size_t>(a) * shape_[1] + b) * shape_[2] + c];
    }
    T& at(int a, int b, int c, int d) {
        return data_[((static_cast<std::size_t>(a) * shape_[1] + b) * shape_[2] + c) * shape_[3] + d];
    }
    const T& at(int a, int b, int c, int d) const {
        return data_[((static_cast<std::size_t>(a) * shape_[1] + b) * shape_[2] + c) * shape_[3] + d];
    }

    void fill(T v) { std::fill(data_.begin(), data_.end(), v); }
    void zero() { fill(T(0)); }

    bool same_shape(const Tensor& o) const { return shape_ == o.shape_; }

    void reshape(std::vector<int> shape) {
        if (numel_of(shape) != numel())
            throw ShapeError("reshape: element count mismatch " + shape_string(shape_) +
                             " -> " + shape_string(shape));
        shape_ = std::move(shape);
    }

    // this += scale * other
    void add_scaled(const Tensor& other, T scale) {
        assert(same_shape(other));
        const T* __restrict o = other.data();
        T* __restrict d = data();
        const std::int64_t n = numel();
        for (std::int64_t i = 0; i < n; ++i) d[i] += scale * o[i];
    }

    void add(const Tensor& other) { add_scaled(other, T(1)); }

    void scale(T s) {
        T* __restrict d = data();
        const std::int64_t n = numel();
        for (std::int64_t i = 0; i < n; ++i) d[i] *= s;
    }

    bool all_finite() const {
        for (const T& v : data_)
            if (!std::isfinite(static_cast<double>(v))) return false;
        return true;
    }

    bool operator==(const Tensor& o) const { return shape_ == o.shape_ && data_ == o.data_; }

    static std::string shape_string(const std::vector<int>& s) {
        std::ostringstream os;
        os << "(";
        for (std::size_t i = 0; i < s.size(); ++i) os << (i ? "," : "") << s[i];
        os << ")";
        return os.str();
    }
    std::string shape_string() const { return shape_string(shape_); }

    static std::int64_t numel_of(const std::vector<int>& s) {
        std::int64_t n = 1;
        for (int d : s) n *= d;
        return s.empty() ? 0 : n;
    }

private:
    std::vector<int> shape_;
    std::vector<T> data_;
};

template <typename T>
inline void require_shape(const Tensor<T>& t, const std::vector<int>& shape, const char* what) {
    if (t.shape() != shape)
        throw ShapeError(std::string(what) + ": expected " + Tensor<T>::shape_string(shape) +
                         ", got " + t.shape_string());
}

template <typename T>
inline void require_same_shape(const Tensor<T>& a, const Tensor<T>& b, const char* what) {
    if (!a.same_shape(b))
        throw ShapeError(std::string(what) + ": shape mismatch " + a.shape_string() + " vs " +
                         b.shape_string());
}

}  // namespace psnet
