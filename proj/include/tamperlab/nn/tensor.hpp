#pragma once

#include <cmath>
#include <cstdint>
#include <numeric>
#include <stdexcept>
#include <string>
#include <vector>

namespace tamperlab::nn {

using Shape = std::vector<std::int64_t>;

inline std::int64_t numel(const Shape& s) {
    std::int64_t n = 1;
    for (auto d : s) {
        if (d <= 0) throw std::invalid_argument("non-positive tensor extent");
        n *= d;
    }
    return n;
}

inline std::string shape_str(const Shape& s) {
    std::string out = "[";
    for (std::size_t i = 0; i < s.size(); ++i) out += (i ? "," : "") + std::to_string(s[i]);
    return out + "]";
}

// Dense n-dimensional array. T is double in test/gradient-check mode and
// float in training mode.
template <class T>
struct Tensor {
    Shape shape;
    std::vector<T> v;

    Tensor() = default;
    explicit Tensor(Shape s) : shape(std::move(s)), v(static_cast<std::size_t>(numel(shape)), T(0)) {}
    Tensor(Shape s, std::vector<T> data) : shape(std::move(s)), v(std::move(data)) {
        if (static_cast<std::int64_t>(v.size()) != numel(shape))
            throw std::invalid_argument("tensor data does not match shape " + shape_str(shape));
    }

    std::int64_t size() const { return static_cast<std::int64_t>(v.size()); }

    bool all_finite() const {
        for (T x : v)
            if (!std::isfinite(static_cast<double>(x))) return false;
        return true;
    }

    template <class U>
    Tensor<U> cast() const {
        Tensor<U> out;
        out.shape = shape;
        out.v.assign(v.begin(), v.end());
        return out;
    }
};

// Named trainable parameter: value plus gradient slot.
template <class T>
struct Param {
    std::string name;
    Tensor<T> value;
    Tensor<T> grad;

    Param() = default;
    Param(std::string n, Shape s) : name(std::move(n)), value(s), grad(std::move(s)) {}

    void zero_grad() { std::fill(grad.v.begin(), grad.v.end(), T(0)); }
    std::int64_t size() const { return value.size(); }
};

} // namespace tamperlab::nn
