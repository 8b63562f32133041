#pragma once

#include <cmath>
#include <cstdint>
#include <numeric>
#include <string>
#include <vector>

#include "maskfuse/core/errors.hpp"

namespace maskfuse {

// Dense row-major tensor. Rank 1..3 is all this project needs; 2-D tensors
// double as matrices (shape[0] rows, shape[1] cols), 3-D as (h, w, c) grids.
template <typename T>
struct Tensor {
    std::vector<int64_t> shape;
    std::vector<T> data;

    Tensor() = default;
    explicit Tensor(std::vector<int64_t> s)
        : shape(std::move(s)), data(static_cast<size_t>(numel_of(shape)), T(0)) {}

    static int64_t numel_of(const std::vector<int64_t>& s) {
        int64_t n = 1;
        for (int64_t d : s) n *= d;
        return n;
    }

    int64_t numel() const { return static_cast<int64_t>(data.size()); }
    int64_t rows() const { return shape[0]; }
    int64_t cols() const { return shape[1]; }

    T& operator()(int64_t i, int64_t j) { return data[static_cast<size_t>(i * shape[1] + j)]; }
    const T& operator()(int64_t i, int64_t j) const { return data[static_cast<size_t>(i * shape[1] + j)]; }

    T& at3(int64_t i, int64_t j, int64_t k) {
        return data[static_cast<size_t>((i * shape[1] + j) * shape[2] + k)];
    }
    const T& at3(int64_t i, int64_t j, int64_t k) const {
        return data[static_cast<size_t>((i * shape[1] + j) * shape[2] + k)];
    }

    void fill(T v) { std::fill(data.begin(), data.end(), v); }

    bool same_shape(const Tensor& o) const { return shape == o.shape; }

    bool all_finite() const {
        for (T v : data)
            if (!std::isfinite(static_cast<double>(v))) return false;
        return true;
    }
};

using TensorF = Tensor<float>;
using TensorD = Tensor<double>;

template <typename T>
Tensor<T> zeros_like(const Tensor<T>& t) {
    return Tensor<T>(t.shape);
}

inline std::string shape_str(const std::vector<int64_t>& s) {
    std::string out = "(";
    for (size_t i = 0; i < s.size(); ++i) {
        if (i) out += ",";
        out += std::to_string(s[i]);
    }
    return out + ")";
}

template <typename T>
void check_2d(const Tensor<T>& t, const char* what) {
    if (t.shape.size() != 2)
        throw ValidationError(std::string(what) + ": expected 2-D tensor, got " + shape_str(t.shape));
}

// c = a (r×k) * b (k×c)
template <typename T>
Tensor<T> matmul(const Tensor<T>& a, const Tensor<T>& b) {
    check_2d(a, "matmul lhs");
    check_2d(b, "matmul rhs");
    if (a.shape[1] != b.shape[0])
        throw ValidationError("matmul: inner dims differ, " + shape_str(a.shape) + " vs " + shape_str(b.shape));
    Tensor<T> c({a.shape[0], b.shape[1]});
    const int64_t R = a.shape[0], K = a.shape[1], C = b.shape[1];
    for (int64_t i = 0; i < R; ++i) {
        for (int64_t k = 0; k < K; ++k) {
            const T av = a(i, k);
            if (av == T(0)) continue;
            const T* brow = &b.data[static_cast<size_t>(k * C)];
            T* crow = &c.data[static_cast<size_t>(i * C)];
            for (int64_t j = 0; j < C; ++j) crow[j] += av * brow[j];
        }
    }
    return c;
}

// c = a^T (k×r)^T * b (k×c): a is k×r stored normally, result r×c
template <typename T>
Tensor<T> matmul_tn(const Tensor<T>& a, const Tensor<T>& b) {
    check_2d(a, "matmul_tn lhs");
    check_2d(b, "matmul_tn rhs");
    if (a.shape[0] != b.shape[0])
        throw ValidationError("matmul_tn: inner dims differ, " + shape_str(a.shape) + " vs " + shape_str(b.shape));
    Tensor<T> c({a.shape[1], b.shape[1]});
    const int64_t K = a.shape[0], R = a.shape[1], C = b.shape[1];
    for (int64_t k = 0; k < K; ++k) {
        const T* arow = &a.data[static_cast<size_t>(k * R)];
        const T* brow = &b.data[static_cast<size_t>(k * C)];
        for (int64_t i = 0; i < R; ++i) {
            const T av = arow[i];
            if (av == T(0)) continue;
            T* crow = &c.data[static_cast<size_t>(i * C)];
            for (int64_t j = 0; j < C; ++j) crow[j] += av * brow[j];
        }
    }
    return c;
}

// c = a (r×k) * b^T (c×k)^T: result r×c
template <typename T>
Tensor<T> matmul_nt(const Tensor<T>& a, const Tensor<T>& b) {
    check_2d(a, "matmul_nt lhs");
    check_2d(b, "matmul_nt rhs");
    if (a.shape[1] != b.shape[1])
        throw ValidationError("matmul_nt: inner dims differ, " + shape_str(a.shape) + " vs " + shape_str(b.shape));
    Tensor<T> c({a.shape[0], b.shape[0]});
    const int64_t R = a.shape[0], K = a.shape[1], C = b.shape[0];
    for (int64_t i = 0; i < R; ++i) {
        const T* arow = &a.data[static_cast<size_t>(i * K)];
        for (int64_t j = 0; j < C; ++j) {
            const T* brow = &b.data[static_cast<size_t>(j * K)];
            T acc = T(0);
            for (int64_t k = 0; k < K; ++k) acc += arow[k] * brow[k];
            c(i, j) = acc;
        }
    }
    return c;
}

template <typename T>
Tensor<T> transpose(const Tensor<T>& a) {
    check_2d(a, "transpose");
    Tensor<T> t({a.shape[1], a.shape[0]});
    for (int64_t i = 0; i < a.shape[0]; ++i)
        for (int64_t j = 0; j < a.shape[1]; ++j) t(j, i) = a(i, j);
    return t;
}

template <typename T>
void add_inplace(Tensor<T>& a, const Tensor<T>& b) {
    if (!a.same_shape(b))
        throw ValidationError("add: shape mismatch " + shape_str(a.shape) + " vs " + shape_str(b.shape));
    for (size_t i = 0; i < a.data.size(); ++i) a.data[i] += b.data[i];
}

template <typename T>
void scale_inplace(Tensor<T>& a, T s) {
    for (T& v : a.data) v *= s;
}

template <typename T, typename U>
Tensor<U> cast_tensor(const Tensor<T>& a) {
    Tensor<U> out(a.shape);
    for (size_t i = 0; i < a.data.size(); ++i) out.data[i] = static_cast<U>(a.data[i]);
    return out;
}

}  // namespace maskfuse
