#pragma once

#include <cmath>

#include "maskfuse/core/tensor.hpp"

namespace maskfuse {

// 3x3 convolution, stride 1, zero padding 1. Weight layout (3,3,in,out).
template <typename T>
Tensor<T> conv3x3_forward(const Tensor<T>& x, const Tensor<T>& w, const Tensor<T>& b) {
    const int64_t h = x.shape[0], wd = x.shape[1], ci = x.shape[2];
    const int64_t co = w.shape[3];
    if (w.shape[0] != 3 || w.shape[1] != 3 || w.shape[2] != ci)
        throw ValidationError("conv3x3: weight shape " + shape_str(w.shape) + " does not match input");
    Tensor<T> y({h, wd, co});
    for (int64_t i = 0; i < h; ++i) {
        for (int64_t j = 0; j < wd; ++j) {
            T* out = &y.data[static_cast<size_t>((i * wd + j) * co)];
            for (int64_t o = 0; o < co; ++o) out[o] = b.data[static_cast<size_t>(o)];
            for (int64_t di = 0; di < 3; ++di) {
                const int64_t si = i + di - 1;
                if (si < 0 || si >= h) continue;
                for (int64_t dj = 0; dj < 3; ++dj) {
                    const int64_t sj = j + dj - 1;
                    if (sj < 0 || sj >= wd) continue;
                    const T* px = &x.data[static_cast<size_t>((si * wd + sj) * ci)];
                    const T* pw = &w.data[static_cast<size_t>(((di * 3 + dj) * ci) * co)];
                    for (int64_t c = 0; c < ci; ++c) {
                        const T xv = px[c];
                        if (xv == T(0)) continue;
                        const T* wrow = pw + c * co;
                        for (int64_t o = 0; o < co; ++o) out[o] += xv * wrow[o];
                    }
                }
            }
        }
    }
    return y;
}

template <typename T>
void conv3x3_backward(const Tensor<T>& d_y, const Tensor<T>& x, const Tensor<T>& w, Tensor<T>* d_x,
                      Tensor<T>* d_w, Tensor<T>* d_b) {
    const int64_t h = x.shape[0], wd = x.shape[1], ci = x.shape[2];
    const int64_t co = w.shape[3];
    if (d_b) {
        for (int64_t i = 0; i < h; ++i)
            for (int64_t j = 0; j < wd; ++j)
                for (int64_t o = 0; o < co; ++o) d_b->data[static_cast<size_t>(o)] += d_y.at3(i, j, o);
    }
    for (int64_t i = 0; i < h; ++i) {
        for (int64_t j = 0; j < wd; ++j) {
            const T* dy = &d_y.data[static_cast<size_t>((i * wd + j) * co)];
            for (int64_t di = 0; di < 3; ++di) {
                const int64_t si = i + di - 1;
                if (si < 0 || si >= h) continue;
                for (int64_t dj = 0; dj < 3; ++dj) {
                    const int64_t sj = j + dj - 1;
                    if (sj < 0 || sj >= wd) continue;
                    const T* px = &x.data[static_cast<size_t>((si * wd + sj) * ci)];
                    const size_t wbase = static_cast<size_t>(((di * 3 + dj) * ci) * co);
                    if (d_w) {
                        for (int64_t c = 0; c < ci; ++c) {
                            const T xv = px[c];
                            if (xv == T(0)) continue;
                            T* dwr = &d_w->data[wbase + static_cast<size_t>(c * co)];
                            for (int64_t o = 0; o < co; ++o) dwr[o] += xv * dy[o];
                        }
                    }
                    if (d_x) {
                        T* dxr = &d_x->data[static_cast<size_t>((si * wd + sj) * ci)];
                        const T* wr = &w.data[wbase];
                        for (int64_t c = 0; c < ci; ++c) {
                            T acc = T(0);
                            const T* wrow = wr + c * co;
                            for (int64_t o = 0; o < co; ++o) acc += wrow[o] * dy[o];
                            dxr[c] += acc;
                        }
                    }
                }
            }
        }
    }
}

template <typename T>
T sigmoid(T x) {
    return T(1) / (T(1) + std::exp(-x));
}

// SiLU, elementwise. Returns activation; backward needs the pre-activation.
template <typename T>
Tensor<T> silu_forward(const Tensor<T>& x) {
    Tensor<T> y = x;
    for (T& v : y.data) v = v * sigmoid(v);
    return y;
}

template <typename T>
void silu_backward(const Tensor<T>& d_y, const Tensor<T>& x_pre, Tensor<T>& d_x) {
    for (size_t i = 0; i < d_y.data.size(); ++i) {
        const T s = sigmoid(x_pre.data[i]);
        d_x.data[i] += d_y.data[i] * s * (T(1) + x_pre.data[i] * (T(1) - s));
    }
}

// Sinusoidal timestep features, dimension `dim` (half sin, half cos).
template <typename T>
Tensor<T> timestep_features(int t, int dim) {
    Tensor<T> e({1, dim});
    const int half = dim / 2;
    for (int k = 0; k < half; ++k) {
        const double omega = std::exp(-std::log(10000.0) * k / half);
        e(0, k) = static_cast<T>(std::sin(t * omega));
        e(0, k + half) = static_cast<T>(std::cos(t * omega));
    }
    return e;
}

}  // namespace maskfuse
