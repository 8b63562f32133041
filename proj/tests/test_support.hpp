#pragma once

// Shared test oracles. Everything here is written as an independent route:
// plain loops, no reuse of the library's computation path.

#include <cmath>
#include <functional>
#include <vector>

#include "maskfuse/core/rng.hpp"
#include "maskfuse/core/tensor.hpp"
#include "maskfuse/mask_ops.hpp"

namespace testsup {

using maskfuse::BinaryMask;
using maskfuse::Rng;
using maskfuse::Tensor;
using maskfuse::TensorD;

inline double rel_err(double a, double b) {
    const double m = std::max(std::abs(a), std::abs(b));
    if (m < 1e-10) return std::abs(a - b);
    return std::abs(a - b) / m;
}

inline double max_abs_diff(const TensorD& a, const TensorD& b) {
    double m = 0.0;
    for (size_t i = 0; i < a.data.size(); ++i) m = std::max(m, std::abs(a.data[i] - b.data[i]));
    return m;
}

inline double max_rel_diff(const TensorD& a, const TensorD& b) {
    double m = 0.0;
    for (size_t i = 0; i < a.data.size(); ++i) m = std::max(m, rel_err(a.data[i], b.data[i]));
    return m;
}

// ijk triple loop, no reordering
inline TensorD naive_matmul(const TensorD& a, const TensorD& b) {
    TensorD c({a.shape[0], b.shape[1]});
    for (int64_t i = 0; i < a.shape[0]; ++i)
        for (int64_t j = 0; j < b.shape[1]; ++j) {
            double acc = 0.0;
            for (int64_t k = 0; k < a.shape[1]; ++k) acc += a(i, k) * b(k, j);
            c(i, j) = acc;
        }
    return c;
}

inline TensorD naive_transpose(const TensorD& a) {
    TensorD t({a.shape[1], a.shape[0]});
    for (int64_t i = 0; i < a.shape[0]; ++i)
        for (int64_t j = 0; j < a.shape[1]; ++j) t(j, i) = a(i, j);
    return t;
}

// softmax(q k^T * scale) v with per-row loops, no max subtraction
inline TensorD naive_attention(const TensorD& q, const TensorD& k, const TensorD& v, double scale) {
    const int64_t m = q.shape[0], n = k.shape[0], dv = v.shape[1];
    TensorD out({m, dv});
    for (int64_t i = 0; i < m; ++i) {
        std::vector<double> w(static_cast<size_t>(n));
        double sum = 0.0;
        for (int64_t j = 0; j < n; ++j) {
            double s = 0.0;
            for (int64_t d = 0; d < q.shape[1]; ++d) s += q(i, d) * k(j, d);
            w[static_cast<size_t>(j)] = std::exp(s * scale);
            sum += w[static_cast<size_t>(j)];
        }
        for (int64_t j = 0; j < n; ++j)
            for (int64_t d = 0; d < dv; ++d) out(i, d) += w[static_cast<size_t>(j)] / sum * v(j, d);
    }
    return out;
}

inline TensorD random_tensor(Rng& rng, std::vector<int64_t> shape, double lo = -1.0, double hi = 1.0) {
    TensorD t(std::move(shape));
    for (double& v : t.data) v = rng.uniform(lo, hi);
    return t;
}

inline BinaryMask random_mask(Rng& rng, int h, int w, double p_one = 0.5) {
    BinaryMask m(h, w);
    for (auto& v : m.values) v = rng.uniform() < p_one ? 1 : 0;
    return m;
}

// brute-force re-binarization: count zeros per patch, compare to tau
inline BinaryMask oracle_rebinarize(const BinaryMask& d, int p, int tau) {
    BinaryMask out(d.height, d.width);
    for (int pi = 0; pi < d.height / p; ++pi)
        for (int pj = 0; pj < d.width / p; ++pj) {
            int zeros = 0;
            for (int i = 0; i < p; ++i)
                for (int j = 0; j < p; ++j)
                    if (d.at(pi * p + i, pj * p + j) == 0) ++zeros;
            const uint8_t bit = zeros > tau ? 0 : 1;
            for (int i = 0; i < p; ++i)
                for (int j = 0; j < p; ++j) out.at(pi * p + i, pj * p + j) = bit;
        }
    return out;
}

// central finite difference of f at *x
inline double central_diff(double* x, const std::function<double()>& f, double step = 1e-5) {
    const double saved = *x;
    *x = saved + step;
    const double hi = f();
    *x = saved - step;
    const double lo = f();
    *x = saved;
    return (hi - lo) / (2.0 * step);
}

// gradient comparison with a floor for near-zero pairs
inline bool grad_close(double analytic, double numeric, double tol) {
    const double m = std::max(std::abs(analytic), std::abs(numeric));
    if (m < 1e-7) return std::abs(analytic - numeric) < 1e-7;
    return std::abs(analytic - numeric) / m < tol;
}

}  // namespace testsup
