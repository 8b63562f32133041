#pragma once

#include <string>
#include <vector>

#include "maskfuse/core/errors.hpp"
#include "maskfuse/core/tensor.hpp"

namespace maskfuse {

// Variance-preserving schedule: alpha[t]^2 + sigma[t]^2 = 1 for t in [0, T].
struct NoiseSchedule {
    int T = 0;
    std::vector<double> alpha;
    std::vector<double> sigma;
    double beta_min = 1e-4;
    double beta_max = 0.02;
};

// DDPM-standard linear betas: alpha_t = sqrt(prod_{s<=t} (1 - beta_s)), betas
// linearly spaced over [1e-4, 0.02].
NoiseSchedule build_schedule(int T, const std::string& kind = "linear-beta");

// x_t = alpha_t * x0 + sigma_t * eps, elementwise.
template <typename T>
Tensor<T> forward_noise(const Tensor<T>& x0, int t, const Tensor<T>& eps, const NoiseSchedule& ns) {
    if (!x0.same_shape(eps))
        throw ValidationError("forward_noise: eps shape " + shape_str(eps.shape) + " != x0 shape " +
                              shape_str(x0.shape));
    if (t < 0 || t > ns.T) throw ValidationError("forward_noise: t out of range");
    const T a = static_cast<T>(ns.alpha[static_cast<size_t>(t)]);
    const T s = static_cast<T>(ns.sigma[static_cast<size_t>(t)]);
    Tensor<T> out = x0;
    for (size_t i = 0; i < out.data.size(); ++i) out.data[i] = a * out.data[i] + s * eps.data[i];
    return out;
}

// x̂0 = (x_t − sigma_t · eps) / alpha_t
template <typename T>
Tensor<T> predict_x0(const Tensor<T>& x_t, int t, const Tensor<T>& eps_pred, const NoiseSchedule& ns) {
    if (!x_t.same_shape(eps_pred)) throw ValidationError("predict_x0: shape mismatch");
    const double a = ns.alpha[static_cast<size_t>(t)];
    if (a == 0.0) throw NumericError("predict_x0: alpha_t is zero at t=" + std::to_string(t));
    const T s = static_cast<T>(ns.sigma[static_cast<size_t>(t)]);
    const T inv_a = static_cast<T>(1.0 / a);
    Tensor<T> out = x_t;
    for (size_t i = 0; i < out.data.size(); ++i) out.data[i] = (out.data[i] - s * eps_pred.data[i]) * inv_a;
    return out;
}

// Deterministic DDIM update (eta = 0):
//   x̂0 = (x_t − sigma_t eps)/alpha_t;  x_{t_prev} = alpha_{t_prev} x̂0 + sigma_{t_prev} eps
template <typename T>
Tensor<T> ddim_step(const Tensor<T>& x_t, int t, int t_prev, const Tensor<T>& eps_pred,
                    const NoiseSchedule& ns) {
    if (t_prev < 0 || t_prev > t || t > ns.T)
        throw ValidationError("ddim_step: need T >= t >= t_prev >= 0, got t=" + std::to_string(t) +
                              " t_prev=" + std::to_string(t_prev));
    Tensor<T> x0 = predict_x0(x_t, t, eps_pred, ns);
    const T ap = static_cast<T>(ns.alpha[static_cast<size_t>(t_prev)]);
    const T sp = static_cast<T>(ns.sigma[static_cast<size_t>(t_prev)]);
    for (size_t i = 0; i < x0.data.size(); ++i) x0.data[i] = ap * x0.data[i] + sp * eps_pred.data[i];
    return x0;
}

// eps_uncond + scale * (eps_cond − eps_uncond)
template <typename T>
Tensor<T> cfg_combine(const Tensor<T>& eps_uncond, const Tensor<T>& eps_cond, T scale) {
    if (!eps_uncond.same_shape(eps_cond)) throw ValidationError("cfg_combine: shape mismatch");
    Tensor<T> out = eps_uncond;
    for (size_t i = 0; i < out.data.size(); ++i)
        out.data[i] += scale * (eps_cond.data[i] - out.data[i]);
    return out;
}

// The evenly spaced DDIM visiting sequence, endpoints T and 0 included,
// strictly decreasing. `steps` counts transitions, so the result has steps+1
// entries.
std::vector<int> ddim_timesteps(int T, int steps);

}  // namespace maskfuse
