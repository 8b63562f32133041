#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "maskfuse/core/rng.hpp"
#include "maskfuse/core/tensor.hpp"
#include "maskfuse/diffusion/conditioning.hpp"
#include "maskfuse/diffusion/latent_codec.hpp"
#include "maskfuse/diffusion/schedule.hpp"
#include "maskfuse/image.hpp"

namespace maskfuse {

// Deterministic DDIM sampling with classifier-free guidance. The
// unconditional branch reuses the text-only conditioning (learned null
// tokens standing in for the image prompt, query mask all-zeros).
template <typename T, typename Model>
Tensor<T> sample_latent(const Model& model, const Conditioning<T>& cond,
                        const std::vector<int64_t>& latent_shape, const NoiseSchedule& ns,
                        const GuidanceConfig& g, uint64_t seed) {
    if (g.scale < 0) throw ConfigError("guidance scale must be >= 0");
    Rng rng(seed);
    Tensor<T> x(latent_shape);
    for (T& v : x.data) v = static_cast<T>(rng.normal());

    Conditioning<T> uncond = cond;
    uncond.mode = CondMode::uncond;

    const std::vector<int> ts = ddim_timesteps(ns.T, g.ddim_steps);
    for (size_t k = 0; k + 1 < ts.size(); ++k) {
        const int t = ts[k], t_prev = ts[k + 1];
        Tensor<T> eps_c = model.predict(x, t, cond);
        Tensor<T> eps_u = model.predict(x, t, uncond);
        Tensor<T> eps = cfg_combine(eps_u, eps_c, static_cast<T>(g.scale));
        x = ddim_step(x, t, t_prev, eps, ns);
        if (!x.all_finite())
            throw NumericError("sampling diverged at step " + std::to_string(k) + " (t=" +
                               std::to_string(t) + ")");
    }
    return x;
}

template <typename T, typename Model>
Image<T> sample_image(const Model& model, const Conditioning<T>& cond,
                      const std::vector<int64_t>& latent_shape, const NoiseSchedule& ns,
                      const GuidanceConfig& g, uint64_t seed, int latent_factor, int image_channels) {
    Tensor<T> z = sample_latent(model, cond, latent_shape, ns, g, seed);
    return decode_latent(z, latent_factor, image_channels);
}

}  // namespace maskfuse
