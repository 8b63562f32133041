#pragma once

#include <cstdint>
#include <string>

#include <json.hpp>

#include "maskfuse/core/errors.hpp"
#include "maskfuse/diffusion/denoiser.hpp"

namespace maskfuse {

// Run configuration shared by the CLI commands; JSON file plus flag
// overrides. All divisibility/range constraints of the downstream modules
// are checked at load time.
struct RunConfig {
    int image_size = 16;
    int patch_size = 4;
    int zero_threshold = -1;     // -1 = majority default ceil(P^2/2)
    int proj_size = 64;
    int latent_factor = 2;
    double vote_threshold = 0.5;
    double lambda = 1.0;
    int model_width = 32;
    int d_k = 32;
    int n_text_tokens = 4;
    int compress_c = 0;          // 0 = token compression off
    bool compress_scaled = false;
    int T = 1000;
    int ddim_steps = 30;
    double guidance_scale = 7.5;
    double lr = 1e-4;
    double weight_decay = 0.01;
    double p_text_only = 0.05;
    double p_mask_applied = 0.5;
    int batch_size = 8;
    int train_steps = 2000;
    int save_interval = 500;
    int n_scenes = 100;
    float texture_amp = 0.08f;
    uint64_t seed = 42;
    int threads = 1;
    std::string data_dir = "data";
    std::string out_dir = "out";

    int effective_zero_threshold() const;
    void validate() const;
    DenoiserConfig denoiser_config() const;
};

RunConfig load_config(const std::string& path);
void apply_config_json(RunConfig& cfg, const nlohmann::json& j);

}  // namespace maskfuse
