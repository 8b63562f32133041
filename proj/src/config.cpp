#include "maskfuse/config.hpp"

#include <fstream>

#include "maskfuse/mask_ops.hpp"

namespace maskfuse {

int RunConfig::effective_zero_threshold() const {
    return zero_threshold < 0 ? default_zero_threshold(patch_size) : zero_threshold;
}

void RunConfig::validate() const {
    if (image_size < 1) throw ConfigError("config: image_size must be >= 1");
    if (patch_size < 1 || image_size % patch_size != 0)
        throw ConfigError("config: image_size " + std::to_string(image_size) +
                          " not divisible by patch_size " + std::to_string(patch_size));
    if (latent_factor < 1 || image_size % latent_factor != 0)
        throw ConfigError("config: image_size not divisible by latent_factor");
    if (zero_threshold > patch_size * patch_size)
        throw ConfigError("config: zero_threshold exceeds P^2");
    if (proj_size < 1) throw ConfigError("config: proj_size must be >= 1");
    if (!(vote_threshold > 0.0 && vote_threshold <= 1.0))
        throw ConfigError("config: vote_threshold must be in (0,1]");
    if (lambda < 0.0) throw ConfigError("config: lambda must be >= 0");
    if (model_width < 2 || model_width % 2 != 0)
        throw ConfigError("config: model_width must be a positive even number");
    if (d_k < 1) throw ConfigError("config: d_k must be >= 1");
    if (n_text_tokens < 1) throw ConfigError("config: n_text_tokens must be >= 1");
    const int n_patches = (image_size / patch_size) * (image_size / patch_size);
    if (compress_c < 0 || compress_c >= n_patches)
        throw ConfigError("config: compress_c must be in [0, N) with N=" + std::to_string(n_patches));
    if (T < 1) throw ConfigError("config: T must be >= 1");
    if (ddim_steps < 1 || ddim_steps > T)
        throw ConfigError("config: need 1 <= ddim_steps <= T");
    if (guidance_scale < 0.0) throw ConfigError("config: guidance_scale must be >= 0");
    if (p_text_only < 0.0 || p_text_only > 1.0 || p_mask_applied < 0.0 || p_mask_applied > 1.0)
        throw ConfigError("config: dropout probabilities must be in [0,1]");
    if (batch_size < 1) throw ConfigError("config: batch_size must be >= 1");
    if (train_steps < 1) throw ConfigError("config: train_steps must be >= 1");
    if (n_scenes < 1) throw ConfigError("config: n_scenes must be >= 1");
    if (texture_amp < 0.0f) throw ConfigError("config: texture_amp must be >= 0");
}

DenoiserConfig RunConfig::denoiser_config() const {
    DenoiserConfig c;
    c.latent_h = image_size / latent_factor;
    c.latent_w = image_size / latent_factor;
    c.latent_c = 3 * latent_factor * latent_factor;
    c.width = model_width;
    c.d_k = d_k;
    c.d_ctx = proj_size;
    c.n_text = n_text_tokens;
    c.patch_dim = patch_size * patch_size * 3;
    c.n_patches = (image_size / patch_size) * (image_size / patch_size);
    c.compress_c = compress_c;
    c.compress_scaled = compress_scaled;
    c.lambda = lambda;
    return c;
}

void apply_config_json(RunConfig& cfg, const nlohmann::json& j) {
    auto get = [&j](const char* key, auto& field) {
        if (j.contains(key)) field = j.at(key).get<std::decay_t<decltype(field)>>();
    };
    get("image_size", cfg.image_size);
    get("patch_size", cfg.patch_size);
    get("zero_threshold", cfg.zero_threshold);
    get("proj_size", cfg.proj_size);
    get("latent_factor", cfg.latent_factor);
    get("vote_threshold", cfg.vote_threshold);
    get("lambda", cfg.lambda);
    get("model_width", cfg.model_width);
    get("d_k", cfg.d_k);
    get("n_text_tokens", cfg.n_text_tokens);
    get("compress_c", cfg.compress_c);
    get("compress_scaled", cfg.compress_scaled);
    get("T", cfg.T);
    get("ddim_steps", cfg.ddim_steps);
    get("guidance_scale", cfg.guidance_scale);
    get("lr", cfg.lr);
    get("weight_decay", cfg.weight_decay);
    get("p_text_only", cfg.p_text_only);
    get("p_mask_applied", cfg.p_mask_applied);
    get("batch_size", cfg.batch_size);
    get("train_steps", cfg.train_steps);
    get("save_interval", cfg.save_interval);
    get("n_scenes", cfg.n_scenes);
    get("texture_amp", cfg.texture_amp);
    get("seed", cfg.seed);
    get("threads", cfg.threads);
    get("data_dir", cfg.data_dir);
    get("out_dir", cfg.out_dir);
}

RunConfig load_config(const std::string& path) {
    std::ifstream f(path);
    if (!f) throw IoError("cannot open config " + path);
    nlohmann::json j;
    try {
        f >> j;
    } catch (const nlohmann::json::exception& e) {
        throw IoError(path + ": config parse failed: " + e.what());
    }
    RunConfig cfg;
    apply_config_json(cfg, j);
    return cfg;
}

}  // namespace maskfuse
