#pragma once

#include <cstdint>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <future>
#include <string>
#include <vector>

#include <json.hpp>

#include "maskfuse/core/rng.hpp"
#include "maskfuse/data_synth.hpp"
#include "maskfuse/diffusion/checkpoint.hpp"
#include "maskfuse/diffusion/conditioning.hpp"
#include "maskfuse/diffusion/denoiser.hpp"
#include "maskfuse/diffusion/latent_codec.hpp"
#include "maskfuse/diffusion/schedule.hpp"
#include "maskfuse/patch_encoder.hpp"

namespace maskfuse {

struct TrainOptions {
    int steps = 2000;
    int batch_size = 8;
    double lr = 1e-4;
    double weight_decay = 0.01;
    ConditioningDropout dropout;
    uint64_t seed = 42;
    int save_interval = 500;
    std::string out_dir;          // empty = no checkpoints / no loss log
    int64_t start_step = 0;       // resume offset
    int threads = 1;              // batch-item parallelism, capped by MASKFUSE_THREADS
    // mask derivation
    int latent_factor = 2;
    int zero_threshold = -1;      // -1 = majority default for the patch size
    double vote_threshold = 0.5;
    int proj_size = 64;
};

struct TrainResult {
    std::vector<double> losses;  // one mean loss per step
    int64_t final_step = 0;
    std::string checkpoint_path;
};

// Fixed per-record training inputs: encoded latent plus the conditioning
// with the keep-mask (complement of the foreground mask) driving both the
// reference projection masks and the latent query mask.
template <typename T>
struct PreparedRecord {
    Tensor<T> x0;
    Conditioning<T> cond;
};

template <typename T>
PreparedRecord<T> prepare_record(const SceneRecord& rec, int patch_size, int zero_threshold, int proj_size,
                                 int latent_factor, double vote_threshold) {
    PreparedRecord<T> out;
    Image<T> img(rec.image.height, rec.image.width, rec.image.channels);
    for (size_t i = 0; i < rec.image.values.size(); ++i) img.values[i] = static_cast<T>(rec.image.values[i]);
    out.x0 = encode_latent(img, latent_factor);

    const BinaryMask keep = complement(rec.mask);
    const int tau = zero_threshold < 0 ? default_zero_threshold(patch_size) : zero_threshold;
    out.cond.ref_patch_mask = rebinarize_patches(keep, patch_size, tau);
    out.cond.ref_flat_mask = flatten_patch_mask(out.cond.ref_patch_mask, proj_size);
    out.cond.query_mask = derive_latent_mask(keep, latent_factor, vote_threshold);
    out.cond.ref_patches = cast_tensor<float, T>(rec.image_tokens);
    out.cond.text_tokens = cast_tensor<float, T>(rec.text_tokens);
    out.cond.mode = CondMode::masked;
    return out;
}

inline int capped_threads(int requested) {
    if (const char* env = std::getenv("MASKFUSE_THREADS")) {
        const int cap = std::atoi(env);
        if (cap >= 1 && requested > cap) return cap;
    }
    return requested < 1 ? 1 : requested;
}

inline nlohmann::json denoiser_config_json(const DenoiserConfig& c) {
    return {{"latent_h", c.latent_h}, {"latent_w", c.latent_w}, {"latent_c", c.latent_c},
            {"width", c.width},       {"d_k", c.d_k},           {"d_ctx", c.d_ctx},
            {"n_text", c.n_text},     {"patch_dim", c.patch_dim}, {"n_patches", c.n_patches},
            {"compress_c", c.compress_c}, {"compress_scaled", c.compress_scaled}, {"lambda", c.lambda}};
}

inline DenoiserConfig denoiser_config_from_json(const nlohmann::json& j) {
    DenoiserConfig c;
    c.latent_h = j.at("latent_h").get<int>();
    c.latent_w = j.at("latent_w").get<int>();
    c.latent_c = j.at("latent_c").get<int>();
    c.width = j.at("width").get<int>();
    c.d_k = j.at("d_k").get<int>();
    c.d_ctx = j.at("d_ctx").get<int>();
    c.n_text = j.at("n_text").get<int>();
    c.patch_dim = j.at("patch_dim").get<int>();
    c.n_patches = j.at("n_patches").get<int>();
    c.compress_c = j.at("compress_c").get<int>();
    c.compress_scaled = j.at("compress_scaled").get<bool>();
    c.lambda = j.at("lambda").get<double>();
    return c;
}

// L_simple loop with conditioning dropout, AdamW(lr, wd), per-step loss log
// and periodic checkpoints. Deterministic for a fixed seed regardless of the
// worker count: all random draws happen up front in index order, and
// per-item gradients are reduced in index order.
template <typename T>
TrainResult train(DenoiserModel<T>& model, const std::vector<PreparedRecord<T>>& records,
                  const NoiseSchedule& ns, const TrainOptions& opt) {
    if (records.empty()) throw ConfigError("train: empty dataset");
    if (opt.batch_size < 1) throw ConfigError("train: batch size must be >= 1");

    const int threads = capped_threads(opt.threads);
    AdamW<T> optimizer(static_cast<T>(opt.lr), static_cast<T>(opt.weight_decay));
    Rng rng(opt.seed);

    std::ofstream log;
    if (!opt.out_dir.empty()) {
        std::filesystem::create_directories(opt.out_dir);
        const bool fresh = opt.start_step == 0;
        log.open(opt.out_dir + "/loss_log.csv", fresh ? std::ios::trunc : std::ios::app);
        if (!log) throw IoError("cannot open loss log in " + opt.out_dir);
        if (fresh) log << "step,loss,lr\n";
    }

    const auto& shape = records.front().x0.shape;
    TrainResult result;
    result.losses.reserve(static_cast<size_t>(opt.steps));

    struct ItemDraw {
        size_t rec;
        int t;
        double u1, u2;
        Tensor<T> eps;
    };

    for (int step = 0; step < opt.steps; ++step) {
        const int64_t global_step = opt.start_step + step + 1;

        std::vector<ItemDraw> draws(static_cast<size_t>(opt.batch_size));
        for (auto& d : draws) {
            d.rec = static_cast<size_t>(rng.uniform_int(records.size()));
            d.u1 = rng.uniform();
            d.u2 = rng.uniform();
            d.t = 1 + static_cast<int>(rng.uniform_int(static_cast<uint64_t>(ns.T)));
            d.eps = Tensor<T>(shape);
            for (T& v : d.eps.data) v = static_cast<T>(rng.normal());
        }

        const T loss_scale = T(1) / static_cast<T>(opt.batch_size);
        std::vector<typename DenoiserModel<T>::GradVec> grads(draws.size());
        std::vector<T> losses(draws.size());

        auto run_item = [&](size_t b) {
            const auto& d = draws[b];
            const auto& r = records[d.rec];
            Conditioning<T> cond = apply_conditioning_dropout(r.cond, opt.dropout, d.u1, d.u2);
            grads[b] = model.make_grad_vec();
            losses[b] = model.loss_and_grad(r.x0, d.t, d.eps, cond, ns, loss_scale, grads[b]);
        };

        if (threads <= 1 || opt.batch_size == 1) {
            for (size_t b = 0; b < draws.size(); ++b) run_item(b);
        } else {
            std::vector<std::future<void>> futs;
            futs.reserve(draws.size());
            for (size_t b = 0; b < draws.size(); ++b)
                futs.push_back(std::async(std::launch::async, run_item, b));
            for (auto& f : futs) f.get();
        }

        // ordered reduction keeps the result independent of the worker count
        auto& total = grads[0];
        for (size_t b = 1; b < grads.size(); ++b)
            for (size_t i = 0; i < total.size(); ++i) add_inplace(total[i], grads[b][i]);

        double mean_loss = 0.0;
        for (T l : losses) mean_loss += static_cast<double>(l);
        mean_loss /= static_cast<double>(losses.size());
        if (!std::isfinite(mean_loss))
            throw NumericError("train: non-finite loss at step " + std::to_string(global_step));

        model.set_grads(total);
        optimizer.step(model.params());
        result.losses.push_back(mean_loss);

        if (log) log << global_step << "," << mean_loss << "," << opt.lr << "\n";
        if (!opt.out_dir.empty() && opt.save_interval > 0 &&
            (global_step % opt.save_interval == 0 || step + 1 == opt.steps)) {
            result.checkpoint_path = opt.out_dir + "/checkpoint.ckpt";
            save_checkpoint(result.checkpoint_path, model.params(), ns, global_step,
                            denoiser_config_json(model.config()));
        }
        result.final_step = global_step;
    }
    return result;
}

}  // namespace maskfuse
