#pragma once

#include <string>
#include <vector>

#include "maskfuse/core/rng.hpp"
#include "maskfuse/core/tensor.hpp"
#include "maskfuse/diffusion/conditioning.hpp"
#include "maskfuse/diffusion/layers.hpp"
#include "maskfuse/diffusion/params.hpp"
#include "maskfuse/diffusion/schedule.hpp"
#include "maskfuse/patch_encoder.hpp"
#include "maskfuse/prompt_adapter.hpp"

namespace maskfuse {

struct DenoiserConfig {
    int latent_h = 8;
    int latent_w = 8;
    int latent_c = 12;
    int width = 32;       // conv channels / d_model
    int d_k = 32;         // attention dim
    int d_ctx = 64;       // prompt token feature dim (= proj_size)
    int n_text = 4;       // null embedding row count
    int patch_dim = 48;   // P^2 * C of the reference patch sequence
    int n_patches = 16;
    int compress_c = 0;   // 0 = token compression off
    bool compress_scaled = false;
    double lambda = 1.0;
};

// Toy conditional denoiser: conv-in, a masked/dual cross-attention block,
// a conv block, conv-out. Image-prompt tokens come from the masked patch
// projection, optional token compression, and a one-block token mixer. Text
// projections of the adapter play the pretrained foundation weights and are
// frozen.
template <typename T>
class DenoiserModel {
public:
    explicit DenoiserModel(const DenoiserConfig& cfg) : cfg_(cfg) {
        const int64_t W = cfg.width, DK = cfg.d_k, DC = cfg.d_ctx, LC = cfg.latent_c;
        p_proj_w_ = store_.add("cond.proj_w", {cfg.patch_dim, DC}, "cond");
        p_proj_b_ = store_.add("cond.proj_b", {1, DC}, "cond");
        if (cfg.compress_c > 0) p_comp_q_ = store_.add("cond.compress_q", {cfg.compress_c, DC}, "cond");
        p_mx_wq_ = store_.add("cond.mixer_wq", {DC, DC}, "cond");
        p_mx_wk_ = store_.add("cond.mixer_wk", {DC, DC}, "cond");
        p_mx_wv_ = store_.add("cond.mixer_wv", {DC, DC}, "cond");
        p_mx_wo_ = store_.add("cond.mixer_wo", {DC, DC}, "cond");
        p_mx_w1_ = store_.add("cond.mixer_mlp_w1", {DC, DC}, "cond");
        p_mx_b1_ = store_.add("cond.mixer_mlp_b1", {1, DC}, "cond");
        p_mx_w2_ = store_.add("cond.mixer_mlp_w2", {DC, DC}, "cond");
        p_mx_b2_ = store_.add("cond.mixer_mlp_b2", {1, DC}, "cond");
        p_null_ = store_.add("cond.null_tokens", {cfg.n_text, DC}, "cond");
        p_w_q_ = store_.add("adapter.w_q", {W, DK}, "adapter");
        p_w_kt_ = store_.add("adapter.w_kt", {DC, DK}, "adapter");
        p_w_vt_ = store_.add("adapter.w_vt", {DC, DK}, "adapter");
        p_w_ki_ = store_.add("adapter.w_ki", {DC, DK}, "adapter");
        p_w_vi_ = store_.add("adapter.w_vi", {DC, DK}, "adapter");
        p_attn_out_w_ = store_.add("adapter.out_w", {DK, W}, "adapter");
        p_attn_out_b_ = store_.add("adapter.out_b", {1, W}, "adapter");
        p_time_w1_ = store_.add("denoiser.time_w1", {W, W}, "denoiser");
        p_time_b1_ = store_.add("denoiser.time_b1", {1, W}, "denoiser");
        p_time_w2_ = store_.add("denoiser.time_w2", {W, W}, "denoiser");
        p_time_b2_ = store_.add("denoiser.time_b2", {1, W}, "denoiser");
        p_conv_in_w_ = store_.add("denoiser.conv_in_w", {3, 3, LC, W}, "denoiser");
        p_conv_in_b_ = store_.add("denoiser.conv_in_b", {1, W}, "denoiser");
        p_conv_mid_w_ = store_.add("denoiser.conv_mid_w", {3, 3, W, W}, "denoiser");
        p_conv_mid_b_ = store_.add("denoiser.conv_mid_b", {1, W}, "denoiser");
        p_conv_out_w_ = store_.add("denoiser.conv_out_w", {3, 3, W, LC}, "denoiser");
        p_conv_out_b_ = store_.add("denoiser.conv_out_b", {1, LC}, "denoiser");
    }

    void init_params(Rng& rng) {
        auto lin = [&](int idx, double fan_in) { init_normal(store_.value(idx), rng, std::sqrt(1.0 / fan_in)); };
        lin(p_proj_w_, cfg_.patch_dim);
        if (p_comp_q_ >= 0) init_normal(store_.value(p_comp_q_), rng, 0.02);
        lin(p_mx_wq_, cfg_.d_ctx);
        lin(p_mx_wk_, cfg_.d_ctx);
        lin(p_mx_wv_, cfg_.d_ctx);
        lin(p_mx_wo_, cfg_.d_ctx);
        lin(p_mx_w1_, cfg_.d_ctx);
        lin(p_mx_w2_, cfg_.d_ctx);
        init_normal(store_.value(p_null_), rng, 0.1);
        lin(p_w_q_, cfg_.width);
        lin(p_w_kt_, cfg_.d_ctx);
        lin(p_w_vt_, cfg_.d_ctx);
        lin(p_attn_out_w_, cfg_.d_k);
        lin(p_time_w1_, cfg_.width);
        lin(p_time_w2_, cfg_.width);
        init_normal(store_.value(p_conv_in_w_), rng, std::sqrt(2.0 / (9.0 * cfg_.latent_c)));
        init_normal(store_.value(p_conv_mid_w_), rng, std::sqrt(2.0 / (9.0 * cfg_.width)));
        // conv_out stays zero so the untrained model predicts eps = 0
        freeze_text_weights();
    }

    // w_ki/w_vi start as copies of the trained text projections; the text
    // side never updates afterwards.
    void freeze_text_weights() {
        store_.value(p_w_ki_) = store_.value(p_w_kt_);
        store_.value(p_w_vi_) = store_.value(p_w_vt_);
        store_[p_w_kt_].frozen = true;
        store_[p_w_vt_].frozen = true;
    }

    const DenoiserConfig& config() const { return cfg_; }
    ParamStore<T>& params() { return store_; }
    const ParamStore<T>& params() const { return store_; }

    AdapterWeights<T> adapter_weights() const {
        AdapterWeights<T> w;
        w.w_q = store_.value(p_w_q_);
        w.w_kt = store_.value(p_w_kt_);
        w.w_vt = store_.value(p_w_vt_);
        w.w_ki = store_.value(p_w_ki_);
        w.w_vi = store_.value(p_w_vi_);
        w.lambda = static_cast<T>(cfg_.lambda);
        w.text_frozen = store_[p_w_kt_].frozen;
        return w;
    }

    // Per-parameter gradient buffer aligned with the store indices. Batch
    // items can be evaluated in parallel, each into its own buffer, and the
    // buffers summed in index order.
    using GradVec = std::vector<Tensor<T>>;

    GradVec make_grad_vec() const {
        GradVec g;
        g.reserve(store_.size());
        for (const auto& p : store_.items()) g.push_back(zeros_like(p.value));
        return g;
    }

    void set_grads(const GradVec& g) {
        for (size_t i = 0; i < store_.size(); ++i) store_.items()[i].grad = g[i];
    }

    // Everything the backward pass needs from one forward evaluation.
    struct Workspace {
        CondMode mode;
        bool image_path = false;  // image tokens came through the projection path
        Tensor<T> c_text, c_image;
        std::vector<T> ma_rows;
        // conditioning path
        Tensor<T> ref_patches, mp, z1, mix_attn_out, y1, mlp_pre, mlp_act;
        PatchMask ref_pm;
        FlatPatchMask ref_fm;
        AttnCache<T> mix_cache;
        // trunk
        Tensor<T> x, e, th_pre, th, h1, a1, xq, attn_out, h2, h3, a2;
        CrossAttnCache<T> cross;
    };

    Tensor<T> forward(const Tensor<T>& x_t, int t, const Conditioning<T>& cond, Workspace* ws) const {
        if (x_t.shape.size() != 3 || x_t.shape[0] != cfg_.latent_h || x_t.shape[1] != cfg_.latent_w ||
            x_t.shape[2] != cfg_.latent_c)
            throw ValidationError("denoiser: latent shape " + shape_str(x_t.shape) + " does not match config");
        Workspace local;
        Workspace& w = ws ? *ws : local;
        w.mode = cond.mode;
        w.x = x_t;
        const int64_t m = static_cast<int64_t>(cfg_.latent_h) * cfg_.latent_w;

        // prompt tokens
        const bool null_image = cond.mode == CondMode::text_only || cond.mode == CondMode::uncond;
        w.c_text = cond.mode == CondMode::uncond ? store_.value(p_null_) : cond.text_tokens;
        if (null_image) {
            w.image_path = false;
            w.c_image = store_.value(p_null_);
        } else {
            w.image_path = true;
            w.ref_patches = cond.ref_patches;
            w.ref_pm = cond.ref_patch_mask;
            w.ref_fm = cond.ref_flat_mask;
            ProjectionWeights<T> pw{store_.value(p_proj_w_), store_.value(p_proj_b_)};
            w.mp = masked_project(cond.ref_patches, cond.ref_patch_mask, pw, cond.ref_flat_mask);
            w.z1 = (cfg_.compress_c > 0)
                       ? compress_tokens(w.mp, store_.value(p_comp_q_), cfg_.compress_scaled)
                       : w.mp;
            const T mscale = T(1) / std::sqrt(static_cast<T>(cfg_.d_ctx));
            w.mix_attn_out = attn_forward(matmul(w.z1, store_.value(p_mx_wq_)),
                                          matmul(w.z1, store_.value(p_mx_wk_)),
                                          matmul(w.z1, store_.value(p_mx_wv_)), mscale, &w.mix_cache);
            w.y1 = w.z1;
            add_inplace(w.y1, matmul(w.mix_attn_out, store_.value(p_mx_wo_)));
            w.mlp_pre = matmul(w.y1, store_.value(p_mx_w1_));
            add_row_bias(w.mlp_pre, store_.value(p_mx_b1_));
            w.mlp_act = silu_forward(w.mlp_pre);
            w.c_image = w.y1;
            add_inplace(w.c_image, matmul(w.mlp_act, store_.value(p_mx_w2_)));
            add_row_bias(w.c_image, store_.value(p_mx_b2_));
        }

        // query mask rows
        const bool masked_path = cond.mode != CondMode::dual_unmasked;
        w.ma_rows.assign(static_cast<size_t>(m), T(0));
        if (cond.mode == CondMode::masked) {
            if (cond.query_mask.height != cfg_.latent_h || cond.query_mask.width != cfg_.latent_w)
                throw ValidationError("denoiser: query mask grid does not match latent grid");
            for (size_t i = 0; i < cond.query_mask.values.size(); ++i)
                w.ma_rows[i] = static_cast<T>(cond.query_mask.values[i]);
        }

        // timestep embedding
        w.e = timestep_features<T>(t, cfg_.width);
        w.th_pre = matmul(w.e, store_.value(p_time_w1_));
        add_row_bias(w.th_pre, store_.value(p_time_b1_));
        w.th = silu_forward(w.th_pre);
        Tensor<T> temb = matmul(w.th, store_.value(p_time_w2_));
        add_row_bias(temb, store_.value(p_time_b2_));

        // trunk
        w.h1 = conv3x3_forward(x_t, store_.value(p_conv_in_w_), store_.value(p_conv_in_b_));
        add_channel_bias(w.h1, temb);
        w.a1 = silu_forward(w.h1);

        w.xq = Tensor<T>({m, cfg_.width});
        w.xq.data = w.a1.data;  // (h*w, c) reinterpretation, same layout
        AdapterWeights<T> aw = adapter_weights();
        w.attn_out = cross_attn_forward(w.xq, w.c_text, w.c_image, aw, masked_path,
                                        masked_path ? w.ma_rows : std::vector<T>{}, &w.cross);
        Tensor<T> o = matmul(w.attn_out, store_.value(p_attn_out_w_));
        add_row_bias(o, store_.value(p_attn_out_b_));

        w.h2 = w.a1;
        for (size_t i = 0; i < w.h2.data.size(); ++i) w.h2.data[i] += o.data[i];

        w.h3 = conv3x3_forward(w.h2, store_.value(p_conv_mid_w_), store_.value(p_conv_mid_b_));
        add_channel_bias(w.h3, temb);
        w.a2 = silu_forward(w.h3);
        return conv3x3_forward(w.a2, store_.value(p_conv_out_w_), store_.value(p_conv_out_b_));
    }

    Tensor<T> predict(const Tensor<T>& x_t, int t, const Conditioning<T>& cond) const {
        return forward(x_t, t, cond, nullptr);
    }

    // Accumulates parameter gradients for d(loss)/d(eps_pred) = d_pred into
    // `gv` (aligned with the param store). Const: safe to run per batch item
    // in parallel with one buffer each.
    void backward(const Tensor<T>& d_pred, const Workspace& w, GradVec& gv) const {
        const int64_t m = static_cast<int64_t>(cfg_.latent_h) * cfg_.latent_w;
        auto G = [&gv](int idx) -> Tensor<T>& { return gv[static_cast<size_t>(idx)]; };
        Tensor<T> temb_grad({1, cfg_.width});

        // conv_out
        Tensor<T> d_a2 = zeros_like(w.a2);
        conv3x3_backward(d_pred, w.a2, store_.value(p_conv_out_w_), &d_a2, &G(p_conv_out_w_),
                         &G(p_conv_out_b_));
        Tensor<T> d_h3 = zeros_like(w.h3);
        silu_backward(d_a2, w.h3, d_h3);
        accum_channel_bias_grad(d_h3, temb_grad);

        // conv_mid
        Tensor<T> d_h2 = zeros_like(w.h2);
        conv3x3_backward(d_h3, w.h2, store_.value(p_conv_mid_w_), &d_h2, &G(p_conv_mid_w_),
                         &G(p_conv_mid_b_));

        // residual: h2 = a1 + reshape(O)
        Tensor<T> d_a1 = d_h2;
        Tensor<T> d_o({m, cfg_.width});
        d_o.data = d_h2.data;

        // attention out projection
        Tensor<T> d_attn = matmul_nt(d_o, store_.value(p_attn_out_w_));
        add_inplace(G(p_attn_out_w_), matmul_tn(w.attn_out, d_o));
        accum_col_sums(d_o, G(p_attn_out_b_));

        // cross attention
        Tensor<T> d_xq({m, cfg_.width});
        Tensor<T> d_c_text = zeros_like(w.c_text);
        Tensor<T> d_c_image = zeros_like(w.c_image);
        AdapterWeights<T> aw = adapter_weights();
        CrossAttnGrads<T> g;
        g.d_x = &d_xq;
        g.d_c_text = &d_c_text;
        g.d_c_image = &d_c_image;
        g.d_w_q = &G(p_w_q_);
        g.d_w_kt = &G(p_w_kt_);
        g.d_w_vt = &G(p_w_vt_);
        g.d_w_ki = &G(p_w_ki_);
        g.d_w_vi = &G(p_w_vi_);
        cross_attn_backward(d_attn, w.cross, w.c_text, w.c_image, aw, g);

        for (size_t i = 0; i < d_a1.data.size(); ++i) d_a1.data[i] += d_xq.data[i];

        // conv_in block
        Tensor<T> d_h1 = zeros_like(w.h1);
        silu_backward(d_a1, w.h1, d_h1);
        accum_channel_bias_grad(d_h1, temb_grad);
        conv3x3_backward(d_h1, w.x, store_.value(p_conv_in_w_), static_cast<Tensor<T>*>(nullptr),
                         &G(p_conv_in_w_), &G(p_conv_in_b_));

        // time MLP
        Tensor<T> d_th = matmul_nt(temb_grad, store_.value(p_time_w2_));
        add_inplace(G(p_time_w2_), matmul_tn(w.th, temb_grad));
        add_inplace(G(p_time_b2_), temb_grad);
        Tensor<T> d_th_pre = zeros_like(w.th_pre);
        silu_backward(d_th, w.th_pre, d_th_pre);
        add_inplace(G(p_time_w1_), matmul_tn(w.e, d_th_pre));
        add_inplace(G(p_time_b1_), d_th_pre);

        // prompt token paths
        if (w.mode == CondMode::uncond) add_inplace(G(p_null_), d_c_text);
        if (!w.image_path) {
            add_inplace(G(p_null_), d_c_image);
            return;
        }

        // mixer MLP: c_image = y1 + silu(y1 w1 + b1) w2 + b2
        Tensor<T> d_y1 = d_c_image;
        Tensor<T> d_mlp_act = matmul_nt(d_c_image, store_.value(p_mx_w2_));
        add_inplace(G(p_mx_w2_), matmul_tn(w.mlp_act, d_c_image));
        accum_col_sums(d_c_image, G(p_mx_b2_));
        Tensor<T> d_mlp_pre = zeros_like(w.mlp_pre);
        silu_backward(d_mlp_act, w.mlp_pre, d_mlp_pre);
        add_inplace(d_y1, matmul_nt(d_mlp_pre, store_.value(p_mx_w1_)));
        add_inplace(G(p_mx_w1_), matmul_tn(w.y1, d_mlp_pre));
        accum_col_sums(d_mlp_pre, G(p_mx_b1_));

        // mixer attention: y1 = z1 + attn(z1 wq, z1 wk, z1 wv) wo
        Tensor<T> d_mix_out = matmul_nt(d_y1, store_.value(p_mx_wo_));
        add_inplace(G(p_mx_wo_), matmul_tn(w.mix_attn_out, d_y1));
        Tensor<T> d_q = zeros_like(w.mix_cache.q);
        Tensor<T> d_k = zeros_like(w.mix_cache.k);
        Tensor<T> d_v = zeros_like(w.mix_cache.v);
        const T mscale = T(1) / std::sqrt(static_cast<T>(cfg_.d_ctx));
        attn_backward(d_mix_out, w.mix_cache, mscale, &d_q, &d_k, &d_v);
        Tensor<T> d_z1 = d_y1;
        add_inplace(d_z1, matmul_nt(d_q, store_.value(p_mx_wq_)));
        add_inplace(d_z1, matmul_nt(d_k, store_.value(p_mx_wk_)));
        add_inplace(d_z1, matmul_nt(d_v, store_.value(p_mx_wv_)));
        add_inplace(G(p_mx_wq_), matmul_tn(w.z1, d_q));
        add_inplace(G(p_mx_wk_), matmul_tn(w.z1, d_k));
        add_inplace(G(p_mx_wv_), matmul_tn(w.z1, d_v));

        // compression + masked projection
        Tensor<T> d_mp;
        if (cfg_.compress_c > 0) {
            d_mp = zeros_like(w.mp);
            compress_tokens_backward(d_z1, w.mp, store_.value(p_comp_q_), cfg_.compress_scaled, &d_mp,
                                     &G(p_comp_q_));
        } else {
            d_mp = d_z1;
        }
        ProjectionWeights<T> pw{store_.value(p_proj_w_), store_.value(p_proj_b_)};
        masked_project_backward(d_mp, w.ref_patches, w.ref_pm, pw, w.ref_fm,
                                static_cast<Tensor<T>*>(nullptr), &G(p_proj_w_), &G(p_proj_b_));
    }

    // Forward + backward of the simple loss for one sample. d(loss) is scaled
    // by loss_scale (1/batch in training). Returns the unscaled sample loss.
    T loss_and_grad(const Tensor<T>& x0, int t, const Tensor<T>& eps, const Conditioning<T>& cond,
                    const NoiseSchedule& ns, T loss_scale, GradVec& gv) const {
        Tensor<T> x_t = forward_noise(x0, t, eps, ns);
        Workspace ws;
        Tensor<T> pred = forward(x_t, t, cond, &ws);
        const int64_t n = pred.numel();
        T loss = T(0);
        Tensor<T> d_pred = pred;
        for (int64_t i = 0; i < n; ++i) {
            const T diff = pred.data[static_cast<size_t>(i)] - eps.data[static_cast<size_t>(i)];
            loss += diff * diff;
            d_pred.data[static_cast<size_t>(i)] = T(2) * diff / static_cast<T>(n) * loss_scale;
        }
        loss /= static_cast<T>(n);
        backward(d_pred, ws, gv);
        return loss;
    }

private:
    static void add_row_bias(Tensor<T>& a, const Tensor<T>& b) {
        for (int64_t i = 0; i < a.shape[0]; ++i)
            for (int64_t j = 0; j < a.shape[1]; ++j) a(i, j) += b.data[static_cast<size_t>(j)];
    }
    static void accum_col_sums(const Tensor<T>& a, Tensor<T>& out) {
        for (int64_t i = 0; i < a.shape[0]; ++i)
            for (int64_t j = 0; j < a.shape[1]; ++j) out.data[static_cast<size_t>(j)] += a(i, j);
    }
    // adds a per-channel vector across the spatial grid of an (h,w,c) tensor
    static void add_channel_bias(Tensor<T>& x, const Tensor<T>& v) {
        const int64_t c = x.shape[2];
        for (int64_t i = 0; i < x.shape[0]; ++i)
            for (int64_t j = 0; j < x.shape[1]; ++j)
                for (int64_t k = 0; k < c; ++k) x.at3(i, j, k) += v.data[static_cast<size_t>(k)];
    }
    static void accum_channel_bias_grad(const Tensor<T>& d_x, Tensor<T>& out) {
        const int64_t c = d_x.shape[2];
        for (int64_t i = 0; i < d_x.shape[0]; ++i)
            for (int64_t j = 0; j < d_x.shape[1]; ++j)
                for (int64_t k = 0; k < c; ++k) out.data[static_cast<size_t>(k)] += d_x.at3(i, j, k);
    }

    DenoiserConfig cfg_;
    ParamStore<T> store_;

    int p_proj_w_ = -1, p_proj_b_ = -1, p_comp_q_ = -1;
    int p_mx_wq_ = -1, p_mx_wk_ = -1, p_mx_wv_ = -1, p_mx_wo_ = -1;
    int p_mx_w1_ = -1, p_mx_b1_ = -1, p_mx_w2_ = -1, p_mx_b2_ = -1;
    int p_null_ = -1;
    int p_w_q_ = -1, p_w_kt_ = -1, p_w_vt_ = -1, p_w_ki_ = -1, p_w_vi_ = -1;
    int p_attn_out_w_ = -1, p_attn_out_b_ = -1;
    int p_time_w1_ = -1, p_time_b1_ = -1, p_time_w2_ = -1, p_time_b2_ = -1;
    int p_conv_in_w_ = -1, p_conv_in_b_ = -1;
    int p_conv_mid_w_ = -1, p_conv_mid_b_ = -1;
    int p_conv_out_w_ = -1, p_conv_out_b_ = -1;
};

// Mean squared error between the injected and the predicted noise.
template <typename T, typename Model>
double training_loss(const Tensor<T>& x0, const Conditioning<T>& cond, int t, const Tensor<T>& eps,
                     const Model& model, const NoiseSchedule& ns) {
    Tensor<T> x_t = forward_noise(x0, t, eps, ns);
    Tensor<T> pred = model.predict(x_t, t, cond);
    if (!pred.all_finite()) throw NumericError("training_loss: non-finite model output at t=" + std::to_string(t));
    double acc = 0.0;
    for (size_t i = 0; i < pred.data.size(); ++i) {
        const double d = static_cast<double>(pred.data[i]) - static_cast<double>(eps.data[i]);
        acc += d * d;
    }
    return acc / static_cast<double>(pred.numel());
}

}  // namespace maskfuse
