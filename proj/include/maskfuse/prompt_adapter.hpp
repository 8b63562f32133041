#pragma once

#include <cmath>
#include <type_traits>
#include <vector>

#include "maskfuse/core/tensor.hpp"
#include "maskfuse/mask_ops.hpp"

namespace maskfuse {

enum class Modality { text, image };

template <typename T>
struct PromptFeatures {
    Modality modality = Modality::text;
    Tensor<T> tokens;  // n × d_ctx
};

// Projection weights of the dual / mask-encoder cross-attention. The text
// projections (w_kt, w_vt) play the role of the pretrained foundation
// weights and are frozen once the image projections are initialized from
// them.
template <typename T>
struct AdapterWeights {
    Tensor<T> w_q;   // d_model × d_k
    Tensor<T> w_kt;  // d_ctx × d_k
    Tensor<T> w_vt;  // d_ctx × d_k
    Tensor<T> w_ki;  // d_ctx × d_k
    Tensor<T> w_vi;  // d_ctx × d_k
    T lambda = T(1);
    bool text_frozen = false;
};

// Latent features arranged on the h'×w' spatial grid, row-major.
template <typename T>
struct QueryBlock {
    int height = 0;
    int width = 0;
    Tensor<T> features;  // (h'*w') × d_model
};

// Copies the text projections into the image projections and freezes the
// text side.
template <typename T>
void init_image_weights_from_text(AdapterWeights<T>& w) {
    w.w_ki = w.w_kt;
    w.w_vi = w.w_vt;
    w.text_frozen = true;
}

// ---- single-head softmax attention core -----------------------------------

template <typename T>
struct AttnCache {
    Tensor<T> q, k, v;   // inputs as seen by the branch
    Tensor<T> probs;     // m × n softmax rows
};

// out = softmax(q kᵀ · scale) v, row-wise softmax over key tokens.
template <typename T>
Tensor<T> attn_forward(const Tensor<T>& q, const Tensor<T>& k, const Tensor<T>& v, T scale,
                       AttnCache<T>* cache = nullptr) {
    if (q.shape[1] != k.shape[1])
        throw ValidationError("attention: query/key dims differ, " + shape_str(q.shape) + " vs " +
                              shape_str(k.shape));
    if (k.shape[0] != v.shape[0])
        throw ValidationError("attention: key/value token counts differ");
    if (k.shape[0] < 1) throw ValidationError("attention: need at least one key token");
    Tensor<T> scores = matmul_nt(q, k);
    scale_inplace(scores, scale);
    const int64_t m = scores.shape[0], n = scores.shape[1];
    for (int64_t i = 0; i < m; ++i) {
        T* row = &scores.data[static_cast<size_t>(i * n)];
        T mx = row[0];
        for (int64_t j = 1; j < n; ++j) mx = std::max(mx, row[j]);
        T sum = T(0);
        for (int64_t j = 0; j < n; ++j) {
            row[j] = std::exp(row[j] - mx);
            sum += row[j];
        }
        for (int64_t j = 0; j < n; ++j) row[j] /= sum;
    }
    Tensor<T> out = matmul(scores, v);
    if (cache) {
        cache->q = q;
        cache->k = k;
        cache->v = v;
        cache->probs = std::move(scores);
    }
    return out;
}

template <typename T>
void attn_backward(const Tensor<T>& d_out, const AttnCache<T>& c, T scale, Tensor<T>* d_q, Tensor<T>* d_k,
                   Tensor<T>* d_v) {
    if (d_v) add_inplace(*d_v, matmul_tn(c.probs, d_out));
    Tensor<T> dp = matmul_nt(d_out, c.v);  // m × n
    // softmax backward: dS = P ∘ (dP − rowsum(dP ∘ P))
    const int64_t m = dp.shape[0], n = dp.shape[1];
    Tensor<T> ds({m, n});
    for (int64_t i = 0; i < m; ++i) {
        T dot = T(0);
        for (int64_t j = 0; j < n; ++j) dot += dp(i, j) * c.probs(i, j);
        for (int64_t j = 0; j < n; ++j) ds(i, j) = c.probs(i, j) * (dp(i, j) - dot);
    }
    scale_inplace(ds, scale);
    if (d_q) add_inplace(*d_q, matmul(ds, c.k));
    if (d_k) add_inplace(*d_k, matmul_tn(ds, c.q));
}

// ---- dual / masked cross-attention -----------------------------------------

// Row mask applied to the projected queries; empty = identity. masked mode
// sends (1-MA) rows to the text branch and MA rows to the image branch.
template <typename T>
struct CrossAttnCache {
    Tensor<T> x;       // m × d_model
    Tensor<T> q;       // x · w_q
    std::vector<T> text_qmask, image_qmask;  // per-row factors, empty = all-ones
    AttnCache<T> text, image;
    T image_coeff = T(1);  // λ for the dual path, 1 for the masked path
    T scale = T(1);
};

namespace detail {

template <typename T>
Tensor<T> rowscale(const Tensor<T>& a, const std::vector<T>& f) {
    if (f.empty()) return a;
    Tensor<T> out = a;
    for (int64_t i = 0; i < a.shape[0]; ++i)
        for (int64_t j = 0; j < a.shape[1]; ++j) out(i, j) *= f[static_cast<size_t>(i)];
    return out;
}

template <typename T>
void rowscale_accum(Tensor<T>& dst, const Tensor<T>& src, const std::vector<T>& f) {
    for (int64_t i = 0; i < src.shape[0]; ++i) {
        const T s = f.empty() ? T(1) : f[static_cast<size_t>(i)];
        for (int64_t j = 0; j < src.shape[1]; ++j) dst(i, j) += src(i, j) * s;
    }
}

}  // namespace detail

// Shared forward of the dual path and the mask-encoder variant.
// `latent_rows` carries the latent mask flattened row-major when masked.
template <typename T>
Tensor<T> cross_attn_forward(const Tensor<T>& x, const Tensor<T>& c_text, const Tensor<T>& c_image,
                             const AdapterWeights<T>& w, bool masked,
                             const std::vector<std::type_identity_t<T>>& latent_rows,
                             std::type_identity_t<CrossAttnCache<T>>* cache) {
    check_2d(x, "cross attention queries");
    check_2d(c_text, "text prompt tokens");
    check_2d(c_image, "image prompt tokens");
    if (x.shape[1] != w.w_q.shape[0])
        throw ValidationError("cross attention: query features are " + shape_str(x.shape) + ", w_q wants " +
                              shape_str(w.w_q.shape));
    if (c_text.shape[1] != w.w_kt.shape[0] || c_image.shape[1] != w.w_ki.shape[0])
        throw ValidationError("cross attention: prompt feature dim does not match projections");
    const T scale = T(1) / std::sqrt(static_cast<T>(w.w_q.shape[1]));

    Tensor<T> q = matmul(x, w.w_q);
    std::vector<T> tmask, imask;
    if (masked) {
        if (static_cast<int64_t>(latent_rows.size()) != x.shape[0])
            throw ValidationError("masked cross attention: mask grid does not match query grid");
        tmask.resize(latent_rows.size());
        imask = latent_rows;
        for (size_t i = 0; i < latent_rows.size(); ++i) tmask[i] = T(1) - latent_rows[i];
    }

    Tensor<T> kt = matmul(c_text, w.w_kt);
    Tensor<T> vt = matmul(c_text, w.w_vt);
    Tensor<T> ki = matmul(c_image, w.w_ki);
    Tensor<T> vi = matmul(c_image, w.w_vi);

    CrossAttnCache<T> local;
    CrossAttnCache<T>& c = cache ? *cache : local;
    c.image_coeff = masked ? T(1) : w.lambda;
    c.scale = scale;
    c.text_qmask = tmask;
    c.image_qmask = imask;

    Tensor<T> out_t = attn_forward(detail::rowscale(q, tmask), kt, vt, scale, &c.text);
    Tensor<T> out_i = attn_forward(detail::rowscale(q, imask), ki, vi, scale, &c.image);
    for (size_t i = 0; i < out_t.data.size(); ++i) out_t.data[i] += c.image_coeff * out_i.data[i];

    if (cache) {
        cache->x = x;
        cache->q = std::move(q);
    }
    return out_t;
}

template <typename T>
struct CrossAttnGrads {
    Tensor<T>* d_x = nullptr;
    Tensor<T>* d_c_text = nullptr;
    Tensor<T>* d_c_image = nullptr;
    Tensor<T>* d_w_q = nullptr;
    Tensor<T>* d_w_kt = nullptr;
    Tensor<T>* d_w_vt = nullptr;
    Tensor<T>* d_w_ki = nullptr;
    Tensor<T>* d_w_vi = nullptr;
};

template <typename T>
void cross_attn_backward(const Tensor<T>& d_out, const CrossAttnCache<T>& c, const Tensor<T>& c_text,
                         const Tensor<T>& c_image, const AdapterWeights<T>& w, const CrossAttnGrads<T>& g) {
    Tensor<T> d_out_i = d_out;
    scale_inplace(d_out_i, c.image_coeff);

    Tensor<T> dqt = zeros_like(c.text.q), dkt = zeros_like(c.text.k), dvt = zeros_like(c.text.v);
    Tensor<T> dqi = zeros_like(c.image.q), dki = zeros_like(c.image.k), dvi = zeros_like(c.image.v);
    attn_backward(d_out, c.text, c.scale, &dqt, &dkt, &dvt);
    attn_backward(d_out_i, c.image, c.scale, &dqi, &dki, &dvi);

    // undo per-branch query row masks
    Tensor<T> dq = zeros_like(c.q);
    detail::rowscale_accum(dq, dqt, c.text_qmask);
    detail::rowscale_accum(dq, dqi, c.image_qmask);

    if (g.d_w_q) add_inplace(*g.d_w_q, matmul_tn(c.x, dq));
    if (g.d_x) add_inplace(*g.d_x, matmul_nt(dq, w.w_q));

    if (g.d_w_kt) add_inplace(*g.d_w_kt, matmul_tn(c_text, dkt));
    if (g.d_w_vt) add_inplace(*g.d_w_vt, matmul_tn(c_text, dvt));
    if (g.d_w_ki) add_inplace(*g.d_w_ki, matmul_tn(c_image, dki));
    if (g.d_w_vi) add_inplace(*g.d_w_vi, matmul_tn(c_image, dvi));
    if (g.d_c_text) {
        add_inplace(*g.d_c_text, matmul_nt(dkt, w.w_kt));
        add_inplace(*g.d_c_text, matmul_nt(dvt, w.w_vt));
    }
    if (g.d_c_image) {
        add_inplace(*g.d_c_image, matmul_nt(dki, w.w_ki));
        add_inplace(*g.d_c_image, matmul_nt(dvi, w.w_vi));
    }
}

// A = softmax(QK_textᵀ/√d)V_text + λ·softmax(QK_imageᵀ/√d)V_image
template <typename T>
Tensor<T> dual_cross_attention(const QueryBlock<T>& queries, const PromptFeatures<T>& text,
                               const PromptFeatures<T>& image, const AdapterWeights<T>& w) {
    return cross_attn_forward(queries.features, text.tokens, image.tokens, w, false, {}, nullptr);
}

// A = softmax(((1-MA)Q)K_textᵀ/√d)V_text + softmax((MA·Q)K_imageᵀ/√d)V_image
template <typename T>
Tensor<T> masked_cross_attention(const QueryBlock<T>& queries, const LatentMask& ma,
                                 const PromptFeatures<T>& text, const PromptFeatures<T>& image,
                                 const AdapterWeights<T>& w) {
    if (ma.height != queries.height || ma.width != queries.width)
        throw ValidationError("masked_cross_attention: mask grid " + std::to_string(ma.height) + "x" +
                              std::to_string(ma.width) + " does not match query grid " +
                              std::to_string(queries.height) + "x" + std::to_string(queries.width));
    std::vector<T> rows(ma.values.size());
    for (size_t i = 0; i < ma.values.size(); ++i) rows[i] = static_cast<T>(ma.values[i]);
    return cross_attn_forward(queries.features, text.tokens, image.tokens, w, true, rows, nullptr);
}

}  // namespace maskfuse
