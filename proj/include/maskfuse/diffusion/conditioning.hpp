#pragma once

#include "maskfuse/core/tensor.hpp"
#include "maskfuse/mask_ops.hpp"

namespace maskfuse {

// How the prompts enter the denoiser for one forward pass.
//   text_only     — image tokens replaced by the learned null embedding,
//                   query mask forced to all-zeros (masked path)
//   masked        — mask-encoder cross-attention gated by query_mask
//   dual_unmasked — plain dual cross-attention, no query split
//   uncond        — CFG unconditional branch: text-only conditioning with the
//                   null embedding standing in for the image prompt
enum class CondMode { text_only, masked, dual_unmasked, uncond };

template <typename T>
struct Conditioning {
    Tensor<T> text_tokens;     // n_text × d_ctx
    Tensor<T> ref_patches;     // N × (P^2·C) raw reference patch sequence
    PatchMask ref_patch_mask;  // D_p for the masked projection
    FlatPatchMask ref_flat_mask;  // D_z
    LatentMask query_mask;     // MA at the latent grid
    CondMode mode = CondMode::dual_unmasked;
};

struct ConditioningDropout {
    double p_text_only = 0.05;
    double p_mask_applied = 0.5;
};

// Threshold logic from the training recipe: u1 < p_text_only selects the
// text-only path; otherwise u2 < p_mask_applied keeps the mask path active,
// else the unmasked dual attention path is taken.
inline CondMode draw_conditioning_mode(const ConditioningDropout& d, double u1, double u2) {
    if (u1 < d.p_text_only) return CondMode::text_only;
    return (u2 < d.p_mask_applied) ? CondMode::masked : CondMode::dual_unmasked;
}

template <typename T>
Conditioning<T> apply_conditioning_dropout(Conditioning<T> cond, const ConditioningDropout& d, double u1,
                                           double u2) {
    cond.mode = draw_conditioning_mode(d, u1, u2);
    if (cond.mode == CondMode::text_only)
        cond.query_mask = LatentMask::zeros(cond.query_mask.height, cond.query_mask.width);
    return cond;
}

struct GuidanceConfig {
    double scale = 7.5;
    int ddim_steps = 30;
    double eta = 0.0;  // deterministic sampler
};

}  // namespace maskfuse
