#pragma once

#include "maskfuse/core/tensor.hpp"
#include "maskfuse/image.hpp"
#include "maskfuse/mask_ops.hpp"

namespace maskfuse {

// Linear patch projection: weight (P^2*C × proj_size) plus bias (proj_size).
template <typename T>
struct ProjectionWeights {
    Tensor<T> weight;
    Tensor<T> bias;
};

// ViT-style patchification. Row k of the result is the row-major flattening
// (pixel-major, channel-minor) of patch k; patches enumerated row-major.
template <typename T>
Tensor<T> patchify(const Image<T>& image, int patch_size) {
    if (patch_size < 1 || image.height % patch_size != 0 || image.width % patch_size != 0)
        throw ConfigError("patchify: patch size " + std::to_string(patch_size) + " does not divide image " +
                          std::to_string(image.height) + "x" + std::to_string(image.width));
    const int ph = image.height / patch_size;
    const int pw = image.width / patch_size;
    const int64_t n = static_cast<int64_t>(ph) * pw;
    const int64_t dim = static_cast<int64_t>(patch_size) * patch_size * image.channels;
    Tensor<T> out({n, dim});
    for (int bi = 0; bi < ph; ++bi) {
        for (int bj = 0; bj < pw; ++bj) {
            T* row = &out.data[static_cast<size_t>((bi * pw + bj) * dim)];
            int64_t k = 0;
            for (int i = 0; i < patch_size; ++i)
                for (int j = 0; j < patch_size; ++j)
                    for (int c = 0; c < image.channels; ++c)
                        row[k++] = image.at(bi * patch_size + i, bj * patch_size + j, c);
        }
    }
    return out;
}

// Inverse of patchify; exact round trip.
template <typename T>
Image<T> unpatchify(const Tensor<T>& patches, int patch_size, int height, int width, int channels) {
    const int ph = height / patch_size;
    const int pw = width / patch_size;
    const int64_t dim = static_cast<int64_t>(patch_size) * patch_size * channels;
    if (patches.shape.size() != 2 || patches.shape[0] != static_cast<int64_t>(ph) * pw ||
        patches.shape[1] != dim)
        throw ValidationError("unpatchify: patch matrix shape " + shape_str(patches.shape) +
                              " does not match target dims");
    Image<T> img(height, width, channels);
    for (int bi = 0; bi < ph; ++bi) {
        for (int bj = 0; bj < pw; ++bj) {
            const T* row = &patches.data[static_cast<size_t>((bi * pw + bj) * dim)];
            int64_t k = 0;
            for (int i = 0; i < patch_size; ++i)
                for (int j = 0; j < patch_size; ++j)
                    for (int c = 0; c < channels; ++c)
                        img.at(bi * patch_size + i, bj * patch_size + j, c) = row[k++];
        }
    }
    return img;
}

namespace detail {

// patch_dim = P^2 * C; recovers C and checks alignment with the masks.
inline int project_channels(int64_t n_patches, int64_t patch_dim, const PatchMask& pm,
                            const FlatPatchMask& fm, int64_t proj_size) {
    const int64_t pix = static_cast<int64_t>(pm.patch_size) * pm.patch_size;
    if (pm.n_patches() != n_patches || patch_dim % pix != 0)
        throw ValidationError("masked_project: patch mask does not match patch sequence");
    if (fm.rows != n_patches || fm.cols != proj_size)
        throw ValidationError("masked_project: flat mask is " + std::to_string(fm.rows) + "x" +
                              std::to_string(fm.cols) + ", want " + std::to_string(n_patches) + "x" +
                              std::to_string(proj_size));
    return static_cast<int>(patch_dim / pix);
}

template <typename T>
Tensor<T> broadcast_patch_mask(const PatchMask& pm, int channels) {
    const int ps = pm.patch_size;
    const int ph = pm.height / ps;
    const int pw = pm.width / ps;
    const int64_t dim = static_cast<int64_t>(ps) * ps * channels;
    Tensor<T> out({static_cast<int64_t>(ph) * pw, dim});
    for (int bi = 0; bi < ph; ++bi) {
        for (int bj = 0; bj < pw; ++bj) {
            T* row = &out.data[static_cast<size_t>((bi * pw + bj) * dim)];
            int64_t k = 0;
            for (int i = 0; i < ps; ++i)
                for (int j = 0; j < ps; ++j) {
                    T bit = static_cast<T>(pm.at(bi * ps + i, bj * ps + j));
                    for (int c = 0; c < channels; ++c) row[k++] = bit;
                }
        }
    }
    return out;
}

}  // namespace detail

// z_ref = (Projection(patches ∘ D_p)) ∘ D_z. Rows whose patch bit is 0 come
// out exactly zero, bias included.
template <typename T>
Tensor<T> masked_project(const Tensor<T>& patches, const PatchMask& patch_mask,
                         const ProjectionWeights<T>& w, const FlatPatchMask& flat_mask) {
    check_2d(patches, "masked_project patches");
    const int64_t n = patches.shape[0];
    const int64_t dim = patches.shape[1];
    const int64_t proj = w.weight.shape[1];
    if (w.weight.shape[0] != dim)
        throw ValidationError("masked_project: weight is " + shape_str(w.weight.shape) + ", want (" +
                              std::to_string(dim) + ",proj)");
    if (w.bias.numel() != proj) throw ValidationError("masked_project: bias size mismatch");
    const int channels = detail::project_channels(n, dim, patch_mask, flat_mask, proj);

    Tensor<T> dp = detail::broadcast_patch_mask<T>(patch_mask, channels);
    Tensor<T> masked = patches;
    for (size_t i = 0; i < masked.data.size(); ++i) masked.data[i] *= dp.data[i];

    Tensor<T> z = matmul(masked, w.weight);
    for (int64_t i = 0; i < n; ++i)
        for (int64_t j = 0; j < proj; ++j)
            z(i, j) = (z(i, j) + w.bias.data[static_cast<size_t>(j)]) *
                      static_cast<T>(flat_mask.at(static_cast<int>(i), static_cast<int>(j)));
    return z;
}

// Gradients of masked_project w.r.t. patches, weight, and bias; accumulated
// into the provided tensors.
template <typename T>
void masked_project_backward(const Tensor<T>& d_out, const Tensor<T>& patches, const PatchMask& patch_mask,
                             const ProjectionWeights<T>& w, const FlatPatchMask& flat_mask,
                             Tensor<T>* d_patches, Tensor<T>* d_weight, Tensor<T>* d_bias) {
    const int64_t n = patches.shape[0];
    const int64_t proj = w.weight.shape[1];
    const int channels = detail::project_channels(n, patches.shape[1], patch_mask, flat_mask, proj);
    Tensor<T> dl = d_out;  // gradient past the trailing D_z mask
    for (int64_t i = 0; i < n; ++i)
        for (int64_t j = 0; j < proj; ++j)
            dl(i, j) *= static_cast<T>(flat_mask.at(static_cast<int>(i), static_cast<int>(j)));

    Tensor<T> dp = detail::broadcast_patch_mask<T>(patch_mask, channels);
    Tensor<T> masked = patches;
    for (size_t i = 0; i < masked.data.size(); ++i) masked.data[i] *= dp.data[i];

    if (d_weight) add_inplace(*d_weight, matmul_tn(masked, dl));
    if (d_bias) {
        for (int64_t i = 0; i < n; ++i)
            for (int64_t j = 0; j < proj; ++j) d_bias->data[static_cast<size_t>(j)] += dl(i, j);
    }
    if (d_patches) {
        Tensor<T> dm = matmul_nt(dl, w.weight);
        for (size_t i = 0; i < dm.data.size(); ++i) d_patches->data[i] += dm.data[i] * dp.data[i];
    }
}

// Token compression Z' = Q · Zᵀ · Z, computed exactly as written. When
// `scaled` is set the Gram matrix is divided by N (config flag, default off).
template <typename T>
Tensor<T> compress_tokens(const Tensor<T>& z, const Tensor<T>& q, bool scaled = false) {
    check_2d(z, "compress_tokens z");
    check_2d(q, "compress_tokens q");
    if (q.shape[1] != z.shape[1])
        throw ValidationError("compress_tokens: feature dims differ, " + shape_str(q.shape) + " vs " +
                              shape_str(z.shape));
    if (q.shape[0] >= z.shape[0])
        throw ConfigError("compress_tokens: c=" + std::to_string(q.shape[0]) + " must be < N=" +
                          std::to_string(z.shape[0]));
    Tensor<T> gram = matmul_tn(z, z);
    if (scaled) scale_inplace(gram, T(1) / static_cast<T>(z.shape[0]));
    return matmul(q, gram);
}

template <typename T>
void compress_tokens_backward(const Tensor<T>& d_out, const Tensor<T>& z, const Tensor<T>& q, bool scaled,
                              Tensor<T>* d_z, Tensor<T>* d_q) {
    Tensor<T> gram = matmul_tn(z, z);
    const T s = scaled ? T(1) / static_cast<T>(z.shape[0]) : T(1);
    if (scaled) scale_inplace(gram, s);
    if (d_q) add_inplace(*d_q, matmul_nt(d_out, gram));
    if (d_z) {
        Tensor<T> dg = matmul_tn(q, d_out);  // D×D
        // dZ = Z (dG + dGᵀ), scaled variant folds the 1/N into dG
        Tensor<T> sym = dg;
        for (int64_t i = 0; i < sym.shape[0]; ++i)
            for (int64_t j = 0; j < sym.shape[1]; ++j) sym(i, j) = (dg(i, j) + dg(j, i)) * s;
        add_inplace(*d_z, matmul(z, sym));
    }
}

}  // namespace maskfuse
