#include "maskfuse/mask_ops.hpp"

#include <string>

namespace maskfuse {

namespace {

void check_divisible(int h, int w, int d, const char* what) {
    if (d < 1) throw ConfigError(std::string(what) + " must be >= 1, got " + std::to_string(d));
    if (h % d != 0 || w % d != 0)
        throw ConfigError(std::string(what) + "=" + std::to_string(d) + " does not divide mask dims " +
                          std::to_string(h) + "x" + std::to_string(w));
}

}  // namespace

void BinaryMask::validate() const {
    if (height <= 0 || width <= 0 || values.size() != static_cast<size_t>(height) * width)
        throw ValidationError("BinaryMask: inconsistent dims");
    for (uint8_t v : values)
        if (v != 0 && v != 1) throw ValidationError("BinaryMask: value not in {0,1}: " + std::to_string(v));
}

void PatchMask::validate() const {
    if (patch_size < 1 || height % patch_size != 0 || width % patch_size != 0)
        throw ValidationError("PatchMask: patch size does not divide dims");
    for (int pi = 0; pi < height; pi += patch_size) {
        for (int pj = 0; pj < width; pj += patch_size) {
            uint8_t bit = at(pi, pj);
            if (bit != 0 && bit != 1) throw ValidationError("PatchMask: value not in {0,1}");
            for (int i = 0; i < patch_size; ++i)
                for (int j = 0; j < patch_size; ++j)
                    if (at(pi + i, pj + j) != bit)
                        throw ValidationError("PatchMask: patch at (" + std::to_string(pi) + "," +
                                              std::to_string(pj) + ") is not uniform");
        }
    }
}

PatchMask rebinarize_patches(const BinaryMask& mask, int patch_size, int zero_threshold) {
    check_divisible(mask.height, mask.width, patch_size, "patch size");
    if (zero_threshold < 0 || zero_threshold > patch_size * patch_size)
        throw ConfigError("zero threshold must be in [0, P^2], got " + std::to_string(zero_threshold));
    mask.validate();

    PatchMask out;
    out.height = mask.height;
    out.width = mask.width;
    out.patch_size = patch_size;
    out.values.assign(mask.values.size(), 0);

    for (int pi = 0; pi < mask.height; pi += patch_size) {
        for (int pj = 0; pj < mask.width; pj += patch_size) {
            int zeros = 0;
            for (int i = 0; i < patch_size; ++i)
                for (int j = 0; j < patch_size; ++j)
                    if (mask.at(pi + i, pj + j) == 0) ++zeros;
            uint8_t bit = (zeros > zero_threshold) ? 0 : 1;
            for (int i = 0; i < patch_size; ++i)
                for (int j = 0; j < patch_size; ++j) out.at(pi + i, pj + j) = bit;
        }
    }
    return out;
}

FlatPatchMask flatten_patch_mask(const PatchMask& patch_mask, int proj_size) {
    if (proj_size < 1) throw ConfigError("proj size must be >= 1, got " + std::to_string(proj_size));
    patch_mask.validate();

    FlatPatchMask out;
    out.rows = patch_mask.n_patches();
    out.cols = proj_size;
    out.values.assign(static_cast<size_t>(out.rows) * out.cols, 0);
    for (int k = 0; k < out.rows; ++k) {
        uint8_t bit = patch_mask.patch_bit(k);
        for (int j = 0; j < proj_size; ++j) out.values[static_cast<size_t>(k) * proj_size + j] = bit;
    }
    return out;
}

LatentMask derive_latent_mask(const BinaryMask& mask, int factor, double vote_threshold) {
    check_divisible(mask.height, mask.width, factor, "derivation factor");
    if (!(vote_threshold > 0.0 && vote_threshold <= 1.0))
        throw ConfigError("vote threshold must be in (0, 1], got " + std::to_string(vote_threshold));
    mask.validate();

    LatentMask out;
    out.height = mask.height / factor;
    out.width = mask.width / factor;
    out.derivation_factor = factor;
    out.values.assign(static_cast<size_t>(out.height) * out.width, 0);

    const double cell = static_cast<double>(factor) * factor;
    for (int li = 0; li < out.height; ++li) {
        for (int lj = 0; lj < out.width; ++lj) {
            int ones = 0;
            for (int i = 0; i < factor; ++i)
                for (int j = 0; j < factor; ++j) ones += mask.at(li * factor + i, lj * factor + j);
            out.at(li, lj) = (static_cast<double>(ones) / cell >= vote_threshold) ? 1 : 0;
        }
    }
    return out;
}

BinaryMask complement(const BinaryMask& mask) {
    mask.validate();
    BinaryMask out = mask;
    for (uint8_t& v : out.values) v = static_cast<uint8_t>(1 - v);
    return out;
}

}  // namespace maskfuse
