#pragma once

#include <cstdint>
#include <vector>

#include "maskfuse/core/errors.hpp"

namespace maskfuse {

// Pixel-resolution binary decision mask. 1 = keep/background-visible,
// 0 = drop region.
struct BinaryMask {
    int height = 0;
    int width = 0;
    std::vector<uint8_t> values;  // row-major H*W, each 0 or 1

    BinaryMask() = default;
    BinaryMask(int h, int w, uint8_t fill = 0)
        : height(h), width(w), values(static_cast<size_t>(h) * w, fill) {}

    uint8_t at(int i, int j) const { return values[static_cast<size_t>(i) * width + j]; }
    uint8_t& at(int i, int j) { return values[static_cast<size_t>(i) * width + j]; }

    // Throws ValidationError if any element is not 0/1.
    void validate() const;
};

// Same grid as BinaryMask but constant within every patch_size×patch_size block.
struct PatchMask {
    int height = 0;
    int width = 0;
    int patch_size = 0;
    std::vector<uint8_t> values;

    uint8_t at(int i, int j) const { return values[static_cast<size_t>(i) * width + j]; }
    uint8_t& at(int i, int j) { return values[static_cast<size_t>(i) * width + j]; }

    int n_patches() const { return (height / patch_size) * (width / patch_size); }

    // Decision bit of patch k (row-major patch order).
    uint8_t patch_bit(int k) const {
        int pw = width / patch_size;
        int pi = (k / pw) * patch_size;
        int pj = (k % pw) * patch_size;
        return at(pi, pj);
    }

    // Throws ValidationError unless every patch block is uniform 0/1.
    void validate() const;
};

// Patch mask flattened to the projection width: one row per patch, every
// entry in row i equal to patch i's decision bit.
struct FlatPatchMask {
    int rows = 0;
    int cols = 0;
    std::vector<uint8_t> values;

    uint8_t at(int i, int j) const { return values[static_cast<size_t>(i) * cols + j]; }
};

// Mask at the noise-latent resolution, gating the query split in masked
// cross-attention.
struct LatentMask {
    int height = 0;
    int width = 0;
    int derivation_factor = 0;
    std::vector<uint8_t> values;

    uint8_t at(int i, int j) const { return values[static_cast<size_t>(i) * width + j]; }
    uint8_t& at(int i, int j) { return values[static_cast<size_t>(i) * width + j]; }

    static LatentMask zeros(int h, int w) {
        LatentMask m;
        m.height = h;
        m.width = w;
        m.derivation_factor = 1;
        m.values.assign(static_cast<size_t>(h) * w, 0);
        return m;
    }
};

inline int default_zero_threshold(int patch_size) {
    // majority vote: strictly more than half the pixels must be 0
    return (patch_size * patch_size + 1) / 2;
}

// Re-binarizes the mask at patch granularity: a patch whose zero count
// exceeds zero_threshold becomes all-zero, otherwise all-one.
PatchMask rebinarize_patches(const BinaryMask& mask, int patch_size, int zero_threshold);

// Expands the per-patch decision bits to an n_patches × proj_size matrix,
// patches enumerated row-major.
FlatPatchMask flatten_patch_mask(const PatchMask& patch_mask, int proj_size);

// Block-mean downsample by `factor`, thresholded at vote_threshold: a latent
// cell is 1 iff the mean of its factor×factor pixel block >= vote_threshold.
LatentMask derive_latent_mask(const BinaryMask& mask, int factor, double vote_threshold = 0.5);

// 1 - mask, elementwise.
BinaryMask complement(const BinaryMask& mask);

}  // namespace maskfuse
