#pragma once

#include <array>
#include <cstdint>
#include <string>
#include <vector>

#include "maskfuse/core/tensor.hpp"
#include "maskfuse/image.hpp"
#include "maskfuse/mask_ops.hpp"

namespace maskfuse {

enum class FgShape { disc, square };

// One synthetic scene: a flat-colored geometric "product" over a textured
// background. Colors live in [0,1].
struct SceneSpec {
    FgShape shape = FgShape::disc;
    std::array<float, 3> fg_color{0.8f, 0.2f, 0.2f};
    std::array<float, 3> bg_color{0.2f, 0.4f, 0.7f};
    float texture_amp = 0.0f;
    int size = 16;
    uint64_t seed = 0;
    // geometry in pixels: disc radius (strict interior) or square half-side
    double radius = 4.0;
    double cx = 8.0;
    double cy = 8.0;
};

struct SceneRecord {
    ImageF image;           // [-1,1], size×size×3
    BinaryMask mask;        // 1 exactly on foreground pixels
    TensorF text_tokens;    // n_text × d_ctx, encodes the background color
    TensorF image_tokens;   // N × (P^2·3) reference patch sequence
};

// Deterministic token features for a prompt color.
TensorF color_text_tokens(const std::array<float, 3>& color, int n_tokens, int dim);

// Background-only patchwork: base color plus per-patch jitter and per-pixel
// noise scaled by texture_amp, deterministic per seed.
ImageF render_background(const std::array<float, 3>& color, int size, float texture_amp, uint64_t seed,
                         int patch_size);

SceneRecord generate_scene(const SceneSpec& spec, int n_text = 4, int d_ctx = 64, int patch_size = 4);

struct DatasetParams {
    int size = 16;
    int patch_size = 4;
    int n_text = 4;
    int d_ctx = 64;
    float texture_amp = 0.08f;
};

// Writes n scenes (scene_NNNN.ppm + mask_NNNN.pgm) plus manifest.json under
// dir. Bit-reproducible from (n, seed).
void generate_dataset(int n, uint64_t seed, const std::string& dir, const DatasetParams& params);

struct TrainSet {
    DatasetParams params;
    uint64_t seed = 0;
    std::vector<SceneRecord> records;
};

TrainSet load_dataset(const std::string& dir);

}  // namespace maskfuse
