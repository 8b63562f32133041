#pragma once

#include "maskfuse/core/tensor.hpp"
#include "maskfuse/image.hpp"

namespace maskfuse {

// Toy latent codec: an exactly invertible space-to-depth rearrangement by
// `factor` (the fixed-kernel stride-f conv pair). latent channels = C * f^2.
template <typename T>
Tensor<T> encode_latent(const Image<T>& img, int factor) {
    if (factor < 1 || img.height % factor != 0 || img.width % factor != 0)
        throw ConfigError("encode_latent: factor " + std::to_string(factor) + " does not divide image dims");
    const int lh = img.height / factor;
    const int lw = img.width / factor;
    const int lc = img.channels * factor * factor;
    Tensor<T> z({lh, lw, lc});
    for (int i = 0; i < lh; ++i)
        for (int j = 0; j < lw; ++j) {
            int64_t k = 0;
            for (int di = 0; di < factor; ++di)
                for (int dj = 0; dj < factor; ++dj)
                    for (int c = 0; c < img.channels; ++c)
                        z.at3(i, j, k++) = img.at(i * factor + di, j * factor + dj, c);
        }
    return z;
}

template <typename T>
Image<T> decode_latent(const Tensor<T>& z, int factor, int channels, bool clamp = true) {
    if (z.shape.size() != 3 || z.shape[2] != static_cast<int64_t>(channels) * factor * factor)
        throw ValidationError("decode_latent: latent shape " + shape_str(z.shape) +
                              " does not match factor/channels");
    const int lh = static_cast<int>(z.shape[0]);
    const int lw = static_cast<int>(z.shape[1]);
    Image<T> img(lh * factor, lw * factor, channels);
    for (int i = 0; i < lh; ++i)
        for (int j = 0; j < lw; ++j) {
            int64_t k = 0;
            for (int di = 0; di < factor; ++di)
                for (int dj = 0; dj < factor; ++dj)
                    for (int c = 0; c < channels; ++c) {
                        T v = z.at3(i, j, k++);
                        if (clamp) v = std::min(T(1), std::max(T(-1), v));
                        img.at(i * factor + di, j * factor + dj, c) = v;
                    }
        }
    return img;
}

}  // namespace maskfuse
