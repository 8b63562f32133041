#pragma once

#include <cmath>
#include <cstdint>
#include <vector>

#include "maskfuse/core/errors.hpp"

namespace maskfuse {

// Real-valued image, values normalized to [-1, 1], channel-minor layout.
template <typename T>
struct Image {
    int height = 0;
    int width = 0;
    int channels = 0;
    std::vector<T> values;  // (i*W + j)*C + c

    Image() = default;
    Image(int h, int w, int c)
        : height(h), width(w), channels(c), values(static_cast<size_t>(h) * w * c, T(0)) {}

    T at(int i, int j, int c) const {
        return values[(static_cast<size_t>(i) * width + j) * channels + c];
    }
    T& at(int i, int j, int c) {
        return values[(static_cast<size_t>(i) * width + j) * channels + c];
    }
};

using ImageF = Image<float>;
using ImageD = Image<double>;

// pixel byte -> [-1, 1]
template <typename T>
T normalize_pixel(uint8_t v) {
    return static_cast<T>(2.0 * (static_cast<double>(v) / 255.0) - 1.0);
}

// [-1, 1] -> pixel byte, clamped
template <typename T>
uint8_t denormalize_pixel(T v) {
    double x = 255.0 * (static_cast<double>(v) + 1.0) / 2.0;
    long r = std::lround(x);
    if (r < 0) r = 0;
    if (r > 255) r = 255;
    return static_cast<uint8_t>(r);
}

}  // namespace maskfuse
