#pragma once

#include <string>
#include <vector>

#include "maskfuse/image.hpp"
#include "maskfuse/mask_ops.hpp"

namespace maskfuse {

// Raw binary PNM payload: PGM (P5, channels=1) or PPM (P6, channels=3),
// maxval 255 only.
struct PnmData {
    int height = 0;
    int width = 0;
    int channels = 0;
    std::vector<uint8_t> bytes;  // (i*W + j)*C + c
};

// Parse errors throw IoError with the offending byte offset.
PnmData read_pnm(const std::string& path);
void write_pnm(const std::string& path, const PnmData& img);

// Masks map pixel >= 128 to 1 and < 128 to 0; written masks use exactly 0/255.
BinaryMask read_mask_pgm(const std::string& path);
void write_mask_pgm(const std::string& path, const BinaryMask& mask);

template <typename T>
Image<T> to_image(const PnmData& p) {
    Image<T> img(p.height, p.width, p.channels);
    for (size_t i = 0; i < p.bytes.size(); ++i) img.values[i] = normalize_pixel<T>(p.bytes[i]);
    return img;
}

template <typename T>
PnmData from_image(const Image<T>& img) {
    PnmData p;
    p.height = img.height;
    p.width = img.width;
    p.channels = img.channels;
    p.bytes.resize(img.values.size());
    for (size_t i = 0; i < img.values.size(); ++i) p.bytes[i] = denormalize_pixel(img.values[i]);
    return p;
}

template <typename T>
Image<T> read_image(const std::string& path) {
    return to_image<T>(read_pnm(path));
}

template <typename T>
void write_image(const std::string& path, const Image<T>& img) {
    write_pnm(path, from_image(img));
}

}  // namespace maskfuse
