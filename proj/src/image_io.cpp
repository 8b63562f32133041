#include "maskfuse/image_io.hpp"

#include <cstdio>
#include <fstream>
#include <string>

namespace maskfuse {

namespace {

struct PnmParser {
    std::string path;
    std::vector<char> buf;
    size_t pos = 0;

    explicit PnmParser(const std::string& p) : path(p) {
        std::ifstream f(p, std::ios::binary);
        if (!f) throw IoError("cannot open " + p);
        buf.assign(std::istreambuf_iterator<char>(f), std::istreambuf_iterator<char>());
    }

    [[noreturn]] void fail(const std::string& msg) const {
        throw IoError(path + ": " + msg + " at byte " + std::to_string(pos));
    }

    int get() {
        if (pos >= buf.size()) fail("unexpected end of file");
        return static_cast<unsigned char>(buf[pos++]);
    }

    // skips whitespace and '#' comments between header tokens
    void skip_space() {
        while (pos < buf.size()) {
            char c = buf[pos];
            if (c == '#') {
                while (pos < buf.size() && buf[pos] != '\n') ++pos;
            } else if (c == ' ' || c == '\t' || c == '\r' || c == '\n') {
                ++pos;
            } else {
                break;
            }
        }
    }

    int read_int() {
        skip_space();
        if (pos >= buf.size()) fail("unexpected end of file in header");
        if (buf[pos] < '0' || buf[pos] > '9') fail("expected digit");
        long v = 0;
        while (pos < buf.size() && buf[pos] >= '0' && buf[pos] <= '9') {
            v = v * 10 + (buf[pos] - '0');
            if (v > 1 << 24) fail("header value too large");
            ++pos;
        }
        return static_cast<int>(v);
    }
};

}  // namespace

PnmData read_pnm(const std::string& path) {
    PnmParser p(path);
    int m0 = p.get();
    int m1 = p.get();
    int channels;
    if (m0 == 'P' && m1 == '5') {
        channels = 1;
    } else if (m0 == 'P' && m1 == '6') {
        channels = 3;
    } else {
        p.pos = 0;
        p.fail("bad magic (want P5 or P6)");
    }

    PnmData img;
    img.channels = channels;
    img.width = p.read_int();
    img.height = p.read_int();
    if (img.width < 1 || img.height < 1) p.fail("non-positive dimensions");
    int maxval = p.read_int();
    if (maxval != 255) p.fail("unsupported maxval " + std::to_string(maxval) + " (want 255)");
    // exactly one whitespace byte separates the header from the raster
    int sep = p.get();
    if (sep != ' ' && sep != '\t' && sep != '\r' && sep != '\n') p.fail("missing whitespace after maxval");

    size_t need = static_cast<size_t>(img.width) * img.height * channels;
    if (p.buf.size() - p.pos < need) {
        p.pos = p.buf.size();
        p.fail("truncated raster, need " + std::to_string(need) + " bytes");
    }
    img.bytes.assign(p.buf.begin() + static_cast<long>(p.pos),
                     p.buf.begin() + static_cast<long>(p.pos + need));
    return img;
}

void write_pnm(const std::string& path, const PnmData& img) {
    if (img.channels != 1 && img.channels != 3)
        throw IoError("write_pnm: channels must be 1 or 3, got " + std::to_string(img.channels));
    if (img.bytes.size() != static_cast<size_t>(img.width) * img.height * img.channels)
        throw IoError("write_pnm: byte count does not match dims");
    std::ofstream f(path, std::ios::binary);
    if (!f) throw IoError("cannot open " + path + " for writing");
    f << (img.channels == 1 ? "P5" : "P6") << "\n"
      << img.width << " " << img.height << "\n255\n";
    f.write(reinterpret_cast<const char*>(img.bytes.data()), static_cast<long>(img.bytes.size()));
    if (!f) throw IoError("write failed for " + path);
}

BinaryMask read_mask_pgm(const std::string& path) {
    PnmData p = read_pnm(path);
    if (p.channels != 1) throw IoError(path + ": mask must be PGM (P5)");
    BinaryMask m(p.height, p.width);
    for (size_t i = 0; i < p.bytes.size(); ++i) m.values[i] = p.bytes[i] >= 128 ? 1 : 0;
    return m;
}

void write_mask_pgm(const std::string& path, const BinaryMask& mask) {
    mask.validate();
    PnmData p;
    p.height = mask.height;
    p.width = mask.width;
    p.channels = 1;
    p.bytes.resize(mask.values.size());
    for (size_t i = 0; i < mask.values.size(); ++i) p.bytes[i] = mask.values[i] ? 255 : 0;
    write_pnm(path, p);
}

}  // namespace maskfuse
