#include "maskfuse/diffusion/checkpoint.hpp"

#include <cstring>
#include <fstream>

namespace maskfuse {

namespace {

uint64_t read_u64_le(const unsigned char* b) {
    uint64_t v = 0;
    for (int i = 7; i >= 0; --i) v = (v << 8) | b[i];
    return v;
}

void write_u64_le(std::ofstream& f, uint64_t v) {
    unsigned char b[8];
    for (int i = 0; i < 8; ++i) b[i] = static_cast<unsigned char>((v >> (8 * i)) & 0xff);
    f.write(reinterpret_cast<const char*>(b), 8);
}

}  // namespace

RawCheckpoint read_checkpoint(const std::string& path) {
    std::ifstream f(path, std::ios::binary);
    if (!f) throw IoError("cannot open checkpoint " + path);
    char magic[8];
    if (!f.read(magic, 8) || std::memcmp(magic, kCheckpointMagic, 8) != 0)
        throw IoError(path + ": bad checkpoint magic");
    unsigned char lenb[8];
    if (!f.read(reinterpret_cast<char*>(lenb), 8)) throw IoError(path + ": truncated manifest length");
    const uint64_t mlen = read_u64_le(lenb);
    if (mlen > (1ull << 30)) throw IoError(path + ": implausible manifest length");
    std::string mtext(mlen, '\0');
    if (!f.read(mtext.data(), static_cast<long>(mlen))) throw IoError(path + ": truncated manifest");

    RawCheckpoint raw;
    try {
        raw.manifest = nlohmann::json::parse(mtext);
    } catch (const nlohmann::json::exception& e) {
        throw IoError(path + ": manifest parse failed: " + e.what());
    }
    for (const auto& p : raw.manifest.at("params")) {
        uint64_t n = 1;
        for (int64_t d : p.at("shape").get<std::vector<int64_t>>()) n *= static_cast<uint64_t>(d);
        if (p.at("dtype").get<std::string>() != "f32") throw IoError(path + ": unsupported dtype");
        std::vector<float> blob(n);
        if (!f.read(reinterpret_cast<char*>(blob.data()), static_cast<long>(n * sizeof(float))))
            throw IoError(path + ": truncated blob for '" + p.at("name").get<std::string>() + "'");
        raw.blobs.push_back(std::move(blob));
    }
    return raw;
}

void write_checkpoint(const std::string& path, const nlohmann::json& manifest,
                      const std::vector<std::vector<float>>& blobs) {
    std::ofstream f(path, std::ios::binary);
    if (!f) throw IoError("cannot open " + path + " for writing");
    f.write(kCheckpointMagic, 8);
    const std::string mtext = manifest.dump();
    write_u64_le(f, mtext.size());
    f.write(mtext.data(), static_cast<long>(mtext.size()));
    for (const auto& blob : blobs)
        f.write(reinterpret_cast<const char*>(blob.data()), static_cast<long>(blob.size() * sizeof(float)));
    if (!f) throw IoError("write failed for " + path);
}

}  // namespace maskfuse
