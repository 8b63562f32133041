#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include <json.hpp>

#include "maskfuse/core/tensor.hpp"
#include "maskfuse/diffusion/params.hpp"
#include "maskfuse/diffusion/schedule.hpp"

namespace maskfuse {

// Checkpoint file layout:
//   8-byte magic "MFCKPT01"
//   u64 little-endian manifest byte length
//   JSON manifest (parameter names/shapes/dtype/sections, schedule config,
//   training step, model config)
//   raw little-endian float32 blobs, row-major, in manifest order
inline constexpr char kCheckpointMagic[9] = "MFCKPT01";

struct RawCheckpoint {
    nlohmann::json manifest;
    std::vector<std::vector<float>> blobs;
};

RawCheckpoint read_checkpoint(const std::string& path);
void write_checkpoint(const std::string& path, const nlohmann::json& manifest,
                      const std::vector<std::vector<float>>& blobs);

template <typename T>
void save_checkpoint(const std::string& path, const ParamStore<T>& store, const NoiseSchedule& ns,
                     int64_t step, const nlohmann::json& model_config) {
    nlohmann::json manifest;
    manifest["step"] = step;
    manifest["schedule"] = {{"kind", "linear-beta"}, {"T", ns.T}, {"beta_min", ns.beta_min},
                            {"beta_max", ns.beta_max}};
    manifest["model"] = model_config;
    nlohmann::json params = nlohmann::json::array();
    std::vector<std::vector<float>> blobs;
    for (const auto& p : store.items()) {
        params.push_back({{"name", p.name},
                          {"shape", p.value.shape},
                          {"dtype", "f32"},
                          {"section", p.section}});
        std::vector<float> blob(p.value.data.size());
        for (size_t i = 0; i < blob.size(); ++i) blob[i] = static_cast<float>(p.value.data[i]);
        blobs.push_back(std::move(blob));
    }
    manifest["params"] = std::move(params);
    write_checkpoint(path, manifest, blobs);
}

// Loads parameter values into an already-built store. Names, order, and
// shapes must match the manifest exactly. Returns the stored training step.
template <typename T>
int64_t load_checkpoint(const std::string& path, ParamStore<T>& store) {
    RawCheckpoint raw = read_checkpoint(path);
    const auto& params = raw.manifest.at("params");
    if (params.size() != store.size())
        throw IoError(path + ": checkpoint has " + std::to_string(params.size()) + " params, model wants " +
                      std::to_string(store.size()));
    for (size_t i = 0; i < store.size(); ++i) {
        auto& p = store.items()[i];
        const auto& mp = params[i];
        if (mp.at("name").get<std::string>() != p.name)
            throw IoError(path + ": param " + std::to_string(i) + " is '" +
                          mp.at("name").get<std::string>() + "', model wants '" + p.name + "'");
        std::vector<int64_t> shape = mp.at("shape").get<std::vector<int64_t>>();
        if (shape != p.value.shape)
            throw IoError(path + ": shape mismatch for '" + p.name + "'");
        const auto& blob = raw.blobs[i];
        if (blob.size() != p.value.data.size()) throw IoError(path + ": blob size mismatch for '" + p.name + "'");
        for (size_t k = 0; k < blob.size(); ++k) p.value.data[k] = static_cast<T>(blob[k]);
    }
    return raw.manifest.at("step").get<int64_t>();
}

}  // namespace maskfuse
