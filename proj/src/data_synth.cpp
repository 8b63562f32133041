#include "maskfuse/data_synth.hpp"

#include <cmath>
#include <filesystem>
#include <fstream>

#include <json.hpp>

#include "maskfuse/core/rng.hpp"
#include "maskfuse/image_io.hpp"
#include "maskfuse/patch_encoder.hpp"

namespace maskfuse {

namespace {

constexpr double kPi = 3.14159265358979323846;

float clamp01(float v) { return v < 0.0f ? 0.0f : (v > 1.0f ? 1.0f : v); }

std::string index_name(const char* prefix, int i, const char* ext) {
    char buf[64];
    std::snprintf(buf, sizeof(buf), "%s_%04d.%s", prefix, i, ext);
    return buf;
}

}  // namespace

TensorF color_text_tokens(const std::array<float, 3>& color, int n_tokens, int dim) {
    if (n_tokens < 1 || dim < 4) throw ConfigError("color_text_tokens: need n_tokens >= 1 and dim >= 4");
    TensorF t({n_tokens, dim});
    for (int j = 0; j < n_tokens; ++j) {
        t(j, 0) = 2.0f * color[0] - 1.0f;
        t(j, 1) = 2.0f * color[1] - 1.0f;
        t(j, 2) = 2.0f * color[2] - 1.0f;
        t(j, 3) = 1.0f;
        for (int k = 4; k < dim; ++k) {
            const int ch = (k - 4) % 3;
            const int freq = (k - 4) / 3 + 1;
            t(j, k) = 0.5f * static_cast<float>(std::cos(kPi * freq * color[static_cast<size_t>(ch)] +
                                                         j * kPi / 4.0));
        }
    }
    return t;
}

ImageF render_background(const std::array<float, 3>& color, int size, float texture_amp, uint64_t seed,
                         int patch_size) {
    ImageF img(size, size, 3);
    Rng patch_rng(Rng::derive(seed, 1));
    Rng pixel_rng(Rng::derive(seed, 2));

    const int pgrid = size / patch_size;
    std::vector<float> jitter(static_cast<size_t>(pgrid) * pgrid * 3);
    for (float& v : jitter) v = static_cast<float>(patch_rng.uniform(-1.0, 1.0));

    for (int i = 0; i < size; ++i)
        for (int j = 0; j < size; ++j) {
            const size_t pk = (static_cast<size_t>(i / patch_size) * pgrid + j / patch_size) * 3;
            for (int c = 0; c < 3; ++c) {
                float v = color[static_cast<size_t>(c)];
                v += texture_amp * jitter[pk + static_cast<size_t>(c)];
                v += 0.5f * texture_amp * static_cast<float>(pixel_rng.uniform(-1.0, 1.0));
                img.at(i, j, c) = 2.0f * clamp01(v) - 1.0f;
            }
        }
    return img;
}

SceneRecord generate_scene(const SceneSpec& spec, int n_text, int d_ctx, int patch_size) {
    if (spec.size < 1 || spec.size % patch_size != 0)
        throw ConfigError("generate_scene: size must be a positive multiple of the patch size");
    SceneRecord rec;
    rec.image = render_background(spec.bg_color, spec.size, spec.texture_amp, spec.seed, patch_size);
    rec.mask = BinaryMask(spec.size, spec.size, 0);

    for (int i = 0; i < spec.size; ++i)
        for (int j = 0; j < spec.size; ++j) {
            const double py = i + 0.5, px = j + 0.5;
            bool fg = false;
            if (spec.shape == FgShape::disc) {
                const double dy = py - spec.cy, dx = px - spec.cx;
                fg = dy * dy + dx * dx < spec.radius * spec.radius;
            } else {
                fg = std::abs(py - spec.cy) <= spec.radius && std::abs(px - spec.cx) <= spec.radius;
            }
            if (fg) {
                rec.mask.at(i, j) = 1;
                for (int c = 0; c < 3; ++c)
                    rec.image.at(i, j, c) = 2.0f * spec.fg_color[static_cast<size_t>(c)] - 1.0f;
            }
        }

    rec.text_tokens = color_text_tokens(spec.bg_color, n_text, d_ctx);
    rec.image_tokens = patchify(rec.image, patch_size);
    return rec;
}

namespace {

SceneSpec random_spec(Rng& rng, const DatasetParams& p, uint64_t scene_seed) {
    SceneSpec s;
    s.size = p.size;
    s.seed = scene_seed;
    s.texture_amp = p.texture_amp;
    s.shape = rng.uniform() < 0.5 ? FgShape::disc : FgShape::square;
    for (int c = 0; c < 3; ++c) s.bg_color[static_cast<size_t>(c)] = static_cast<float>(rng.uniform(0.15, 0.85));
    // keep the product visually distinct from the background
    for (int tries = 0; tries < 64; ++tries) {
        float dist = 0.0f;
        for (int c = 0; c < 3; ++c) {
            s.fg_color[static_cast<size_t>(c)] = static_cast<float>(rng.uniform(0.15, 0.85));
            dist += std::abs(s.fg_color[static_cast<size_t>(c)] - s.bg_color[static_cast<size_t>(c)]);
        }
        if (dist >= 0.45f) break;
    }
    s.radius = rng.uniform(p.size / 6.0, p.size / 3.0);
    s.cx = rng.uniform(p.size / 3.0, 2.0 * p.size / 3.0);
    s.cy = rng.uniform(p.size / 3.0, 2.0 * p.size / 3.0);
    return s;
}

nlohmann::json spec_to_json(const SceneSpec& s) {
    return {{"shape", s.shape == FgShape::disc ? "disc" : "square"},
            {"fg_color", s.fg_color},
            {"bg_color", s.bg_color},
            {"texture_amp", s.texture_amp},
            {"size", s.size},
            {"seed", s.seed},
            {"radius", s.radius},
            {"cx", s.cx},
            {"cy", s.cy}};
}

SceneSpec spec_from_json(const nlohmann::json& j) {
    SceneSpec s;
    s.shape = j.at("shape").get<std::string>() == "disc" ? FgShape::disc : FgShape::square;
    s.fg_color = j.at("fg_color").get<std::array<float, 3>>();
    s.bg_color = j.at("bg_color").get<std::array<float, 3>>();
    s.texture_amp = j.at("texture_amp").get<float>();
    s.size = j.at("size").get<int>();
    s.seed = j.at("seed").get<uint64_t>();
    s.radius = j.at("radius").get<double>();
    s.cx = j.at("cx").get<double>();
    s.cy = j.at("cy").get<double>();
    return s;
}

}  // namespace

void generate_dataset(int n, uint64_t seed, const std::string& dir, const DatasetParams& params) {
    if (n < 1) throw ConfigError("generate_dataset: n must be >= 1");
    if (params.size % params.patch_size != 0)
        throw ConfigError("generate_dataset: image size not divisible by patch size");
    std::filesystem::create_directories(dir);

    nlohmann::json manifest;
    manifest["n"] = n;
    manifest["seed"] = seed;
    manifest["size"] = params.size;
    manifest["patch_size"] = params.patch_size;
    manifest["n_text"] = params.n_text;
    manifest["d_ctx"] = params.d_ctx;
    manifest["texture_amp"] = params.texture_amp;
    nlohmann::json records = nlohmann::json::array();

    for (int i = 0; i < n; ++i) {
        Rng rng(Rng::derive(seed, static_cast<uint64_t>(i)));
        SceneSpec spec = random_spec(rng, params, Rng::derive(seed, static_cast<uint64_t>(i) + (1ull << 32)));
        SceneRecord rec = generate_scene(spec, params.n_text, params.d_ctx, params.patch_size);
        const std::string img_name = index_name("scene", i, "ppm");
        const std::string mask_name = index_name("mask", i, "pgm");
        write_image(dir + "/" + img_name, rec.image);
        write_mask_pgm(dir + "/" + mask_name, rec.mask);
        nlohmann::json r = spec_to_json(spec);
        r["image"] = img_name;
        r["mask"] = mask_name;
        records.push_back(std::move(r));
    }
    manifest["records"] = std::move(records);

    std::ofstream f(dir + "/manifest.json");
    if (!f) throw IoError("cannot write " + dir + "/manifest.json");
    f << manifest.dump(2) << "\n";
}

TrainSet load_dataset(const std::string& dir) {
    std::ifstream f(dir + "/manifest.json");
    if (!f) throw IoError("cannot open " + dir + "/manifest.json");
    nlohmann::json manifest;
    try {
        f >> manifest;
    } catch (const nlohmann::json::exception& e) {
        throw IoError(dir + "/manifest.json: parse failed: " + e.what());
    }

    TrainSet set;
    set.seed = manifest.at("seed").get<uint64_t>();
    set.params.size = manifest.at("size").get<int>();
    set.params.patch_size = manifest.at("patch_size").get<int>();
    set.params.n_text = manifest.at("n_text").get<int>();
    set.params.d_ctx = manifest.at("d_ctx").get<int>();
    set.params.texture_amp = manifest.at("texture_amp").get<float>();

    for (const auto& r : manifest.at("records")) {
        SceneSpec spec = spec_from_json(r);
        SceneRecord rec;
        rec.image = read_image<float>(dir + "/" + r.at("image").get<std::string>());
        rec.mask = read_mask_pgm(dir + "/" + r.at("mask").get<std::string>());
        if (rec.image.height != set.params.size || rec.image.width != set.params.size)
            throw ValidationError(dir + ": record image size does not match manifest");
        rec.text_tokens = color_text_tokens(spec.bg_color, set.params.n_text, set.params.d_ctx);
        rec.image_tokens = patchify(rec.image, set.params.patch_size);
        set.records.push_back(std::move(rec));
    }
    if (set.records.empty()) throw ConfigError(dir + ": dataset is empty");
    return set;
}

}  // namespace maskfuse
