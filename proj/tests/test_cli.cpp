// End-to-end checks of the CLI surface: subcommands, config validation,
// file outputs, determinism.

#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cstdlib>
#include <filesystem>
#include <fstream>

#include <json.hpp>

#include "maskfuse/image_io.hpp"

namespace fs = std::filesystem;

namespace {

std::string work_dir() {
    auto dir = fs::temp_directory_path() / "maskfuse_cli_test";
    return dir.string();
}

int run(const std::string& args) {
    const std::string cmd = std::string(MASKFUSE_CLI_PATH) + " " + args + " > /dev/null 2>&1";
    return std::system(cmd.c_str());
}

std::string slurp(const std::string& path) {
    std::ifstream f(path, std::ios::binary);
    return std::string(std::istreambuf_iterator<char>(f), std::istreambuf_iterator<char>());
}

// tiny run config so the train step takes seconds
void write_config(const std::string& path, const std::string& data_dir, const std::string& out_dir) {
    nlohmann::json j = {
        {"image_size", 8},    {"patch_size", 2},  {"proj_size", 16},  {"latent_factor", 2},
        {"model_width", 8},   {"d_k", 8},         {"n_text_tokens", 2}, {"T", 60},
        {"ddim_steps", 6},    {"train_steps", 4}, {"batch_size", 2},  {"n_scenes", 6},
        {"save_interval", 2}, {"seed", 11},       {"data_dir", data_dir}, {"out_dir", out_dir},
    };
    std::ofstream f(path);
    f << j.dump(2);
}

}  // namespace

TEST_CASE("cli pipeline: dataset -> mask-prep -> train -> sample -> eval") {
    const std::string base = work_dir();
    fs::remove_all(base);
    fs::create_directories(base);
    const std::string cfg = base + "/config.json";
    write_config(cfg, base + "/data", base + "/run");

    REQUIRE(run("dataset --config " + cfg) == 0);
    CHECK(fs::exists(base + "/data/manifest.json"));
    CHECK(fs::exists(base + "/data/scene_0005.ppm"));

    // dataset regeneration with the same seed is byte-identical
    const std::string cfg2 = base + "/config2.json";
    write_config(cfg2, base + "/data2", base + "/run2");
    REQUIRE(run("dataset --config " + cfg2) == 0);
    CHECK(slurp(base + "/data/scene_0003.ppm") == slurp(base + "/data2/scene_0003.ppm"));

    REQUIRE(run("mask-prep --config " + cfg + " --input " + base + "/data/mask_0000.pgm --patch-out " +
                base + "/patch.pgm --latent-out " + base + "/latent.pgm") == 0);
    maskfuse::BinaryMask patch = maskfuse::read_mask_pgm(base + "/patch.pgm");
    CHECK(patch.height == 8);
    maskfuse::BinaryMask latent = maskfuse::read_mask_pgm(base + "/latent.pgm");
    CHECK(latent.height == 4);

    REQUIRE(run("train --config " + cfg) == 0);
    CHECK(fs::exists(base + "/run/checkpoint.ckpt"));
    CHECK(fs::exists(base + "/run/loss_log.csv"));
    const std::string log = slurp(base + "/run/loss_log.csv");
    CHECK(log.rfind("step,loss,lr", 0) == 0);
    CHECK(log.find("\n4,") != std::string::npos);

    // resume continues the step count
    REQUIRE(run("train --config " + cfg + " --resume " + base + "/run/checkpoint.ckpt") == 0);
    CHECK(slurp(base + "/run/loss_log.csv").find("\n8,") != std::string::npos);

    const std::string sample_args = " --config " + cfg + " --checkpoint " + base +
                                    "/run/checkpoint.ckpt --n 2 --image-color 0.1,0.2,0.9 --text-color "
                                    "0.9,0.1,0.1 --mask half";
    REQUIRE(run("sample" + sample_args + " --out-dir " + base + "/gen --reference-out " + base +
                "/reference.ppm") == 0);
    CHECK(fs::exists(base + "/gen/sample_000.ppm"));
    CHECK(fs::exists(base + "/gen/sample_001.ppm"));
    CHECK(fs::exists(base + "/reference.ppm"));
    CHECK(fs::exists(base + "/gen/mask.pgm"));

    // fixed seed reproducibility, byte level
    REQUIRE(run("sample" + sample_args + " --out-dir " + base + "/gen_again") == 0);
    CHECK(slurp(base + "/gen/sample_000.ppm") == slurp(base + "/gen_again/sample_000.ppm"));

    // guidance 0 differs from the default 7.5
    REQUIRE(run("sample" + sample_args + " --guidance 0 --out-dir " + base + "/gen_g0") == 0);
    CHECK(slurp(base + "/gen/sample_000.ppm") != slurp(base + "/gen_g0/sample_000.ppm"));

    // eval of gen vs itself: Fréchet distances at zero
    REQUIRE(run("eval --gen " + base + "/gen --ref " + base + "/gen --mask " + base + "/gen --report " +
                base + "/report.json") == 0);
    nlohmann::json report = nlohmann::json::parse(slurp(base + "/report.json"));
    CHECK(std::abs(report.at("frechet_pixel").get<double>()) <= 1e-6);
    CHECK(std::abs(report.at("frechet_randproj").get<double>()) <= 1e-6);
    CHECK(report.contains("region_color_agreement"));
    CHECK(fs::exists(base + "/report.csv"));
    CHECK(fs::exists(base + "/report_gen_stats.json"));
    CHECK(fs::exists(base + "/report_ref_stats.json"));
}

TEST_CASE("cli mask-prep: checkerboard oracle and idempotence on patch-uniform input") {
    const std::string base = work_dir() + "_maskprep";
    fs::remove_all(base);
    fs::create_directories(base);

    // 32x32 checkerboard of 16px blocks: each patch is already uniform
    maskfuse::BinaryMask board(32, 32);
    for (int i = 0; i < 32; ++i)
        for (int j = 0; j < 32; ++j) board.at(i, j) = ((i / 16) + (j / 16)) % 2 ? 1 : 0;
    maskfuse::write_mask_pgm(base + "/board.pgm", board);

    const std::string common = " --patch-size 16 --factor 16 ";
    REQUIRE(run("mask-prep --input " + base + "/board.pgm" + common + "--patch-out " + base +
                "/p1.pgm --latent-out " + base + "/l1.pgm") == 0);
    // per-threshold oracle: all-zero patches stay 0 (256 > 128), all-one stay 1
    maskfuse::BinaryMask p1 = maskfuse::read_mask_pgm(base + "/p1.pgm");
    CHECK(p1.values == board.values);

    REQUIRE(run("mask-prep --input " + base + "/p1.pgm" + common + "--patch-out " + base +
                "/p2.pgm --latent-out " + base + "/l2.pgm") == 0);
    CHECK(slurp(base + "/p1.pgm") == slurp(base + "/p2.pgm"));

    maskfuse::BinaryMask l1 = maskfuse::read_mask_pgm(base + "/l1.pgm");
    CHECK(l1.height == 2);
    CHECK(l1.values == std::vector<uint8_t>{0, 1, 1, 0});
}

TEST_CASE("cli rejects invalid configs and writes nothing") {
    const std::string base = work_dir() + "_invalid";
    fs::remove_all(base);
    fs::create_directories(base);
    const std::string cfg = base + "/bad.json";
    {
        std::ofstream f(cfg);
        f << R"({"image_size": 10, "patch_size": 4, "data_dir": ")" << base << R"(/data"})";
    }
    CHECK(run("dataset --config " + cfg) != 0);
    CHECK(!fs::exists(base + "/data"));
}

TEST_CASE("cli reports malformed mask input") {
    const std::string base = work_dir() + "_badmask";
    fs::remove_all(base);
    fs::create_directories(base);
    {
        std::ofstream f(base + "/broken.pgm", std::ios::binary);
        f << "P5\n4 4\n255\nxx";  // truncated raster
    }
    CHECK(run("mask-prep --input " + base + "/broken.pgm --patch-out " + base + "/p.pgm --latent-out " +
              base + "/l.pgm") != 0);
}
