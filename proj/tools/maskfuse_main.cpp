// maskfuse — desk-scale mask-encoder conditioning pipeline.
// Subcommands: dataset, mask-prep, train, sample, eval.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include "maskfuse/config.hpp"
#include "maskfuse/core/rng.hpp"
#include "maskfuse/data_synth.hpp"
#include "maskfuse/diffusion/checkpoint.hpp"
#include "maskfuse/diffusion/sample.hpp"
#include "maskfuse/diffusion/train.hpp"
#include "maskfuse/image_io.hpp"
#include "maskfuse/metrics.hpp"

namespace fs = std::filesystem;
using namespace maskfuse;

namespace {

std::array<float, 3> parse_color(const std::string& s) {
    std::array<float, 3> c{};
    if (std::sscanf(s.c_str(), "%f,%f,%f", &c[0], &c[1], &c[2]) != 3)
        throw ConfigError("color must be r,g,b in [0,1], got '" + s + "'");
    for (float v : c)
        if (v < 0.0f || v > 1.0f) throw ConfigError("color component out of [0,1]: " + s);
    return c;
}

RunConfig load_run_config(const std::string& config_path, const nlohmann::json& overrides) {
    RunConfig cfg;
    if (!config_path.empty()) cfg = load_config(config_path);
    apply_config_json(cfg, overrides);
    cfg.validate();
    return cfg;
}

std::vector<std::string> list_files(const std::string& dir, const std::string& ext) {
    std::vector<std::string> out;
    if (!fs::is_directory(dir)) throw IoError(dir + " is not a directory");
    for (const auto& e : fs::directory_iterator(dir))
        if (e.is_regular_file() && e.path().extension() == ext) out.push_back(e.path().string());
    std::sort(out.begin(), out.end());
    return out;
}

// ---- dataset ---------------------------------------------------------------

int cmd_dataset(const RunConfig& cfg) {
    DatasetParams p;
    p.size = cfg.image_size;
    p.patch_size = cfg.patch_size;
    p.n_text = cfg.n_text_tokens;
    p.d_ctx = cfg.proj_size;
    p.texture_amp = cfg.texture_amp;
    generate_dataset(cfg.n_scenes, cfg.seed, cfg.data_dir, p);
    std::cout << "wrote " << cfg.n_scenes << " scenes to " << cfg.data_dir << "\n";
    return 0;
}

// ---- mask-prep -------------------------------------------------------------

int cmd_mask_prep(const RunConfig& cfg, const std::string& input, const std::string& patch_out,
                  const std::string& latent_out) {
    BinaryMask mask = read_mask_pgm(input);
    PatchMask pm = rebinarize_patches(mask, cfg.patch_size, cfg.effective_zero_threshold());
    LatentMask lm = derive_latent_mask(mask, cfg.latent_factor, cfg.vote_threshold);

    BinaryMask patch_as_mask(pm.height, pm.width);
    patch_as_mask.values = pm.values;
    write_mask_pgm(patch_out, patch_as_mask);
    BinaryMask latent_as_mask(lm.height, lm.width);
    latent_as_mask.values = lm.values;
    write_mask_pgm(latent_out, latent_as_mask);
    std::cout << "wrote " << patch_out << " and " << latent_out << "\n";
    return 0;
}

// ---- train -----------------------------------------------------------------

int cmd_train(const RunConfig& cfg, const std::string& resume) {
    TrainSet set = load_dataset(cfg.data_dir);
    if (set.params.size != cfg.image_size || set.params.patch_size != cfg.patch_size ||
        set.params.d_ctx != cfg.proj_size)
        throw ConfigError("dataset in " + cfg.data_dir + " does not match the run config");

    DenoiserModel<float> model(cfg.denoiser_config());
    NoiseSchedule ns = build_schedule(cfg.T);
    int64_t start_step = 0;
    if (!resume.empty()) {
        start_step = load_checkpoint(resume, model.params());
        // freeze flags are structural, not stored in the checkpoint
        for (auto& p : model.params().items())
            if (p.name == "adapter.w_kt" || p.name == "adapter.w_vt") p.frozen = true;
        std::cout << "resumed from " << resume << " at step " << start_step << "\n";
    } else {
        Rng rng(cfg.seed);
        model.init_params(rng);
    }

    std::vector<PreparedRecord<float>> records;
    records.reserve(set.records.size());
    for (const auto& r : set.records)
        records.push_back(prepare_record<float>(r, cfg.patch_size, cfg.effective_zero_threshold(),
                                                cfg.proj_size, cfg.latent_factor, cfg.vote_threshold));

    TrainOptions opt;
    opt.steps = cfg.train_steps;
    opt.batch_size = cfg.batch_size;
    opt.lr = cfg.lr;
    opt.weight_decay = cfg.weight_decay;
    opt.dropout = {cfg.p_text_only, cfg.p_mask_applied};
    opt.seed = cfg.seed;
    opt.save_interval = cfg.save_interval;
    opt.out_dir = cfg.out_dir;
    opt.start_step = start_step;
    opt.threads = cfg.threads;
    opt.latent_factor = cfg.latent_factor;
    opt.zero_threshold = cfg.effective_zero_threshold();
    opt.vote_threshold = cfg.vote_threshold;
    opt.proj_size = cfg.proj_size;

    TrainResult res = train(model, records, ns, opt);
    std::cout << "trained " << cfg.train_steps << " steps, final loss " << res.losses.back() << ", checkpoint "
              << res.checkpoint_path << "\n";
    return 0;
}

// ---- sample ----------------------------------------------------------------

int cmd_sample(const RunConfig& cfg, const std::string& checkpoint, const std::string& text_color_s,
               const std::string& image_color_s, const std::string& mask_arg, int n_samples,
               bool text_only, const std::string& reference_out) {
    RawCheckpoint raw = read_checkpoint(checkpoint);
    DenoiserConfig dc = denoiser_config_from_json(raw.manifest.at("model"));
    DenoiserModel<float> model(dc);
    load_checkpoint(checkpoint, model.params());

    const int factor = static_cast<int>(std::lround(std::sqrt(dc.latent_c / 3.0)));
    const int patch = static_cast<int>(std::lround(std::sqrt(dc.patch_dim / 3.0)));
    const int grid = static_cast<int>(std::lround(std::sqrt(static_cast<double>(dc.n_patches))));
    const int size = grid * patch;
    NoiseSchedule ns = build_schedule(raw.manifest.at("schedule").at("T").get<int>());

    fs::create_directories(cfg.out_dir);

    // prompts
    const std::array<float, 3> text_color = parse_color(text_color_s);
    const std::array<float, 3> image_color = parse_color(image_color_s);
    Conditioning<float> cond;
    cond.text_tokens = color_text_tokens(text_color, dc.n_text, dc.d_ctx);

    ImageF reference = render_background(image_color, size, cfg.texture_amp, Rng::derive(cfg.seed, 9000), patch);
    if (!reference_out.empty()) write_image(reference_out, reference);
    cond.ref_patches = patchify(reference, patch);
    // geometry comes from the checkpoint, so the threshold default must too
    const int tau = cfg.zero_threshold < 0 ? default_zero_threshold(patch)
                                           : std::min(cfg.zero_threshold, patch * patch);
    BinaryMask ref_keep(size, size, 1);  // clean reference: keep everything
    cond.ref_patch_mask = rebinarize_patches(ref_keep, patch, tau);
    cond.ref_flat_mask = flatten_patch_mask(cond.ref_patch_mask, dc.d_ctx);

    BinaryMask pixel_mask(size, size, 0);
    if (mask_arg == "half") {
        for (int i = 0; i < size; ++i)
            for (int j = 0; j < size / 2; ++j) pixel_mask.at(i, j) = 1;
    } else if (!mask_arg.empty()) {
        pixel_mask = read_mask_pgm(mask_arg);
        if (pixel_mask.height != size || pixel_mask.width != size)
            throw ConfigError("mask dims do not match the model's image size " + std::to_string(size));
    }
    write_mask_pgm(cfg.out_dir + "/mask.pgm", pixel_mask);

    if (text_only) {
        cond.mode = CondMode::text_only;
        cond.query_mask = LatentMask::zeros(dc.latent_h, dc.latent_w);
    } else if (!mask_arg.empty()) {
        cond.mode = CondMode::masked;
        cond.query_mask = derive_latent_mask(pixel_mask, factor, cfg.vote_threshold);
    } else {
        cond.mode = CondMode::dual_unmasked;
        cond.query_mask = LatentMask::zeros(dc.latent_h, dc.latent_w);
    }

    GuidanceConfig g;
    g.scale = cfg.guidance_scale;
    g.ddim_steps = cfg.ddim_steps;

    for (int i = 0; i < n_samples; ++i) {
        ImageF img = sample_image(model, cond, {dc.latent_h, dc.latent_w, dc.latent_c}, ns, g,
                                  Rng::derive(cfg.seed, static_cast<uint64_t>(i)), factor, 3);
        char name[64];
        std::snprintf(name, sizeof(name), "sample_%03d.ppm", i);
        write_image(cfg.out_dir + "/" + name, img);
    }
    std::cout << "wrote " << n_samples << " samples to " << cfg.out_dir << "\n";
    return 0;
}

// ---- eval ------------------------------------------------------------------

// per-channel mean/std plus 2x2 block channel means, colors in [0,1]
std::vector<double> pixel_features(const ImageD& img) {
    std::vector<double> f;
    const int C = img.channels;
    std::vector<double> mean(C, 0.0), var(C, 0.0);
    for (int i = 0; i < img.height; ++i)
        for (int j = 0; j < img.width; ++j)
            for (int c = 0; c < C; ++c) mean[static_cast<size_t>(c)] += (img.at(i, j, c) + 1.0) / 2.0;
    const double npix = static_cast<double>(img.height) * img.width;
    for (double& m : mean) m /= npix;
    for (int i = 0; i < img.height; ++i)
        for (int j = 0; j < img.width; ++j)
            for (int c = 0; c < C; ++c) {
                const double d = (img.at(i, j, c) + 1.0) / 2.0 - mean[static_cast<size_t>(c)];
                var[static_cast<size_t>(c)] += d * d;
            }
    for (int c = 0; c < C; ++c) {
        f.push_back(mean[static_cast<size_t>(c)]);
        f.push_back(std::sqrt(var[static_cast<size_t>(c)] / npix));
    }
    const int bh = img.height / 2, bw = img.width / 2;
    for (int bi = 0; bi < 2; ++bi)
        for (int bj = 0; bj < 2; ++bj)
            for (int c = 0; c < C; ++c) {
                double acc = 0.0;
                for (int i = 0; i < bh; ++i)
                    for (int j = 0; j < bw; ++j)
                        acc += (img.at(bi * bh + i, bj * bw + j, c) + 1.0) / 2.0;
                f.push_back(acc / (static_cast<double>(bh) * bw));
            }
    return f;
}

// fixed seeded Gaussian projection of the raw pixels
std::vector<double> randproj_features(const ImageD& img, int out_dim) {
    static std::vector<double> proj;  // lazily built for the first image size seen
    const size_t in_dim = img.values.size();
    if (proj.size() != in_dim * static_cast<size_t>(out_dim)) {
        Rng rng(0xfeedbeef);
        proj.resize(in_dim * static_cast<size_t>(out_dim));
        for (double& v : proj) v = rng.normal() / std::sqrt(static_cast<double>(in_dim));
    }
    std::vector<double> f(static_cast<size_t>(out_dim), 0.0);
    for (size_t i = 0; i < in_dim; ++i) {
        const double x = img.values[i];
        if (x == 0.0) continue;
        for (int k = 0; k < out_dim; ++k) f[static_cast<size_t>(k)] += x * proj[i * out_dim + k];
    }
    return f;
}

TensorD feature_matrix(const std::vector<std::string>& files, bool randproj) {
    std::vector<std::vector<double>> rows;
    for (const auto& path : files) {
        ImageD img = read_image<double>(path);
        rows.push_back(randproj ? randproj_features(img, 32) : pixel_features(img));
    }
    TensorD m({static_cast<int64_t>(rows.size()), static_cast<int64_t>(rows[0].size())});
    for (size_t i = 0; i < rows.size(); ++i)
        for (size_t j = 0; j < rows[i].size(); ++j) m(static_cast<int64_t>(i), static_cast<int64_t>(j)) = rows[i][j];
    return m;
}

std::array<double, 3> masked_mean_color(const ImageD& img, const BinaryMask& mask) {
    std::array<double, 3> mean{0.0, 0.0, 0.0};
    int count = 0;
    for (int i = 0; i < img.height; ++i)
        for (int j = 0; j < img.width; ++j) {
            if (!mask.at(i, j)) continue;
            ++count;
            for (int c = 0; c < 3; ++c) mean[static_cast<size_t>(c)] += (img.at(i, j, c) + 1.0) / 2.0;
        }
    if (count == 0) throw ValidationError("masked_mean_color: mask selects no pixels");
    for (double& v : mean) v /= count;
    return mean;
}

int cmd_eval(const std::string& gen_dir, const std::string& ref_dir, const std::string& mask_dir,
             const std::string& probs_file, const std::string& scores_file, const std::string& target_color_s,
             const std::string& report_path) {
    const auto gen_files = list_files(gen_dir, ".ppm");
    const auto ref_files = list_files(ref_dir, ".ppm");
    if (gen_files.size() < 2 || ref_files.size() < 2)
        throw ValidationError("eval: need at least 2 generated and 2 reference images");

    nlohmann::json report;
    report["n_generated"] = gen_files.size();
    report["n_reference"] = ref_files.size();

    FeatureStats gp = accumulate_stats(feature_matrix(gen_files, false));
    FeatureStats rp = accumulate_stats(feature_matrix(ref_files, false));
    report["frechet_pixel"] = frechet_distance(gp, rp);
    FeatureStats gr = accumulate_stats(feature_matrix(gen_files, true));
    FeatureStats rr = accumulate_stats(feature_matrix(ref_files, true));
    report["frechet_randproj"] = frechet_distance(gr, rr);

    const std::string stem = report_path.substr(0, report_path.find_last_of('.'));
    save_stats(stem + "_gen_stats.json", gp);
    save_stats(stem + "_ref_stats.json", rp);

    if (!probs_file.empty()) {
        std::ifstream f(probs_file);
        if (!f) throw IoError("cannot open " + probs_file);
        nlohmann::json pj;
        f >> pj;
        const auto rows = pj.get<std::vector<std::vector<double>>>();
        TensorD p({static_cast<int64_t>(rows.size()), static_cast<int64_t>(rows[0].size())});
        for (size_t i = 0; i < rows.size(); ++i)
            for (size_t j = 0; j < rows[i].size(); ++j)
                p(static_cast<int64_t>(i), static_cast<int64_t>(j)) = rows[i][j];
        report["inception_score"] = inception_score(p);
    }
    if (!scores_file.empty()) {
        std::ifstream f(scores_file);
        if (!f) throw IoError("cannot open " + scores_file);
        nlohmann::json sj;
        f >> sj;
        report["mos"] = mean_of_score(sj.get<std::vector<double>>());
    }

    if (!mask_dir.empty()) {
        auto mask_files = list_files(mask_dir, ".pgm");
        if (mask_files.empty()) throw ValidationError("eval: mask dir has no .pgm files");
        std::array<double, 3> target{};
        if (!target_color_s.empty()) {
            auto c = parse_color(target_color_s);
            target = {c[0], c[1], c[2]};
        } else {
            // masked-region mean of the reference set
            std::array<double, 3> acc{};
            for (size_t i = 0; i < ref_files.size(); ++i) {
                BinaryMask m = read_mask_pgm(mask_files[std::min(i, mask_files.size() - 1)]);
                auto c = masked_mean_color(read_image<double>(ref_files[i]), m);
                for (int k = 0; k < 3; ++k) acc[static_cast<size_t>(k)] += c[static_cast<size_t>(k)];
            }
            for (double& v : acc) v /= static_cast<double>(ref_files.size());
            target = acc;
        }
        double agreement = 0.0;
        for (size_t i = 0; i < gen_files.size(); ++i) {
            BinaryMask m = read_mask_pgm(mask_files[std::min(i, mask_files.size() - 1)]);
            auto c = masked_mean_color(read_image<double>(gen_files[i]), m);
            double diff = 0.0;
            for (int k = 0; k < 3; ++k) diff += std::abs(c[static_cast<size_t>(k)] - target[static_cast<size_t>(k)]);
            agreement += diff / 3.0;
        }
        report["region_color_agreement"] = agreement / static_cast<double>(gen_files.size());
        report["region_target_color"] = target;
    }

    std::ofstream out(report_path);
    if (!out) throw IoError("cannot write " + report_path);
    out << report.dump(2) << "\n";

    // CSV alongside the JSON report
    const std::string csv_path = report_path.substr(0, report_path.find_last_of('.')) + ".csv";
    std::ofstream csv(csv_path);
    csv << "metric,value\n";
    for (auto it = report.begin(); it != report.end(); ++it)
        if (it->is_number()) csv << it.key() << "," << it->dump() << "\n";

    std::cout << report.dump(2) << "\n";
    return 0;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"maskfuse: patch-visibility masking + mask-encoder prompt adapter, desk scale"};
    app.require_subcommand(1);

    std::string config_path;
    nlohmann::json overrides = nlohmann::json::object();
    auto add_common = [&](CLI::App* sub) {
        sub->add_option("--config", config_path, "JSON run config");
        sub->add_option_function<uint64_t>("--seed", [&](uint64_t v) { overrides["seed"] = v; });
        sub->add_option_function<std::string>("--data-dir", [&](const std::string& v) { overrides["data_dir"] = v; });
        sub->add_option_function<std::string>("--out-dir", [&](const std::string& v) { overrides["out_dir"] = v; });
    };

    auto* ds = app.add_subcommand("dataset", "generate the synthetic scene dataset");
    add_common(ds);
    ds->add_option_function<int>("--n", [&](int v) { overrides["n_scenes"] = v; });
    ds->add_option_function<int>("--size", [&](int v) { overrides["image_size"] = v; });

    auto* mp = app.add_subcommand("mask-prep", "derive patch and latent masks from a pixel mask");
    add_common(mp);
    std::string mp_in, mp_patch = "patch.pgm", mp_latent = "latent.pgm";
    mp->add_option("--input", mp_in, "input PGM mask")->required();
    mp->add_option("--patch-out", mp_patch, "output patch-level mask");
    mp->add_option("--latent-out", mp_latent, "output latent-level mask");
    mp->add_option_function<int>("--patch-size", [&](int v) { overrides["patch_size"] = v; });
    mp->add_option_function<int>("--zero-threshold", [&](int v) { overrides["zero_threshold"] = v; });
    mp->add_option_function<int>("--factor", [&](int v) { overrides["latent_factor"] = v; });

    auto* tr = app.add_subcommand("train", "train the toy denoiser");
    add_common(tr);
    std::string resume;
    tr->add_option("--resume", resume, "checkpoint to resume from");
    tr->add_option_function<int>("--steps", [&](int v) { overrides["train_steps"] = v; });
    tr->add_option_function<int>("--batch", [&](int v) { overrides["batch_size"] = v; });
    tr->add_option_function<int>("--threads", [&](int v) { overrides["threads"] = v; });

    auto* sa = app.add_subcommand("sample", "sample images from a checkpoint");
    add_common(sa);
    std::string ckpt, text_color = "0.9,0.1,0.1", image_color = "0.1,0.2,0.9", mask_arg = "half";
    std::string reference_out;
    int n_samples = 1;
    bool text_only = false;
    sa->add_option("--checkpoint", ckpt, "model checkpoint")->required();
    sa->add_option("--text-color", text_color, "text prompt color r,g,b");
    sa->add_option("--image-color", image_color, "image prompt (reference) color r,g,b");
    sa->add_option("--mask", mask_arg, "'half', path to a PGM mask, or '' for unmasked dual attention");
    sa->add_option("--n", n_samples, "number of samples");
    sa->add_flag("--text-only", text_only, "drop the image prompt");
    sa->add_option("--reference-out", reference_out, "also write the built reference image here");
    sa->add_option_function<int>("--ddim-steps", [&](int v) { overrides["ddim_steps"] = v; });
    sa->add_option_function<double>("--guidance", [&](double v) { overrides["guidance_scale"] = v; });

    auto* ev = app.add_subcommand("eval", "metric report over generated vs reference images");
    std::string gen_dir, ref_dir, mask_dir, probs_file, scores_file, target_color, report = "report.json";
    ev->add_option("--gen", gen_dir, "generated image dir")->required();
    ev->add_option("--ref", ref_dir, "reference image dir")->required();
    ev->add_option("--mask", mask_dir, "mask dir for the region score");
    ev->add_option("--probs", probs_file, "JSON n×K class probability matrix for IS");
    ev->add_option("--scores", scores_file, "JSON score list for MoS");
    ev->add_option("--target-color", target_color, "region target color r,g,b");
    ev->add_option("--report", report, "output report path (.json)");

    CLI11_PARSE(app, argc, argv);

    try {
        if (ds->parsed()) return cmd_dataset(load_run_config(config_path, overrides));
        if (mp->parsed()) return cmd_mask_prep(load_run_config(config_path, overrides), mp_in, mp_patch, mp_latent);
        if (tr->parsed()) return cmd_train(load_run_config(config_path, overrides), resume);
        if (sa->parsed())
            return cmd_sample(load_run_config(config_path, overrides), ckpt, text_color, image_color, mask_arg,
                              n_samples, text_only, reference_out);
        if (ev->parsed()) return cmd_eval(gen_dir, ref_dir, mask_dir, probs_file, scores_file, target_color, report);
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    }
    return 0;
}
