#pragma once

#include <filesystem>
#include <fstream>
#include <string>
#include <vector>

#include <json.hpp>

#include "anisoglm/chain_io.hpp"
#include "anisoglm/errors.hpp"
#include "anisoglm/glm.hpp"
#include "anisoglm/io.hpp"
#include "anisoglm/matrix_market.hpp"
#include "anisoglm/ppm.hpp"
#include "anisoglm/prior_graph.hpp"
#include "anisoglm/render.hpp"
#include "anisoglm/structure_tensor.hpp"

namespace anisoglm {

/// Everything one end-to-end run needs. Mirrors the JSON config format
/// one-to-one; file paths are resolved relative to the working directory.
struct RunConfig {
    std::string anatomical;
    std::string mask; // optional: empty = full mask
    std::string data_y;
    std::string design_x;
    PriorScheme prior = PriorScheme::ugl;
    double anydir_alpha = 12.0;
    double anydir_beta = 5.0;
    double grad_sigma = 1.0;
    double smooth_sigma = 2.0;
    bool ugl_fallback = false;
    double tau_aniso = 0.01;
    int downsample_factor = 1;
    int ar_order = 1;
    GibbsSchedule schedule;
    std::uint64_t seed = 0;
    std::vector<double> contrast = {0.0, 1.0};
    double effect_fraction = 0.002;
    double ppm_threshold = 0.8;
    std::string out_dir = "out";
    int progress_every = 0;

    void validate() const {
        namespace fs = std::filesystem;
        if (anatomical.empty() || data_y.empty() || design_x.empty())
            throw Error("config must name anatomical, data_y and design_x files");
        for (const auto& p : {anatomical, data_y, design_x})
            if (!fs::exists(p)) throw Error("input file does not exist: " + p);
        if (!mask.empty() && !fs::exists(mask)) throw Error("input file does not exist: " + mask);
        schedule.validate();
        if (downsample_factor < 1) throw Error("downsample factor must be >= 1");
        if (ar_order < 0) throw Error("AR order must be non-negative");
        if (!(effect_fraction > 0.0)) throw Error("effect fraction must be positive");
        if (!(ppm_threshold >= 0.0 && ppm_threshold <= 1.0))
            throw Error("ppm threshold must be in [0, 1]");
        Contrast{contrast}.validate();
    }
};

inline RunConfig run_config_from_json(const nlohmann::json& j) {
    RunConfig cfg;
    try {
        cfg.anatomical = j.at("anatomical").get<std::string>();
        cfg.mask = j.value("mask", std::string{});
        cfg.data_y = j.at("data_y").get<std::string>();
        cfg.design_x = j.at("design_x").get<std::string>();
        cfg.prior = prior_scheme_from_string(j.value("prior", std::string{"ugl"}));
        cfg.anydir_alpha = j.value("alpha", 12.0);
        cfg.anydir_beta = j.value("beta", 5.0);
        cfg.grad_sigma = j.value("grad_sigma", 1.0);
        cfg.smooth_sigma = j.value("smooth_sigma", 2.0);
        cfg.ugl_fallback = j.value("ugl_fallback", false);
        cfg.tau_aniso = j.value("tau_aniso", 0.01);
        cfg.downsample_factor = j.value("downsample", 1);
        cfg.ar_order = j.value("ar_order", 1);
        if (j.contains("schedule")) {
            cfg.schedule.total = j.at("schedule").value("total", cfg.schedule.total);
            cfg.schedule.warmup = j.at("schedule").value("warmup", cfg.schedule.warmup);
            cfg.schedule.thin = j.at("schedule").value("thin", cfg.schedule.thin);
        }
        cfg.seed = j.value("seed", 0ULL);
        if (j.contains("contrast")) cfg.contrast = j.at("contrast").get<std::vector<double>>();
        cfg.effect_fraction = j.value("effect_fraction", 0.002);
        cfg.ppm_threshold = j.value("ppm_threshold", 0.8);
        cfg.out_dir = j.value("out_dir", std::string{"out"});
    } catch (const nlohmann::json::exception& e) {
        throw Error(std::string{"malformed run config: "} + e.what());
    }
    return cfg;
}

inline RunConfig load_run_config(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw Error("cannot open " + path);
    nlohmann::json j;
    try {
        in >> j;
    } catch (const nlohmann::json::exception& e) {
        throw Error(path + ": " + e.what());
    }
    return run_config_from_json(j);
}

inline nlohmann::json run_config_to_json(const RunConfig& cfg) {
    return nlohmann::json{{"anatomical", cfg.anatomical},
                          {"mask", cfg.mask},
                          {"data_y", cfg.data_y},
                          {"design_x", cfg.design_x},
                          {"prior", to_string(cfg.prior)},
                          {"alpha", cfg.anydir_alpha},
                          {"beta", cfg.anydir_beta},
                          {"grad_sigma", cfg.grad_sigma},
                          {"smooth_sigma", cfg.smooth_sigma},
                          {"ugl_fallback", cfg.ugl_fallback},
                          {"tau_aniso", cfg.tau_aniso},
                          {"downsample", cfg.downsample_factor},
                          {"ar_order", cfg.ar_order},
                          {"schedule",
                           {{"total", cfg.schedule.total},
                            {"warmup", cfg.schedule.warmup},
                            {"thin", cfg.schedule.thin}}},
                          {"seed", cfg.seed},
                          {"contrast", cfg.contrast},
                          {"effect_fraction", cfg.effect_fraction},
                          {"ppm_threshold", cfg.ppm_threshold},
                          {"out_dir", cfg.out_dir}};
}

struct PipelineResult {
    std::string out_dir;
    double gamma = 0.0;
    int draws = 0;
    ImageGrid mean_task_map;
    ImageGrid ppm_map;
    std::vector<std::uint8_t> active; // per masked pixel
};

/// Runs the whole chain: anatomy -> tensor field -> prior -> Gibbs ->
/// posterior mean maps -> PPM -> thresholded PPM, writing every stage
/// artifact plus a manifest with per-file checksums into out_dir.
inline PipelineResult run_pipeline(const RunConfig& cfg) {
    namespace fs = std::filesystem;
    cfg.validate();
    fs::create_directories(cfg.out_dir);
    const std::string dir = cfg.out_dir;
    nlohmann::json manifest;
    manifest["config"] = run_config_to_json(cfg);
    nlohmann::json artifacts;

    auto record = [&](const std::string& name, const std::string& filename) {
        artifacts[name] = {{"file", filename}, {"crc32", file_crc32(dir + "/" + filename)}};
    };

    // anatomy and mask
    ImageGrid anat = load_image(cfg.anatomical);
    if (!cfg.mask.empty()) {
        const ImageGrid mask_img = load_mask_pgm(cfg.mask);
        if (mask_img.width != anat.width || mask_img.height != anat.height)
            throw Error("mask dimensions do not match the anatomical image");
        anat.mask = mask_img.mask;
    }
    anat = downsample(anat, cfg.downsample_factor);
    save_image(dir + "/anatomy.f32", anat);
    record("anatomy", "anatomy.f32");

    // tensor field (shared by every scheme so runs differ only in the prior)
    const TensorField field = estimate_structure_tensor(anat, cfg.grad_sigma, cfg.smooth_sigma);
    save_tensor_field(dir + "/tensors.f32", field);
    record("tensors", "tensors.f32");
    render_tensor_overlay(anat, field, dir + "/tensor_overlay.png");

    // prior precision matrix
    PriorOptions popts;
    popts.scheme = cfg.prior;
    popts.anydir_alpha = cfg.anydir_alpha;
    popts.anydir_beta = cfg.anydir_beta;
    popts.fallback.enabled = cfg.ugl_fallback;
    popts.fallback.tau_aniso = cfg.tau_aniso;
    const PriorSpec prior = make_prior(&field, anat, popts);
    write_matrix_market(dir + "/prior.mtx", prior.d_w);
    record("prior", "prior.mtx");

    // dataset
    GlmDataset data;
    data.Y = load_matrix_f32(cfg.data_y);
    data.X = load_matrix_f32(cfg.design_x);
    data.ar_order = cfg.ar_order;
    data.pixmap = PixelIndexMap::from_mask(anat);
    data.validate();

    // sampling
    GibbsConfig gibbs;
    gibbs.schedule = cfg.schedule;
    gibbs.seed = cfg.seed;
    gibbs.progress_every = cfg.progress_every;
    const Chain chain = gibbs_fit(data, prior, gibbs);
    save_chain(dir + "/chain", chain);
    record("chain_w", "chain/w.f32");

    // posterior mean maps
    const Eigen::MatrixXd w_mean = chain.w_mean();
    for (int k = 0; k < chain.K; ++k) {
        std::vector<double> vals(chain.N);
        for (int n = 0; n < chain.N; ++n) vals[n] = w_mean(k, n);
        const ImageGrid m = map_to_grid(data.pixmap, vals);
        const std::string name = "mean_w" + std::to_string(k) + ".f32";
        save_image(dir + "/" + name, m);
        record("mean_w" + std::to_string(k), name);
    }

    // PPM and thresholded PPM
    const double gamma = effect_threshold(data.Y, cfg.effect_fraction);
    PpmMap ppm = compute_ppm(chain, Contrast{cfg.contrast}, gamma);
    const ImageGrid ppm_grid = map_to_grid(data.pixmap, ppm.prob);
    save_image(dir + "/ppm.f32", ppm_grid);
    record("ppm", "ppm.f32");
    const auto active = threshold_ppm(ppm, cfg.ppm_threshold);
    std::vector<double> active_vals(active.begin(), active.end());
    const ImageGrid active_grid = map_to_grid(data.pixmap, active_vals);
    render_map(active_grid, dir + "/ppm_thresholded.pgm", RenderStyle::binary);
    record("ppm_thresholded", "ppm_thresholded.pgm");

    manifest["artifacts"] = artifacts;
    manifest["gamma"] = gamma;
    manifest["draws"] = chain.draws;
    manifest["nonstationary_draws"] = chain.nonstationary_draws;
    {
        std::ofstream out(dir + "/manifest.json");
        if (!out) throw Error("cannot open " + dir + "/manifest.json for writing");
        out << manifest.dump(2) << "\n";
    }

    PipelineResult result;
    result.out_dir = dir;
    result.gamma = gamma;
    result.draws = chain.draws;
    {
        std::vector<double> vals(chain.N);
        const int task_k = chain.K > 1 ? 1 : 0;
        for (int n = 0; n < chain.N; ++n) vals[n] = w_mean(task_k, n);
        result.mean_task_map = map_to_grid(data.pixmap, vals);
    }
    result.ppm_map = ppm_grid;
    result.active = active;
    return result;
}

} // namespace anisoglm
