// Command-line driver: synthetic data generation, tensor estimation, prior
// construction, Gibbs fitting and posterior probability maps, individually or
// as one pipeline.

#include <CLI11.hpp>

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>
#include <vector>

#include <anisoglm/anisoglm.hpp>

namespace fs = std::filesystem;
using namespace anisoglm;

namespace {

std::vector<double> parse_contrast(const std::string& s) {
    std::vector<double> out;
    std::stringstream ss(s);
    std::string item;
    while (std::getline(ss, item, ',')) {
        try {
            out.push_back(std::stod(item));
        } catch (const std::exception&) {
            throw Error("cannot parse contrast entry: " + item);
        }
    }
    if (out.empty()) throw Error("contrast must not be empty");
    return out;
}

void write_synth_outputs(const SynthSpec& spec, const std::string& out_dir) {
    const SynthDataset data = synth_dataset(spec);
    fs::create_directories(out_dir);
    save_image(out_dir + "/anat.f32", data.anat);
    std::vector<std::uint8_t> mask_px(data.anat.size());
    for (std::size_t i = 0; i < mask_px.size(); ++i) mask_px[i] = data.anat.mask[i] ? 255 : 0;
    save_pgm8(out_dir + "/mask.pgm", data.anat.width, data.anat.height, mask_px);
    save_matrix_f32(out_dir + "/Y.f32", data.Y);
    save_matrix_f32(out_dir + "/X.f32", data.X);
    for (int k = 0; k < data.W_true.rows(); ++k) {
        std::vector<double> vals(data.pixmap.n);
        for (int n = 0; n < data.pixmap.n; ++n) vals[n] = data.W_true(k, n);
        save_image(out_dir + "/truth_w" + std::to_string(k) + ".f32",
                   map_to_grid(data.pixmap, vals));
    }
    std::vector<double> active_vals(data.active.begin(), data.active.end());
    render_map(map_to_grid(data.pixmap, active_vals), out_dir + "/truth_active.pgm",
               RenderStyle::binary);
    nlohmann::json j{{"width", spec.width},
                     {"height", spec.height},
                     {"stripe_angle_deg", spec.stripe_angle_deg},
                     {"stripe_wavelength", spec.stripe_wavelength},
                     {"stripe_contrast", spec.stripe_contrast},
                     {"anat_baseline", spec.anat_baseline},
                     {"uniform_patch", spec.uniform_patch},
                     {"strip_width", spec.strip_width},
                     {"strip_offset", spec.strip_offset},
                     {"amplitude", spec.amplitude},
                     {"baseline", spec.baseline},
                     {"ar_coef", spec.ar_coef},
                     {"noise_sd", spec.noise_sd},
                     {"T", spec.T},
                     {"task_block", spec.task_block},
                     {"seed", spec.seed}};
    std::ofstream out(out_dir + "/synth.json");
    out << j.dump(2) << "\n";
}

ImageGrid load_domain(const std::string& image_path, const std::string& mask_path, int width,
                      int height) {
    if (!image_path.empty()) {
        ImageGrid img = load_image(image_path);
        if (!mask_path.empty()) {
            const ImageGrid m = load_mask_pgm(mask_path);
            if (m.width != img.width || m.height != img.height)
                throw Error("mask dimensions do not match the image");
            img.mask = m.mask;
        }
        return img;
    }
    if (width > 0 && height > 0) return ImageGrid(width, height);
    throw Error("either --image or both --width and --height are required");
}

} // namespace

int main(int argc, char** argv) {
    CLI::App app{"anatomically informed spatial priors for Bayesian GLM-AR activation mapping"};
    app.require_subcommand(1);

    // synth ------------------------------------------------------------
    auto* synth = app.add_subcommand("synth", "generate a synthetic benchmark dataset");
    SynthSpec spec;
    std::string synth_out = "synth";
    synth->add_option("--out-dir", synth_out, "output directory");
    synth->add_option("--width", spec.width);
    synth->add_option("--height", spec.height);
    synth->add_option("--angle", spec.stripe_angle_deg, "gradient orientation, degrees");
    synth->add_option("--wavelength", spec.stripe_wavelength);
    synth->add_option("--contrast", spec.stripe_contrast);
    synth->add_option("--anat-baseline", spec.anat_baseline);
    synth->add_flag("--uniform-patch", spec.uniform_patch);
    synth->add_option("--strip-width", spec.strip_width);
    synth->add_option("--strip-offset", spec.strip_offset);
    synth->add_option("--amplitude", spec.amplitude);
    synth->add_option("--baseline", spec.baseline);
    synth->add_option("--ar", spec.ar_coef);
    synth->add_option("--noise-sd", spec.noise_sd);
    synth->add_option("--T", spec.T);
    synth->add_option("--task-block", spec.task_block);
    synth->add_option("--seed", spec.seed);

    // tensor -----------------------------------------------------------
    auto* tensor = app.add_subcommand("tensor", "estimate a structure tensor field");
    std::string t_image, t_mask, t_out = "tensor";
    double t_grad = 1.0, t_smooth = 2.0;
    tensor->add_option("--image", t_image)->required();
    tensor->add_option("--mask", t_mask);
    tensor->add_option("--grad-sigma", t_grad);
    tensor->add_option("--smooth-sigma", t_smooth);
    tensor->add_option("--out-dir", t_out);

    // prior ------------------------------------------------------------
    auto* prior_cmd = app.add_subcommand("prior", "build a spatial precision matrix");
    std::string p_image, p_tensors, p_mask, p_scheme = "ugl", p_out = "prior.mtx";
    int p_width = 0, p_height = 0;
    double p_alpha = 12.0, p_beta = 5.0, p_grad = 1.0, p_smooth = 2.0, p_tau = 0.01;
    bool p_fallback = false;
    prior_cmd->add_option("--image", p_image);
    prior_cmd->add_option("--tensors", p_tensors, "precomputed tensor field (.f32)");
    prior_cmd->add_option("--mask", p_mask);
    prior_cmd->add_option("--width", p_width, "blank full-mask domain width");
    prior_cmd->add_option("--height", p_height, "blank full-mask domain height");
    prior_cmd->add_option("--prior", p_scheme, "ugl|4dir|anydir");
    prior_cmd->add_option("--alpha", p_alpha);
    prior_cmd->add_option("--beta", p_beta);
    prior_cmd->add_option("--grad-sigma", p_grad);
    prior_cmd->add_option("--smooth-sigma", p_smooth);
    prior_cmd->add_flag("--fallback", p_fallback, "UGL rows at unoriented pixels");
    prior_cmd->add_option("--tau-aniso", p_tau);
    prior_cmd->add_option("--out", p_out);

    // fit ----------------------------------------------------------------
    auto* fit = app.add_subcommand("fit", "run the Gibbs sampler");
    std::string f_y, f_x, f_mask, f_prior_mtx, f_scheme = "ugl", f_out = "chain";
    int f_iters = 10000, f_warmup = 1000, f_thin = 5, f_ar = 1, f_progress = 0;
    std::uint64_t f_seed = 0;
    fit->add_option("--y", f_y)->required();
    fit->add_option("--x", f_x)->required();
    fit->add_option("--mask", f_mask)->required();
    fit->add_option("--prior-matrix", f_prior_mtx)->required();
    fit->add_option("--prior", f_scheme, "scheme label for the manifest");
    fit->add_option("--iters", f_iters);
    fit->add_option("--warmup", f_warmup);
    fit->add_option("--thin", f_thin);
    fit->add_option("--seed", f_seed);
    fit->add_option("--ar-order", f_ar);
    fit->add_option("--progress-every", f_progress);
    fit->add_option("--out-dir", f_out);

    // ppm ----------------------------------------------------------------
    auto* ppm_cmd = app.add_subcommand("ppm", "posterior probability maps from a chain");
    std::string m_chain, m_y, m_mask, m_contrast = "0,1", m_out = "maps";
    double m_fraction = 0.002, m_threshold = 0.8, m_gamma = 0.0;
    ppm_cmd->add_option("--chain", m_chain)->required();
    ppm_cmd->add_option("--y", m_y, "dataset for the global-mean effect threshold");
    ppm_cmd->add_option("--mask", m_mask)->required();
    ppm_cmd->add_option("--contrast", m_contrast);
    ppm_cmd->add_option("--effect-fraction", m_fraction);
    auto* gamma_opt = ppm_cmd->add_option("--gamma", m_gamma, "explicit effect threshold");
    ppm_cmd->add_option("--ppm-threshold", m_threshold);
    ppm_cmd->add_option("--out-dir", m_out);

    // pipeline -----------------------------------------------------------
    auto* pipe = app.add_subcommand("pipeline", "run the whole analysis from a config file");
    std::string c_config, c_prior, c_out;
    int c_iters = -1, c_warmup = -1, c_thin = -1, c_ar = -1, c_progress = 0;
    double c_alpha = -1.0, c_beta = -1.0, c_fraction = -1.0, c_threshold = -1.0;
    long long c_seed = -1;
    pipe->add_option("--config", c_config)->required();
    pipe->add_option("--prior", c_prior, "ugl|4dir|anydir");
    pipe->add_option("--alpha", c_alpha);
    pipe->add_option("--beta", c_beta);
    pipe->add_option("--iters", c_iters);
    pipe->add_option("--warmup", c_warmup);
    pipe->add_option("--thin", c_thin);
    pipe->add_option("--seed", c_seed);
    pipe->add_option("--ar-order", c_ar);
    pipe->add_option("--effect-fraction", c_fraction);
    pipe->add_option("--ppm-threshold", c_threshold);
    pipe->add_option("--out-dir", c_out);
    pipe->add_option("--progress-every", c_progress);

    CLI11_PARSE(app, argc, argv);

    try {
        if (*synth) {
            write_synth_outputs(spec, synth_out);
            std::printf("wrote synthetic dataset to %s\n", synth_out.c_str());
        } else if (*tensor) {
            ImageGrid img = load_domain(t_image, t_mask, 0, 0);
            const TensorField field = estimate_structure_tensor(img, t_grad, t_smooth);
            fs::create_directories(t_out);
            save_tensor_field(t_out + "/tensors.f32", field);
            render_tensor_overlay(img, field, t_out + "/tensor_overlay.png");
            std::printf("wrote tensor field to %s\n", t_out.c_str());
        } else if (*prior_cmd) {
            const ImageGrid domain = load_domain(p_image, p_mask, p_width, p_height);
            PriorOptions opts;
            opts.scheme = prior_scheme_from_string(p_scheme);
            opts.anydir_alpha = p_alpha;
            opts.anydir_beta = p_beta;
            opts.fallback.enabled = p_fallback;
            opts.fallback.tau_aniso = p_tau;
            TensorField field;
            const TensorField* field_ptr = nullptr;
            if (!p_tensors.empty()) {
                field = load_tensor_field(p_tensors);
                field_ptr = &field;
            } else if (opts.scheme != PriorScheme::ugl) {
                if (p_image.empty())
                    throw Error("4dir/anydir priors need --image or --tensors");
                field = estimate_structure_tensor(domain, p_grad, p_smooth);
                field_ptr = &field;
            }
            const PriorSpec spec_out = make_prior(field_ptr, domain, opts);
            write_matrix_market(p_out, spec_out.d_w);
            std::printf("wrote %s precision matrix (n=%d, rank=%d) to %s\n", p_scheme.c_str(),
                        spec_out.d_w.n(), spec_out.rank_w, p_out.c_str());
        } else if (*fit) {
            GlmDataset data;
            data.Y = load_matrix_f32(f_y);
            data.X = load_matrix_f32(f_x);
            data.ar_order = f_ar;
            data.pixmap = PixelIndexMap::from_mask(load_mask_pgm(f_mask));
            PriorSpec prior;
            prior.scheme = prior_scheme_from_string(f_scheme);
            prior.d_w = read_matrix_market(f_prior_mtx);
            prior.rank_w = prior.d_w.n() - count_components(prior.d_w);
            prior.d_ar = prior.d_w;
            prior.rank_ar = prior.rank_w;
            GibbsConfig cfg;
            cfg.schedule = {f_iters, f_warmup, f_thin};
            cfg.seed = f_seed;
            cfg.progress_every = f_progress;
            const Chain chain = gibbs_fit(data, prior, cfg);
            save_chain(f_out, chain);
            std::printf("stored %d draws in %s\n", chain.draws, f_out.c_str());
        } else if (*ppm_cmd) {
            const Chain chain = load_chain(m_chain);
            const PixelIndexMap pixmap = PixelIndexMap::from_mask(load_mask_pgm(m_mask));
            if (pixmap.n != chain.N) throw Error("mask does not match the chain dimensions");
            double gamma = m_gamma;
            if (gamma_opt->count() == 0) {
                if (m_y.empty()) throw Error("either --gamma or --y is required");
                gamma = effect_threshold(load_matrix_f32(m_y), m_fraction);
            }
            PpmMap map = compute_ppm(chain, Contrast{parse_contrast(m_contrast)}, gamma);
            fs::create_directories(m_out);
            save_image(m_out + "/ppm.f32", map_to_grid(pixmap, map.prob));
            const auto active = threshold_ppm(map, m_threshold);
            std::vector<double> active_vals(active.begin(), active.end());
            render_map(map_to_grid(pixmap, active_vals), m_out + "/ppm_thresholded.pgm",
                       RenderStyle::binary);
            const Eigen::MatrixXd w_mean = chain.w_mean();
            for (int k = 0; k < chain.K; ++k) {
                std::vector<double> vals(chain.N);
                for (int n = 0; n < chain.N; ++n) vals[n] = w_mean(k, n);
                save_image(m_out + "/mean_w" + std::to_string(k) + ".f32",
                           map_to_grid(pixmap, vals));
            }
            std::printf("wrote maps to %s (gamma=%.6g)\n", m_out.c_str(), gamma);
        } else if (*pipe) {
            RunConfig cfg = load_run_config(c_config);
            if (!c_prior.empty()) cfg.prior = prior_scheme_from_string(c_prior);
            if (c_alpha >= 0.0) cfg.anydir_alpha = c_alpha;
            if (c_beta >= 0.0) cfg.anydir_beta = c_beta;
            if (c_iters >= 0) cfg.schedule.total = c_iters;
            if (c_warmup >= 0) cfg.schedule.warmup = c_warmup;
            if (c_thin >= 0) cfg.schedule.thin = c_thin;
            if (c_seed >= 0) cfg.seed = static_cast<std::uint64_t>(c_seed);
            if (c_ar >= 0) cfg.ar_order = c_ar;
            if (c_fraction >= 0.0) cfg.effect_fraction = c_fraction;
            if (c_threshold >= 0.0) cfg.ppm_threshold = c_threshold;
            if (!c_out.empty()) cfg.out_dir = c_out;
            cfg.progress_every = c_progress;
            const PipelineResult result = run_pipeline(cfg);
            std::printf("pipeline finished: %d draws, gamma=%.6g, outputs in %s\n", result.draws,
                        result.gamma, result.out_dir.c_str());
        }
    } catch (const std::exception& e) {
        std::fprintf(stderr, "error: %s\n", e.what());
        return 1;
    }
    return 0;
}
