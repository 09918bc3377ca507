#pragma once

#include <Eigen/Dense>
#include <cmath>
#include <cstdint>
#include <vector>

#include "anisoglm/errors.hpp"
#include "anisoglm/glm.hpp"
#include "anisoglm/image.hpp"
#include "anisoglm/rng.hpp"
#include "anisoglm/sparse.hpp"

namespace anisoglm {

/// Synthetic benchmark: a striped anatomical image plus a block-design
/// time series with a stripe-aligned activation strip and AR(1) noise.
///
/// stripe_angle_deg is the orientation of the intensity gradient (and thus of
/// the structure tensor); the visible stripes and the activation strip run
/// perpendicular to it.
struct SynthSpec {
    int width = 32;
    int height = 32;
    double stripe_angle_deg = 135.0;
    double stripe_wavelength = 8.0;
    double stripe_contrast = 50.0;
    double anat_baseline = 100.0;
    bool uniform_patch = false;   // blank out the top-left quarter of the anatomy
    double strip_width = 4.0;     // px, perpendicular extent of the active strip
    double strip_offset = 0.0;    // px, shift of the strip center along the gradient
    double amplitude = 3.0;       // task effect inside the strip, signal units
    double baseline = 800.0;      // intercept coefficient everywhere
    double ar_coef = 0.3;         // AR(1) coefficient of the noise
    double noise_sd = 1.0;        // innovation standard deviation
    int T = 200;
    int task_block = 20;          // rest/task block length
    std::uint64_t seed = 1;

    void validate() const {
        if (width < 1 || height < 1) throw Error("synthetic grid must be non-empty");
        if (!(stripe_wavelength > 0.0)) throw Error("stripe wavelength must be positive");
        if (!(strip_width >= 0.0)) throw Error("strip width must be non-negative");
        if (!(noise_sd >= 0.0)) throw Error("noise sd must be non-negative");
        if (!(std::fabs(ar_coef) < 1.0)) throw Error("AR coefficient must lie in (-1, 1)");
        if (T < 2) throw Error("need at least two time points");
        if (task_block < 1 || T < 2 * task_block)
            throw Error("time series too short for the task block design");
    }
};

struct SynthDataset {
    ImageGrid anat;                     // striped anatomical image, full mask
    Eigen::MatrixXd Y;                  // T x N
    Eigen::MatrixXd X;                  // T x 2 (intercept, task boxcar)
    Eigen::MatrixXd W_true;             // 2 x N
    std::vector<std::uint8_t> active;   // per masked pixel, 1 inside the strip
    PixelIndexMap pixmap;
};

inline ImageGrid make_stripes(int width, int height, double angle_deg, double wavelength,
                              double contrast, double baseline) {
    ImageGrid img(width, height);
    const double theta = angle_deg * M_PI / 180.0;
    const double ux = std::cos(theta), uy = std::sin(theta);
    for (int r = 0; r < height; ++r)
        for (int c = 0; c < width; ++c) {
            const double u = c * ux + r * uy;
            img.at(r, c) = baseline + contrast * std::sin(2.0 * M_PI * u / wavelength);
        }
    return img;
}

inline SynthDataset synth_dataset(const SynthSpec& spec) {
    spec.validate();
    SynthDataset out;
    out.anat = make_stripes(spec.width, spec.height, spec.stripe_angle_deg,
                            spec.stripe_wavelength, spec.stripe_contrast, spec.anat_baseline);
    if (spec.uniform_patch)
        for (int r = 0; r < spec.height / 2; ++r)
            for (int c = 0; c < spec.width / 2; ++c) out.anat.at(r, c) = spec.anat_baseline;
    out.pixmap = PixelIndexMap::from_mask(out.anat);
    const int N = out.pixmap.n;
    const int K = 2;

    out.X.resize(spec.T, K);
    for (int t = 0; t < spec.T; ++t) {
        out.X(t, 0) = 1.0;
        out.X(t, 1) = ((t / spec.task_block) % 2 == 1) ? 1.0 : 0.0;
    }

    // the strip follows the stripes: active where the signed distance along
    // the gradient from the image center stays within strip_width / 2
    const double theta = spec.stripe_angle_deg * M_PI / 180.0;
    const double ux = std::cos(theta), uy = std::sin(theta);
    const double cx = 0.5 * (spec.width - 1), cy = 0.5 * (spec.height - 1);
    out.W_true.resize(K, N);
    out.active.assign(N, 0);
    for (int n = 0; n < N; ++n) {
        const auto [r, c] = out.pixmap.inverse[n];
        const double d = (c - cx) * ux + (r - cy) * uy - spec.strip_offset;
        const bool in_strip = std::fabs(d) < 0.5 * spec.strip_width;
        out.active[n] = in_strip ? 1 : 0;
        out.W_true(0, n) = spec.baseline;
        out.W_true(1, n) = in_strip ? spec.amplitude : 0.0;
    }

    RngStream rng(spec.seed, 0);
    out.Y.resize(spec.T, N);
    const double a = spec.ar_coef;
    const double stationary_sd =
        spec.noise_sd / std::sqrt(std::max(1.0 - a * a, 1e-12));
    for (int n = 0; n < N; ++n) {
        double e = spec.noise_sd > 0.0 ? stationary_sd * rng.normal() : 0.0;
        for (int t = 0; t < spec.T; ++t) {
            if (t > 0) e = a * e + spec.noise_sd * rng.normal();
            out.Y(t, n) = out.X(t, 0) * out.W_true(0, n) + out.X(t, 1) * out.W_true(1, n) + e;
        }
    }
    return out;
}

inline GlmDataset to_glm_dataset(const SynthDataset& synth, int ar_order) {
    GlmDataset data;
    data.Y = synth.Y;
    data.X = synth.X;
    data.ar_order = ar_order;
    data.pixmap = synth.pixmap;
    data.validate();
    return data;
}

} // namespace anisoglm
