#pragma once

#include <Eigen/Dense>
#include <cstdint>
#include <vector>

#include "anisoglm/errors.hpp"
#include "anisoglm/glm.hpp"

namespace anisoglm {

/// Contrast weights over the K regressors.
struct Contrast {
    std::vector<double> c;

    void validate() const {
        bool any = false;
        for (double v : c) any = any || v != 0.0;
        if (!any) throw Error("contrast must not be all zero");
    }
};

/// Per-voxel exceedance probabilities plus the thresholds they refer to.
struct PpmMap {
    std::vector<double> prob; // one per masked pixel, in [0, 1]
    double gamma = 0.0;       // effect threshold, signal units
    double level = -1.0;      // probability threshold, < 0 until applied
};

/// Effect threshold: fraction times the global mean signal over all masked
/// voxels and time points.
inline double effect_threshold(const Eigen::MatrixXd& Y, double fraction) {
    if (!(fraction > 0.0)) throw Error("effect fraction must be positive");
    if (Y.size() == 0) throw Error("effect threshold needs a nonempty dataset");
    return fraction * Y.mean();
}

/// PPM_n = fraction of stored draws with c^T W_{.,n} strictly above gamma.
inline PpmMap compute_ppm(const Chain& chain, const Contrast& contrast, double gamma) {
    contrast.validate();
    if (chain.draws < 1) throw Error("chain has no stored draws");
    if (static_cast<int>(contrast.c.size()) != chain.K)
        throw Error("contrast length must equal the regressor count");
    PpmMap map;
    map.gamma = gamma;
    map.prob.assign(chain.N, 0.0);
    for (int n = 0; n < chain.N; ++n) {
        int count = 0;
        for (int d = 0; d < chain.draws; ++d) {
            double effect = 0.0;
            for (int k = 0; k < chain.K; ++k)
                effect += contrast.c[k] * static_cast<double>(chain.w_at(d, k, n));
            if (effect > gamma) ++count;
        }
        map.prob[n] = static_cast<double>(count) / chain.draws;
    }
    return map;
}

/// Marks a pixel active iff its posterior probability is at least `level`,
/// and records the level on the map.
inline std::vector<std::uint8_t> threshold_ppm(PpmMap& map, double level) {
    if (!(level >= 0.0 && level <= 1.0)) throw Error("probability threshold must be in [0, 1]");
    map.level = level;
    std::vector<std::uint8_t> active(map.prob.size(), 0);
    for (std::size_t n = 0; n < map.prob.size(); ++n) active[n] = map.prob[n] >= level ? 1 : 0;
    return active;
}

inline std::vector<std::uint8_t> threshold_ppm(const PpmMap& map, double level) {
    PpmMap copy = map;
    return threshold_ppm(copy, level);
}

} // namespace anisoglm
