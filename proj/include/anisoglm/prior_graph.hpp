#pragma once

#include <array>
#include <cmath>
#include <cstdint>
#include <vector>

#include "anisoglm/errors.hpp"
#include "anisoglm/image.hpp"
#include "anisoglm/sparse.hpp"
#include "anisoglm/structure_tensor.hpp"

namespace anisoglm {

enum class PriorScheme { ugl, fourdir, anydir };

inline const char* to_string(PriorScheme s) {
    switch (s) {
        case PriorScheme::ugl: return "ugl";
        case PriorScheme::fourdir: return "4dir";
        case PriorScheme::anydir: return "anydir";
    }
    return "ugl";
}

inline PriorScheme prior_scheme_from_string(const std::string& s) {
    if (s == "ugl") return PriorScheme::ugl;
    if (s == "4dir") return PriorScheme::fourdir;
    if (s == "anydir") return PriorScheme::anydir;
    throw Error("unknown prior scheme: " + s);
}

/// Two-neighbor oriented stencils plus the isotropic fallback. Offsets are
/// (row, col). diag_main runs towards (row+1, col+1); diag_anti towards
/// (row+1, col-1).
enum class Stencil : std::uint8_t { horizontal, vertical, diag_main, diag_anti, ugl };

inline const std::array<std::pair<int, int>, 2>& stencil_offsets(Stencil s) {
    static const std::array<std::pair<int, int>, 2> horizontal{{{0, -1}, {0, 1}}};
    static const std::array<std::pair<int, int>, 2> vertical{{{-1, 0}, {1, 0}}};
    static const std::array<std::pair<int, int>, 2> diag_main{{{-1, -1}, {1, 1}}};
    static const std::array<std::pair<int, int>, 2> diag_anti{{{-1, 1}, {1, -1}}};
    switch (s) {
        case Stencil::horizontal: return horizontal;
        case Stencil::vertical: return vertical;
        case Stencil::diag_main: return diag_main;
        case Stencil::diag_anti: return diag_anti;
        default: throw Error("ugl stencil has four offsets, not two");
    }
}

constexpr std::array<std::pair<int, int>, 4> kCardinalOffsets{
    {{-1, 0}, {0, -1}, {0, 1}, {1, 0}}};

/// One stencil per masked pixel, indexed by matrix index.
struct NeighborhoodAssignment {
    std::vector<Stencil> stencil;
};

struct FallbackOptions {
    bool enabled = false;    // substitute the UGL stencil at unoriented pixels
    double tau_aniso = 0.01; // relative to field-median energy
};

/// Unweighted 4-connected adjacency over masked pixels.
inline SparseSymMatrix build_ugl_adjacency(const ImageGrid& domain) {
    const auto map = PixelIndexMap::from_mask(domain);
    if (map.n == 0) throw Error("mask is empty");
    std::vector<Triplet> lower;
    for (int i = 0; i < map.n; ++i) {
        const auto [r, c] = map.inverse[i];
        for (const auto& [dr, dc] : kCardinalOffsets) {
            const int nr = r + dr, nc = c + dc;
            if (!domain.in_bounds(nr, nc) || !domain.masked_at(nr, nc)) continue;
            const int j = map.index_of(nr, nc);
            if (j < i) lower.push_back({i, j, 1.0});
        }
    }
    return SparseSymMatrix::from_lower_triplets(map.n, lower);
}

/// Picks the orientation tensor with the largest projection and assigns the
/// perpendicular stencil. Ties break in the order (x, y, xy, -xy); the first
/// maximal projection wins. UGL fallback applies at unoriented pixels when
/// enabled.
inline NeighborhoodAssignment assign_4dir_neighborhoods(const TensorField& field,
                                                        const ImageGrid& domain,
                                                        const FallbackOptions& fallback = {}) {
    if (field.width != domain.width || field.height != domain.height)
        throw Error("tensor field dimensions do not match the mask");
    const auto map = PixelIndexMap::from_mask(domain);
    std::vector<std::uint8_t> unoriented;
    if (fallback.enabled) unoriented = unoriented_mask(field, domain, fallback.tau_aniso);

    // perpendicular neighborhoods: d_x -> N_y, d_y -> N_x, d_xy -> N_-xy, d_-xy -> N_xy
    static const std::array<Stencil, 4> perp{Stencil::vertical, Stencil::horizontal,
                                             Stencil::diag_anti, Stencil::diag_main};

    NeighborhoodAssignment out;
    out.stencil.resize(map.n);
    for (int i = 0; i < map.n; ++i) {
        const auto [r, c] = map.inverse[i];
        if (fallback.enabled && unoriented[field.idx(r, c)]) {
            out.stencil[i] = Stencil::ugl;
            continue;
        }
        const auto p = project_onto_orientation_tensors(field.at(r, c));
        const std::array<double, 4> proj{p.x, p.y, p.xy, p.neg_xy};
        int best = 0;
        for (int k = 1; k < 4; ++k)
            if (proj[k] > proj[best]) best = k;
        out.stencil[i] = perp[best];
    }
    return out;
}

/// Directed unit weights along each pixel's assigned stencil, restricted to
/// masked neighbors, then symmetrized. Entries end up in {0.5, 1}.
inline SparseSymMatrix build_adjacency_4dir(const NeighborhoodAssignment& assignment,
                                            const ImageGrid& domain) {
    const auto map = PixelIndexMap::from_mask(domain);
    if (map.n == 0) throw Error("mask is empty");
    if (static_cast<int>(assignment.stencil.size()) != map.n)
        throw Error("assignment does not cover the mask");
    std::vector<Triplet> directed;
    for (int i = 0; i < map.n; ++i) {
        const auto [r, c] = map.inverse[i];
        const Stencil s = assignment.stencil[i];
        auto visit = [&](int dr, int dc) {
            const int nr = r + dr, nc = c + dc;
            if (!domain.in_bounds(nr, nc) || !domain.masked_at(nr, nc)) return;
            directed.push_back({i, map.index_of(nr, nc), 1.0});
        };
        if (s == Stencil::ugl) {
            for (const auto& [dr, dc] : kCardinalOffsets) visit(dr, dc);
        } else {
            for (const auto& [dr, dc] : stencil_offsets(s)) visit(dr, dc);
        }
    }
    return symmetrize(map.n, directed);
}

/// Directed neighbor weight |sin(phi_pix - phi_tensor)|^alpha / r^beta.
/// The angle difference is reduced modulo pi first, so collinear neighbors
/// (difference of exactly pi) get weight exactly zero.
inline double anydir_weight(double phi_pix, double phi_tensor, double r, double alpha,
                            double beta) {
    if (!(r > 0.0)) throw Error("anydir_weight requires r > 0");
    if (!(alpha > 0.0) || !(beta > 0.0)) throw Error("anydir_weight requires alpha, beta > 0");
    const double d = std::fmod(phi_pix - phi_tensor, M_PI);
    const double s = std::fabs(std::sin(d));
    return std::pow(s, alpha) / std::pow(r, beta);
}

/// 8-neighbor adjacency with weights sampled from the continuous orientation
/// profile, masked neighbors only, symmetrized by averaging. If every weight
/// of a pixel's row underflows, the UGL row substitutes so the pixel stays
/// connected.
inline SparseSymMatrix build_adjacency_anydir(const TensorField& field, const ImageGrid& domain,
                                              double alpha = 12.0, double beta = 5.0,
                                              const FallbackOptions& fallback = {}) {
    if (field.width != domain.width || field.height != domain.height)
        throw Error("tensor field dimensions do not match the mask");
    if (!(alpha > 0.0) || !(beta > 0.0)) throw Error("anydir requires alpha, beta > 0");
    const auto map = PixelIndexMap::from_mask(domain);
    if (map.n == 0) throw Error("mask is empty");
    std::vector<std::uint8_t> unoriented;
    if (fallback.enabled) unoriented = unoriented_mask(field, domain, fallback.tau_aniso);

    std::vector<Triplet> directed;
    std::vector<Triplet> row;
    for (int i = 0; i < map.n; ++i) {
        const auto [r, c] = map.inverse[i];
        auto ugl_row = [&]() {
            for (const auto& [dr, dc] : kCardinalOffsets) {
                const int nr = r + dr, nc = c + dc;
                if (!domain.in_bounds(nr, nc) || !domain.masked_at(nr, nc)) continue;
                directed.push_back({i, map.index_of(nr, nc), 1.0});
            }
        };
        if (fallback.enabled && unoriented[field.idx(r, c)]) {
            ugl_row();
            continue;
        }
        const double phi_tensor = principal_orientation(field.at(r, c)).angle;
        row.clear();
        bool any_masked_neighbor = false;
        double max_w = 0.0;
        for (int dr = -1; dr <= 1; ++dr) {
            for (int dc = -1; dc <= 1; ++dc) {
                if (dr == 0 && dc == 0) continue;
                const int nr = r + dr, nc = c + dc;
                if (!domain.in_bounds(nr, nc) || !domain.masked_at(nr, nc)) continue;
                any_masked_neighbor = true;
                const double phi_pix = std::atan2(static_cast<double>(dr), static_cast<double>(dc));
                const double dist = std::sqrt(static_cast<double>(dr * dr + dc * dc));
                const double w = anydir_weight(phi_pix, phi_tensor, dist, alpha, beta);
                max_w = std::max(max_w, w);
                if (w > 0.0) row.push_back({i, map.index_of(nr, nc), w});
            }
        }
        if (any_masked_neighbor && max_w < 1e-300) {
            ugl_row(); // pathological underflow: keep the pixel connected
        } else {
            directed.insert(directed.end(), row.begin(), row.end());
        }
    }
    return symmetrize(map.n, directed);
}

/// Prior precision matrices for one scheme, with the rank bookkeeping the
/// hyperparameter conditionals need (rank = n - number of graph components).
struct PriorSpec {
    PriorScheme scheme = PriorScheme::ugl;
    SparseSymMatrix d_w;
    SparseSymMatrix d_ar;
    int rank_w = 0;
    int rank_ar = 0;
};

struct PriorOptions {
    PriorScheme scheme = PriorScheme::ugl;
    double anydir_alpha = 12.0;
    double anydir_beta = 5.0;
    FallbackOptions fallback;
};

/// Builds the Laplacian precision matrix for the requested scheme. The same
/// graph is used for the regression and AR coefficient priors. `field` may be
/// null for the UGL scheme.
inline PriorSpec make_prior(const TensorField* field, const ImageGrid& domain,
                            const PriorOptions& opts) {
    SparseSymMatrix adjacency;
    switch (opts.scheme) {
        case PriorScheme::ugl:
            adjacency = build_ugl_adjacency(domain);
            break;
        case PriorScheme::fourdir: {
            if (!field) throw Error("4dir prior requires a tensor field");
            const auto assignment = assign_4dir_neighborhoods(*field, domain, opts.fallback);
            adjacency = build_adjacency_4dir(assignment, domain);
            break;
        }
        case PriorScheme::anydir:
            if (!field) throw Error("anydir prior requires a tensor field");
            adjacency = build_adjacency_anydir(*field, domain, opts.anydir_alpha,
                                               opts.anydir_beta, opts.fallback);
            break;
    }
    PriorSpec spec;
    spec.scheme = opts.scheme;
    spec.d_w = laplacian(adjacency);
    spec.rank_w = spec.d_w.n() - count_components(spec.d_w);
    spec.d_ar = spec.d_w;
    spec.rank_ar = spec.rank_w;
    return spec;
}

} // namespace anisoglm
