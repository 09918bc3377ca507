#pragma once

#include <algorithm>
#include <cmath>
#include <vector>

#include "anisoglm/errors.hpp"
#include "anisoglm/image.hpp"

namespace anisoglm {

/// Symmetric positive-semidefinite 2x2 tensor, three components stored.
struct StructureTensor {
    double t11 = 0.0;
    double t12 = 0.0;
    double t22 = 0.0;
};

/// Principal direction and certainty derived from a structure tensor.
/// angle is the direction of the leading eigenvector in [0, pi);
/// anisotropy = lambda1 - lambda2; energy = lambda1 + lambda2.
struct OrientationEstimate {
    double angle = 0.0;
    double anisotropy = 0.0;
    double energy = 0.0;
};

struct TensorField {
    int width = 0;
    int height = 0;
    std::vector<StructureTensor> tensors;

    TensorField() = default;
    TensorField(int w, int h)
        : width(w), height(h), tensors(static_cast<std::size_t>(w) * h) {}

    std::size_t idx(int row, int col) const {
        return static_cast<std::size_t>(row) * width + col;
    }
    StructureTensor& at(int row, int col) { return tensors[idx(row, col)]; }
    const StructureTensor& at(int row, int col) const { return tensors[idx(row, col)]; }
};

/// Inner products of a tensor with the four unit orientation tensors
/// d d^T for d in {x, y, (x+y)/sqrt2, (-x+y)/sqrt2}.
struct OrientationProjections {
    double x = 0.0;
    double y = 0.0;
    double xy = 0.0;     // main diagonal, towards (col+1, row+1)
    double neg_xy = 0.0; // anti diagonal, towards (col-1, row+1)
};

inline OrientationEstimate principal_orientation(const StructureTensor& t) {
    OrientationEstimate est;
    est.energy = t.t11 + t.t22;
    est.anisotropy = std::sqrt((t.t11 - t.t22) * (t.t11 - t.t22) + 4.0 * t.t12 * t.t12);
    double angle = 0.5 * std::atan2(2.0 * t.t12, t.t11 - t.t22);
    if (angle < 0.0) angle += M_PI;
    if (angle >= M_PI) angle -= M_PI;
    est.angle = angle;
    return est;
}

inline OrientationProjections project_onto_orientation_tensors(const StructureTensor& t) {
    OrientationProjections p;
    p.x = t.t11;
    p.y = t.t22;
    const double half_trace = 0.5 * (t.t11 + t.t22);
    p.xy = half_trace + t.t12;
    p.neg_xy = half_trace - t.t12;
    return p;
}

namespace detail {

inline int reflect_index(int i, int n) {
    // half-sample symmetric border: ..., 1, 0 | 0, 1, ..., n-1 | n-1, n-2, ...
    while (i < 0 || i >= n) {
        if (i < 0) i = -i - 1;
        if (i >= n) i = 2 * n - 1 - i;
    }
    return i;
}

inline std::vector<double> gaussian_kernel(double sigma) {
    if (sigma < 1e-12) return {1.0};
    const int radius = std::max(1, static_cast<int>(std::ceil(3.0 * sigma)));
    std::vector<double> k(2 * radius + 1);
    double sum = 0.0;
    for (int u = -radius; u <= radius; ++u) {
        const double w = std::exp(-0.5 * u * u / (sigma * sigma));
        k[u + radius] = w;
        sum += w;
    }
    for (auto& w : k) w /= sum;
    return k;
}

/// Derivative-of-Gaussian kernel for correlation, normalized so that a unit
/// ramp yields gradient exactly 1.
inline std::vector<double> gaussian_derivative_kernel(double sigma) {
    const int radius = std::max(1, static_cast<int>(std::ceil(3.0 * sigma)));
    std::vector<double> k(2 * radius + 1);
    double norm = 0.0;
    for (int u = -radius; u <= radius; ++u) {
        const double w = u * std::exp(-0.5 * u * u / (sigma * sigma));
        k[u + radius] = w;
        norm += u * w;
    }
    for (auto& w : k) w /= norm;
    return k;
}

/// Separable correlation with mirrored borders, horizontal then vertical.
inline void correlate_separable(const std::vector<double>& in, int width, int height,
                                const std::vector<double>& kx, const std::vector<double>& ky,
                                std::vector<double>& out, std::vector<double>& scratch) {
    const int rx = static_cast<int>(kx.size() / 2);
    const int ry = static_cast<int>(ky.size() / 2);
    scratch.resize(in.size());
    out.resize(in.size());
    for (int r = 0; r < height; ++r) {
        for (int c = 0; c < width; ++c) {
            double acc = 0.0;
            for (int u = -rx; u <= rx; ++u)
                acc += kx[u + rx] * in[static_cast<std::size_t>(r) * width + reflect_index(c + u, width)];
            scratch[static_cast<std::size_t>(r) * width + c] = acc;
        }
    }
    for (int r = 0; r < height; ++r) {
        for (int c = 0; c < width; ++c) {
            double acc = 0.0;
            for (int u = -ry; u <= ry; ++u)
                acc += ky[u + ry] * scratch[static_cast<std::size_t>(reflect_index(r + u, height)) * width + c];
            out[static_cast<std::size_t>(r) * width + c] = acc;
        }
    }
}

} // namespace detail

/// Gradient outer-product structure tensor: Gaussian-derivative gradients at
/// scale grad_sigma, componentwise Gaussian smoothing at smooth_sigma.
/// Non-finite values outside the mask are treated as zero; a non-finite value
/// inside the mask is an error.
inline TensorField estimate_structure_tensor(const ImageGrid& image, double grad_sigma = 1.0,
                                             double smooth_sigma = 2.0) {
    if (!(grad_sigma > 0.0)) throw Error("grad_sigma must be positive");
    if (!(smooth_sigma >= 0.0)) throw Error("smooth_sigma must be non-negative");
    if (image.width < 5 || image.height < 5)
        throw Error("structure tensor estimation needs at least a 5x5 image");

    std::vector<double> clean(image.values.size());
    for (std::size_t i = 0; i < image.values.size(); ++i) {
        const double v = image.values[i];
        if (!std::isfinite(v)) {
            if (image.mask[i]) throw Error("non-finite pixel value inside the mask");
            clean[i] = 0.0;
        } else {
            clean[i] = v;
        }
    }

    const auto g = detail::gaussian_kernel(grad_sigma);
    const auto dg = detail::gaussian_derivative_kernel(grad_sigma);

    std::vector<double> gx, gy, scratch;
    detail::correlate_separable(clean, image.width, image.height, dg, g, gx, scratch);
    detail::correlate_separable(clean, image.width, image.height, g, dg, gy, scratch);

    const std::size_t n = clean.size();
    std::vector<double> txx(n), txy(n), tyy(n);
    for (std::size_t i = 0; i < n; ++i) {
        txx[i] = gx[i] * gx[i];
        txy[i] = gx[i] * gy[i];
        tyy[i] = gy[i] * gy[i];
    }

    if (smooth_sigma > 0.0) {
        const auto s = detail::gaussian_kernel(smooth_sigma);
        std::vector<double> tmp;
        detail::correlate_separable(txx, image.width, image.height, s, s, tmp, scratch);
        txx.swap(tmp);
        detail::correlate_separable(txy, image.width, image.height, s, s, tmp, scratch);
        txy.swap(tmp);
        detail::correlate_separable(tyy, image.width, image.height, s, s, tmp, scratch);
        tyy.swap(tmp);
    }

    TensorField field(image.width, image.height);
    for (std::size_t i = 0; i < n; ++i) {
        field.tensors[i].t11 = txx[i];
        field.tensors[i].t12 = txy[i];
        field.tensors[i].t22 = tyy[i];
    }
    return field;
}

/// Median of (lambda1 + lambda2) over masked pixels; reference scale for the
/// "unoriented" threshold.
inline double median_energy(const TensorField& field, const ImageGrid& domain) {
    std::vector<double> energies;
    energies.reserve(field.tensors.size());
    for (int r = 0; r < field.height; ++r)
        for (int c = 0; c < field.width; ++c)
            if (domain.masked_at(r, c)) {
                const auto& t = field.at(r, c);
                energies.push_back(t.t11 + t.t22);
            }
    if (energies.empty()) return 0.0;
    const std::size_t mid = energies.size() / 2;
    std::nth_element(energies.begin(), energies.begin() + mid, energies.end());
    return energies[mid];
}

/// Marks pixels whose anisotropy falls below tau_rel times the field-median
/// energy. Such pixels carry no usable orientation.
inline std::vector<std::uint8_t> unoriented_mask(const TensorField& field, const ImageGrid& domain,
                                                 double tau_rel = 0.01) {
    const double tau = tau_rel * median_energy(field, domain);
    std::vector<std::uint8_t> out(field.tensors.size(), 0);
    for (std::size_t i = 0; i < field.tensors.size(); ++i) {
        const auto est = principal_orientation(field.tensors[i]);
        out[i] = est.anisotropy < tau ? 1 : 0;
    }
    return out;
}

} // namespace anisoglm
