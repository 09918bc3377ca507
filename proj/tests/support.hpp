#pragma once

// Shared test utilities: randomized inputs and the independent dense oracles
// the unit suites check against.

#include <Eigen/Dense>
#include <algorithm>
#include <cmath>
#include <vector>

#include <anisoglm/cholesky.hpp>
#include <anisoglm/image.hpp>
#include <anisoglm/rng.hpp>
#include <anisoglm/sparse.hpp>
#include <anisoglm/structure_tensor.hpp>

namespace testsupport {

using anisoglm::ImageGrid;
using anisoglm::RngStream;
using anisoglm::SparseSymMatrix;
using anisoglm::StructureTensor;
using anisoglm::TensorField;

/// Random PSD tensors: gradient outer product plus a small isotropic part.
inline TensorField random_tensor_field(int width, int height, RngStream& rng) {
    TensorField field(width, height);
    for (auto& t : field.tensors) {
        const double gx = rng.normal();
        const double gy = rng.normal();
        const double iso = 0.1 * std::fabs(rng.normal());
        t.t11 = gx * gx + iso;
        t.t12 = gx * gy;
        t.t22 = gy * gy + iso;
    }
    return field;
}

inline ImageGrid random_mask(int width, int height, double density, RngStream& rng) {
    ImageGrid grid(width, height);
    for (std::size_t i = 0; i < grid.size(); ++i)
        grid.mask[i] = rng.uniform() < density ? 1 : 0;
    grid.mask[0] = 1; // never empty
    return grid;
}

/// Random sparse SPD matrix: symmetric off-diagonals made diagonally dominant.
inline SparseSymMatrix random_spd(int n, double density, RngStream& rng) {
    std::vector<anisoglm::Triplet> lower;
    std::vector<double> rowsum(n, 0.0);
    for (int i = 0; i < n; ++i)
        for (int j = 0; j < i; ++j)
            if (rng.uniform() < density) {
                const double v = rng.normal();
                lower.push_back({i, j, v});
                rowsum[i] += std::fabs(v);
                rowsum[j] += std::fabs(v);
            }
    for (int i = 0; i < n; ++i) lower.push_back({i, i, rowsum[i] + 0.5 + rng.uniform()});
    return SparseSymMatrix::from_lower_triplets(n, lower);
}

inline double smallest_eigenvalue(const SparseSymMatrix& m) {
    const Eigen::MatrixXd dense = anisoglm::to_dense(m);
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(dense);
    return es.eigenvalues().minCoeff();
}

/// Absolute angular difference modulo pi (orientations are pi-periodic).
inline double angle_diff(double a, double b) {
    double d = std::fmod(std::fabs(a - b), M_PI);
    return std::min(d, M_PI - d);
}

inline double quantile(std::vector<double> values, double q) {
    const std::size_t idx = static_cast<std::size_t>(q * (values.size() - 1));
    std::nth_element(values.begin(), values.begin() + idx, values.end());
    return values[idx];
}

} // namespace testsupport
