#pragma once

#include <cmath>
#include <cstdint>
#include <utility>
#include <vector>

#include "anisoglm/errors.hpp"

namespace anisoglm {

/// 2D scalar field with an analysis mask. Row-major storage; pixel (row, col)
/// lives at values[row * width + col]. Coordinates follow the usual image
/// convention: x = column (rightwards), y = row (downwards).
struct ImageGrid {
    int width = 0;
    int height = 0;
    std::vector<double> values;
    std::vector<std::uint8_t> mask; // 1 = in analysis

    ImageGrid() = default;
    ImageGrid(int w, int h, double fill = 0.0, bool masked = true)
        : width(w),
          height(h),
          values(static_cast<std::size_t>(w) * h, fill),
          mask(static_cast<std::size_t>(w) * h, masked ? 1 : 0) {
        if (w <= 0 || h <= 0) throw Error("ImageGrid dimensions must be positive");
    }

    std::size_t size() const { return values.size(); }
    std::size_t idx(int row, int col) const {
        return static_cast<std::size_t>(row) * width + col;
    }
    double& at(int row, int col) { return values[idx(row, col)]; }
    double at(int row, int col) const { return values[idx(row, col)]; }
    bool masked_at(int row, int col) const { return mask[idx(row, col)] != 0; }
    bool in_bounds(int row, int col) const {
        return row >= 0 && row < height && col >= 0 && col < width;
    }

    int count_masked() const {
        int n = 0;
        for (auto m : mask) n += m != 0;
        return n;
    }

    /// Checks the structural invariants: positive dimensions, matching
    /// buffer sizes, finite values at every masked pixel.
    void validate() const {
        if (width <= 0 || height <= 0) throw Error("ImageGrid dimensions must be positive");
        const auto expected = static_cast<std::size_t>(width) * height;
        if (values.size() != expected || mask.size() != expected)
            throw Error("ImageGrid buffer size does not match dimensions");
        for (std::size_t i = 0; i < values.size(); ++i)
            if (mask[i] && !std::isfinite(values[i]))
                throw Error("ImageGrid has a non-finite value at a masked pixel");
    }
};

/// Box-filter downsampling by an integer factor. Dimensions that do not
/// divide evenly are cropped to the top-left factor-aligned region. The mask
/// is downsampled by majority vote with ties counted as masked.
inline ImageGrid downsample(const ImageGrid& img, int factor) {
    if (factor < 1) throw Error("downsample factor must be >= 1");
    img.validate();
    if (factor == 1) return img;
    const int out_w = img.width / factor;
    const int out_h = img.height / factor;
    if (out_w < 1 || out_h < 1) throw Error("downsample factor exceeds image size");
    ImageGrid out(out_w, out_h);
    const int block = factor * factor;
    for (int r = 0; r < out_h; ++r) {
        for (int c = 0; c < out_w; ++c) {
            double sum = 0.0;
            int masked = 0;
            for (int dr = 0; dr < factor; ++dr) {
                for (int dc = 0; dc < factor; ++dc) {
                    const double v = img.at(r * factor + dr, c * factor + dc);
                    if (!std::isfinite(v)) throw Error("downsample input has non-finite values");
                    sum += v;
                    masked += img.masked_at(r * factor + dr, c * factor + dc);
                }
            }
            out.at(r, c) = sum / block;
            out.mask[out.idx(r, c)] = (2 * masked >= block) ? 1 : 0;
        }
    }
    return out;
}

} // namespace anisoglm
