#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <fstream>
#include <string>
#include <vector>

#include <zlib.h>

#include "anisoglm/errors.hpp"
#include "anisoglm/image.hpp"
#include "anisoglm/io.hpp"
#include "anisoglm/structure_tensor.hpp"

namespace anisoglm {

enum class RenderStyle { gray, binary };

inline RenderStyle render_style_from_string(const std::string& s) {
    if (s == "gray") return RenderStyle::gray;
    if (s == "binary") return RenderStyle::binary;
    throw Error("unsupported render style: " + s);
}

// ---------------------------------------------------------------------------
// Minimal grayscale PNG writer (8-bit, color type 0) on top of zlib.

namespace detail {

inline void png_put_u32(std::vector<unsigned char>& out, std::uint32_t v) {
    out.push_back(static_cast<unsigned char>((v >> 24) & 0xff));
    out.push_back(static_cast<unsigned char>((v >> 16) & 0xff));
    out.push_back(static_cast<unsigned char>((v >> 8) & 0xff));
    out.push_back(static_cast<unsigned char>(v & 0xff));
}

inline void png_chunk(std::vector<unsigned char>& out, const char type[4],
                      const std::vector<unsigned char>& data) {
    png_put_u32(out, static_cast<std::uint32_t>(data.size()));
    std::vector<unsigned char> body(type, type + 4);
    body.insert(body.end(), data.begin(), data.end());
    out.insert(out.end(), body.begin(), body.end());
    const auto crc = crc32(crc32(0L, Z_NULL, 0), body.data(), static_cast<uInt>(body.size()));
    png_put_u32(out, static_cast<std::uint32_t>(crc));
}

} // namespace detail

inline void save_png_gray8(const std::string& path, int width, int height,
                           const std::vector<std::uint8_t>& pixels) {
    if (pixels.size() != static_cast<std::size_t>(width) * height)
        throw Error("png buffer size does not match its dimensions");
    std::vector<unsigned char> raw;
    raw.reserve(static_cast<std::size_t>(height) * (width + 1));
    for (int r = 0; r < height; ++r) {
        raw.push_back(0); // filter: none
        for (int c = 0; c < width; ++c)
            raw.push_back(pixels[static_cast<std::size_t>(r) * width + c]);
    }
    uLongf comp_size = compressBound(static_cast<uLong>(raw.size()));
    std::vector<unsigned char> comp(comp_size);
    if (compress2(comp.data(), &comp_size, raw.data(), static_cast<uLong>(raw.size()), 9) != Z_OK)
        throw Error("png compression failed");
    comp.resize(comp_size);

    std::vector<unsigned char> out{0x89, 'P', 'N', 'G', 0x0d, 0x0a, 0x1a, 0x0a};
    std::vector<unsigned char> ihdr;
    detail::png_put_u32(ihdr, static_cast<std::uint32_t>(width));
    detail::png_put_u32(ihdr, static_cast<std::uint32_t>(height));
    ihdr.push_back(8); // bit depth
    ihdr.push_back(0); // grayscale
    ihdr.push_back(0); // compression
    ihdr.push_back(0); // filter
    ihdr.push_back(0); // no interlace
    detail::png_chunk(out, "IHDR", ihdr);
    detail::png_chunk(out, "IDAT", comp);
    detail::png_chunk(out, "IEND", {});

    std::ofstream f(path, std::ios::binary);
    if (!f) throw Error("cannot open " + path + " for writing");
    f.write(reinterpret_cast<const char*>(out.data()), static_cast<std::streamsize>(out.size()));
    if (!f) throw Error("failed while writing " + path);
}

inline void save_gray8(const std::string& path, int width, int height,
                       const std::vector<std::uint8_t>& pixels) {
    if (path.size() >= 4 && path.compare(path.size() - 4, 4, ".png") == 0)
        save_png_gray8(path, width, height, pixels);
    else
        save_pgm8(path, width, height, pixels);
}

/// Min-max scales masked values to 8 bits. A constant map renders as uniform
/// mid-gray; unmasked pixels are black. Binary style maps nonzero to white.
inline std::vector<std::uint8_t> quantize_map(const ImageGrid& map, RenderStyle style) {
    std::vector<std::uint8_t> pixels(map.size(), 0);
    if (style == RenderStyle::binary) {
        for (std::size_t i = 0; i < map.size(); ++i)
            pixels[i] = (map.mask[i] && map.values[i] > 0.5) ? 255 : 0;
        return pixels;
    }
    double lo = 0.0, hi = 0.0;
    bool any = false;
    for (std::size_t i = 0; i < map.size(); ++i) {
        if (!map.mask[i]) continue;
        if (!any || map.values[i] < lo) lo = any ? std::min(lo, map.values[i]) : map.values[i];
        hi = any ? std::max(hi, map.values[i]) : map.values[i];
        any = true;
    }
    for (std::size_t i = 0; i < map.size(); ++i) {
        if (!map.mask[i]) continue;
        if (hi == lo) {
            pixels[i] = 128;
        } else {
            const double t = (map.values[i] - lo) / (hi - lo);
            pixels[i] = static_cast<std::uint8_t>(std::lround(255.0 * std::clamp(t, 0.0, 1.0)));
        }
    }
    return pixels;
}

inline void render_map(const ImageGrid& map, const std::string& path, RenderStyle style) {
    save_gray8(path, map.width, map.height, quantize_map(map, style));
}

// ---------------------------------------------------------------------------
// Tensor field overlay: one segment per pixel along the principal
// eigenvector, length proportional to anisotropy.

struct OverlaySegment {
    double row = 0.0, col = 0.0; // pixel-center coordinates
    double angle = 0.0;          // [0, pi)
    double half_len = 0.0;       // in pixels
};

inline std::vector<OverlaySegment> tensor_overlay_segments(const TensorField& field,
                                                           int stride = 1,
                                                           double min_rel_anisotropy = 0.05) {
    if (stride < 1) throw Error("overlay stride must be >= 1");
    double max_aniso = 0.0;
    for (const auto& t : field.tensors)
        max_aniso = std::max(max_aniso, principal_orientation(t).anisotropy);
    std::vector<OverlaySegment> segments;
    if (max_aniso <= 0.0) return segments;
    for (int r = 0; r < field.height; r += stride)
        for (int c = 0; c < field.width; c += stride) {
            const auto est = principal_orientation(field.at(r, c));
            const double rel = est.anisotropy / max_aniso;
            if (rel < min_rel_anisotropy) continue;
            segments.push_back({static_cast<double>(r), static_cast<double>(c), est.angle,
                                0.5 * rel * stride});
        }
    return segments;
}

inline void render_tensor_overlay(const ImageGrid& background, const TensorField& field,
                                  const std::string& path, int upscale = 8, int stride = 1) {
    if (background.width != field.width || background.height != field.height)
        throw Error("overlay background dimensions do not match the tensor field");
    if (upscale < 1) throw Error("overlay upscale must be >= 1");
    auto base = quantize_map(background, RenderStyle::gray);
    const int W = background.width * upscale, H = background.height * upscale;
    std::vector<std::uint8_t> canvas(static_cast<std::size_t>(W) * H);
    for (int r = 0; r < H; ++r)
        for (int c = 0; c < W; ++c)
            canvas[static_cast<std::size_t>(r) * W + c] = static_cast<std::uint8_t>(
                0.55 * base[static_cast<std::size_t>(r / upscale) * background.width + c / upscale]);

    for (const auto& seg : tensor_overlay_segments(field, stride)) {
        const double cx = (seg.col + 0.5) * upscale;
        const double cy = (seg.row + 0.5) * upscale;
        const double dx = std::cos(seg.angle), dy = std::sin(seg.angle);
        const double half = seg.half_len * upscale * 0.9;
        const int steps = std::max(2, static_cast<int>(std::ceil(2.0 * half)));
        for (int s = 0; s <= steps; ++s) {
            const double t = -half + 2.0 * half * s / steps;
            const int px = static_cast<int>(std::lround(cx + t * dx));
            const int py = static_cast<int>(std::lround(cy + t * dy));
            if (px >= 0 && px < W && py >= 0 && py < H)
                canvas[static_cast<std::size_t>(py) * W + px] = 255;
        }
    }
    save_gray8(path, W, H, canvas);
}

} // namespace anisoglm
