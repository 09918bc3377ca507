#pragma once

#include <Eigen/Dense>
#include <cstdint>
#include <cstring>
#include <fstream>
#include <string>
#include <vector>

#include <json.hpp>
#include <zlib.h>

#include "anisoglm/errors.hpp"
#include "anisoglm/image.hpp"
#include "anisoglm/sparse.hpp"
#include "anisoglm/structure_tensor.hpp"

namespace anisoglm {

/// Raw little-endian float32 grid with a JSON sidecar at <path>.json holding
/// {"width", "height", "channels", "dtype": "f32", "order": "row-major",
///  "endianness": "little"}.
struct RawGrid {
    int width = 0;
    int height = 0;
    int channels = 1;
    std::vector<float> data; // row-major, channel-interleaved

    std::size_t expected_count() const {
        return static_cast<std::size_t>(width) * height * channels;
    }
};

namespace detail {

inline void write_f32_le(std::ofstream& out, const std::vector<float>& data) {
    std::vector<unsigned char> buf(data.size() * 4);
    for (std::size_t i = 0; i < data.size(); ++i) {
        std::uint32_t bits;
        std::memcpy(&bits, &data[i], 4);
        buf[4 * i] = static_cast<unsigned char>(bits & 0xff);
        buf[4 * i + 1] = static_cast<unsigned char>((bits >> 8) & 0xff);
        buf[4 * i + 2] = static_cast<unsigned char>((bits >> 16) & 0xff);
        buf[4 * i + 3] = static_cast<unsigned char>((bits >> 24) & 0xff);
    }
    out.write(reinterpret_cast<const char*>(buf.data()), static_cast<std::streamsize>(buf.size()));
}

inline std::vector<float> read_f32_le(std::ifstream& in, std::size_t count, const std::string& path) {
    std::vector<unsigned char> buf(count * 4);
    in.read(reinterpret_cast<char*>(buf.data()), static_cast<std::streamsize>(buf.size()));
    if (static_cast<std::size_t>(in.gcount()) != buf.size())
        throw Error(path + ": truncated payload");
    char extra;
    if (in.read(&extra, 1), in.gcount() != 0)
        throw Error(path + ": payload longer than the header declares");
    std::vector<float> data(count);
    for (std::size_t i = 0; i < count; ++i) {
        const std::uint32_t bits = static_cast<std::uint32_t>(buf[4 * i]) |
                                   (static_cast<std::uint32_t>(buf[4 * i + 1]) << 8) |
                                   (static_cast<std::uint32_t>(buf[4 * i + 2]) << 16) |
                                   (static_cast<std::uint32_t>(buf[4 * i + 3]) << 24);
        std::memcpy(&data[i], &bits, 4);
    }
    return data;
}

} // namespace detail

inline void save_raw_grid(const std::string& path, const RawGrid& grid) {
    if (grid.data.size() != grid.expected_count())
        throw Error("grid buffer size does not match its header");
    std::ofstream out(path, std::ios::binary);
    if (!out) throw Error("cannot open " + path + " for writing");
    detail::write_f32_le(out, grid.data);
    if (!out) throw Error("failed while writing " + path);

    nlohmann::json sidecar{{"width", grid.width},   {"height", grid.height},
                           {"channels", grid.channels}, {"dtype", "f32"},
                           {"order", "row-major"},  {"endianness", "little"}};
    std::ofstream meta(path + ".json");
    if (!meta) throw Error("cannot open " + path + ".json for writing");
    meta << sidecar.dump(2) << "\n";
}

inline RawGrid load_raw_grid(const std::string& path) {
    std::ifstream meta(path + ".json");
    if (!meta) throw Error("cannot open sidecar " + path + ".json");
    nlohmann::json sidecar;
    try {
        meta >> sidecar;
    } catch (const nlohmann::json::exception& e) {
        throw Error(path + ".json: malformed sidecar: " + e.what());
    }
    RawGrid grid;
    try {
        grid.width = sidecar.at("width").get<int>();
        grid.height = sidecar.at("height").get<int>();
        grid.channels = sidecar.at("channels").get<int>();
        if (sidecar.at("dtype").get<std::string>() != "f32")
            throw Error(path + ".json: unsupported dtype");
        if (sidecar.value("order", "row-major") != std::string{"row-major"})
            throw Error(path + ".json: unsupported element order");
        if (sidecar.value("endianness", "little") != std::string{"little"})
            throw Error(path + ".json: unsupported endianness");
    } catch (const nlohmann::json::exception& e) {
        throw Error(path + ".json: malformed sidecar: " + e.what());
    }
    if (grid.width <= 0 || grid.height <= 0 || grid.channels <= 0)
        throw Error(path + ".json: invalid dimensions");
    std::ifstream in(path, std::ios::binary);
    if (!in) throw Error("cannot open " + path);
    grid.data = detail::read_f32_le(in, grid.expected_count(), path);
    return grid;
}

// ---------------------------------------------------------------------------
// PGM (P5), 8- or 16-bit reads, 8-bit writes. Masks: nonzero = in analysis.

inline void save_pgm8(const std::string& path, int width, int height,
                      const std::vector<std::uint8_t>& pixels) {
    if (pixels.size() != static_cast<std::size_t>(width) * height)
        throw Error("pgm buffer size does not match its dimensions");
    std::ofstream out(path, std::ios::binary);
    if (!out) throw Error("cannot open " + path + " for writing");
    out << "P5\n" << width << " " << height << "\n255\n";
    out.write(reinterpret_cast<const char*>(pixels.data()),
              static_cast<std::streamsize>(pixels.size()));
    if (!out) throw Error("failed while writing " + path);
}

/// Reads a binary PGM; values land in [0, maxval] unscaled.
inline ImageGrid load_pgm(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw Error("cannot open " + path);
    auto next_token = [&]() -> std::string {
        std::string tok;
        int ch;
        while ((ch = in.get()) != EOF) {
            if (ch == '#') {
                while ((ch = in.get()) != EOF && ch != '\n') {
                }
                continue;
            }
            if (std::isspace(ch)) {
                if (!tok.empty()) return tok;
                continue;
            }
            tok.push_back(static_cast<char>(ch));
        }
        return tok;
    };
    if (next_token() != "P5") throw Error(path + ": only binary (P5) PGM is supported");
    const std::string ws = next_token(), hs = next_token(), ms = next_token();
    if (ws.empty() || hs.empty() || ms.empty()) throw Error(path + ": malformed PGM header");
    const int width = std::stoi(ws), height = std::stoi(hs), maxval = std::stoi(ms);
    if (width <= 0 || height <= 0 || maxval <= 0 || maxval > 65535)
        throw Error(path + ": malformed PGM header");
    const int bytes = maxval > 255 ? 2 : 1;
    std::vector<unsigned char> buf(static_cast<std::size_t>(width) * height * bytes);
    in.read(reinterpret_cast<char*>(buf.data()), static_cast<std::streamsize>(buf.size()));
    if (static_cast<std::size_t>(in.gcount()) != buf.size()) throw Error(path + ": truncated payload");
    ImageGrid img(width, height);
    for (std::size_t i = 0; i < img.size(); ++i)
        img.values[i] = bytes == 1 ? buf[i]
                                   : static_cast<double>((buf[2 * i] << 8) | buf[2 * i + 1]);
    return img;
}

inline ImageGrid load_mask_pgm(const std::string& path) {
    ImageGrid img = load_pgm(path);
    for (std::size_t i = 0; i < img.size(); ++i) img.mask[i] = img.values[i] != 0.0 ? 1 : 0;
    return img;
}

// ---------------------------------------------------------------------------
// ImageGrid and matrix round-trips through the raw grid format.

inline void save_image(const std::string& path, const ImageGrid& img) {
    RawGrid grid;
    grid.width = img.width;
    grid.height = img.height;
    grid.channels = 1;
    grid.data.reserve(img.size());
    for (double v : img.values) grid.data.push_back(static_cast<float>(v));
    save_raw_grid(path, grid);
}

/// Loads an anatomical image: .pgm by extension, raw float32 grid otherwise.
/// The mask is full; combine with load_mask_pgm when a mask file exists.
inline ImageGrid load_image(const std::string& path) {
    if (path.size() >= 4 && path.compare(path.size() - 4, 4, ".pgm") == 0) return load_pgm(path);
    const RawGrid grid = load_raw_grid(path);
    if (grid.channels != 1) throw Error(path + ": expected a single-channel grid");
    ImageGrid img(grid.width, grid.height);
    for (std::size_t i = 0; i < img.size(); ++i) img.values[i] = grid.data[i];
    return img;
}

inline void save_matrix_f32(const std::string& path, const Eigen::MatrixXd& m) {
    RawGrid grid;
    grid.width = static_cast<int>(m.cols());
    grid.height = static_cast<int>(m.rows());
    grid.channels = 1;
    grid.data.reserve(static_cast<std::size_t>(m.size()));
    for (int r = 0; r < m.rows(); ++r)
        for (int c = 0; c < m.cols(); ++c) grid.data.push_back(static_cast<float>(m(r, c)));
    save_raw_grid(path, grid);
}

inline Eigen::MatrixXd load_matrix_f32(const std::string& path) {
    const RawGrid grid = load_raw_grid(path);
    if (grid.channels != 1) throw Error(path + ": expected a single-channel matrix");
    Eigen::MatrixXd m(grid.height, grid.width);
    for (int r = 0; r < grid.height; ++r)
        for (int c = 0; c < grid.width; ++c)
            m(r, c) = grid.data[static_cast<std::size_t>(r) * grid.width + c];
    return m;
}

// ---------------------------------------------------------------------------
// Tensor field export: (t11, t12, t22) triples, row-major.

inline void save_tensor_field(const std::string& path, const TensorField& field) {
    RawGrid grid;
    grid.width = field.width;
    grid.height = field.height;
    grid.channels = 3;
    grid.data.reserve(field.tensors.size() * 3);
    for (const auto& t : field.tensors) {
        grid.data.push_back(static_cast<float>(t.t11));
        grid.data.push_back(static_cast<float>(t.t12));
        grid.data.push_back(static_cast<float>(t.t22));
    }
    save_raw_grid(path, grid);
}

inline TensorField load_tensor_field(const std::string& path) {
    const RawGrid grid = load_raw_grid(path);
    if (grid.channels != 3) throw Error(path + ": expected a 3-channel tensor grid");
    TensorField field(grid.width, grid.height);
    for (std::size_t i = 0; i < field.tensors.size(); ++i) {
        field.tensors[i].t11 = grid.data[3 * i];
        field.tensors[i].t12 = grid.data[3 * i + 1];
        field.tensors[i].t22 = grid.data[3 * i + 2];
    }
    return field;
}

/// Expands per-masked-pixel values back onto the grid; unmasked pixels get 0.
inline ImageGrid map_to_grid(const PixelIndexMap& map, const std::vector<double>& values) {
    if (static_cast<int>(values.size()) != map.n)
        throw Error("value count does not match the masked pixel count");
    ImageGrid img(map.width, map.height, 0.0, false);
    for (int i = 0; i < map.n; ++i) {
        const auto [r, c] = map.inverse[i];
        img.at(r, c) = values[i];
        img.mask[img.idx(r, c)] = 1;
    }
    return img;
}

inline std::uint32_t file_crc32(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw Error("cannot open " + path);
    std::uint32_t crc = crc32(0L, Z_NULL, 0);
    char buf[1 << 16];
    while (in.read(buf, sizeof(buf)) || in.gcount() > 0)
        crc = crc32(crc, reinterpret_cast<const Bytef*>(buf), static_cast<uInt>(in.gcount()));
    return crc;
}

} // namespace anisoglm
