#pragma once

#include <cctype>
#include <cstdio>
#include <fstream>
#include <sstream>
#include <string>

#include "anisoglm/errors.hpp"
#include "anisoglm/sparse.hpp"

namespace anisoglm {

/// Writes the lower triangle in Matrix Market coordinate format,
/// "real symmetric", 1-based indices, round-trip-exact doubles.
inline void write_matrix_market(const std::string& path, const SparseSymMatrix& m) {
    std::ofstream out(path);
    if (!out) throw Error("cannot open " + path + " for writing");
    std::vector<Triplet> lower;
    for (const auto& t : m.entries())
        if (t.i >= t.j) lower.push_back(t);
    out << "%%MatrixMarket matrix coordinate real symmetric\n";
    out << m.n() << " " << m.n() << " " << lower.size() << "\n";
    char buf[64];
    for (const auto& t : lower) {
        std::snprintf(buf, sizeof(buf), "%d %d %.17g\n", t.i + 1, t.j + 1, t.v);
        out << buf;
    }
    if (!out) throw Error("failed while writing " + path);
}

inline SparseSymMatrix read_matrix_market(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw Error("cannot open " + path);
    std::string line;
    if (!std::getline(in, line)) throw Error(path + ": empty file");
    {
        std::istringstream banner(line);
        std::string tag, object, format, field, symmetry;
        banner >> tag >> object >> format >> field >> symmetry;
        if (tag != "%%MatrixMarket" || object != "matrix" || format != "coordinate" ||
            field != "real" || symmetry != "symmetric")
            throw Error(path + ": expected a coordinate real symmetric MatrixMarket header");
    }
    do {
        if (!std::getline(in, line)) throw Error(path + ": missing size line");
    } while (!line.empty() && line[0] == '%');
    int rows = 0, cols = 0;
    long long nnz = 0;
    {
        std::istringstream sizes(line);
        if (!(sizes >> rows >> cols >> nnz)) throw Error(path + ": malformed size line");
    }
    if (rows != cols) throw Error(path + ": symmetric matrix must be square");
    std::vector<Triplet> lower;
    lower.reserve(static_cast<std::size_t>(nnz));
    for (long long k = 0; k < nnz; ++k) {
        int i = 0, j = 0;
        double v = 0.0;
        if (!(in >> i >> j >> v)) throw Error(path + ": truncated entry list");
        if (i < j) std::swap(i, j); // tolerate upper-triangle entries
        lower.push_back({i - 1, j - 1, v});
    }
    return SparseSymMatrix::from_lower_triplets(rows, lower);
}

} // namespace anisoglm
