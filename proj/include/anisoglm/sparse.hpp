#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <queue>
#include <utility>
#include <vector>

#include "anisoglm/errors.hpp"
#include "anisoglm/image.hpp"

namespace anisoglm {

struct Triplet {
    int i = 0;
    int j = 0;
    double v = 0.0;
};

/// Sparse symmetric matrix over masked pixels. Full CSR storage with both
/// triangles mirrored, columns sorted within each row, no explicit zeros.
/// value(i,j) == value(j,i) holds bit-exactly by construction.
class SparseSymMatrix {
public:
    SparseSymMatrix() = default;

    explicit SparseSymMatrix(int n) : n_(n), row_ptr_(static_cast<std::size_t>(n) + 1, 0) {
        if (n < 0) throw Error("matrix dimension must be non-negative");
    }

    /// Builds from triplets that already describe a symmetric matrix
    /// (both (i,j) and (j,i) present, or diagonal). Duplicates accumulate;
    /// entries that sum to zero are dropped. Symmetry is verified.
    static SparseSymMatrix from_triplets(int n, std::vector<Triplet> ts) {
        SparseSymMatrix m = assemble(n, std::move(ts));
        m.verify_symmetry();
        return m;
    }

    /// Builds from lower-triangle triplets (i >= j), mirroring the strict
    /// lower part. Symmetric by construction.
    static SparseSymMatrix from_lower_triplets(int n, const std::vector<Triplet>& lower) {
        std::vector<Triplet> ts;
        ts.reserve(lower.size() * 2);
        for (const auto& t : lower) {
            if (t.i < t.j) throw Error("from_lower_triplets expects i >= j");
            ts.push_back(t);
            if (t.i != t.j) ts.push_back({t.j, t.i, t.v});
        }
        return assemble(n, std::move(ts));
    }

    static SparseSymMatrix identity(int n) {
        std::vector<Triplet> ts;
        ts.reserve(n);
        for (int i = 0; i < n; ++i) ts.push_back({i, i, 1.0});
        return assemble(n, std::move(ts));
    }

    int n() const { return n_; }
    std::size_t nnz() const { return col_.size(); }

    int row_begin(int i) const { return static_cast<int>(row_ptr_[i]); }
    int row_end(int i) const { return static_cast<int>(row_ptr_[i + 1]); }
    int col_at(int k) const { return col_[k]; }
    double val_at(int k) const { return val_[k]; }

    double coeff(int i, int j) const {
        const auto lo = col_.begin() + row_ptr_[i];
        const auto hi = col_.begin() + row_ptr_[i + 1];
        const auto it = std::lower_bound(lo, hi, j);
        if (it == hi || *it != j) return 0.0;
        return val_[static_cast<std::size_t>(it - col_.begin())];
    }

    double row_sum(int i) const {
        double s = 0.0;
        for (int k = row_begin(i); k < row_end(i); ++k) s += val_[k];
        return s;
    }

    int row_nnz_offdiag(int i) const {
        int c = 0;
        for (int k = row_begin(i); k < row_end(i); ++k) c += col_[k] != i;
        return c;
    }

    std::vector<Triplet> entries() const {
        std::vector<Triplet> out;
        out.reserve(nnz());
        for (int i = 0; i < n_; ++i)
            for (int k = row_begin(i); k < row_end(i); ++k)
                out.push_back({i, col_[k], val_[k]});
        return out;
    }

    void multiply(const double* x, double* y) const {
        for (int i = 0; i < n_; ++i) {
            double acc = 0.0;
            for (int k = row_begin(i); k < row_end(i); ++k) acc += val_[k] * x[col_[k]];
            y[i] = acc;
        }
    }

    double quadratic_form(const double* x) const {
        double acc = 0.0;
        for (int i = 0; i < n_; ++i) {
            double row = 0.0;
            for (int k = row_begin(i); k < row_end(i); ++k) row += val_[k] * x[col_[k]];
            acc += x[i] * row;
        }
        return acc;
    }

    bool is_symmetric() const {
        for (int i = 0; i < n_; ++i)
            for (int k = row_begin(i); k < row_end(i); ++k) {
                const int j = col_[k];
                if (coeff(j, i) != val_[k]) return false;
            }
        return true;
    }

    bool same_pattern(const SparseSymMatrix& other) const {
        return n_ == other.n_ && row_ptr_ == other.row_ptr_ && col_ == other.col_;
    }

    bool operator==(const SparseSymMatrix& other) const {
        return n_ == other.n_ && row_ptr_ == other.row_ptr_ && col_ == other.col_ &&
               val_ == other.val_;
    }

private:
    static SparseSymMatrix assemble(int n, std::vector<Triplet> ts) {
        if (n < 0) throw Error("matrix dimension must be non-negative");
        for (const auto& t : ts) {
            if (t.i < 0 || t.i >= n || t.j < 0 || t.j >= n)
                throw Error("triplet index out of range");
            if (!std::isfinite(t.v)) throw Error("triplet value must be finite");
        }
        std::sort(ts.begin(), ts.end(), [](const Triplet& a, const Triplet& b) {
            return a.i != b.i ? a.i < b.i : a.j < b.j;
        });
        SparseSymMatrix m(n);
        m.col_.reserve(ts.size());
        m.val_.reserve(ts.size());
        std::size_t k = 0;
        for (int i = 0; i < n; ++i) {
            while (k < ts.size() && ts[k].i == i) {
                const int j = ts[k].j;
                double v = 0.0;
                while (k < ts.size() && ts[k].i == i && ts[k].j == j) {
                    v += ts[k].v;
                    ++k;
                }
                if (v != 0.0) {
                    m.col_.push_back(j);
                    m.val_.push_back(v);
                }
            }
            m.row_ptr_[i + 1] = m.col_.size();
        }
        return m;
    }

    void verify_symmetry() const {
        if (!is_symmetric()) throw Error("matrix is not symmetric");
    }

    int n_ = 0;
    std::vector<std::size_t> row_ptr_ = {0};
    std::vector<int> col_;
    std::vector<double> val_;
};

/// (A + A^T) / 2 of a directed weight matrix given as triplets.
inline SparseSymMatrix symmetrize(int rows, int cols, const std::vector<Triplet>& directed) {
    if (rows != cols) throw Error("symmetrize requires a square matrix");
    std::vector<Triplet> ts;
    ts.reserve(directed.size() * 2);
    for (const auto& t : directed) {
        if (!std::isfinite(t.v)) throw Error("symmetrize requires finite entries");
        ts.push_back({t.i, t.j, 0.5 * t.v});
        ts.push_back({t.j, t.i, 0.5 * t.v});
    }
    return SparseSymMatrix::from_triplets(rows, std::move(ts));
}

inline SparseSymMatrix symmetrize(int n, const std::vector<Triplet>& directed) {
    return symmetrize(n, n, directed);
}

/// Graph Laplacian L = B - A from a symmetric adjacency matrix with
/// non-negative weights and zero diagonal. Degrees are the row sums.
inline SparseSymMatrix laplacian(const SparseSymMatrix& A) {
    std::vector<Triplet> ts;
    ts.reserve(A.nnz() + A.n());
    for (int i = 0; i < A.n(); ++i) {
        double degree = 0.0;
        for (int k = A.row_begin(i); k < A.row_end(i); ++k) {
            const int j = A.col_at(k);
            const double w = A.val_at(k);
            if (j == i) throw Error("adjacency matrix must have a zero diagonal");
            if (w < 0.0) throw Error("adjacency weight is negative; upstream construction bug");
            degree += w;
            ts.push_back({i, j, -w});
        }
        if (degree != 0.0) ts.push_back({i, i, degree});
    }
    return SparseSymMatrix::from_triplets(A.n(), std::move(ts));
}

/// Number of connected components of the nonzero off-diagonal pattern.
inline int count_components(const SparseSymMatrix& m) {
    std::vector<std::uint8_t> seen(m.n(), 0);
    int comps = 0;
    std::queue<int> q;
    for (int s = 0; s < m.n(); ++s) {
        if (seen[s]) continue;
        ++comps;
        seen[s] = 1;
        q.push(s);
        while (!q.empty()) {
            const int u = q.front();
            q.pop();
            for (int k = m.row_begin(u); k < m.row_end(u); ++k) {
                const int v = m.col_at(k);
                if (v != u && !seen[v]) {
                    seen[v] = 1;
                    q.push(v);
                }
            }
        }
    }
    return comps;
}

/// Bijection between masked pixels and matrix indices 0..n-1 in row-major
/// scan order of the mask.
struct PixelIndexMap {
    int width = 0;
    int height = 0;
    int n = 0;
    std::vector<int> forward;                    // width*height, -1 if unmasked
    std::vector<std::pair<int, int>> inverse;    // matrix index -> (row, col)

    static PixelIndexMap from_mask(const ImageGrid& domain) {
        PixelIndexMap map;
        map.width = domain.width;
        map.height = domain.height;
        map.forward.assign(domain.size(), -1);
        for (int r = 0; r < domain.height; ++r)
            for (int c = 0; c < domain.width; ++c)
                if (domain.masked_at(r, c)) {
                    map.forward[domain.idx(r, c)] = map.n++;
                    map.inverse.emplace_back(r, c);
                }
        return map;
    }

    int index_of(int row, int col) const {
        return forward[static_cast<std::size_t>(row) * width + col];
    }
};

} // namespace anisoglm
