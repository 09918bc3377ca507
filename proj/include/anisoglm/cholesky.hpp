#pragma once

#include <Eigen/Dense>
#include <algorithm>
#include <cmath>
#include <cstdint>
#include <queue>
#include <string>
#include <vector>

#include "anisoglm/errors.hpp"
#include "anisoglm/rng.hpp"
#include "anisoglm/sparse.hpp"

namespace anisoglm {

enum class Ordering { natural, band };

/// Reverse Cuthill-McKee ordering. Returns perm with perm[new] = old; BFS
/// starts at the lowest-index minimum-degree vertex of each component and
/// expands neighbors in (degree, index) order, so the result is deterministic.
inline std::vector<int> band_ordering(const SparseSymMatrix& m) {
    const int n = m.n();
    std::vector<int> degree(n, 0);
    for (int i = 0; i < n; ++i) degree[i] = m.row_nnz_offdiag(i);
    std::vector<std::uint8_t> seen(n, 0);
    std::vector<int> order;
    order.reserve(n);
    std::vector<int> nbrs;
    for (;;) {
        int start = -1;
        for (int i = 0; i < n; ++i)
            if (!seen[i] && (start == -1 || degree[i] < degree[start])) start = i;
        if (start == -1) break;
        std::queue<int> q;
        seen[start] = 1;
        q.push(start);
        while (!q.empty()) {
            const int u = q.front();
            q.pop();
            order.push_back(u);
            nbrs.clear();
            for (int k = m.row_begin(u); k < m.row_end(u); ++k) {
                const int v = m.col_at(k);
                if (v != u && !seen[v]) nbrs.push_back(v);
            }
            std::sort(nbrs.begin(), nbrs.end(), [&](int a, int b) {
                return degree[a] != degree[b] ? degree[a] < degree[b] : a < b;
            });
            for (int v : nbrs) {
                seen[v] = 1;
                q.push(v);
            }
        }
    }
    std::reverse(order.begin(), order.end());
    return order;
}

inline std::vector<int> natural_ordering(int n) {
    std::vector<int> p(n);
    for (int i = 0; i < n; ++i) p[i] = i;
    return p;
}

/// Envelope (skyline) storage of a lower-triangular matrix: row i holds
/// columns first[i]..i contiguously.
struct Envelope {
    int n = 0;
    std::vector<int> first;
    std::vector<std::size_t> ptr; // start offset of row i
    std::vector<double> val;

    std::size_t pos(int i, int j) const { return ptr[i] + static_cast<std::size_t>(j - first[i]); }
    double& at(int i, int j) { return val[pos(i, j)]; }
    double at(int i, int j) const { return val[pos(i, j)]; }

    /// Allocates storage from per-row first-column indices.
    void build(std::vector<int> first_cols) {
        n = static_cast<int>(first_cols.size());
        first = std::move(first_cols);
        ptr.assign(n + 1, 0);
        std::size_t total = 0;
        for (int i = 0; i < n; ++i) {
            ptr[i] = total;
            total += static_cast<std::size_t>(i - first[i] + 1);
        }
        ptr[n] = total;
        val.assign(total, 0.0);
    }

    void zero() { std::fill(val.begin(), val.end(), 0.0); }
};

/// In-place Cholesky of an envelope matrix. Throws NotPositiveDefiniteError
/// with the (permuted-space) pivot index translated through `perm` when the
/// caller supplies one.
inline void envelope_factorize(Envelope& env, const std::vector<int>* perm = nullptr) {
    for (int i = 0; i < env.n; ++i) {
        const int fi = env.first[i];
        for (int j = fi; j <= i; ++j) {
            double s = env.val[env.pos(i, j)];
            const int kstart = std::max(fi, env.first[j]);
            const std::size_t pi = env.pos(i, kstart);
            const std::size_t pj = env.pos(j, kstart);
            const int len = j - kstart;
            for (int k = 0; k < len; ++k) s -= env.val[pi + k] * env.val[pj + k];
            if (j < i) {
                env.val[env.pos(i, j)] = s / env.val[env.pos(j, j)];
            } else {
                if (!(s > 0.0)) {
                    const int pivot = perm ? (*perm)[i] : i;
                    throw NotPositiveDefiniteError(
                        pivot, "matrix is not positive definite (pivot " +
                                   std::to_string(pivot) + ")");
                }
                env.val[env.pos(i, i)] = std::sqrt(s);
            }
        }
    }
}

/// Solves L y = b in place.
inline void envelope_solve_lower(const Envelope& env, Eigen::VectorXd& b) {
    for (int i = 0; i < env.n; ++i) {
        double s = b[i];
        const int fi = env.first[i];
        const std::size_t p = env.ptr[i];
        for (int j = fi; j < i; ++j) s -= env.val[p + (j - fi)] * b[j];
        b[i] = s / env.val[env.pos(i, i)];
    }
}

/// Solves L^T x = b in place.
inline void envelope_solve_upper(const Envelope& env, Eigen::VectorXd& b) {
    for (int i = env.n - 1; i >= 0; --i) {
        const int fi = env.first[i];
        const std::size_t p = env.ptr[i];
        const double xi = b[i] / env.val[env.pos(i, i)];
        b[i] = xi;
        for (int j = fi; j < i; ++j) b[j] -= env.val[p + (j - fi)] * xi;
    }
}

struct FactorOptions {
    Ordering ordering = Ordering::band;
    double ridge = 0.0;
};

/// Sparse symmetric Cholesky factorization P (Q + ridge I) P^T = G G^T with a
/// fill-reducing band permutation, plus the solve / log-determinant / GMRF
/// sampling operations the Gibbs sampler needs. Deterministic: identical
/// input and options give a bit-identical factor.
class SparseCholesky {
public:
    explicit SparseCholesky(const SparseSymMatrix& Q, FactorOptions opt = {})
        : opt_(opt) {
        n_ = Q.n();
        perm_ = (opt.ordering == Ordering::band) ? band_ordering(Q) : natural_ordering(n_);
        iperm_.resize(n_);
        for (int k = 0; k < n_; ++k) iperm_[perm_[k]] = k;
        std::vector<int> first(n_);
        for (int i = 0; i < n_; ++i) first[i] = i;
        for (const auto& t : Q.entries()) {
            const int a = iperm_[t.i], b = iperm_[t.j];
            const int hi = std::max(a, b), lo = std::min(a, b);
            first[hi] = std::min(first[hi], lo);
        }
        env_.build(std::move(first));
        refactor(Q);
    }

    /// Refactorizes with new values on the same sparsity pattern.
    void refactor(const SparseSymMatrix& Q) {
        if (Q.n() != n_) throw Error("refactor dimension mismatch");
        env_.zero();
        for (const auto& t : Q.entries()) {
            const int a = iperm_[t.i], b = iperm_[t.j];
            if (a < b) continue; // lower triangle once
            env_.at(a, b) = t.v;
        }
        if (opt_.ridge != 0.0)
            for (int i = 0; i < n_; ++i) env_.at(i, i) += opt_.ridge;
        envelope_factorize(env_, &perm_);
    }

    int size() const { return n_; }
    const std::vector<int>& permutation() const { return perm_; }
    const Envelope& factor() const { return env_; }

    Eigen::VectorXd solve(const Eigen::VectorXd& b) const {
        if (b.size() != n_) throw Error("solve dimension mismatch");
        Eigen::VectorXd bp(n_);
        for (int k = 0; k < n_; ++k) bp[k] = b[perm_[k]];
        envelope_solve_lower(env_, bp);
        envelope_solve_upper(env_, bp);
        Eigen::VectorXd x(n_);
        for (int k = 0; k < n_; ++k) x[perm_[k]] = bp[k];
        return x;
    }

    /// One draw from N(Q^-1 b, Q^-1): mu + z with G^T (P z) = eps,
    /// eps standard normal in permuted coordinates.
    Eigen::VectorXd sample(const Eigen::VectorXd& b, RngStream& rng) const {
        Eigen::VectorXd x = solve(b);
        Eigen::VectorXd eps(n_);
        for (int k = 0; k < n_; ++k) eps[k] = rng.normal();
        envelope_solve_upper(env_, eps);
        for (int k = 0; k < n_; ++k) x[perm_[k]] += eps[k];
        return x;
    }

    double log_det() const {
        double acc = 0.0;
        for (int i = 0; i < n_; ++i) acc += std::log(env_.at(i, i));
        return 2.0 * acc;
    }

private:
    int n_ = 0;
    FactorOptions opt_;
    std::vector<int> perm_, iperm_;
    Envelope env_;
};

/// Dense Cholesky with hand-rolled loops; the built-in oracle path for small
/// systems (n <= 64 scale). Shares no code with the sparse path.
class DenseCholesky {
public:
    explicit DenseCholesky(const Eigen::MatrixXd& Q) {
        const int n = static_cast<int>(Q.rows());
        if (Q.cols() != n) throw Error("dense factorization requires a square matrix");
        L_ = Eigen::MatrixXd::Zero(n, n);
        for (int j = 0; j < n; ++j) {
            double d = Q(j, j);
            for (int k = 0; k < j; ++k) d -= L_(j, k) * L_(j, k);
            if (!(d > 0.0))
                throw NotPositiveDefiniteError(j, "matrix is not positive definite (pivot " +
                                                      std::to_string(j) + ")");
            L_(j, j) = std::sqrt(d);
            for (int i = j + 1; i < n; ++i) {
                double s = Q(i, j);
                for (int k = 0; k < j; ++k) s -= L_(i, k) * L_(j, k);
                L_(i, j) = s / L_(j, j);
            }
        }
    }

    const Eigen::MatrixXd& matrixL() const { return L_; }

    Eigen::VectorXd solve(const Eigen::VectorXd& b) const {
        const int n = static_cast<int>(L_.rows());
        Eigen::VectorXd y(n);
        for (int i = 0; i < n; ++i) {
            double s = b[i];
            for (int k = 0; k < i; ++k) s -= L_(i, k) * y[k];
            y[i] = s / L_(i, i);
        }
        for (int i = n - 1; i >= 0; --i) {
            double s = y[i];
            for (int k = i + 1; k < n; ++k) s -= L_(k, i) * y[k];
            y[i] = s / L_(i, i);
        }
        return y;
    }

    Eigen::VectorXd sample(const Eigen::VectorXd& b, RngStream& rng) const {
        const int n = static_cast<int>(L_.rows());
        Eigen::VectorXd x = solve(b);
        Eigen::VectorXd eps(n);
        for (int i = 0; i < n; ++i) eps[i] = rng.normal();
        for (int i = n - 1; i >= 0; --i) {
            double s = eps[i];
            for (int k = i + 1; k < n; ++k) s -= L_(k, i) * eps[k];
            eps[i] = s / L_(i, i);
        }
        return x + eps;
    }

    double log_det() const {
        double acc = 0.0;
        for (int i = 0; i < L_.rows(); ++i) acc += std::log(L_(i, i));
        return 2.0 * acc;
    }

private:
    Eigen::MatrixXd L_;
};

inline Eigen::MatrixXd to_dense(const SparseSymMatrix& m) {
    Eigen::MatrixXd out = Eigen::MatrixXd::Zero(m.n(), m.n());
    for (const auto& t : m.entries()) out(t.i, t.j) = t.v;
    return out;
}

} // namespace anisoglm
