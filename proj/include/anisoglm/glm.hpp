#pragma once

#include <Eigen/Dense>
#include <cmath>
#include <cstdint>
#include <cstdio>
#include <optional>
#include <string>
#include <vector>

#include "anisoglm/cholesky.hpp"
#include "anisoglm/errors.hpp"
#include "anisoglm/prior_graph.hpp"
#include "anisoglm/rng.hpp"
#include "anisoglm/sparse.hpp"

namespace anisoglm {

/// Time-by-voxel observations with their design matrix. Columns of Y follow
/// the row-major masked-pixel order of `pixmap`.
struct GlmDataset {
    Eigen::MatrixXd Y; // T x N
    Eigen::MatrixXd X; // T x K
    int ar_order = 0;  // p
    PixelIndexMap pixmap;

    int T() const { return static_cast<int>(Y.rows()); }
    int N() const { return static_cast<int>(Y.cols()); }
    int K() const { return static_cast<int>(X.cols()); }

    void validate() const {
        if (Y.rows() != X.rows()) throw Error("Y and X must have the same number of rows");
        if (ar_order < 0) throw Error("AR order must be non-negative");
        if (T() <= K() + ar_order)
            throw Error("need more time points than regressors plus AR order");
        if (N() != pixmap.n) throw Error("Y columns must match the masked pixel count");
        for (int k = 0; k < K(); ++k)
            if (X.col(k).cwiseAbs().maxCoeff() == 0.0)
                throw Error("design matrix has an all-zero regressor column");
    }
};

/// Lagged predictor matrix of one series: row t holds lags 1..p of the value
/// at time p+t, so the likelihood conditions on the first p observations.
inline Eigen::MatrixXd lag_matrix(const Eigen::VectorXd& series, int p) {
    const int T = static_cast<int>(series.size());
    if (p < 0) throw Error("AR order must be non-negative");
    if (p >= T) throw Error("AR order must be smaller than the series length");
    Eigen::MatrixXd out(T - p, p);
    for (int t = 0; t < T - p; ++t)
        for (int j = 0; j < p; ++j) out(t, j) = series[p + t - (j + 1)];
    return out;
}

struct GibbsSchedule {
    int total = 10000;
    int warmup = 1000;
    int thin = 5;

    int stored_draws() const { return (total - warmup) / thin; }

    void validate() const {
        if (total < 1 || warmup < 0 || warmup >= total || thin < 1)
            throw Error("invalid sampling schedule");
        if ((total - warmup) % thin != 0)
            throw Error("(total - warmup) must be divisible by thin");
    }
};

struct GibbsConfig {
    GibbsSchedule schedule;
    std::uint64_t seed = 0;
    std::uint64_t chain_id = 0;
    // weakly informative conjugate hyperpriors
    double a0 = 0.01, b0 = 0.01; // Gamma(a0, b0) on each noise precision
    double c0 = 0.01, d0 = 0.01; // Gamma(c0, d0) on each smoothness precision
    bool sample_lambda = true;
    bool sample_alpha = true;
    bool sample_beta = true;
    double fixed_lambda = 1.0; // used when the corresponding flag is off
    double fixed_alpha = 1.0;
    double fixed_beta = 1.0;
    bool store_lambda = true;
    bool store_alpha = true;
    bool store_beta = true;
    Ordering ordering = Ordering::band;
    double w_ridge = 0.0;
    double ar_ridge = 0.0;
    int progress_every = 0; // iterations between progress lines; 0 = silent
};

struct ModelState {
    Eigen::MatrixXd W;      // K x N regression coefficients
    Eigen::MatrixXd R;      // p x N AR coefficients
    Eigen::VectorXd lambda; // N noise precisions
    Eigen::VectorXd alpha;  // K regression smoothness precisions
    Eigen::VectorXd beta;   // p AR smoothness precisions
};

/// Thinned post-warmup draws, draw-major float32 storage (the on-disk layout).
struct Chain {
    GibbsSchedule schedule;
    std::uint64_t seed = 0;
    PriorScheme scheme = PriorScheme::ugl;
    int K = 0, N = 0, p = 0;
    int draws = 0;
    std::vector<float> w;      // draws x K x N
    std::vector<float> r;      // draws x p x N
    std::vector<float> lambda; // draws x N, optional
    std::vector<float> alpha;  // draws x K, optional
    std::vector<float> beta;   // draws x p, optional
    long long nonstationary_draws = 0;

    float w_at(int d, int k, int n) const {
        return w[(static_cast<std::size_t>(d) * K + k) * N + n];
    }

    Eigen::MatrixXd w_mean() const {
        Eigen::MatrixXd m = Eigen::MatrixXd::Zero(K, N);
        for (int d = 0; d < draws; ++d)
            for (int k = 0; k < K; ++k)
                for (int n = 0; n < N; ++n) m(k, n) += w_at(d, k, n);
        return m / std::max(1, draws);
    }

    Eigen::MatrixXd r_mean() const {
        Eigen::MatrixXd m = Eigen::MatrixXd::Zero(p, N);
        for (int d = 0; d < draws; ++d)
            for (int j = 0; j < p; ++j)
                for (int n = 0; n < N; ++n)
                    m(j, n) += r[(static_cast<std::size_t>(d) * p + j) * N + n];
        return m / std::max(1, draws);
    }
};

/// Joint GMRF sampler for a stack of B coefficient fields over N pixels.
/// The precision is blockdiag_b(scale_b * D) plus a dense B x B coupling per
/// pixel from the likelihood. The sparsity pattern is fixed at construction;
/// values are re-assembled and refactorized every iteration through
/// precomputed envelope slots.
class FieldBlockSampler {
public:
    FieldBlockSampler(const SparseSymMatrix& D, int blocks, Ordering ordering, double ridge)
        : N_(D.n()), B_(blocks), tri_(blocks * (blocks + 1) / 2), ridge_(ridge) {
        const int dim = N_ * B_;
        for (const auto& t : D.entries())
            if (t.i >= t.j) d_lower_.push_back(t);

        std::vector<Triplet> pat;
        pat.reserve(static_cast<std::size_t>(dim) + 2 * d_lower_.size() * B_ +
                    static_cast<std::size_t>(N_) * B_ * B_);
        for (int v = 0; v < dim; ++v) pat.push_back({v, v, 1.0});
        for (int b = 0; b < B_; ++b)
            for (const auto& t : d_lower_)
                if (t.i != t.j) {
                    pat.push_back({b * N_ + t.i, b * N_ + t.j, 1.0});
                    pat.push_back({b * N_ + t.j, b * N_ + t.i, 1.0});
                }
        for (int n = 0; n < N_; ++n)
            for (int b = 0; b < B_; ++b)
                for (int b2 = 0; b2 < B_; ++b2)
                    if (b != b2) pat.push_back({b * N_ + n, b2 * N_ + n, 1.0});
        const auto pattern = SparseSymMatrix::from_triplets(dim, std::move(pat));

        perm_ = ordering == Ordering::band ? band_ordering(pattern) : natural_ordering(dim);
        iperm_.resize(dim);
        for (int k = 0; k < dim; ++k) iperm_[perm_[k]] = k;

        std::vector<int> first(dim);
        for (int i = 0; i < dim; ++i) first[i] = i;
        for (const auto& t : pattern.entries()) {
            const int a = iperm_[t.i], b = iperm_[t.j];
            const int hi = std::max(a, b), lo = std::min(a, b);
            first[hi] = std::min(first[hi], lo);
        }
        env_.build(std::move(first));

        prior_slots_.reserve(d_lower_.size() * B_);
        for (int b = 0; b < B_; ++b)
            for (const auto& t : d_lower_) prior_slots_.push_back(slot(b * N_ + t.i, b * N_ + t.j));
        voxel_slots_.reserve(static_cast<std::size_t>(N_) * tri_);
        for (int n = 0; n < N_; ++n)
            for (int b = 0; b < B_; ++b)
                for (int b2 = 0; b2 <= b; ++b2) voxel_slots_.push_back(slot(b * N_ + n, b2 * N_ + n));

        b_.resize(dim);
    }

    int dim() const { return N_ * B_; }

    void begin() {
        env_.zero();
        b_.setZero();
        factored_ = false;
    }

    void add_prior(const Eigen::VectorXd& scale) {
        std::size_t s = 0;
        for (int b = 0; b < B_; ++b) {
            const double a = scale[b];
            for (const auto& t : d_lower_) env_.val[prior_slots_[s++]] += a * t.v;
        }
    }

    void add_voxel(int n, const Eigen::MatrixXd& M, const Eigen::VectorXd& rhs) {
        std::size_t s = static_cast<std::size_t>(n) * tri_;
        for (int b = 0; b < B_; ++b)
            for (int b2 = 0; b2 <= b; ++b2) env_.val[voxel_slots_[s++]] += M(b, b2);
        for (int b = 0; b < B_; ++b) b_[b * N_ + n] += rhs[b];
    }

    /// Draw from N(Q^-1 b, Q^-1) with the assembled precision Q.
    Eigen::VectorXd sample(RngStream& rng) {
        factorize();
        Eigen::VectorXd x = permuted_solve(b_);
        Eigen::VectorXd eps(dim());
        for (int k = 0; k < dim(); ++k) eps[k] = rng.normal();
        envelope_solve_upper(env_, eps);
        for (int k = 0; k < dim(); ++k) x[perm_[k]] += eps[k];
        return x;
    }

    Eigen::VectorXd posterior_mean() {
        factorize();
        return permuted_solve(b_);
    }

private:
    std::size_t slot(int a, int b) const {
        const int pa = iperm_[a], pb = iperm_[b];
        const int hi = std::max(pa, pb), lo = std::min(pa, pb);
        return env_.pos(hi, lo);
    }

    void factorize() {
        if (factored_) return;
        if (ridge_ != 0.0)
            for (int i = 0; i < dim(); ++i) env_.val[env_.pos(i, i)] += ridge_;
        envelope_factorize(env_, &perm_);
        factored_ = true;
    }

    Eigen::VectorXd permuted_solve(const Eigen::VectorXd& rhs) const {
        Eigen::VectorXd bp(dim());
        for (int k = 0; k < dim(); ++k) bp[k] = rhs[perm_[k]];
        envelope_solve_lower(env_, bp);
        envelope_solve_upper(env_, bp);
        Eigen::VectorXd x(dim());
        for (int k = 0; k < dim(); ++k) x[perm_[k]] = bp[k];
        return x;
    }

    int N_, B_, tri_;
    double ridge_;
    std::vector<Triplet> d_lower_;
    std::vector<int> perm_, iperm_;
    Envelope env_;
    std::vector<std::size_t> prior_slots_, voxel_slots_;
    Eigen::VectorXd b_;
    bool factored_ = false;
};

/// Gibbs sampler for the spatially regularized GLM-AR(p) model. One full
/// iteration cycles W -> R -> lambda -> alpha -> beta; W (and R) are drawn
/// jointly across all voxels through a sparse factorization of the full
/// conditional precision.
class GibbsSampler {
public:
    GibbsSampler(const GlmDataset& data, const PriorSpec& prior, const GibbsConfig& cfg)
        : data_(data),
          prior_(prior),
          cfg_(cfg),
          T_(data.T()),
          N_(data.N()),
          K_(data.K()),
          p_(data.ar_order),
          w_system_(prior.d_w, data.K(), cfg.ordering, cfg.w_ridge) {
        data_.validate();
        if (prior_.d_w.n() != N_) throw Error("prior matrix dimension must equal voxel count");
        if (p_ > 0) {
            if (prior_.d_ar.n() != N_) throw Error("AR prior matrix dimension must equal voxel count");
            ar_system_.emplace(prior_.d_ar, p_, cfg_.ordering, cfg_.ar_ridge);
        }

        Xtail_ = data_.X.middleRows(p_, T_ - p_);
        Ytail_ = data_.Y.middleRows(p_, T_ - p_);
        for (int j = 1; j <= p_; ++j) {
            Xlag_.push_back(data_.X.middleRows(p_ - j, T_ - p_));
            Ylag_.push_back(data_.Y.middleRows(p_ - j, T_ - p_));
        }
        if (p_ == 0) {
            XtX_ = data_.X.transpose() * data_.X;
            XtY_ = data_.X.transpose() * data_.Y;
        }
        d_w_scale_ = 0.0;
        for (const auto& t : prior_.d_w.entries()) d_w_scale_ = std::max(d_w_scale_, std::fabs(t.v));
        d_ar_scale_ = 0.0;
        for (const auto& t : prior_.d_ar.entries())
            d_ar_scale_ = std::max(d_ar_scale_, std::fabs(t.v));
        init();
    }

    ModelState& state() { return state_; }
    const ModelState& state() const { return state_; }

    /// Deterministic starting point: per-voxel OLS for W, Yule-Walker on the
    /// OLS residuals for R, moment-matched precisions.
    void init() {
        state_.W.resize(K_, N_);
        state_.R = Eigen::MatrixXd::Zero(p_, N_);
        state_.lambda.resize(N_);
        state_.alpha = Eigen::VectorXd::Constant(K_, cfg_.sample_alpha ? 1.0 : cfg_.fixed_alpha);
        state_.beta = Eigen::VectorXd::Constant(p_, cfg_.sample_beta ? 1.0 : cfg_.fixed_beta);

        const Eigen::MatrixXd xtx = data_.X.transpose() * data_.X;
        state_.W = xtx.ldlt().solve(data_.X.transpose() * data_.Y);
        const Eigen::MatrixXd E = data_.Y - data_.X * state_.W;

        if (p_ > 0) {
            for (int n = 0; n < N_; ++n) {
                const Eigen::VectorXd e = E.col(n);
                Eigen::VectorXd acov = Eigen::VectorXd::Zero(p_ + 1);
                for (int lag = 0; lag <= p_; ++lag) {
                    double s = 0.0;
                    for (int t = lag; t < T_; ++t) s += e[t] * e[t - lag];
                    acov[lag] = s / T_;
                }
                if (acov[0] > 0.0) {
                    Eigen::MatrixXd toep(p_, p_);
                    for (int a = 0; a < p_; ++a)
                        for (int b = 0; b < p_; ++b) toep(a, b) = acov[std::abs(a - b)];
                    state_.R.col(n) = toep.ldlt().solve(acov.segment(1, p_));
                }
            }
        }

        for (int n = 0; n < N_; ++n) {
            const double ssr = whitened_ssr(n);
            state_.lambda[n] = cfg_.sample_lambda
                                   ? (cfg_.a0 + 0.5 * (T_ - p_)) / (cfg_.b0 + 0.5 * ssr)
                                   : cfg_.fixed_lambda;
        }
        nonstationary_ = 0;
    }

    void sample_w(RngStream& rng) {
        assemble_w_system();
        const Eigen::VectorXd draw = w_system_.sample(rng);
        unpack_w(draw);
    }

    /// Exact posterior mean of W given the current R, lambda, alpha.
    Eigen::MatrixXd w_posterior_mean() {
        assemble_w_system();
        const Eigen::VectorXd mu = w_system_.posterior_mean();
        Eigen::MatrixXd out(K_, N_);
        for (int k = 0; k < K_; ++k)
            for (int n = 0; n < N_; ++n) out(k, n) = mu[k * N_ + n];
        return out;
    }

    void sample_ar(RngStream& rng) {
        if (p_ == 0) throw Error("sample_ar requires AR order >= 1");
        auto& sys = *ar_system_;
        sys.begin();
        sys.add_prior(state_.beta);
        E_ = data_.Y - data_.X * state_.W;
        Eigen::MatrixXd etilde(T_ - p_, p_);
        Eigen::MatrixXd M(p_, p_);
        Eigen::VectorXd rhs(p_);
        for (int n = 0; n < N_; ++n) {
            for (int j = 0; j < p_; ++j) etilde.col(j) = E_.col(n).segment(p_ - (j + 1), T_ - p_);
            const double lam = state_.lambda[n];
            M.noalias() = lam * (etilde.transpose() * etilde);
            rhs.noalias() = lam * (etilde.transpose() * E_.col(n).tail(T_ - p_));
            sys.add_voxel(n, M, rhs);
        }
        const Eigen::VectorXd draw = sys.sample(rng);
        for (int j = 0; j < p_; ++j)
            for (int n = 0; n < N_; ++n) state_.R(j, n) = draw[j * N_ + n];
        for (int n = 0; n < N_; ++n)
            for (int j = 0; j < p_; ++j)
                if (std::fabs(state_.R(j, n)) >= 1.0) {
                    ++nonstationary_;
                    break;
                }
    }

    void sample_lambda(RngStream& rng) {
        const double shape = cfg_.a0 + 0.5 * (T_ - p_);
        for (int n = 0; n < N_; ++n) {
            const double rate = cfg_.b0 + 0.5 * whitened_ssr(n);
            if (!(rate > 0.0) || !std::isfinite(rate))
                throw Error("noise precision update has a nonpositive rate at voxel " +
                            std::to_string(n));
            state_.lambda[n] = rng.gamma_rate(shape, rate);
        }
    }

    void sample_alpha(RngStream& rng) {
        Eigen::VectorXd wk(N_);
        for (int k = 0; k < K_; ++k) {
            wk = state_.W.row(k).transpose();
            double qf = prior_.d_w.quadratic_form(wk.data());
            const double tol = 1e-9 * d_w_scale_ * wk.squaredNorm();
            if (qf < -tol)
                throw Error("negative quadratic form in smoothness update (regressor " +
                            std::to_string(k) + ")");
            qf = std::max(qf, 0.0);
            state_.alpha[k] = rng.gamma_rate(cfg_.c0 + 0.5 * prior_.rank_w, cfg_.d0 + 0.5 * qf);
        }
    }

    void sample_beta(RngStream& rng) {
        Eigen::VectorXd rj(N_);
        for (int j = 0; j < p_; ++j) {
            rj = state_.R.row(j).transpose();
            double qf = prior_.d_ar.quadratic_form(rj.data());
            const double tol = 1e-9 * d_ar_scale_ * rj.squaredNorm();
            if (qf < -tol)
                throw Error("negative quadratic form in AR smoothness update (lag " +
                            std::to_string(j + 1) + ")");
            qf = std::max(qf, 0.0);
            state_.beta[j] = rng.gamma_rate(cfg_.c0 + 0.5 * prior_.rank_ar, cfg_.d0 + 0.5 * qf);
        }
    }

    void step(RngStream& rng) {
        sample_w(rng);
        if (p_ > 0) sample_ar(rng);
        if (cfg_.sample_lambda) sample_lambda(rng);
        if (cfg_.sample_alpha) sample_alpha(rng);
        if (p_ > 0 && cfg_.sample_beta) sample_beta(rng);
    }

    Chain run() {
        cfg_.schedule.validate();
        RngStream rng(cfg_.seed, cfg_.chain_id);
        Chain chain;
        chain.schedule = cfg_.schedule;
        chain.seed = cfg_.seed;
        chain.scheme = prior_.scheme;
        chain.K = K_;
        chain.N = N_;
        chain.p = p_;
        const int expected = cfg_.schedule.stored_draws();
        chain.w.reserve(static_cast<std::size_t>(expected) * K_ * N_);
        if (p_ > 0) chain.r.reserve(static_cast<std::size_t>(expected) * p_ * N_);

        for (int iter = 1; iter <= cfg_.schedule.total; ++iter) {
            try {
                step(rng);
            } catch (const Error& e) {
                throw Error("iteration " + std::to_string(iter) + ": " + e.what());
            }
            if (iter > cfg_.schedule.warmup && (iter - cfg_.schedule.warmup) % cfg_.schedule.thin == 0)
                store_draw(chain);
            if (cfg_.progress_every > 0 && iter % cfg_.progress_every == 0)
                std::fprintf(stderr, "[gibbs] iteration %d/%d\n", iter, cfg_.schedule.total);
        }
        chain.nonstationary_draws = nonstationary_;
        return chain;
    }

private:
    /// Whitened design and data of one voxel under the current AR draw.
    void whiten_voxel(int n) {
        xtilde_ = Xtail_;
        ytilde_ = Ytail_.col(n);
        for (int j = 0; j < p_; ++j) {
            const double rj = state_.R(j, n);
            if (rj != 0.0) {
                xtilde_.noalias() -= rj * Xlag_[j];
                ytilde_.noalias() -= rj * Ylag_[j].col(n);
            }
        }
    }

    double whitened_ssr(int n) {
        if (p_ == 0)
            return (data_.Y.col(n) - data_.X * state_.W.col(n)).squaredNorm();
        whiten_voxel(n);
        return (ytilde_ - xtilde_ * state_.W.col(n)).squaredNorm();
    }

    void assemble_w_system() {
        w_system_.begin();
        w_system_.add_prior(state_.alpha);
        Eigen::MatrixXd M(K_, K_);
        Eigen::VectorXd rhs(K_);
        for (int n = 0; n < N_; ++n) {
            const double lam = state_.lambda[n];
            if (p_ == 0) {
                M.noalias() = lam * XtX_;
                rhs.noalias() = lam * XtY_.col(n);
            } else {
                whiten_voxel(n);
                M.noalias() = lam * (xtilde_.transpose() * xtilde_);
                rhs.noalias() = lam * (xtilde_.transpose() * ytilde_);
            }
            w_system_.add_voxel(n, M, rhs);
        }
    }

    void unpack_w(const Eigen::VectorXd& draw) {
        for (int k = 0; k < K_; ++k)
            for (int n = 0; n < N_; ++n) state_.W(k, n) = draw[k * N_ + n];
    }

    void store_draw(Chain& chain) {
        for (int k = 0; k < K_; ++k)
            for (int n = 0; n < N_; ++n) chain.w.push_back(static_cast<float>(state_.W(k, n)));
        for (int j = 0; j < p_; ++j)
            for (int n = 0; n < N_; ++n) chain.r.push_back(static_cast<float>(state_.R(j, n)));
        if (cfg_.store_lambda)
            for (int n = 0; n < N_; ++n) chain.lambda.push_back(static_cast<float>(state_.lambda[n]));
        if (cfg_.store_alpha)
            for (int k = 0; k < K_; ++k) chain.alpha.push_back(static_cast<float>(state_.alpha[k]));
        if (cfg_.store_beta)
            for (int j = 0; j < p_; ++j) chain.beta.push_back(static_cast<float>(state_.beta[j]));
        ++chain.draws;
    }

    const GlmDataset& data_;
    const PriorSpec& prior_;
    GibbsConfig cfg_;
    int T_, N_, K_, p_;
    Eigen::MatrixXd Xtail_, Ytail_;
    std::vector<Eigen::MatrixXd> Xlag_, Ylag_;
    Eigen::MatrixXd XtX_, XtY_; // cached when p == 0
    FieldBlockSampler w_system_;
    std::optional<FieldBlockSampler> ar_system_;
    ModelState state_;
    Eigen::MatrixXd E_;
    Eigen::MatrixXd xtilde_;
    Eigen::VectorXd ytilde_;
    double d_w_scale_ = 0.0, d_ar_scale_ = 0.0;
    long long nonstationary_ = 0;
};

inline Chain gibbs_fit(const GlmDataset& data, const PriorSpec& prior, const GibbsConfig& cfg) {
    GibbsSampler sampler(data, prior, cfg);
    return sampler.run();
}

} // namespace anisoglm
