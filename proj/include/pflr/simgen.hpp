#pragma once

// Synthetic partially functional data: Z(t) = sum_k U_k phi_k(t) on a cosine/sine
// basis, AR(rho2) scalar covariates correlated with the leading scores, a sparse
// beta and xi(t) = sum_k A (-1)^{k+1} k^{-2} phi_k(t).

#include "pflr/core.hpp"

#include <Eigen/Cholesky>
#include <Eigen/Eigenvalues>

#include <numbers>
#include <random>

namespace pflr {

inline constexpr int kBasisSize = 50;

/// phi_{2l-1}(t) = sqrt(2) cos((2l-1) pi t), phi_{2l}(t) = sqrt(2) sin((2l-1) pi t), k in 1..50.
inline double eigenbasis(int k, double t)
{
    if (k < 1 || k > kBasisSize) throw Error(detail::concat("basis index ", k, " out of range 1..", kBasisSize));
    if (!(t >= 0.0 && t <= 1.0)) throw Error(detail::concat("basis argument ", t, " outside [0, 1]"));
    const int l = (k + 1) / 2;
    const double arg = (2.0 * l - 1.0) * std::numbers::pi * t;
    return std::numbers::sqrt2 * (k % 2 == 1 ? std::cos(arg) : std::sin(arg));
}

enum class VarianceMode { decaying, literal };

inline VarianceMode parse_variance_mode(const std::string& s)
{
    if (s == "decaying") return VarianceMode::decaying;
    if (s == "literal") return VarianceMode::literal;
    throw Error("variance_mode must be 'decaying' or 'literal', got '" + s + "'");
}

inline const char* to_string(VarianceMode m) { return m == VarianceMode::decaying ? "decaying" : "literal"; }

struct Example1Config {
    Index n = 200;
    Index p = 150;
    double c0 = 1.0;
    double rho1 = 0.2;
    double rho2 = 0.3;
    Index m = 100;
    double noise_sd = 1.0;
    VarianceMode variance_mode = VarianceMode::decaying;
    double amplitude = 4.0;  // 4 in the estimation study, B in the testing study
    std::uint64_t seed = 1;

    void validate() const
    {
        if (n < 2) throw Error("n must be at least 2");
        if (p < 5) throw Error("p must be at least 5 (five true signals)");
        if (m < 2) throw Error("m must be at least 2");
        if (!(noise_sd >= 0.0)) throw Error("noise_sd must be nonnegative");
        if (!(amplitude >= 0.0)) throw Error("functional amplitude must be nonnegative");
        if (!(rho1 >= 0.0 && rho1 < 1.0) || !(rho2 >= 0.0 && rho2 < 1.0)) throw Error("correlations must lie in [0, 1)");
    }
};

/// Variance of score U_k (k 1-based).
inline double score_variance(int k, double c0, VarianceMode mode)
{
    const double dist = std::abs(k - c0);
    if (mode == VarianceMode::literal) return 16.0 * dist + 1.0;
    return 16.0 / ((dist + 1.0) * (dist + 1.0));
}

struct TruthRecord {
    Vec beta;
    Vec xi_coef;      // eigen-coefficients of xi*
    Vec xi_grid;      // xi* on the grid
    Mat scores;       // realized U, n x 50
    double noise_var = 1.0;
    bool jittered = false;
};

/// One uncentered draw from the data-generating process.
struct SimulatedSample {
    Mat x;
    Mat scores;
    Mat z;
    Vec functional;  // exact int Z_i xi*, via orthonormality
    Vec y;
};

/**
 * Holds the factorized joint covariance of (U_1..U_50, X_1..X_p) so that
 * repeated draws (training and test sets, replicates) share one factorization.
 */
class Example1Generator {
public:
    explicit Example1Generator(const Example1Config& cfg) : cfg_(cfg), grid_(std::make_shared<Grid>(Grid::uniform(cfg.m)))
    {
        cfg.validate();
        const Index k = kBasisSize, p = cfg.p, dim = k + p;
        Mat cov = Mat::Zero(dim, dim);
        Vec sd(k);
        for (int j = 1; j <= k; ++j) {
            const double v = score_variance(j, cfg.c0, cfg.variance_mode);
            cov(j - 1, j - 1) = v;
            sd(j - 1) = std::sqrt(v);
        }
        for (Index l = 0; l < p; ++l)
            for (Index q = 0; q < p; ++q) cov(k + l, k + q) = std::pow(cfg.rho2, static_cast<double>(std::abs(l - q)));
        for (int j = 1; j <= 4; ++j)
            for (Index l = 1; l <= p; ++l) {
                const double c = std::pow(cfg.rho1, static_cast<double>(std::abs(j - l) + 1)) * sd(j - 1);
                cov(j - 1, k + l - 1) = c;
                cov(k + l - 1, j - 1) = c;
            }

        Mat shifted = cov;
        shifted.diagonal().array() -= 1e-8;
        Eigen::LLT<Mat> probe(shifted);
        if (probe.info() != Eigen::Success) {
            Eigen::SelfAdjointEigenSolver<Mat> es(cov, Eigen::EigenvaluesOnly);
            const double deficit = 1e-8 - es.eigenvalues().minCoeff();
            if (deficit > 1e-2)
                throw Error(detail::concat("joint covariance not repairable (deficit ", deficit, ") for rho1=", cfg.rho1,
                                           ", rho2=", cfg.rho2, ", variance_mode=", to_string(cfg.variance_mode)));
            cov.diagonal().array() += deficit + 1e-8;
            jittered_ = true;
        }
        Eigen::LLT<Mat> llt(cov);
        if (llt.info() != Eigen::Success) throw Error("joint covariance factorization failed");
        chol_ = llt.matrixL();

        basis_.resize(cfg.m, k);
        for (Index t = 0; t < cfg.m; ++t)
            for (int j = 1; j <= k; ++j) basis_(t, j - 1) = eigenbasis(j, grid_->axis(0)(t));
        xi_coef_.resize(k);
        for (int j = 1; j <= k; ++j) xi_coef_(j - 1) = cfg.amplitude * (j % 2 == 1 ? 1.0 : -1.0) / (double(j) * j);
        beta_ = Vec::Zero(p);
        beta_.head(5) << 3.0, 1.5, 1.0, 2.5, 2.0;
    }

    const Example1Config& config() const { return cfg_; }
    const GridPtr& grid() const { return grid_; }
    const Mat& basis() const { return basis_; }
    const Vec& beta() const { return beta_; }
    const Vec& xi_coef() const { return xi_coef_; }
    Vec xi_grid() const { return basis_ * xi_coef_; }
    bool jittered() const { return jittered_; }

    SimulatedSample draw(Index n, std::uint64_t seed) const
    {
        std::mt19937_64 rng(seed);
        std::normal_distribution<double> normal(0.0, 1.0);
        const Index k = kBasisSize, dim = chol_.rows();
        Mat w(dim, n);
        for (Index i = 0; i < n; ++i)
            for (Index j = 0; j < dim; ++j) w(j, i) = normal(rng);
        Vec eps(n);
        for (Index i = 0; i < n; ++i) eps(i) = normal(rng);

        const Mat v = (chol_.triangularView<Eigen::Lower>() * w).transpose();  // n x dim
        SimulatedSample s;
        s.scores = v.leftCols(k);
        s.x = v.rightCols(cfg_.p);
        s.z = s.scores * basis_.transpose();
        s.functional = s.scores * xi_coef_;
        s.y = s.x * beta_ + s.functional + cfg_.noise_sd * eps;
        return s;
    }

    /// Uncentered dataset from a fresh draw.
    Dataset raw_dataset(Index n, std::uint64_t seed, SimulatedSample* keep = nullptr) const
    {
        SimulatedSample s = draw(n, seed);
        Dataset d{s.y, s.x, grid_, s.z, {}, {}};
        if (keep) *keep = std::move(s);
        return d;
    }

    std::pair<Dataset, TruthRecord> generate(std::uint64_t seed) const
    {
        SimulatedSample s;
        Dataset raw = raw_dataset(cfg_.n, seed, &s);
        TruthRecord t{beta_, xi_coef_, xi_grid(), std::move(s.scores), cfg_.noise_sd * cfg_.noise_sd, jittered_};
        return {center(raw), std::move(t)};
    }

private:
    Example1Config cfg_;
    GridPtr grid_;
    Mat chol_;
    Mat basis_;
    Vec xi_coef_;
    Vec beta_;
    bool jittered_ = false;
};

inline std::pair<Dataset, TruthRecord> gen_example1(const Example1Config& cfg)
{
    return Example1Generator(cfg).generate(cfg.seed);
}

/// Example 1 with the functional amplitude replaced by b.
inline std::pair<Dataset, TruthRecord> gen_example2(Example1Config cfg, double b)
{
    if (!(b >= 0.0)) throw Error("signal strength B must be nonnegative");
    cfg.amplitude = b;
    return Example1Generator(cfg).generate(cfg.seed);
}

} // namespace pflr
