#pragma once

// Brute-force references: exhaustive best-subset search for the profiled
// loss and a spectral reconstruction of the profiling smoother.

#include "pflr/rkhs.hpp"

#include <Eigen/Eigenvalues>

namespace pflr::oracle {

struct OracleResult {
    std::vector<Index> subset;  // sorted column indices
    Vec beta;
    double objective = 0.0;     // (2n)^{-1} r'Pr at the best subset
    std::size_t evaluated = 0;
    std::size_t skipped_singular = 0;
};

inline constexpr double kSubsetBudget = 1e6;

inline double binomial(Index n, Index k)
{
    if (k < 0 || k > n) return 0.0;
    double r = 1.0;
    for (Index i = 1; i <= k; ++i) r = r * static_cast<double>(n - k + i) / static_cast<double>(i);
    return r;
}

/**
 * Enumerates every subset with at most J free columns (always-active columns
 * forced in), solves the P-weighted least squares on each, and returns the
 * minimizer of (2n)^{-1}(Y - X beta)'P(Y - X beta). Ties go to the
 * lexicographically smaller subset.
 */
inline OracleResult best_subset(const Mat& x, const Vec& y, const Mat& p_matrix, int sparsity,
                                const std::vector<Index>& always_active = {})
{
    const Index n = x.rows(), p = x.cols();
    if (y.size() != n || p_matrix.rows() != n || p_matrix.cols() != n) throw Error("oracle inputs have mismatched shapes");
    if (sparsity < 0) throw Error("sparsity must be nonnegative");

    std::vector<char> forced(static_cast<std::size_t>(p), 0);
    for (Index j : always_active) forced.at(static_cast<std::size_t>(j)) = 1;
    std::vector<Index> free_cols;
    for (Index j = 0; j < p; ++j)
        if (!forced[static_cast<std::size_t>(j)]) free_cols.push_back(j);
    const Index nf = static_cast<Index>(free_cols.size());
    const Index jmax = std::min<Index>(sparsity, nf);

    double total = 0.0;
    for (Index k = 0; k <= jmax; ++k) total += binomial(nf, k);
    if (p > 15 && total > kSubsetBudget)
        throw Error(detail::concat("best-subset enumeration needs ", total, " subsets, over the budget of ", kSubsetBudget));

    const Mat px = p_matrix * x;
    const Mat g = x.transpose() * px;
    const Vec b = px.transpose() * y;
    const double ypy = y.dot(p_matrix * y);
    const double two_n = 2.0 * static_cast<double>(n);

    OracleResult best;
    best.objective = std::numeric_limits<double>::infinity();

    auto evaluate = [&](const std::vector<Index>& chosen) {
        std::vector<Index> s = chosen;
        s.insert(s.end(), always_active.begin(), always_active.end());
        std::sort(s.begin(), s.end());
        const Index k = static_cast<Index>(s.size());
        double obj = ypy / two_n;
        Vec bs = Vec::Zero(k);
        if (k > 0) {
            Mat gs(k, k);
            Vec rhs(k);
            for (Index i = 0; i < k; ++i) {
                rhs(i) = b(s[i]);
                for (Index j = 0; j < k; ++j) gs(i, j) = g(s[i], s[j]);
            }
            Eigen::ColPivHouseholderQR<Mat> qr(gs);
            qr.setThreshold(1e-12);
            if (qr.rank() < k) {
                ++best.skipped_singular;
                return;
            }
            bs = qr.solve(rhs);
            obj = (ypy - 2.0 * rhs.dot(bs) + bs.dot(gs * bs)) / two_n;
        }
        ++best.evaluated;
        if (obj < best.objective || (obj == best.objective && s < best.subset)) {
            best.objective = obj;
            best.subset = s;
            best.beta = Vec::Zero(p);
            for (Index i = 0; i < k; ++i) best.beta(s[i]) = bs(i);
        }
    };

    std::vector<Index> idx;
    for (Index k = 0; k <= jmax; ++k) {
        idx.resize(static_cast<std::size_t>(k));
        for (Index i = 0; i < k; ++i) idx[static_cast<std::size_t>(i)] = i;
        for (;;) {
            std::vector<Index> chosen(idx.size());
            for (std::size_t i = 0; i < idx.size(); ++i) chosen[i] = free_cols[static_cast<std::size_t>(idx[i])];
            evaluate(chosen);
            Index i = k - 1;
            while (i >= 0 && idx[static_cast<std::size_t>(i)] == nf - k + i) --i;
            if (i < 0) break;
            ++idx[static_cast<std::size_t>(i)];
            for (Index j = i + 1; j < k; ++j) idx[static_cast<std::size_t>(j)] = idx[static_cast<std::size_t>(j - 1)] + 1;
        }
    }
    if (best.subset.empty() && best.evaluated == 0) throw Error("no subset could be evaluated");
    return best;
}

/// P = Q diag(n*lambda / (mu + n*lambda)) Q' from the eigendecomposition of Sigma.
inline Mat spectral_smoother(const Mat& sigma, double lambda, Index n)
{
    if (sigma.rows() > 500) throw Error("spectral smoother limited to n <= 500");
    if (!(lambda > 0.0)) throw Error("lambda must be positive");
    Eigen::SelfAdjointEigenSolver<Mat> es(sigma);
    if (es.info() != Eigen::Success) throw Error("eigendecomposition failed");
    const double shift = static_cast<double>(n) * lambda;
    const Vec f = (shift / (es.eigenvalues().array() + shift)).matrix();
    return es.eigenvectors() * f.asDiagonal() * es.eigenvectors().transpose();
}

inline Mat spectral_smoother(const GramMatrix& g, double lambda, Index n) { return spectral_smoother(g.sigma(), lambda, n); }

} // namespace pflr::oracle
