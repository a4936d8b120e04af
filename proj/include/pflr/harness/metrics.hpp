#pragma once

#include "pflr/simgen.hpp"

#include <limits>

namespace pflr::harness {

struct MetricsRow {
    double fz = 0.0;
    double fn = 0.0;
    double mse_beta = 0.0;
    double mse_xi = 0.0;
    double rmse_xi = 0.0;
    double pmse = 0.0;
    double wall_time_seconds = std::numeric_limits<double>::quiet_NaN();
    double lambda = 0.0;
    int sparsity = 0;
    bool converged = false;
    bool cycled = false;
};

inline double l2_sq(const Vec& f, const Vec& weights) { return (weights.array() * f.array().square()).sum(); }

/// Prediction alpha + x'beta + int z xi on uncentered data.
inline Vec predict(const FitResult& fit, const Dataset& raw)
{
    if (raw.x.cols() != fit.beta.size()) throw Error("prediction data has the wrong number of covariates");
    if (raw.z.cols() != fit.xi_eval.size()) throw Error("prediction data is on a different grid");
    const Vec wxi = raw.grid->weights().cwiseProduct(fit.xi_eval);
    return (raw.x * fit.beta + raw.z * wxi).array() + fit.intercept;
}

/**
 * FZ/FN against the support of beta*, squared errors, and PMSE on an
 * uncentered test set. RMSE_xi is NaN when xi* = 0.
 */
inline MetricsRow compute_metrics(const FitResult& fit, const TruthRecord& truth, const Grid& grid, const Dataset& test)
{
    if (fit.beta.size() != truth.beta.size()) throw Error("fit and truth differ in p");
    if (fit.xi_eval.size() != grid.size() || truth.xi_grid.size() != grid.size())
        throw Error(pflr::detail::concat("xi-hat has ", fit.xi_eval.size(), " grid values, truth has ",
                                         truth.xi_grid.size(), ", grid has ", grid.size()));
    if (!(*test.grid == grid)) throw Error("test data is on a different grid");
    MetricsRow m;
    for (Index j = 0; j < fit.beta.size(); ++j) {
        const bool t = truth.beta(j) != 0.0, e = fit.beta(j) != 0.0;
        if (t && !e) m.fz += 1.0;
        if (!t && e) m.fn += 1.0;
    }
    m.mse_beta = (fit.beta - truth.beta).squaredNorm();
    m.mse_xi = l2_sq(fit.xi_eval - truth.xi_grid, grid.weights());
    const double norm = l2_sq(truth.xi_grid, grid.weights());
    m.rmse_xi = norm > 0.0 ? m.mse_xi / norm : std::numeric_limits<double>::quiet_NaN();
    m.pmse = (test.y - predict(fit, test)).squaredNorm() / static_cast<double>(test.n());
    m.lambda = fit.lambda;
    m.sparsity = fit.sparsity;
    m.converged = fit.converged;
    m.cycled = fit.cycled;
    return m;
}

} // namespace pflr::harness
