#pragma once

// Selection of the smoothing parameter lambda by generalized cross validation
// and of the sparsity level J by the high-dimensional BIC.

#include "pflr/fsdar.hpp"
#include "pflr/parallel.hpp"

#include <limits>

namespace pflr {

/// Relative residual floor under which a fit counts as saturated (zero residual).
inline constexpr double kSaturationFloor = 1e-24;

class SaturatedFitError : public Error {
public:
    SaturatedFitError() : Error("degenerate saturated fit: residual sum of squares is zero") {}
};

struct TuningGrid {
    std::vector<double> lambdas;
    std::vector<int> js;

    static std::vector<double> linspace(double lo, double hi, int count)
    {
        if (count < 1) throw Error("linspace needs at least one point");
        std::vector<double> out(static_cast<std::size_t>(count));
        for (int k = 0; k < count; ++k)
            out[static_cast<std::size_t>(k)] = count == 1 ? lo : lo + (hi - lo) * k / static_cast<double>(count - 1);
        return out;
    }

    /// 50 evenly spaced lambdas on [1e-5, 0.1] and J in 1..50.
    static TuningGrid defaults()
    {
        TuningGrid g;
        g.lambdas = linspace(1e-5, 0.1, 50);
        for (int j = 1; j <= 50; ++j) g.js.push_back(j);
        return g;
    }

    void validate() const
    {
        if (lambdas.empty() || js.empty()) throw Error("tuning grid must be nonempty");
        for (std::size_t k = 0; k < lambdas.size(); ++k) {
            if (!(lambdas[k] > 0.0)) throw Error("tuning lambdas must be positive");
            if (k > 0 && !(lambdas[k] > lambdas[k - 1])) throw Error("tuning lambdas must be strictly increasing");
        }
        for (std::size_t k = 0; k < js.size(); ++k) {
            if (js[k] < 1) throw Error("tuning sparsity levels must be positive");
            if (k > 0 && !(js[k] > js[k - 1])) throw Error("tuning sparsity levels must be strictly increasing");
        }
    }
};

struct TuningCell {
    double lambda = 0.0;
    int sparsity = 0;
    bool ok = false;
    bool saturated = false;
    std::string error;
    double profiled_loss = std::numeric_limits<double>::quiet_NaN();
    double objective = std::numeric_limits<double>::quiet_NaN();
    double gcv = std::numeric_limits<double>::quiet_NaN();
    double hbic = std::numeric_limits<double>::quiet_NaN();
    int iterations = 0;
    bool converged = false;
};

struct TuningReport {
    std::vector<TuningCell> cells;        // lambda-major, in grid order
    std::vector<double> lambda_for_j;     // GCV choice per J (NaN when every cell failed)
    std::vector<double> hbic_for_j;
    double lambda_star = 0.0;
    int j_star = 0;
    FitResult fit;

    const TuningCell& cell(std::size_t li, std::size_t ji, std::size_t nj) const { return cells[li * nj + ji]; }
};

/// n ||P r||^2 / tr(P)^2.
inline double gcv(const Smoother& s, const Vec& residual)
{
    const double tr = s.trace();
    if (!(tr > 0.0)) throw Error("trace of the smoother is not positive");
    const Vec pr = s.matrix() * residual;
    return static_cast<double>(residual.size()) * pr.squaredNorm() / (tr * tr);
}

inline double gcv(const Smoother& s, const Dataset& data, const FitResult& fit)
{
    return gcv(s, Vec(data.y - data.x * fit.beta));
}

/// log(rss / n) + J log(log n) log(p) / n.
inline double hbic_value(Index n, Index p, double rss, Index j)
{
    if (n < 3) throw Error("HBIC requires n >= 3");
    if (p < 1) throw Error("HBIC requires p >= 1");
    if (!(rss > 0.0) || !std::isfinite(rss)) throw SaturatedFitError();
    const double nn = static_cast<double>(n);
    return std::log(rss / nn) + static_cast<double>(j) * std::log(std::log(nn)) * std::log(static_cast<double>(p)) / nn;
}

inline Index penalized_count(const FitResult& fit, const std::vector<Index>& always_active)
{
    Index j = 0;
    for (Index i : fit.active_set)
        if (std::find(always_active.begin(), always_active.end(), i) == always_active.end()) ++j;
    return j;
}

/**
 * HBIC of a complete fit, with rss = ||Y - X beta - Sigma c||^2 and J the
 * number of penalized nonzero coefficients. `p_total` overrides p (e.g. the
 * pre-screening dimension).
 */
inline double hbic(const Dataset& data, const GramMatrix& g, const FitResult& fit, Index p_total = 0)
{
    const Vec res = data.y - data.x * fit.beta - g.sigma() * fit.c;
    const double rss = res.squaredNorm();
    if (rss <= kSaturationFloor * data.y.squaredNorm()) throw SaturatedFitError();
    return hbic_value(data.n(), p_total > 0 ? p_total : data.p(), rss, penalized_count(fit, data.always_active));
}

struct TuneOptions {
    unsigned threads = 1;
    Index p_total = 0;  // p used in HBIC; defaults to the dataset's p
};

/**
 * Grid search: for each J, lambda(J) minimizes GCV; then J* minimizes HBIC at
 * lambda(J). Ties go to the smaller lambda and the smaller J. Cells where the
 * solver fails are recorded and skipped.
 */
inline TuningReport tune(const Dataset& data, const GramMatrix& g, const TuningGrid& grid,
                         const SolverConfig& defaults, const TuneOptions& opt = {})
{
    grid.validate();
    if (data.n() < 3) throw Error("tuning requires n >= 3");
    const auto aa = detail::merged_always_active(data.always_active, defaults.always_active, data.p());
    const Index p_hbic = opt.p_total > 0 ? opt.p_total : data.p();
    const std::size_t nl = grid.lambdas.size(), nj = grid.js.size();
    const double n = static_cast<double>(data.n());
    const double floor = kSaturationFloor * data.y.squaredNorm();

    TuningReport rep;
    rep.cells.resize(nl * nj);
    parallel_for(nl, opt.threads, [&](std::size_t li) {
        const double lambda = grid.lambdas[li];
        std::optional<Smoother> s;
        std::optional<ProfiledDesign> design;
        std::string setup_error;
        try {
            s.emplace(g, lambda);
            design.emplace(data.x, *s);
        } catch (const std::exception& e) {
            setup_error = e.what();
        }
        const auto penalized = detail::penalized_mask(data.p(), aa);
        for (std::size_t ji = 0; ji < nj; ++ji) {
            TuningCell& cell = rep.cells[li * nj + ji];
            cell.lambda = lambda;
            cell.sparsity = grid.js[ji];
            if (!design) {
                cell.error = setup_error;
                continue;
            }
            try {
                SolverConfig cfg = defaults;
                cfg.lambda = lambda;
                cfg.sparsity = grid.js[ji];
                SolveOutcome sol = fsdar_solve(*design, data.y, cfg, aa);
                const Vec r = data.y - data.x * sol.beta;
                const Vec pr = s->matrix() * r;  // equals Y - X beta - Sigma c
                const double rss = pr.squaredNorm();
                cell.profiled_loss = r.dot(pr) / (2.0 * n);
                const double thr = detail::support_threshold(sol.beta + sol.d, cfg.sparsity, penalized);
                Index l0 = 0;
                for (Index i = 0; i < sol.beta.size(); ++i)
                    if (sol.beta(i) != 0.0 && penalized[static_cast<std::size_t>(i)]) ++l0;
                cell.objective = cell.profiled_loss + 0.5 * thr * thr * static_cast<double>(l0);
                cell.gcv = n * rss / (s->trace() * s->trace());
                cell.saturated = rss <= floor;
                cell.hbic = hbic_value(data.n(), p_hbic, cell.saturated ? std::max(floor, 1e-300) : rss, l0);
                cell.iterations = sol.iterations;
                cell.converged = sol.converged;
                cell.ok = true;
            } catch (const std::exception& e) {
                cell.error = e.what();
            }
        }
    });

    // differences at round-off level count as ties
    const double gcv_tol = 1e-12 * data.y.squaredNorm() / n;
    auto less = [](double a, double b, double tol) { return a < b - tol - 1e-10 * std::abs(b); };

    rep.lambda_for_j.assign(nj, std::numeric_limits<double>::quiet_NaN());
    rep.hbic_for_j.assign(nj, std::numeric_limits<double>::quiet_NaN());
    std::size_t best_j = nj;
    for (std::size_t ji = 0; ji < nj; ++ji) {
        std::size_t best_l = nl;
        for (std::size_t li = 0; li < nl; ++li) {
            const auto& c = rep.cells[li * nj + ji];
            if (c.ok && (best_l == nl || less(c.gcv, rep.cells[best_l * nj + ji].gcv, gcv_tol))) best_l = li;
        }
        if (best_l == nl) continue;
        rep.lambda_for_j[ji] = grid.lambdas[best_l];
        rep.hbic_for_j[ji] = rep.cells[best_l * nj + ji].hbic;
        if (best_j == nj || less(rep.hbic_for_j[ji], rep.hbic_for_j[best_j], 1e-12)) best_j = ji;
    }
    if (best_j == nj) {
        std::string why = rep.cells.empty() ? std::string("empty grid") : rep.cells.front().error;
        throw Error("every tuning cell failed (first error: " + why + ")");
    }
    rep.j_star = grid.js[best_j];
    rep.lambda_star = rep.lambda_for_j[best_j];

    SolverConfig cfg = defaults;
    cfg.lambda = rep.lambda_star;
    cfg.sparsity = rep.j_star;
    rep.fit = fsdar_fit(data, g, cfg);
    return rep;
}

/// beta-hat for each J at a fixed lambda (row k corresponds to js[k]); failed J rows are NaN.
inline Mat solution_path(const Dataset& data, const GramMatrix& g, double lambda, const std::vector<int>& js,
                         const SolverConfig& defaults)
{
    const Smoother s(g, lambda);
    const ProfiledDesign design(data.x, s);
    const auto aa = detail::merged_always_active(data.always_active, defaults.always_active, data.p());
    Mat path(static_cast<Index>(js.size()), data.p());
    for (std::size_t k = 0; k < js.size(); ++k) {
        SolverConfig cfg = defaults;
        cfg.lambda = lambda;
        cfg.sparsity = js[k];
        try {
            path.row(static_cast<Index>(k)) = fsdar_solve(design, data.y, cfg, aa).beta.transpose();
        } catch (const std::exception&) {
            path.row(static_cast<Index>(k)).setConstant(std::numeric_limits<double>::quiet_NaN());
        }
    }
    return path;
}

} // namespace pflr
