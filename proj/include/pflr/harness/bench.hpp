#pragma once

// Small random instances for oracle agreement, and timing probes for the
// solver iteration and the Gram construction.

#include "pflr/oracle.hpp"
#include "pflr/simgen.hpp"
#include "pflr/tuning.hpp"

#include <chrono>

namespace pflr::harness {

struct OracleInstance {
    Dataset data;   // centered
    Vec beta;       // truth
    double lambda = 1e-3;
    int sparsity = 3;
    double rho2 = 0.3;
};

/**
 * AR(rho2) design with `sparsity` nonzero coefficients of magnitude in [1, 2],
 * a functional term on a 50-point grid, and noise scaled to the requested
 * signal-to-noise ratio. lambda is drawn log-uniformly on [1e-4, 1e-1].
 */
inline OracleInstance oracle_instance(std::uint64_t seed, Index n = 50, Index p = 10, int sparsity = 3,
                                      double rho2 = 0.3, double snr = 10.0)
{
    std::mt19937_64 rng(seed);
    std::normal_distribution<double> normal(0.0, 1.0);
    std::uniform_real_distribution<double> unif(0.0, 1.0);
    OracleInstance inst;
    inst.sparsity = sparsity;
    inst.rho2 = rho2;
    inst.lambda = std::pow(10.0, -4.0 + 3.0 * unif(rng));

    Mat x(n, p);
    const double innov = std::sqrt(1.0 - rho2 * rho2);
    for (Index i = 0; i < n; ++i) {
        x(i, 0) = normal(rng);
        for (Index j = 1; j < p; ++j) x(i, j) = rho2 * x(i, j - 1) + innov * normal(rng);
    }
    std::vector<Index> cols(static_cast<std::size_t>(p));
    std::iota(cols.begin(), cols.end(), Index{0});
    std::shuffle(cols.begin(), cols.end(), rng);
    inst.beta = Vec::Zero(p);
    for (int k = 0; k < sparsity; ++k)
        inst.beta(cols[static_cast<std::size_t>(k)]) = (unif(rng) < 0.5 ? -1.0 : 1.0) * (1.0 + unif(rng));

    const Index m = 50, nb = 8;
    auto grid = std::make_shared<Grid>(Grid::uniform(m));
    Mat basis(m, nb);
    for (Index t = 0; t < m; ++t)
        for (Index k = 0; k < nb; ++k) basis(t, k) = eigenbasis(static_cast<int>(k + 1), grid->axis(0)(t));
    Mat scores(n, nb);
    for (Index i = 0; i < n; ++i)
        for (Index k = 0; k < nb; ++k) scores(i, k) = normal(rng) * 2.0 / static_cast<double>(k + 1);
    Vec xi_coef(nb);
    for (Index k = 0; k < nb; ++k) xi_coef(k) = (k % 2 == 0 ? 1.0 : -1.0) / static_cast<double>((k + 1) * (k + 1));

    const Vec signal = x * inst.beta + scores * xi_coef;
    const double vs = (signal.array() - signal.mean()).square().mean();
    const double sd = std::sqrt(vs / snr);
    Vec y = signal;
    for (Index i = 0; i < n; ++i) y(i) += sd * normal(rng);
    inst.data = center(Dataset{y, x, grid, scores * basis.transpose(), {}, {}});
    return inst;
}

struct OracleComparison {
    double fsdar_objective = 0.0;
    double oracle_objective = 0.0;
    double kkt = 0.0;
    bool same_support = false;
    int iterations = 0;
};

inline OracleComparison compare_with_oracle(const OracleInstance& inst, const KernelSpec& kernel = {})
{
    const GramMatrix g = gram(kernel, inst.data);
    const Smoother s(g, inst.lambda);
    SolverConfig cfg;
    cfg.lambda = inst.lambda;
    cfg.sparsity = inst.sparsity;
    const FitResult fit = fsdar_fit(inst.data, g, cfg);
    const auto orc = oracle::best_subset(inst.data.x, inst.data.y, s.matrix(), inst.sparsity);
    OracleComparison c;
    c.fsdar_objective = fit.profiled_loss;
    c.oracle_objective = orc.objective;
    c.kkt = kkt_check(inst.data, s, fit);
    c.same_support = fit.active_set == orc.subset;
    c.iterations = fit.iterations;
    return c;
}

inline double median(std::vector<double> v)
{
    if (v.empty()) return std::numeric_limits<double>::quiet_NaN();
    std::sort(v.begin(), v.end());
    const std::size_t h = v.size() / 2;
    return v.size() % 2 ? v[h] : 0.5 * (v[h - 1] + v[h]);
}

struct IterationTiming {
    Index n = 0, p = 0;
    double seconds = 0.0;        // median over repeats of one full solve (design included)
    double per_iteration = 0.0;
    int iterations = 0;
};

/// Times fsdar on an Example 1 draw with the given p; J = 5, lambda = 1e-3.
inline IterationTiming time_iterations(Index n, Index p, int repeats = 5, std::uint64_t seed = 7)
{
    Example1Config cfg;
    cfg.n = n;
    cfg.p = p;
    const Example1Generator gen(cfg);
    const auto [data, truth] = gen.generate(seed);
    const GramMatrix g = gram(KernelSpec{}, data);
    SolverConfig sc;
    sc.sparsity = 5;
    sc.lambda = 1e-3;
    sc.beta0 = Vec::Zero(p);
    std::vector<double> per;
    std::vector<double> total;
    int iters = 0;
    for (int r = 0; r < repeats; ++r) {
        const auto t0 = std::chrono::steady_clock::now();
        const Smoother s(g, sc.lambda);
        const ProfiledDesign design(data.x, s);
        const SolveOutcome sol = fsdar_solve(design, data.y, sc, {});
        const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
        iters = sol.iterations;
        total.push_back(secs);
        per.push_back(secs / std::max(1, sol.iterations));
    }
    return {n, p, median(total), median(per), iters};
}

/// Median time of the raw Sigma construction (kernel smoothing and the double integral).
inline double time_gram(Index n, Index m, int repeats = 5, std::uint64_t seed = 11)
{
    Example1Config cfg;
    cfg.n = n;
    cfg.m = m;
    const Example1Generator gen(cfg);
    const Dataset d = gen.raw_dataset(n, seed);
    const KernelSpec k;
    std::vector<double> t;
    for (int r = 0; r < repeats; ++r) {
        const auto t0 = std::chrono::steady_clock::now();
        const Mat sigma = gram_sigma(k, *d.grid, d.z);
        t.push_back(std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count());
        if (!sigma.allFinite()) throw Error("non-finite Gram matrix");
    }
    return median(t);
}

} // namespace pflr::harness
