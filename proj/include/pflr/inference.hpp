#pragma once

// Penalized likelihood-ratio test of H0: xi = 0 and normal-approximation
// p-values for the selected scalar coefficients.

#include "pflr/fsdar.hpp"
#include "pflr/parallel.hpp"

#include <boost/math/special_functions/gamma.hpp>

#include <charconv>
#include <numbers>
#include <random>

namespace pflr {

struct Calibration {
    enum class Kind { bootstrap, chisq };
    Kind kind = Kind::bootstrap;
    int replicates = 500;
    double df = 1.0;

    static Calibration bootstrap(int b) { return {Kind::bootstrap, b, 1.0}; }
    static Calibration chisq(double df) { return {Kind::chisq, 0, df}; }

    /// bootstrap[:B=<int>] | chisq:df=<real>
    static Calibration parse(const std::string& text)
    {
        auto value_after = [&](const std::string& prefix) -> std::string {
            if (text.rfind(prefix, 0) != 0) return {};
            return text.substr(prefix.size());
        };
        if (text == "bootstrap") return bootstrap(500);
        if (auto v = value_after("bootstrap:B="); !v.empty()) {
            int b = 0;
            const auto [ptr, ec] = std::from_chars(v.data(), v.data() + v.size(), b);
            if (ec != std::errc() || ptr != v.data() + v.size()) throw Error("bad bootstrap replicate count '" + v + "'");
            return bootstrap(b);
        }
        if (auto v = value_after("chisq:df="); !v.empty()) {
            std::size_t used = 0;
            double df = 0.0;
            try {
                df = std::stod(v, &used);
            } catch (const std::exception&) {
                used = 0;
            }
            if (used != v.size() || !(df > 0.0)) throw Error("bad chi-square degrees of freedom '" + v + "'");
            return chisq(df);
        }
        throw Error("calibration must be 'bootstrap:B=<n>' or 'chisq:df=<v>', got '" + text + "'");
    }

    std::string to_string() const
    {
        std::ostringstream os;
        if (kind == Kind::bootstrap) os << "bootstrap:B=" << replicates;
        else os << "chisq:df=" << df;
        return os.str();
    }
};

struct TestResult {
    double statistic = 0.0;
    double p_value = 1.0;
    Calibration calibration;
    double lambda = 0.0;
    int sparsity = 0;
    double null_loss = 0.0;   // (2n)^{-1} ||Y - X beta_H0||^2
    double alt_loss = 0.0;    // (2n)^{-1} r'P r at the best alternative found
    Vec null_beta;
    Vec alt_beta;
    std::vector<double> bootstrap_statistics;  // sorted
    int bootstrap_failures = 0;
};

namespace detail {

struct LrtParts {
    double statistic;
    double null_loss;
    double alt_loss;
    Vec null_beta;
    Vec alt_beta;
};

/**
 * T = 2n [l(beta_H0, 0) - l(beta, xi-hat)]. The alternative loss is the best of
 * the supplied fit, a solve warm-started from beta_H0, and the P-weighted refit
 * on beta_H0's support, so T >= 0 up to round-off.
 */
inline LrtParts likelihood_ratio(const ProfiledDesign& null_design, const ProfiledDesign& alt_design, const Vec& y,
                                 const SolverConfig& cfg, const std::vector<Index>& aa,
                                 std::optional<std::pair<double, Vec>> given_alt = std::nullopt)
{
    const double two_n = 2.0 * static_cast<double>(y.size());
    SolverConfig null_cfg = cfg;
    null_cfg.beta0.reset();
    const SolveOutcome h0 = fsdar_solve(null_design, y, null_cfg, aa);
    const Vec r0 = y - null_design.x() * h0.beta;
    LrtParts out{0.0, r0.squaredNorm() / two_n, 0.0, h0.beta, {}};

    auto loss_of = [&](const Vec& beta) {
        const Vec r = y - alt_design.x() * beta;
        return r.dot(alt_design.apply_p(r)) / two_n;
    };

    if (given_alt) {
        out.alt_loss = given_alt->first;
        out.alt_beta = given_alt->second;
    } else {
        SolverConfig c = cfg;
        c.beta0.reset();
        const SolveOutcome s = fsdar_solve(alt_design, y, c, aa);
        out.alt_beta = s.beta;
        out.alt_loss = loss_of(s.beta);
    }

    SolverConfig warm = cfg;
    warm.beta0 = h0.beta;
    const SolveOutcome ws = fsdar_solve(alt_design, y, warm, aa);
    if (const double l = loss_of(ws.beta); l < out.alt_loss) {
        out.alt_loss = l;
        out.alt_beta = ws.beta;
    }

    try {
        const auto& sup = h0.support;
        Vec b(static_cast<Index>(sup.size()));
        const Vec xtpy = alt_design.xtp(y);
        for (std::size_t j = 0; j < sup.size(); ++j) b(static_cast<Index>(j)) = xtpy(sup[j]);
        const Vec bs = solve_active(alt_design.gram_block(sup), b, sup);
        Vec beta = Vec::Zero(alt_design.p());
        for (std::size_t j = 0; j < sup.size(); ++j) beta(sup[j]) = bs(static_cast<Index>(j));
        if (const double l = loss_of(beta); l < out.alt_loss) {
            out.alt_loss = l;
            out.alt_beta = beta;
        }
    } catch (const CollinearError&) {
    }

    out.statistic = two_n * (out.null_loss - out.alt_loss);
    return out;
}

} // namespace detail

struct BootstrapOptions {
    std::uint64_t seed = 1;
    unsigned threads = 1;
};

/**
 * Residual bootstrap under H0: Y* = X beta_H0 + e*, with e* resampled from the
 * centered null residuals; T* recomputed at the same (lambda, J). Returns the
 * sorted statistics and the number of failed replicates.
 */
inline std::pair<std::vector<double>, int> bootstrap_null(const ProfiledDesign& null_design,
                                                          const ProfiledDesign& alt_design, const Vec& null_beta,
                                                          const Vec& y, const SolverConfig& cfg,
                                                          const std::vector<Index>& aa, int replicates,
                                                          const BootstrapOptions& opt)
{
    if (replicates < 100) throw Error(detail::concat("bootstrap needs at least 100 replicates, got ", replicates));
    const Index n = y.size();
    const Vec fitted = null_design.x() * null_beta;
    Vec e = y - fitted;
    e.array() -= e.mean();

    std::vector<double> stats(static_cast<std::size_t>(replicates), std::numeric_limits<double>::quiet_NaN());
    std::vector<char> failed(static_cast<std::size_t>(replicates), 0);
    parallel_for(static_cast<std::size_t>(replicates), opt.threads, [&](std::size_t b) {
        std::mt19937_64 rng(derive_seed(opt.seed, b, 0xb007));
        std::uniform_int_distribution<Index> pick(0, n - 1);
        Vec ys(n);
        for (Index i = 0; i < n; ++i) ys(i) = fitted(i) + e(pick(rng));
        ys.array() -= ys.mean();
        try {
            stats[b] = detail::likelihood_ratio(null_design, alt_design, ys, cfg, aa).statistic;
        } catch (const std::exception&) {
            failed[b] = 1;
        }
    });
    const int nfail = static_cast<int>(std::count(failed.begin(), failed.end(), 1));
    if (nfail * 20 > replicates)
        throw Error(detail::concat("solver failed in ", nfail, " of ", replicates, " bootstrap replicates"));
    std::vector<double> ok;
    ok.reserve(stats.size());
    for (std::size_t b = 0; b < stats.size(); ++b)
        if (!failed[b]) ok.push_back(stats[b]);
    std::sort(ok.begin(), ok.end());
    return {std::move(ok), nfail};
}

/// Upper chi-square tail P(chi2_df >= t).
inline double chisq_p_value(double t, double df)
{
    if (!(df > 0.0)) throw Error("chi-square degrees of freedom must be positive");
    if (!(t > 0.0)) return 1.0;
    return boost::math::gamma_q(0.5 * df, 0.5 * t);
}

/// (1 + #{T* >= T}) / (B + 1).
inline double bootstrap_p_value(const std::vector<double>& sorted_stats, double t)
{
    const auto ge = sorted_stats.end() - std::lower_bound(sorted_stats.begin(), sorted_stats.end(), t);
    return (1.0 + static_cast<double>(ge)) / (static_cast<double>(sorted_stats.size()) + 1.0);
}

/**
 * Tests H0: xi = 0 after selection. The null fit re-runs the l0 search at
 * the same J with P replaced by I; the alternative uses P at the tuned lambda.
 */
inline TestResult test_functional(const Dataset& data, const GramMatrix& g, const FitResult& tuned,
                                  const Calibration& cal, const BootstrapOptions& opt = {},
                                  const SolverConfig& defaults = {})
{
    if (cal.kind == Calibration::Kind::bootstrap && cal.replicates < 100)
        throw Error(detail::concat("bootstrap calibration needs B >= 100, got ", cal.replicates));
    const auto aa = detail::merged_always_active(data.always_active, defaults.always_active, data.p());
    const Smoother s(g, tuned.lambda);
    const ProfiledDesign alt(data.x, s);
    const ProfiledDesign null = ProfiledDesign::identity(data.x);
    SolverConfig cfg = defaults;
    cfg.lambda = tuned.lambda;
    cfg.sparsity = tuned.sparsity;

    const auto parts = detail::likelihood_ratio(null, alt, data.y, cfg, aa,
                                                std::make_pair(tuned.profiled_loss, tuned.beta));
    TestResult res;
    res.statistic = parts.statistic;
    res.calibration = cal;
    res.lambda = tuned.lambda;
    res.sparsity = tuned.sparsity;
    res.null_loss = parts.null_loss;
    res.alt_loss = parts.alt_loss;
    res.null_beta = parts.null_beta;
    res.alt_beta = parts.alt_beta;

    if (cal.kind == Calibration::Kind::chisq) {
        res.p_value = chisq_p_value(parts.statistic, cal.df);
    } else {
        auto [stats, nfail] = bootstrap_null(null, alt, parts.null_beta, data.y, cfg, aa, cal.replicates, opt);
        res.p_value = bootstrap_p_value(stats, parts.statistic);
        res.bootstrap_statistics = std::move(stats);
        res.bootstrap_failures = nfail;
    }
    res.p_value = std::clamp(res.p_value, 0.0, 1.0);
    return res;
}

struct CoefRow {
    Index index = 0;
    double estimate = 0.0;
    double std_error = 0.0;
    double z = 0.0;
    double p_value = 1.0;
};

struct CoefInference {
    std::vector<CoefRow> rows;
    double sigma2 = 0.0;
    double df_residual = 0.0;
};

/**
 * Sandwich covariance sigma2 * M (X_A' P^2 X_A) M with M = (X_A' P X_A)^{-1}
 * over the nonzero and always-active coordinates; two-sided normal p-values.
 * sigma2 defaults to ||Y - X beta - Sigma c||^2 / (n - |A| - tr(I - P)).
 */
inline CoefInference coef_pvalues(const Dataset& data, const Smoother& s, const FitResult& fit,
                                  std::optional<double> sigma2_hat = std::nullopt,
                                  const std::vector<Index>& extra_always_active = {})
{
    const auto aa = detail::merged_always_active(data.always_active, extra_always_active, data.p());
    std::set<Index> aset(fit.active_set.begin(), fit.active_set.end());
    aset.insert(aa.begin(), aa.end());
    const std::vector<Index> a(aset.begin(), aset.end());
    const Index k = static_cast<Index>(a.size());
    const Index n = data.n();
    if (k >= n) throw Error("active set must be smaller than n");

    Mat xa(n, k);
    for (Index j = 0; j < k; ++j) xa.col(j) = data.x.col(a[j]);
    const Mat pxa = s.matrix() * xa;
    Mat g = xa.transpose() * pxa;
    g = 0.5 * (g + g.transpose()).eval();
    const Mat m = g.ldlt().solve(Mat::Identity(k, k));
    const Mat cov_core = m * (pxa.transpose() * pxa) * m;

    const Vec r = data.y - data.x * fit.beta;
    const Vec pr = s.matrix() * r;
    CoefInference out;
    out.df_residual = static_cast<double>(n - k) - (static_cast<double>(n) - s.trace());
    if (sigma2_hat) {
        out.sigma2 = *sigma2_hat;
    } else {
        if (!(out.df_residual > 0.0))
            throw Error(detail::concat("nonpositive residual degrees of freedom ", out.df_residual));
        out.sigma2 = pr.squaredNorm() / out.df_residual;
    }
    for (Index j = 0; j < k; ++j) {
        CoefRow row;
        row.index = a[j];
        row.estimate = fit.beta(a[j]);
        row.std_error = std::sqrt(std::max(0.0, out.sigma2 * cov_core(j, j)));
        row.z = row.std_error > 0.0 ? row.estimate / row.std_error : 0.0;
        row.p_value = row.estimate == 0.0 ? 1.0 : std::erfc(std::abs(row.z) / std::numbers::sqrt2);
        out.rows.push_back(row);
    }
    return out;
}

} // namespace pflr
