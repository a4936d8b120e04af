#pragma once

// Support detection and root finding for the profiled l0 problem
//
//     min_beta (2n)^{-1} (Y - X beta)' P (Y - X beta) + tau ||beta||_0,
//
// where P is the profiling smoother of the functional part, together with
// the hard-thresholding KKT certificate of its local minimizers.

#include "pflr/core.hpp"
#include "pflr/rkhs.hpp"

#include <numeric>
#include <optional>
#include <set>

namespace pflr {

/// Raised when X_A' P X_A is singular; `columns` names the collinear columns.
class CollinearError : public Error {
public:
    CollinearError(std::vector<Index> columns, const std::string& what) : Error(what), columns_(std::move(columns)) {}
    const std::vector<Index>& columns() const { return columns_; }

private:
    std::vector<Index> columns_;
};

/// Elementwise hard thresholding: keeps v_i when |v_i| >= sqrt(2 tau).
inline Vec hard_threshold(const Vec& v, double tau)
{
    if (!(tau >= 0.0)) throw Error("threshold parameter must be nonnegative");
    const double thr = std::sqrt(2.0 * tau);
    Vec out = v;
    for (Index i = 0; i < v.size(); ++i)
        if (std::abs(v(i)) < thr) out(i) = 0.0;
    return out;
}

/// J-th largest |v_i| (1-based J); duplicates count separately.
inline double kth_largest_abs(const Vec& v, Index j)
{
    if (j < 1 || j > v.size()) throw Error(detail::concat("rank ", j, " out of range for length ", v.size()));
    std::vector<double> a(static_cast<std::size_t>(v.size()));
    for (Index i = 0; i < v.size(); ++i) a[static_cast<std::size_t>(i)] = std::abs(v(i));
    std::nth_element(a.begin(), a.begin() + (j - 1), a.end(), std::greater<>());
    return a[static_cast<std::size_t>(j - 1)];
}

enum class TieBreak { lower_index };

struct SolverConfig {
    int sparsity = 1;                 // J, penalized coordinates allowed in the support
    double lambda = 1e-3;
    int max_iter = 50;
    std::optional<Vec> beta0;         // defaults to zero
    std::vector<Index> always_active; // merged with the dataset's own set
    TieBreak tie_break = TieBreak::lower_index;
};

struct SolverTrace {
    std::vector<std::vector<Index>> active_sets;
    std::vector<double> objectives;  // profiled loss after each root-finding step
    Vec final_d;
};

/**
 * Quantities of the profiled problem that depend on lambda but not on the
 * response: P, P X and (for moderate p) X' P X. A design with P = I gives
 * the scalar-only model.
 */
class ProfiledDesign {
public:
    static constexpr Index kFullGramLimit = 1000;

    ProfiledDesign(const Mat& x, const Smoother& s) : x_(x), p_(s.matrix()), lambda_(s.lambda()), trace_(s.trace())
    {
        if (x.rows() != s.n()) throw Error("design rows do not match smoother size");
        px_ = p_ * x_;
        init_gram();
    }

    static ProfiledDesign identity(const Mat& x) { return ProfiledDesign(x); }

    Index n() const { return x_.rows(); }
    Index p() const { return x_.cols(); }
    bool is_identity() const { return identity_; }
    double lambda() const { return lambda_; }
    double trace() const { return trace_; }
    const Mat& x() const { return x_; }
    const Mat& px() const { return identity_ ? x_ : px_; }

    Vec apply_p(const Vec& v) const { return identity_ ? v : Vec(p_ * v); }

    /// X' P v.
    Vec xtp(const Vec& v) const { return px().transpose() * v; }

    /// X_A' P X_A.
    Mat gram_block(const std::vector<Index>& a) const
    {
        const Index k = static_cast<Index>(a.size());
        Mat g(k, k);
        if (g_) {
            for (Index i = 0; i < k; ++i)
                for (Index j = 0; j < k; ++j) g(i, j) = (*g_)(a[i], a[j]);
            return g;
        }
        Mat xa(n(), k), pxa(n(), k);
        for (Index j = 0; j < k; ++j) {
            xa.col(j) = x_.col(a[j]);
            pxa.col(j) = px().col(a[j]);
        }
        g.noalias() = xa.transpose() * pxa;
        return 0.5 * (g + g.transpose());
    }

    /// X' P X_A beta_A.
    Vec gram_times(const std::vector<Index>& a, const Vec& beta_a) const
    {
        if (g_) {
            Vec out = Vec::Zero(p());
            for (std::size_t j = 0; j < a.size(); ++j) out += g_->col(a[j]) * beta_a(static_cast<Index>(j));
            return out;
        }
        Vec xb = Vec::Zero(n());
        for (std::size_t j = 0; j < a.size(); ++j) xb += x_.col(a[j]) * beta_a(static_cast<Index>(j));
        return px().transpose() * xb;
    }

private:
    explicit ProfiledDesign(const Mat& x) : x_(x), identity_(true), lambda_(0.0), trace_(static_cast<double>(x.rows()))
    {
        init_gram();
    }

    void init_gram()
    {
        if (p() <= kFullGramLimit) {
            Mat g = x_.transpose() * px();
            g_ = 0.5 * (g + g.transpose());
        }
    }

    Mat x_;
    Mat p_;
    Mat px_;
    std::optional<Mat> g_;
    bool identity_ = false;
    double lambda_;
    double trace_;
};

namespace detail {

/**
 * Cholesky solve of the active-set normal equations. A pivot below
 * 1e-13 * scale marks a column as a linear combination of earlier ones;
 * pivots below 1e-10 * scale trigger a diagonal jitter of 1e-10 * scale,
 * with scale = trace / |A|.
 */
inline Vec solve_active(const Mat& g, const Vec& b, const std::vector<Index>& cols)
{
    const Index k = g.rows();
    if (k == 0) return Vec();
    const double scale = std::max(g.trace() / static_cast<double>(k), std::numeric_limits<double>::min());
    Mat l = Mat::Zero(k, k);
    bool near_singular = false;
    for (Index j = 0; j < k; ++j) {
        double pivot = g(j, j) - l.row(j).head(j).squaredNorm();
        if (pivot <= 1e-13 * scale) {
            std::vector<Index> offending{cols[j]};
            if (j > 0) {
                const Vec coef = g.topLeftCorner(j, j).ldlt().solve(g.col(j).head(j));
                const double big = coef.cwiseAbs().maxCoeff();
                for (Index q = 0; q < j; ++q)
                    if (std::abs(coef(q)) > 1e-6 * big) offending.push_back(cols[q]);
            }
            std::sort(offending.begin(), offending.end());
            std::ostringstream os;
            os << "collinear active set: columns {";
            for (std::size_t q = 0; q < offending.size(); ++q) os << (q ? ", " : "") << offending[q];
            os << "} are linearly dependent under the profiled metric";
            throw CollinearError(std::move(offending), os.str());
        }
        if (pivot <= 1e-10 * scale) near_singular = true;
        l(j, j) = std::sqrt(pivot);
        for (Index i = j + 1; i < k; ++i) l(i, j) = (g(i, j) - l.row(i).head(j).dot(l.row(j).head(j))) / l(j, j);
    }
    if (near_singular) {
        Mat gj = g;
        gj.diagonal().array() += 1e-10 * scale;
        return gj.llt().solve(b);
    }
    const Vec fw = l.triangularView<Eigen::Lower>().solve(b);
    return l.transpose().triangularView<Eigen::Upper>().solve(fw);
}

inline std::vector<Index> merged_always_active(const std::vector<Index>& a, const std::vector<Index>& b, Index p)
{
    std::set<Index> s(a.begin(), a.end());
    s.insert(b.begin(), b.end());
    for (Index j : s)
        if (j < 0 || j >= p) throw Error(detail::concat("always-active index ", j, " out of range"));
    return {s.begin(), s.end()};
}

inline std::vector<char> penalized_mask(Index p, const std::vector<Index>& always_active)
{
    std::vector<char> mask(static_cast<std::size_t>(p), 1);
    for (Index j : always_active) mask[static_cast<std::size_t>(j)] = 0;
    return mask;
}

/// Always-active indices plus the J penalized indices with largest |v|, ties to lower index.
inline std::vector<Index> select_support(const Vec& v, int sparsity, const std::vector<Index>& always_active,
                                         const std::vector<char>& penalized)
{
    std::vector<Index> cand;
    cand.reserve(static_cast<std::size_t>(v.size()));
    for (Index i = 0; i < v.size(); ++i)
        if (penalized[static_cast<std::size_t>(i)]) cand.push_back(i);
    const auto take = std::min<std::size_t>(static_cast<std::size_t>(sparsity), cand.size());
    std::partial_sort(cand.begin(), cand.begin() + static_cast<std::ptrdiff_t>(take), cand.end(),
                      [&v](Index a, Index b) {
                          const double fa = std::abs(v(a)), fb = std::abs(v(b));
                          return fa > fb || (fa == fb && a < b);
                      });
    std::vector<Index> a(cand.begin(), cand.begin() + static_cast<std::ptrdiff_t>(take));
    a.insert(a.end(), always_active.begin(), always_active.end());
    std::sort(a.begin(), a.end());
    return a;
}

/// J-th largest |beta + d| among penalized coordinates (0 when there are fewer than J).
inline double support_threshold(const Vec& bd, int sparsity, const std::vector<char>& penalized)
{
    std::vector<double> a;
    for (Index i = 0; i < bd.size(); ++i)
        if (penalized[static_cast<std::size_t>(i)]) a.push_back(std::abs(bd(i)));
    if (sparsity < 1 || static_cast<std::size_t>(sparsity) > a.size()) return 0.0;
    std::nth_element(a.begin(), a.begin() + (sparsity - 1), a.end(), std::greater<>());
    return a[static_cast<std::size_t>(sparsity - 1)];
}

/// max(||beta - H_tau(beta + d)||_inf over penalized coordinates, ||d_A||_inf).
inline double kkt_residual(const Vec& beta, const Vec& d, int sparsity, const std::vector<Index>& always_active)
{
    const auto penalized = penalized_mask(beta.size(), always_active);
    const Vec bd = beta + d;
    const double thr = support_threshold(bd, sparsity, penalized);
    double res = 0.0;
    for (Index i = 0; i < beta.size(); ++i) {
        const bool on = beta(i) != 0.0 || !penalized[static_cast<std::size_t>(i)];
        if (on) res = std::max(res, std::abs(d(i)));
        if (penalized[static_cast<std::size_t>(i)]) {
            const double h = std::abs(bd(i)) < thr ? 0.0 : bd(i);
            res = std::max(res, std::abs(beta(i) - h));
        }
    }
    return res;
}

} // namespace detail

/// Iterate of the root-finding loop before the functional part is recovered.
struct SolveOutcome {
    Vec beta;
    Vec d;
    std::vector<Index> support;
    double profiled_loss = 0.0;
    int iterations = 0;
    bool converged = false;
    bool cycled = false;
    SolverTrace trace;
};

/**
 * Runs the support-detection / root-finding loop on a profiled design.
 *
 * Starting from beta0 and d0 = X'P(Y - X beta0)/n, each step takes the
 * always-active set plus the top-J coordinates of |beta + d|, solves the
 * P-weighted normal equations on that set, and recomputes d off the set.
 * Stops when the selected set repeats, on a cycle (returning the iterate
 * with smallest profiled loss), or at max_iter.
 */
inline SolveOutcome fsdar_solve(const ProfiledDesign& design, const Vec& y, const SolverConfig& cfg,
                                const std::vector<Index>& always_active)
{
    const Index n = design.n();
    const Index p = design.p();
    if (y.size() != n) throw Error("response length does not match design");
    if (cfg.sparsity < 1) throw Error("sparsity level must be positive");
    if (cfg.max_iter < 1) throw Error("max_iter must be at least 1");
    const Index budget = cfg.sparsity + static_cast<Index>(always_active.size());
    if (budget > std::min(n - 1, p))
        throw Error(detail::concat("sparsity ", cfg.sparsity, " plus ", always_active.size(),
                                   " always-active covariates exceeds min(n - 1, p) = ", std::min(n - 1, p)));

    const auto penalized = detail::penalized_mask(p, always_active);
    const double nn = static_cast<double>(n);
    const Vec py = design.apply_p(y);
    const double ypy = y.dot(py);
    const Vec xtpy = design.px().transpose() * y;

    Vec beta = cfg.beta0 ? *cfg.beta0 : Vec::Zero(p);
    if (beta.size() != p) throw Error("initial beta has wrong length");
    Vec d;
    {
        std::vector<Index> nz = nonzero_indices(beta);
        Vec bnz(static_cast<Index>(nz.size()));
        for (std::size_t j = 0; j < nz.size(); ++j) bnz(static_cast<Index>(j)) = beta(nz[j]);
        d = (xtpy - design.gram_times(nz, bnz)) / nn;
    }

    SolveOutcome out;
    std::vector<Vec> betas, ds;
    std::vector<Index> a = detail::select_support(beta + d, cfg.sparsity, always_active, penalized);

    for (int it = 1; it <= cfg.max_iter; ++it) {
        const Mat g = design.gram_block(a);
        Vec b(static_cast<Index>(a.size()));
        for (std::size_t j = 0; j < a.size(); ++j) b(static_cast<Index>(j)) = xtpy(a[j]);
        const Vec ba = detail::solve_active(g, b, a);

        Vec nb = Vec::Zero(p);
        for (std::size_t j = 0; j < a.size(); ++j) nb(a[j]) = ba(static_cast<Index>(j));
        Vec nd = (xtpy - design.gram_times(a, ba)) / nn;
        for (Index j : a) nd(j) = 0.0;

        // r'Pr at the normal-equation solution equals y'Py - b_A' beta_A.
        const double loss = std::max(0.0, ypy - b.dot(ba)) / (2.0 * nn);
        out.trace.active_sets.push_back(a);
        out.trace.objectives.push_back(loss);
        betas.push_back(nb);
        ds.push_back(nd);
        out.iterations = it;

        beta = std::move(nb);
        d = std::move(nd);
        std::vector<Index> next = detail::select_support(beta + d, cfg.sparsity, always_active, penalized);
        if (next == a) {
            out.converged = true;
            break;
        }
        const auto& hist = out.trace.active_sets;
        if (std::find(hist.begin(), hist.end(), next) != hist.end()) {
            out.cycled = true;
            break;
        }
        a = std::move(next);
    }

    std::size_t pick = betas.size() - 1;
    if (out.cycled) {
        const auto& obj = out.trace.objectives;
        pick = static_cast<std::size_t>(std::min_element(obj.begin(), obj.end()) - obj.begin());
    }
    out.beta = betas[pick];
    out.d = ds[pick];
    out.support = out.trace.active_sets[pick];
    out.profiled_loss = out.trace.objectives[pick];
    out.trace.final_d = out.d;
    return out;
}

/// (2n)^{-1} r' P r with r = Y - X beta; the tau term is left to the caller.
inline double profiled_objective(const Dataset& data, const Smoother& s, const Vec& beta)
{
    if (beta.size() != data.p()) throw Error("beta has wrong length");
    const Vec r = data.y - data.x * beta;
    return r.dot(s.matrix() * r) / (2.0 * static_cast<double>(data.n()));
}

/// Assembles a FitResult (c, xi-hat, intercept, tau, objective, KKT residual) from a solver outcome.
inline FitResult finalize_fit(const Dataset& data, const GramMatrix& g, const Smoother& s, SolveOutcome&& sol,
                              int sparsity, const std::vector<Index>& always_active)
{
    FitResult fit;
    fit.beta = std::move(sol.beta);
    fit.d = std::move(sol.d);
    fit.support = std::move(sol.support);
    fit.active_set = nonzero_indices(fit.beta);
    fit.lambda = s.lambda();
    fit.sparsity = sparsity;
    fit.iterations = sol.iterations;
    fit.converged = sol.converged;
    fit.cycled = sol.cycled;

    const Vec r = data.y - data.x * fit.beta;
    fit.c = s.solve(r);
    if (g.representers().rows() == data.n()) fit.xi_eval = g.representers().transpose() * fit.c;
    else fit.xi_eval = Vec::Zero(data.m());
    fit.profiled_loss = r.dot(s.matrix() * r) / (2.0 * static_cast<double>(data.n()));

    const auto penalized = detail::penalized_mask(data.p(), always_active);
    const double thr = detail::support_threshold(fit.beta + fit.d, sparsity, penalized);
    fit.tau = 0.5 * thr * thr;
    Index l0 = 0;
    for (Index j : fit.active_set)
        if (penalized[static_cast<std::size_t>(j)]) ++l0;
    fit.objective = fit.profiled_loss + fit.tau * static_cast<double>(l0);
    fit.kkt_residual = detail::kkt_residual(fit.beta, fit.d, sparsity, always_active);
    if (data.centering.x_mean.size() == data.p() && data.centering.z_mean.size() == data.m())
        fit.intercept = recover_intercept(fit, data.centering, data.grid->weights());
    else
        fit.intercept = 0.0;
    return fit;
}

inline FitResult fsdar_fit(const Dataset& data, const GramMatrix& g, const Smoother& s, const ProfiledDesign& design,
                           const SolverConfig& cfg, SolverTrace* trace = nullptr)
{
    const auto aa = detail::merged_always_active(data.always_active, cfg.always_active, data.p());
    SolveOutcome sol = fsdar_solve(design, data.y, cfg, aa);
    if (trace) *trace = sol.trace;
    return finalize_fit(data, g, s, std::move(sol), cfg.sparsity, aa);
}

inline FitResult fsdar_fit(const Dataset& data, const GramMatrix& g, const SolverConfig& cfg,
                           SolverTrace* trace = nullptr)
{
    if (g.n() != data.n()) throw Error("Gram matrix size does not match dataset");
    const Smoother s(g, cfg.lambda);
    const ProfiledDesign design(data.x, s);
    return fsdar_fit(data, g, s, design, cfg, trace);
}

/// Recomputes d = X'P(Y - X beta)/n from scratch and returns the KKT residual of `fit`.
inline double kkt_check(const Dataset& data, const Smoother& s, const FitResult& fit,
                        const std::vector<Index>& extra_always_active = {})
{
    const auto aa = detail::merged_always_active(data.always_active, extra_always_active, data.p());
    const Vec r = data.y - data.x * fit.beta;
    const Vec d = data.x.transpose() * (s.matrix() * r) / static_cast<double>(data.n());
    return detail::kkt_residual(fit.beta, d, fit.sparsity, aa);
}

inline double kkt_check(const Dataset& data, const GramMatrix& g, const FitResult& fit)
{
    return kkt_check(data, Smoother(g, fit.lambda), fit);
}

} // namespace pflr
