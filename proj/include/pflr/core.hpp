#pragma once

// Domain types shared by every pflr module: observation grids, functional
// samples, centered datasets and fit results.

#include <Eigen/Dense>

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <cstring>
#include <memory>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

namespace pflr {

using Vec = Eigen::VectorXd;
using Mat = Eigen::MatrixXd;
using Index = Eigen::Index;

class Error : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

namespace detail {

template <class... Args>
std::string concat(const Args&... args)
{
    std::ostringstream os;
    (os << ... << args);
    return os.str();
}

} // namespace detail

/// Trapezoidal quadrature weights for a strictly increasing abscissa vector.
inline Vec trapezoid_weights(const Vec& axis)
{
    const Index m = axis.size();
    Vec w = Vec::Zero(m);
    if (m == 1) {
        w(0) = 1.0;
        return w;
    }
    for (Index j = 0; j + 1 < m; ++j) {
        const double h = axis(j + 1) - axis(j);
        w(j) += 0.5 * h;
        w(j + 1) += 0.5 * h;
    }
    return w;
}

inline Vec uniform_axis(Index m)
{
    if (m < 2) throw Error("uniform grid needs at least 2 points");
    return Vec::LinSpaced(m, 0.0, 1.0);
}

/**
 * Observation grid of a functional predictor: one axis for curves, two axes
 * for surfaces. Two-dimensional grids are flattened row-major, so point
 * (a, b) sits at flat index a * m2 + b, and carry tensor-product weights.
 */
class Grid {
public:
    Grid() = default;

    explicit Grid(std::vector<Vec> axes) : axes_(std::move(axes))
    {
        if (axes_.empty() || axes_.size() > 2) throw Error("grid must have one or two axes");
        for (const auto& a : axes_) {
            if (a.size() < 1) throw Error("grid axis is empty");
            if (!a.allFinite()) throw Error("grid axis has non-finite values");
            for (Index j = 0; j + 1 < a.size(); ++j)
                if (!(a(j + 1) > a(j))) throw Error("grid axis must be strictly increasing");
        }
        if (axes_.size() == 1) {
            weights_ = trapezoid_weights(axes_[0]);
        } else {
            const Vec w0 = trapezoid_weights(axes_[0]);
            const Vec w1 = trapezoid_weights(axes_[1]);
            weights_.resize(w0.size() * w1.size());
            for (Index a = 0; a < w0.size(); ++a)
                for (Index b = 0; b < w1.size(); ++b) weights_(a * w1.size() + b) = w0(a) * w1(b);
        }
    }

    static Grid uniform(Index m) { return Grid({uniform_axis(m)}); }
    static Grid uniform2d(Index m1, Index m2) { return Grid({uniform_axis(m1), uniform_axis(m2)}); }

    int dim() const { return static_cast<int>(axes_.size()); }
    Index size() const { return weights_.size(); }
    Index axis_size(int k) const { return axes_.at(k).size(); }
    const Vec& axis(int k) const { return axes_.at(k); }
    const Vec& weights() const { return weights_; }
    double measure() const { return weights_.sum(); }

    /// Coordinates of flat index k; the second entry is 0 for curves.
    std::array<double, 2> point(Index k) const
    {
        if (dim() == 1) return {axes_[0](k), 0.0};
        const Index m2 = axes_[1].size();
        return {axes_[0](k / m2), axes_[1](k % m2)};
    }

    bool operator==(const Grid& other) const
    {
        if (axes_.size() != other.axes_.size()) return false;
        for (std::size_t k = 0; k < axes_.size(); ++k)
            if (axes_[k].size() != other.axes_[k].size() || axes_[k] != other.axes_[k]) return false;
        return true;
    }

    std::uint64_t fingerprint() const
    {
        std::uint64_t h = 1469598103934665603ULL;
        auto mix = [&h](double v) {
            std::uint64_t bits;
            static_assert(sizeof(bits) == sizeof(v));
            std::memcpy(&bits, &v, sizeof(v));
            h = (h ^ bits) * 1099511628211ULL;
        };
        for (const auto& a : axes_) {
            mix(static_cast<double>(a.size()));
            for (Index j = 0; j < a.size(); ++j) mix(a(j));
        }
        return h;
    }

private:
    std::vector<Vec> axes_;
    Vec weights_;
};

using GridPtr = std::shared_ptr<const Grid>;

/// A single functional predictor observed on a grid.
struct FunctionalSample {
    GridPtr grid;
    Vec values;

    void validate() const
    {
        if (!grid) throw Error("functional sample has no grid");
        if (values.size() != grid->size())
            throw Error(detail::concat("functional sample has ", values.size(), " values but grid has ",
                                       grid->size(), " points"));
        if (!values.allFinite()) throw Error("functional sample has non-finite values");
    }
};

struct CenteringRecord {
    double y_mean = 0.0;
    Vec x_mean;
    Vec z_mean;
};

/**
 * Response, scalar design, and functional predictors for n subjects.
 * Rows of `z` are the functional samples on the shared `grid`.
 * `always_active` holds zero-based column indices that are never penalized.
 */
struct Dataset {
    Vec y;
    Mat x;
    GridPtr grid;
    Mat z;
    std::vector<Index> always_active;
    CenteringRecord centering;

    Index n() const { return y.size(); }
    Index p() const { return x.cols(); }
    Index m() const { return z.cols(); }

    FunctionalSample sample(Index i) const { return {grid, z.row(i).transpose()}; }

    static Dataset from_samples(Vec y, Mat x, const std::vector<FunctionalSample>& samples,
                                std::vector<Index> always_active = {})
    {
        if (samples.empty()) throw Error("no functional samples");
        const GridPtr grid = samples.front().grid;
        Mat z(static_cast<Index>(samples.size()), grid ? grid->size() : 0);
        for (std::size_t i = 0; i < samples.size(); ++i) {
            samples[i].validate();
            if (!(*samples[i].grid == *grid)) throw Error("functional samples do not share one grid");
            z.row(static_cast<Index>(i)) = samples[i].values.transpose();
        }
        Dataset d{std::move(y), std::move(x), grid, std::move(z), std::move(always_active), {}};
        d.validate();
        return d;
    }

    void validate() const
    {
        const Index n = y.size();
        if (n < 2) throw Error("need at least two observations");
        if (x.rows() != n) throw Error(detail::concat("x has ", x.rows(), " rows, y has ", n));
        if (!grid) throw Error("dataset has no grid");
        if (z.rows() != n) throw Error(detail::concat("z has ", z.rows(), " rows, y has ", n));
        if (z.cols() != grid->size())
            throw Error(detail::concat("z has ", z.cols(), " columns, grid has ", grid->size(), " points"));
        if (!y.allFinite() || !x.allFinite() || !z.allFinite()) throw Error("dataset has non-finite values");
        for (Index j : always_active)
            if (j < 0 || j >= x.cols()) throw Error(detail::concat("always-active index ", j, " out of range"));
    }
};

/// Subtracts means of y, x columns and z pointwise. Composes with an existing record.
inline Dataset center(const Dataset& raw)
{
    raw.validate();
    Dataset out = raw;
    const double ym = raw.y.mean();
    const Vec xm = raw.x.colwise().mean().transpose();
    const Vec zm = raw.z.colwise().mean().transpose();
    out.y.array() -= ym;
    out.x.rowwise() -= xm.transpose();
    out.z.rowwise() -= zm.transpose();

    CenteringRecord rec = raw.centering;
    rec.y_mean += ym;
    rec.x_mean = rec.x_mean.size() == xm.size() ? Vec(rec.x_mean + xm) : xm;
    rec.z_mean = rec.z_mean.size() == zm.size() ? Vec(rec.z_mean + zm) : zm;
    out.centering = std::move(rec);
    return out;
}

/// Result of a sparse partially functional fit at one (lambda, J).
struct FitResult {
    Vec beta;
    std::vector<Index> active_set;  // nonzero coordinates of beta
    std::vector<Index> support;     // final working set A of the solver
    Vec d;                          // final dual vector
    Vec c;                          // representer coefficients
    Vec xi_eval;                    // xi-hat on the dataset grid
    double intercept = 0.0;
    double lambda = 0.0;
    double tau = 0.0;
    int sparsity = 0;               // J
    int iterations = 0;
    double kkt_residual = 0.0;
    double profiled_loss = 0.0;     // (2n)^{-1} r' P r
    double objective = 0.0;         // profiled_loss + tau * ||beta_penalized||_0
    bool converged = false;
    bool cycled = false;
};

/// alpha = ybar - xbar' beta - sum_t w(t) zbar(t) xi(t)
inline double recover_intercept(const FitResult& fit, const CenteringRecord& rec, const Vec& weights)
{
    if (rec.x_mean.size() != fit.beta.size())
        throw Error(detail::concat("centering record has ", rec.x_mean.size(), " covariate means, fit has ",
                                   fit.beta.size(), " coefficients"));
    if (rec.z_mean.size() != fit.xi_eval.size() || weights.size() != fit.xi_eval.size())
        throw Error("centering record does not match the grid of the fit");
    return rec.y_mean - rec.x_mean.dot(fit.beta) - (weights.array() * rec.z_mean.array() * fit.xi_eval.array()).sum();
}

inline std::vector<Index> nonzero_indices(const Vec& v)
{
    std::vector<Index> out;
    for (Index i = 0; i < v.size(); ++i)
        if (v(i) != 0.0) out.push_back(i);
    return out;
}

} // namespace pflr
