#pragma once

// Reproducing kernels, the Gram matrix of double kernel integrals between
// functional samples, the profiling smoother P = n*lambda*(Sigma + n*lambda*I)^{-1},
// and evaluation of the representer expansion of xi-hat.

#include "pflr/core.hpp"

#include <Eigen/Cholesky>
#include <Eigen/Eigenvalues>

#include <concepts>
#include <optional>
#include <span>
#include <string>
#include <string_view>

namespace pflr {

template <class K>
concept Kernel1DLike = requires(const K& k, double s, double t) {
    { k(s, t) } -> std::convertible_to<double>;
};

enum class KernelKind { sobolev2, gaussian, brownian };

/// A kernel on one axis of [0, 1].
struct Kernel1D {
    KernelKind kind = KernelKind::sobolev2;
    double bandwidth = 0.2;

    void validate() const
    {
        if (kind == KernelKind::gaussian && !(bandwidth > 0.0))
            throw Error(detail::concat("gaussian kernel bandwidth must be positive, got ", bandwidth));
    }

    double operator()(double s, double t) const
    {
        switch (kind) {
        case KernelKind::sobolev2: {
            check_unit(s);
            check_unit(t);
            return 1.0 + k1(s) * k1(t) + k2(s) * k2(t) - k4(std::abs(s - t));
        }
        case KernelKind::gaussian: {
            const double u = (s - t) / bandwidth;
            return std::exp(-0.5 * u * u);
        }
        case KernelKind::brownian:
            check_unit(s);
            check_unit(t);
            return std::min(s, t);
        }
        return 0.0;
    }

    std::string to_string() const
    {
        switch (kind) {
        case KernelKind::sobolev2: return "sobolev2";
        case KernelKind::brownian: return "brownian";
        case KernelKind::gaussian: {
            std::ostringstream os;
            os << "gaussian:" << bandwidth;
            return os.str();
        }
        }
        return {};
    }

    static Kernel1D parse(std::string_view text)
    {
        if (text == "sobolev2") return {KernelKind::sobolev2, 0.2};
        if (text == "brownian") return {KernelKind::brownian, 0.2};
        if (text == "gaussian") return {KernelKind::gaussian, 0.2};
        if (text.starts_with("gaussian:")) {
            const std::string num(text.substr(9));
            std::size_t used = 0;
            double bw = 0.0;
            try {
                bw = std::stod(num, &used);
            } catch (const std::exception&) {
                used = 0;
            }
            if (used != num.size() || num.empty()) throw Error(detail::concat("bad gaussian bandwidth '", num, "'"));
            Kernel1D k{KernelKind::gaussian, bw};
            k.validate();
            return k;
        }
        throw Error(detail::concat("unknown kernel '", text, "'"));
    }

    // Scaled Bernoulli polynomials.
    static double k1(double u) { return u - 0.5; }
    static double k2(double u) { return 0.5 * (k1(u) * k1(u) - 1.0 / 12.0); }
    static double k4(double u)
    {
        const double a = k1(u) * k1(u);
        return (a * a - 0.5 * a + 7.0 / 240.0) / 24.0;
    }

private:
    static void check_unit(double u)
    {
        constexpr double slack = 1e-12;
        if (!(u >= -slack && u <= 1.0 + slack))
            throw Error(detail::concat("point ", u, " outside [0, 1]"));
    }
};

/**
 * Kernel choice for the functional coefficient. Supplying a second axis kernel
 * gives the tensor product K((s1,s2),(t1,t2)) = K1(s1,t1) K2(s2,t2),
 * which is only valid on two-dimensional grids.
 */
struct KernelSpec {
    Kernel1D first;
    std::optional<Kernel1D> second;

    bool is_tensor() const { return second.has_value(); }

    double operator()(double s, double t) const
    {
        if (is_tensor()) throw Error("tensor-product kernel needs two-dimensional points");
        return first(s, t);
    }

    double eval(const std::array<double, 2>& s, const std::array<double, 2>& t) const
    {
        if (!is_tensor()) return first(s[0], t[0]);
        return first(s[0], t[0]) * (*second)(s[1], t[1]);
    }

    void check_grid(const Grid& grid) const
    {
        if (is_tensor() && grid.dim() != 2) throw Error("tensor-product kernel requires a two-dimensional grid");
        if (!is_tensor() && grid.dim() != 1) throw Error("two-dimensional grids require a tensor-product kernel");
    }

    std::string to_string() const
    {
        if (!is_tensor()) return first.to_string();
        return "tensor:" + first.to_string() + "," + second->to_string();
    }

    /// sobolev2 | gaussian[:sigma] | brownian | tensor:<k1>,<k2>
    static KernelSpec parse(std::string_view text)
    {
        if (text.starts_with("tensor:")) {
            const auto body = text.substr(7);
            const auto comma = body.find(',');
            if (comma == std::string_view::npos) throw Error("tensor kernel needs two comma-separated factors");
            return {Kernel1D::parse(body.substr(0, comma)), Kernel1D::parse(body.substr(comma + 1))};
        }
        return {Kernel1D::parse(text), std::nullopt};
    }
};

template <Kernel1DLike K>
Mat kernel_matrix(const K& k, const Vec& a, const Vec& b)
{
    Mat out(a.size(), b.size());
    for (Index i = 0; i < a.size(); ++i)
        for (Index j = 0; j < b.size(); ++j) out(i, j) = k(a(i), b(j));
    return out;
}

/**
 * Row i of the result is (K Z_i)(t) = sum_s K(t, s) w(s) Z_i(s) on the grid:
 * the representer basis function of sample i. Costs O(n m^2).
 */
template <Kernel1DLike K>
Mat smooth_samples(const K& k, const Grid& grid, const Mat& z)
{
    if (grid.dim() != 1) throw Error("one-dimensional kernel used on a two-dimensional grid");
    if (z.cols() != grid.size()) throw Error("sample length does not match grid");
    const Vec& t = grid.axis(0);
    const Mat kg = kernel_matrix(k, t, t);
    const Mat wz = z * grid.weights().asDiagonal();
    return wz * kg;  // kg symmetric
}

inline Mat smooth_samples(const KernelSpec& spec, const Grid& grid, const Mat& z)
{
    spec.check_grid(grid);
    if (!spec.is_tensor()) return smooth_samples(spec.first, grid, z);
    if (z.cols() != grid.size()) throw Error("sample length does not match grid");

    // (K1 (x) K2) acting on a row-major flattened m1 x m2 surface S is K1 S K2.
    const Index m1 = grid.axis_size(0);
    const Index m2 = grid.axis_size(1);
    const Mat k1 = kernel_matrix(spec.first, grid.axis(0), grid.axis(0));
    const Mat k2 = kernel_matrix(*spec.second, grid.axis(1), grid.axis(1));
    Mat out(z.rows(), z.cols());
    using RowMat = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
    for (Index i = 0; i < z.rows(); ++i) {
        RowMat s(m1, m2);
        for (Index a = 0; a < m1; ++a)
            for (Index b = 0; b < m2; ++b) s(a, b) = z(i, a * m2 + b) * grid.weights()(a * m2 + b);
        const RowMat ks = k1 * s * k2;
        out.row(i) = Eigen::Map<const Eigen::RowVectorXd>(ks.data(), m1 * m2);
    }
    return out;
}

/// Sigma_{ii'} = sum_s w(s) Z_i(s) (K Z_{i'})(s), symmetrized. O(n m^2 + n^2 m).
template <class K>
Mat gram_sigma(const K& kernel, const Grid& grid, const Mat& z, Mat* representers = nullptr)
{
    Mat kz = smooth_samples(kernel, grid, z);
    Mat sigma = (z * grid.weights().asDiagonal()) * kz.transpose();
    sigma = 0.5 * (sigma + sigma.transpose()).eval();
    if (representers) *representers = std::move(kz);
    return sigma;
}

/**
 * Gram matrix of the functional predictors together with the representer
 * basis functions evaluated on the grid, so xi-hat on the grid is
 * representers' * c.
 */
class GramMatrix {
public:
    GramMatrix() = default;

    /// Validates symmetry and positive semi-definiteness; clamps round-off negativity.
    static GramMatrix from_sigma(Mat sigma, Mat representers = {}, std::uint64_t fingerprint = 0)
    {
        if (sigma.rows() != sigma.cols()) throw Error("Gram matrix must be square");
        if (!sigma.allFinite()) throw Error("Gram matrix has non-finite entries");
        const double scale = std::max(1.0, sigma.cwiseAbs().maxCoeff());
        if ((sigma - sigma.transpose()).cwiseAbs().maxCoeff() > 1e-10 * scale)
            throw Error("Gram matrix is not symmetric");
        sigma = 0.5 * (sigma + sigma.transpose()).eval();

        GramMatrix g;
        if (sigma.rows() > 0) {
            Eigen::SelfAdjointEigenSolver<Mat> es(sigma, Eigen::EigenvaluesOnly);
            if (es.info() != Eigen::Success) throw Error("eigenvalue computation for Gram matrix failed");
            const double min_eig = es.eigenvalues().minCoeff();
            const double norm = es.eigenvalues().cwiseAbs().maxCoeff();
            g.min_eigenvalue_ = min_eig;
            if (min_eig < 0.0) {
                if (min_eig < -1e-8 * norm)
                    throw Error(detail::concat("Gram matrix is not positive semi-definite (min eigenvalue ",
                                               min_eig, ", norm ", norm, ")"));
                sigma.diagonal().array() += -min_eig;
                g.repaired_ = true;
            }
        }
        g.sigma_ = std::move(sigma);
        g.representers_ = std::move(representers);
        g.fingerprint_ = fingerprint;
        return g;
    }

    const Mat& sigma() const { return sigma_; }
    const Mat& representers() const { return representers_; }
    Index n() const { return sigma_.rows(); }
    std::uint64_t grid_fingerprint() const { return fingerprint_; }
    double min_eigenvalue() const { return min_eigenvalue_; }
    bool repaired() const { return repaired_; }

private:
    Mat sigma_;
    Mat representers_;
    std::uint64_t fingerprint_ = 0;
    double min_eigenvalue_ = 0.0;
    bool repaired_ = false;
};

template <class K>
GramMatrix gram(const K& kernel, const Grid& grid, const Mat& z)
{
    if (z.rows() < 1) throw Error("Gram matrix needs at least one sample");
    Mat reps;
    Mat sigma = gram_sigma(kernel, grid, z, &reps);
    return GramMatrix::from_sigma(std::move(sigma), std::move(reps), grid.fingerprint());
}

inline GramMatrix gram(const KernelSpec& spec, const Dataset& data) { return gram(spec, *data.grid, data.z); }

inline GramMatrix gram(const KernelSpec& spec, const std::vector<FunctionalSample>& samples)
{
    if (samples.empty()) throw Error("Gram matrix needs at least one sample");
    const Grid& grid = *samples.front().grid;
    Mat z(static_cast<Index>(samples.size()), grid.size());
    for (std::size_t i = 0; i < samples.size(); ++i) {
        samples[i].validate();
        if (!(*samples[i].grid == grid)) throw Error("functional samples do not share one grid");
        z.row(static_cast<Index>(i)) = samples[i].values.transpose();
    }
    return gram(spec, grid, z);
}

/// P = n*lambda*(Sigma + n*lambda*I)^{-1}, with the Cholesky factor kept for solves.
class Smoother {
public:
    Smoother(const Mat& sigma, double lambda) : lambda_(lambda), n_(sigma.rows())
    {
        if (!(lambda > 0.0) || !std::isfinite(lambda))
            throw Error(detail::concat("smoothing parameter must be positive, got ", lambda));
        shift_ = static_cast<double>(n_) * lambda;
        Mat a = sigma;
        a.diagonal().array() += shift_;
        llt_.compute(a);
        if (llt_.info() != Eigen::Success)
            throw Error("Sigma + n*lambda*I is not positive definite; Gram matrix is not PSD");
        p_ = shift_ * llt_.solve(Mat::Identity(n_, n_));
        p_ = 0.5 * (p_ + p_.transpose()).eval();
        trace_ = p_.trace();
    }

    Smoother(const GramMatrix& g, double lambda) : Smoother(g.sigma(), lambda) {}

    double lambda() const { return lambda_; }
    Index n() const { return n_; }
    double shift() const { return shift_; }
    const Mat& matrix() const { return p_; }
    double trace() const { return trace_; }

    /// Solves (Sigma + n*lambda*I) c = rhs.
    Vec solve(const Vec& rhs) const
    {
        if (rhs.size() != n_) throw Error("right-hand side length does not match smoother");
        return llt_.solve(rhs);
    }

    /// P rebuilt from the cached factor.
    Mat rebuild() const { return shift_ * llt_.solve(Mat::Identity(n_, n_)); }

private:
    double lambda_;
    Index n_;
    double shift_ = 0.0;
    Eigen::LLT<Mat> llt_;
    Mat p_;
    double trace_ = 0.0;
};

inline Smoother smoother(const GramMatrix& g, double lambda) { return Smoother(g, lambda); }

/// c = (Sigma + n*lambda*I)^{-1} residual.
inline Vec representer_coeffs(const Smoother& s, const Vec& residual) { return s.solve(residual); }

inline Vec representer_coeffs(const GramMatrix& g, double lambda, const Vec& residual)
{
    return Smoother(g, lambda).solve(residual);
}

/// xi-hat(t) = sum_i c_i (K Z_i)(t) at arbitrary one-dimensional points.
template <Kernel1DLike K>
Vec eval_xi(const K& kernel, const Grid& grid, const Mat& z, const Vec& c, std::span<const double> points)
{
    if (c.size() != z.rows()) throw Error("representer coefficient length does not match sample count");
    if (grid.dim() != 1) throw Error("one-dimensional evaluation on a two-dimensional grid");
    const Vec v = grid.weights().cwiseProduct(z.transpose() * c);
    const Vec& t = grid.axis(0);
    Vec out(static_cast<Index>(points.size()));
    for (std::size_t q = 0; q < points.size(); ++q) {
        double acc = 0.0;
        for (Index s = 0; s < t.size(); ++s) acc += kernel(points[q], t(s)) * v(s);
        out(static_cast<Index>(q)) = acc;
    }
    return out;
}

inline Vec eval_xi(const KernelSpec& spec, const Grid& grid, const Mat& z, const Vec& c,
                   std::span<const std::array<double, 2>> points)
{
    spec.check_grid(grid);
    if (c.size() != z.rows()) throw Error("representer coefficient length does not match sample count");
    const Vec v = grid.weights().cwiseProduct(z.transpose() * c);
    Vec out(static_cast<Index>(points.size()));
    for (std::size_t q = 0; q < points.size(); ++q) {
        double acc = 0.0;
        for (Index s = 0; s < grid.size(); ++s) acc += spec.eval(points[q], grid.point(s)) * v(s);
        out(static_cast<Index>(q)) = acc;
    }
    return out;
}

/// ||xi-hat||_H^2 = c' Sigma c.
inline double xi_rkhs_norm_sq(const GramMatrix& g, const Vec& c)
{
    if (c.size() != g.n()) throw Error("representer coefficient length does not match Gram matrix");
    return std::max(0.0, c.dot(g.sigma() * c));
}

} // namespace pflr
