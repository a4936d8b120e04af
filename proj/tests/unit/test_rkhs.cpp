#include "pflr/pflr.hpp"

#include <catch_amalgamated.hpp>

using namespace pflr;
using Catch::Approx;

namespace {

Mat random_curves(Index n, Index m, std::uint64_t seed)
{
    std::mt19937_64 rng(seed);
    std::normal_distribution<double> nd(0.0, 1.0);
    const Grid g = Grid::uniform(m);
    Mat z(n, m);
    for (Index i = 0; i < n; ++i) {
        const double a = nd(rng), b = nd(rng), c = nd(rng);
        for (Index t = 0; t < m; ++t) {
            const double u = g.axis(0)(t);
            z(i, t) = a + b * std::sin(3.0 * u) + c * u * u + 0.1 * nd(rng);
        }
    }
    return z;
}

} // namespace

TEST_CASE("sobolev2 kernel values", "[test_rkhs]")
{
    const Kernel1D k;
    // hand-evaluated Bernoulli polynomial expressions
    REQUIRE(k(0.0, 0.0) == Approx(151.0 / 120.0).epsilon(1e-14));
    REQUIRE(k(0.3, 0.7) == Approx(0.9594583333333333).epsilon(1e-13));
    REQUIRE(k(0.25, 1.0) == Approx(0.8740559895833333).epsilon(1e-13));
    REQUIRE(k(0.3, 0.7) == Approx(k(0.7, 0.3)));
    REQUIRE_THROWS_AS(k(-0.1, 0.5), Error);
}

TEST_CASE("kernel parsing round-trips", "[test_rkhs]")
{
    REQUIRE(KernelSpec::parse("sobolev2").to_string() == "sobolev2");
    REQUIRE(KernelSpec::parse("brownian").first.kind == KernelKind::brownian);
    const auto g = KernelSpec::parse("gaussian:0.5");
    REQUIRE(g.first.kind == KernelKind::gaussian);
    REQUIRE(g.first.bandwidth == 0.5);
    REQUIRE(g.first(0.0, 0.5) == Approx(std::exp(-0.5)));
    REQUIRE_THROWS_AS(KernelSpec::parse("gaussian:-1"), Error);
    REQUIRE_THROWS_AS(KernelSpec::parse("gaussian:abc"), Error);
    REQUIRE_THROWS_AS(KernelSpec::parse("matern"), Error);
    REQUIRE(KernelSpec::parse("tensor:sobolev2,brownian").is_tensor());
}

TEST_CASE("brownian Gram of constant curves is one third", "[test_rkhs]")
{
    const Grid g = Grid::uniform(100);
    const Mat z = Mat::Ones(2, 100);
    const GramMatrix gm = gram(KernelSpec::parse("brownian"), g, z);
    REQUIRE((gm.sigma().array() - 1.0 / 3.0).abs().maxCoeff() <= 1e-4);
    // trapezoid value of the double integral, computed independently
    REQUIRE(gm.sigma()(0, 1) == Approx(0.33332483079957836).epsilon(1e-12));
}

TEST_CASE("Gram matrix is symmetric PSD and matches a direct double sum", "[test_rkhs]")
{
    const Index n = 6, m = 25;
    const Grid g = Grid::uniform(m);
    const Mat z = random_curves(n, m, 5);
    const Kernel1D k;
    const GramMatrix gm = gram(k, g, z);
    REQUIRE(gm.min_eigenvalue() > -1e-10);
    for (Index i = 0; i < n; ++i)
        for (Index j = 0; j < n; ++j) {
            double s = 0.0;
            for (Index a = 0; a < m; ++a)
                for (Index b = 0; b < m; ++b)
                    s += g.weights()(a) * g.weights()(b) * z(i, a) * z(j, b) * k(g.axis(0)(a), g.axis(0)(b));
            REQUIRE(std::abs(gm.sigma()(i, j) - s) < 1e-12);
        }
}

TEST_CASE("tensor kernel on a 2d grid matches direct evaluation", "[test_rkhs]")
{
    const Grid g = Grid::uniform2d(5, 4);
    std::mt19937_64 rng(2);
    std::normal_distribution<double> nd;
    Mat z(3, g.size());
    for (Index i = 0; i < z.rows(); ++i)
        for (Index j = 0; j < z.cols(); ++j) z(i, j) = nd(rng);
    const auto spec = KernelSpec::parse("tensor:sobolev2,gaussian:0.3");
    const Mat sigma = gram_sigma(spec, g, z);
    for (Index i = 0; i < 3; ++i)
        for (Index j = 0; j < 3; ++j) {
            double s = 0.0;
            for (Index a = 0; a < g.size(); ++a)
                for (Index b = 0; b < g.size(); ++b)
                    s += g.weights()(a) * g.weights()(b) * z(i, a) * z(j, b) * spec.eval(g.point(a), g.point(b));
            REQUIRE(std::abs(sigma(i, j) - s) < 1e-12);
        }
    REQUIRE_THROWS_AS(gram_sigma(spec, Grid::uniform(5), Mat::Ones(2, 5)), Error);
}

TEST_CASE("PSD repair and rejection", "[test_rkhs]")
{
    Mat s = Mat::Identity(3, 3);
    s(2, 2) = -1e-12;
    const GramMatrix ok = GramMatrix::from_sigma(s);
    REQUIRE(ok.repaired());
    Eigen::SelfAdjointEigenSolver<Mat> es(ok.sigma());
    REQUIRE(es.eigenvalues().minCoeff() >= -1e-15);
    s(2, 2) = -0.5;
    REQUIRE_THROWS_AS(GramMatrix::from_sigma(s), Error);
    Mat a = Mat::Identity(2, 2);
    a(0, 1) = 0.3;
    REQUIRE_THROWS_AS(GramMatrix::from_sigma(a), Error);
}

TEST_CASE("smoother agrees with the spectral construction", "[test_rkhs]")
{
    for (std::uint64_t seed = 1; seed <= 5; ++seed) {
        const Index n = 30;
        const Grid g = Grid::uniform(40);
        const GramMatrix gm = gram(Kernel1D{}, g, random_curves(n, 40, seed));
        for (double lambda : {1e-5, 1e-3, 0.1}) {
            const Smoother s(gm, lambda);
            const Mat ps = oracle::spectral_smoother(gm, lambda, n);
            REQUIRE((s.matrix() - ps).cwiseAbs().maxCoeff() <= 1e-8);
            Eigen::SelfAdjointEigenSolver<Mat> e1(gm.sigma(), Eigen::EigenvaluesOnly);
            Eigen::SelfAdjointEigenSolver<Mat> e2(s.matrix(), Eigen::EigenvaluesOnly);
            Vec expect = (n * lambda / (e1.eigenvalues().array() + n * lambda)).matrix();
            std::sort(expect.data(), expect.data() + n);
            REQUIRE((e2.eigenvalues() - expect).cwiseAbs().maxCoeff() <= 1e-8);
            REQUIRE(s.trace() <= n + 1e-12);
            REQUIRE(s.trace() > 0.0);
        }
    }
    REQUIRE_THROWS_AS(Smoother(Mat::Identity(2, 2), 0.0), Error);
}

TEST_CASE("representer solve residual", "[test_rkhs]")
{
    const Index n = 25;
    const Grid g = Grid::uniform(30);
    const GramMatrix gm = gram(Kernel1D{}, g, random_curves(n, 30, 9));
    std::mt19937_64 rng(1);
    std::normal_distribution<double> nd;
    Vec r(n);
    for (Index i = 0; i < n; ++i) r(i) = nd(rng);
    const double lambda = 1e-3;
    const Vec c = representer_coeffs(gm, lambda, r);
    const Vec res = (gm.sigma() + n * lambda * Mat::Identity(n, n)) * c - r;
    REQUIRE(res.cwiseAbs().maxCoeff() <= 1e-10);
    // Sigma c + P r = r
    const Smoother s(gm, lambda);
    REQUIRE((gm.sigma() * c + s.matrix() * r - r).cwiseAbs().maxCoeff() <= 1e-10);
}

TEST_CASE("xi evaluation agrees with the representers", "[test_rkhs]")
{
    const Index n = 8, m = 20;
    const Grid g = Grid::uniform(m);
    const Mat z = random_curves(n, m, 4);
    const Kernel1D k;
    const GramMatrix gm = gram(k, g, z);
    Vec c = Vec::LinSpaced(n, -1.0, 1.0);
    const std::vector<double> pts(g.axis(0).data(), g.axis(0).data() + m);
    const Vec direct = eval_xi(k, g, z, c, std::span<const double>(pts));
    REQUIRE((direct - gm.representers().transpose() * c).cwiseAbs().maxCoeff() < 1e-12);
}

TEST_CASE("RKHS norm under a constant kernel", "[test_rkhs]")
{
    // K = 1: xi-hat = sum_i c_i int Z_i is a constant with ||xi||_H^2 = (sum_i c_i int Z_i)^2.
    struct Constant {
        double operator()(double, double) const { return 1.0; }
    };
    const Index n = 5, m = 15;
    const Grid g = Grid::uniform(m);
    const Mat z = random_curves(n, m, 8);
    const GramMatrix gm = gram(Constant{}, g, z);
    Vec c(n);
    c << 0.3, -1.0, 0.5, 2.0, -0.2;
    const double s = c.dot(z * g.weights());
    REQUIRE(xi_rkhs_norm_sq(gm, c) == Approx(s * s).epsilon(1e-12));
}
