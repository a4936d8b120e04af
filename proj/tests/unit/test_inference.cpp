#include "pflr/pflr.hpp"

#include <catch_amalgamated.hpp>

using namespace pflr;
using Catch::Approx;

TEST_CASE("calibration parsing", "[test_inference]")
{
    const auto b = Calibration::parse("bootstrap:B=500");
    REQUIRE(b.kind == Calibration::Kind::bootstrap);
    REQUIRE(b.replicates == 500);
    REQUIRE(b.to_string() == "bootstrap:B=500");
    const auto c = Calibration::parse("chisq:df=3.5");
    REQUIRE(c.kind == Calibration::Kind::chisq);
    REQUIRE(c.df == 3.5);
    REQUIRE(Calibration::parse("bootstrap").replicates == 500);
    REQUIRE_THROWS_AS(Calibration::parse("bootstrap:B=abc"), Error);
    REQUIRE_THROWS_AS(Calibration::parse("chisq:df=-1"), Error);
    REQUIRE_THROWS_AS(Calibration::parse("permutation"), Error);
}

TEST_CASE("chi-square tail", "[test_inference]")
{
    // reference values from an independent implementation
    REQUIRE(chisq_p_value(3.841458820694124, 1.0) == Approx(0.05).epsilon(1e-10));
    REQUIRE(chisq_p_value(10.0, 4.0) == Approx(0.04042768199451279).epsilon(1e-10));
    REQUIRE(chisq_p_value(0.0, 2.0) == 1.0);
    REQUIRE(chisq_p_value(-1e-12, 2.0) == 1.0);
}

TEST_CASE("bootstrap p-value counts ties as exceedances", "[test_inference]")
{
    const std::vector<double> s{1.0, 2.0, 3.0, 4.0};
    REQUIRE(bootstrap_p_value(s, 2.5) == Approx(0.6));
    REQUIRE(bootstrap_p_value(s, 2.0) == Approx(0.8));
    REQUIRE(bootstrap_p_value(s, 10.0) == Approx(0.2));
    REQUIRE(bootstrap_p_value(s, -1.0) == Approx(1.0));
}

namespace {

struct Small {
    Dataset data;
    GramMatrix g;
    FitResult fit;
};

Small small_problem(double amplitude, std::uint64_t seed)
{
    Example1Config cfg;
    cfg.n = 100;
    cfg.p = 20;
    cfg.amplitude = amplitude;
    cfg.seed = seed;
    auto [d, truth] = gen_example1(cfg);
    GramMatrix g = gram(KernelSpec{}, d);
    SolverConfig sc;
    sc.sparsity = 5;
    sc.lambda = 2e-3;
    FitResult fit = fsdar_fit(d, g, sc);
    return {std::move(d), std::move(g), std::move(fit)};
}

} // namespace

TEST_CASE("statistic is nonnegative and the bootstrap is reproducible", "[test_inference]")
{
    for (std::uint64_t seed : {1u, 2u, 3u}) {
        const Small s = small_problem(0.0, seed);
        BootstrapOptions o1, o2;
        o1.seed = o2.seed = 42;
        o2.threads = 3;
        const TestResult a = test_functional(s.data, s.g, s.fit, Calibration::bootstrap(100), o1);
        const TestResult b = test_functional(s.data, s.g, s.fit, Calibration::bootstrap(100), o2);
        REQUIRE(a.statistic >= -1e-9);
        REQUIRE(a.statistic == b.statistic);
        REQUIRE(a.p_value == b.p_value);
        REQUIRE(a.bootstrap_statistics == b.bootstrap_statistics);
        REQUIRE(a.p_value > 0.0);
        REQUIRE(a.p_value <= 1.0);
        for (double t : a.bootstrap_statistics) REQUIRE(t >= -1e-9);
    }
}

TEST_CASE("strong functional signal is detected", "[test_inference]")
{
    const Small s = small_problem(4.0, 9);
    const TestResult t = test_functional(s.data, s.g, s.fit, Calibration::bootstrap(100));
    REQUIRE(t.p_value == Approx(1.0 / 101.0));
    const TestResult c = test_functional(s.data, s.g, s.fit, Calibration::chisq(5.0));
    REQUIRE(c.p_value < 1e-6);
}

TEST_CASE("bootstrap needs enough replicates", "[test_inference]")
{
    const Small s = small_problem(0.0, 4);
    REQUIRE_THROWS_AS(test_functional(s.data, s.g, s.fit, Calibration::bootstrap(50)), Error);
}

TEST_CASE("coefficient standard errors on an orthonormal design", "[test_inference]")
{
    const Index n = 100, p = 6, m = 10;
    std::mt19937_64 rng(6);
    std::normal_distribution<double> nd;
    Mat a(n, p);
    for (Index i = 0; i < n; ++i)
        for (Index j = 0; j < p; ++j) a(i, j) = nd(rng);
    Eigen::HouseholderQR<Mat> qr(a);
    const Mat x = std::sqrt(double(n)) * Mat(qr.householderQ() * Mat::Identity(n, p));
    Vec y = 2.0 * x.col(0) - x.col(3);
    for (Index i = 0; i < n; ++i) y(i) += nd(rng);
    auto grid = std::make_shared<Grid>(Grid::uniform(m));
    Dataset d{y, x, grid, Mat::Zero(n, m), {5}, {}};
    const GramMatrix g = GramMatrix::from_sigma(Mat::Zero(n, n), Mat::Zero(n, m), grid->fingerprint());
    SolverConfig sc;
    sc.sparsity = 2;
    sc.lambda = 0.5;
    const FitResult fit = fsdar_fit(d, g, sc);
    const Smoother s(g, sc.lambda);
    const auto inf = coef_pvalues(d, s, fit, 1.0);
    REQUIRE(inf.rows.size() == 3);  // 0, 3 and the forced 5
    for (const auto& r : inf.rows) {
        REQUIRE(r.std_error == Approx(0.1).epsilon(1e-10));
        REQUIRE(r.estimate == Approx(x.col(r.index).dot(y) / n).epsilon(1e-10));
        REQUIRE(r.p_value == Approx(std::erfc(std::abs(r.estimate / 0.1) / std::sqrt(2.0))).epsilon(1e-12));
    }
    REQUIRE(inf.rows[0].p_value < 1e-10);
    // residual variance estimate with P = I: rss / (n - |A|)
    const auto est = coef_pvalues(d, s, fit);
    REQUIRE(est.df_residual == Approx(n - 3.0));
    REQUIRE(est.sigma2 == Approx((y - x * fit.beta).squaredNorm() / (n - 3.0)));
}
