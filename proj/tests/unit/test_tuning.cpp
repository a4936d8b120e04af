#include "pflr/pflr.hpp"

#include <catch_amalgamated.hpp>

using namespace pflr;
using Catch::Approx;

namespace {

Mat orthonormal_design(Index n, Index p, std::uint64_t seed)
{
    std::mt19937_64 rng(seed);
    std::normal_distribution<double> nd;
    Mat a(n, p);
    for (Index i = 0; i < n; ++i)
        for (Index j = 0; j < p; ++j) a(i, j) = nd(rng);
    Eigen::HouseholderQR<Mat> qr(a);
    return std::sqrt(static_cast<double>(n)) * Mat(qr.householderQ() * Mat::Identity(n, p));
}

std::pair<Dataset, GramMatrix> scalar_only(const Mat& x, const Vec& y)
{
    const Index n = x.rows(), m = 10;
    auto grid = std::make_shared<Grid>(Grid::uniform(m));
    Dataset d{y, x, grid, Mat::Zero(n, m), {}, {}};
    return {d, GramMatrix::from_sigma(Mat::Zero(n, n), Mat::Zero(n, m), grid->fingerprint())};
}

Vec five_signals(Index p)
{
    Vec b = Vec::Zero(p);
    b.head(5) << 3.0, 1.5, 1.0, 2.5, 2.0;
    return b;
}

} // namespace

TEST_CASE("HBIC arithmetic", "[test_tuning]")
{
    // rss / n = 1, so only the penalty remains
    REQUIRE(hbic_value(200, 150, 200.0, 5) == Approx(0.20886699090505417).epsilon(1e-12));
    REQUIRE(hbic_value(200, 150, 200.0 * std::exp(1.0), 0) == Approx(1.0).epsilon(1e-14));
    REQUIRE_THROWS_AS(hbic_value(200, 150, 0.0, 5), SaturatedFitError);
    REQUIRE_THROWS_AS(hbic_value(2, 150, 1.0, 1), Error);
}

TEST_CASE("HBIC of a saturated fit throws", "[test_tuning]")
{
    const Index n = 30, p = 8;
    const Mat x = orthonormal_design(n, p, 1);
    const auto [d, g] = scalar_only(x, x * five_signals(p));
    SolverConfig cfg;
    cfg.sparsity = 5;
    cfg.lambda = 0.1;
    const FitResult fit = fsdar_fit(d, g, cfg);
    REQUIRE_THROWS_AS(hbic(d, g, fit), SaturatedFitError);
}

TEST_CASE("GCV matches its definition", "[test_tuning]")
{
    const auto inst = harness::oracle_instance(3);
    const GramMatrix g = gram(KernelSpec{}, inst.data);
    const Smoother s(g, 1e-3);
    const Vec r = inst.data.y;
    const double n = static_cast<double>(r.size());
    const double direct = n * (s.matrix() * r).squaredNorm() / std::pow(s.matrix().trace(), 2);
    REQUIRE(gcv(s, r) == Approx(direct).epsilon(1e-12));
}

TEST_CASE("tuning grid validation", "[test_tuning]")
{
    const TuningGrid d = TuningGrid::defaults();
    REQUIRE(d.lambdas.size() == 50);
    REQUIRE(d.js.size() == 50);
    REQUIRE(d.lambdas.front() == 1e-5);
    REQUIRE(d.lambdas.back() == Approx(0.1));
    TuningGrid bad = d;
    bad.lambdas = {0.1, 0.01};
    REQUIRE_THROWS_AS(bad.validate(), Error);
    bad = d;
    bad.js = {0, 1};
    REQUIRE_THROWS_AS(bad.validate(), Error);
    bad.js.clear();
    REQUIRE_THROWS_AS(bad.validate(), Error);
}

TEST_CASE("noiseless orthonormal design selects J = 5", "[test_tuning]")
{
    const Index n = 200, p = 150;
    const Mat x = orthonormal_design(n, p, 10);
    const auto [d, g] = scalar_only(x, x * five_signals(p));
    TuningGrid grid;
    grid.lambdas = {1e-3, 1e-2};
    for (int j = 1; j <= 10; ++j) grid.js.push_back(j);
    const TuningReport rep = tune(d, g, grid, SolverConfig{});
    REQUIRE(rep.j_star == 5);
    REQUIRE(rep.lambda_star == 1e-3);  // GCV ties (P = I) go to the smaller lambda
    REQUIRE(rep.fit.active_set == std::vector<Index>{0, 1, 2, 3, 4});
    REQUIRE(rep.cells.size() == 20);
    REQUIRE(rep.cells[4].saturated);
    REQUIRE(!rep.cells[3].saturated);
    // exhaustive HBIC over the grid, recomputed from the cells
    int best = 0;
    for (int j = 1; j < 10; ++j)
        if (rep.hbic_for_j[static_cast<std::size_t>(j)] < rep.hbic_for_j[static_cast<std::size_t>(best)]) best = j;
    REQUIRE(grid.js[static_cast<std::size_t>(best)] == 5);
}

TEST_CASE("failed cells are recorded and skipped", "[test_tuning]")
{
    const Index n = 30, p = 6;
    const Mat x = orthonormal_design(n, p, 4);
    Vec y = x.col(0) * 2.0;
    std::mt19937_64 rng(1);
    std::normal_distribution<double> nd;
    for (Index i = 0; i < n; ++i) y(i) += 0.3 * nd(rng);
    const auto [d, g] = scalar_only(x, y);
    TuningGrid grid;
    grid.lambdas = {1e-2};
    grid.js = {1, 2, 7};
    const TuningReport rep = tune(d, g, grid, SolverConfig{});
    REQUIRE(rep.cells[0].ok);
    REQUIRE(!rep.cells[2].ok);
    REQUIRE(!rep.cells[2].error.empty());
    REQUIRE(std::isnan(rep.lambda_for_j[2]));
    REQUIRE(rep.j_star == 1);
    const Mat path = solution_path(d, g, 1e-2, grid.js, SolverConfig{});
    REQUIRE(std::isnan(path(2, 0)));
    REQUIRE(path(0, 0) == Approx(rep.fit.beta(0)));
}

TEST_CASE("tuning is identical across thread counts", "[test_tuning]")
{
    Example1Config cfg;
    cfg.n = 80;
    cfg.p = 40;
    const auto [d, truth] = gen_example1(cfg);
    const GramMatrix g = gram(KernelSpec{}, d);
    TuningGrid grid;
    grid.lambdas = TuningGrid::linspace(1e-4, 0.05, 6);
    grid.js = {1, 3, 5, 7, 9};
    TuneOptions one, three;
    three.threads = 3;
    const auto a = tune(d, g, grid, SolverConfig{}, one);
    const auto b = tune(d, g, grid, SolverConfig{}, three);
    REQUIRE(a.cells.size() == b.cells.size());
    for (std::size_t k = 0; k < a.cells.size(); ++k) {
        REQUIRE(a.cells[k].gcv == b.cells[k].gcv);
        REQUIRE(a.cells[k].hbic == b.cells[k].hbic);
    }
    REQUIRE(a.lambda_star == b.lambda_star);
    REQUIRE(a.j_star == b.j_star);
    REQUIRE(a.fit.beta == b.fit.beta);
}
