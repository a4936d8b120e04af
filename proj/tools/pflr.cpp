// pflr command line: simulate, fit, tune, test, bench, experiment.

#include "pflr/pflr.hpp"

#include <CLI11.hpp>

#include <filesystem>
#include <iostream>

namespace fs = std::filesystem;
using namespace pflr;
using namespace pflr::harness;

namespace {

struct Problem {
    Dataset data;  // centered
    std::vector<std::string> names;
    std::optional<TruthRecord> truth;
    std::optional<Example1Generator> gen;
};

Problem load_problem(const ExperimentConfig& cfg)
{
    Problem pr;
    if (cfg.scenario == Scenario::csv) {
        pr.data = center(load_csv_dataset(cfg, &pr.names));
        return pr;
    }
    pr.gen.emplace(make_generator(cfg, cfg.amplitudes().front()));
    auto [d, t] = pr.gen->generate(data_seed(cfg, 0));
    d.always_active = cfg.solver.always_active;
    d.validate();
    pr.data = std::move(d);
    pr.truth = std::move(t);
    for (Index j = 0; j < pr.data.p(); ++j) pr.names.push_back("x" + std::to_string(j + 1));
    return pr;
}

std::string out_file(const ExperimentConfig& cfg, const std::string& name)
{
    std::error_code ec;
    fs::create_directories(cfg.out, ec);
    if (ec || !fs::is_directory(cfg.out)) throw Error("cannot create output directory '" + cfg.out + "'");
    return (fs::path(cfg.out) / name).string();
}

void write_grid_header(csv::Writer& w, const Grid& grid, const std::string& value)
{
    if (grid.dim() == 1) w.row(std::vector<std::string>{"t", value});
    else w.row(std::vector<std::string>{"t1", "t2", value});
}

void write_fit(const ExperimentConfig& cfg, const Problem& pr, const Estimate& e)
{
    const FitResult fit = full_fit(e, pr.data.p());
    {
        csv::Writer w(out_file(cfg, "beta.csv"));
        w.row(std::vector<std::string>{"name", "index", "beta"});
        for (Index j = 0; j < fit.beta.size(); ++j)
            w.row(std::vector<std::string>{pr.names[static_cast<std::size_t>(j)], std::to_string(j + 1), csv::fmt(fit.beta(j))});
    }
    {
        csv::Writer w(out_file(cfg, "xi.csv"));
        const Grid& grid = *pr.data.grid;
        write_grid_header(w, grid, "xi");
        for (Index k = 0; k < grid.size(); ++k) {
            const auto pt = grid.point(k);
            if (grid.dim() == 1) w.row(std::vector<double>{pt[0], fit.xi_eval(k)});
            else w.row(std::vector<double>{pt[0], pt[1], fit.xi_eval(k)});
        }
    }
    {
        csv::Writer w(out_file(cfg, "coef.csv"));
        w.row(std::vector<std::string>{"name", "index", "estimate", "std_error", "z", "p_value"});
        try {
            SolverConfig defaults = cfg.solver;
            if (!e.kept.empty()) defaults.always_active.clear();
            const auto inf = coef_pvalues(e.data, Smoother(*e.gram, e.fit.lambda), e.fit, std::nullopt, defaults.always_active);
            for (const auto& r : inf.rows) {
                const Index j = e.kept.empty() ? r.index : e.kept[static_cast<std::size_t>(r.index)];
                w.row(std::vector<std::string>{pr.names[static_cast<std::size_t>(j)], std::to_string(j + 1), csv::fmt(r.estimate),
                                               csv::fmt(r.std_error), csv::fmt(r.z), csv::fmt(r.p_value)});
            }
        } catch (const Error& ex) {
            std::cerr << "warning: coefficient p-values unavailable: " << ex.what() << "\n";
        }
    }
    {
        csv::Writer w(out_file(cfg, "fit.csv"));
        w.row(std::vector<std::string>{"key", "value"});
        auto kv = [&](const std::string& k, const std::string& v) { w.row(std::vector<std::string>{k, v}); };
        kv("lambda", csv::fmt(fit.lambda));
        kv("J", std::to_string(fit.sparsity));
        kv("intercept", csv::fmt(fit.intercept));
        kv("tau", csv::fmt(fit.tau));
        kv("profiled_loss", csv::fmt(fit.profiled_loss));
        kv("objective", csv::fmt(fit.objective));
        kv("kkt_residual", csv::fmt(fit.kkt_residual));
        kv("iterations", std::to_string(fit.iterations));
        kv("converged", fit.converged ? "1" : "0");
        kv("cycled", fit.cycled ? "1" : "0");
        kv("nonzeros", std::to_string(fit.active_set.size()));
        kv("screened", e.kept.empty() ? "0" : std::to_string(e.kept.size()));
    }
    if (pr.truth && pr.gen) {
        const Dataset test = pr.gen->raw_dataset(cfg.n_test, test_seed(cfg, 0));
        const MetricsRow m = compute_metrics(fit, *pr.truth, *pr.data.grid, test);
        csv::Writer w(out_file(cfg, "metrics.csv"));
        std::vector<std::string> head(table_columns().begin(), table_columns().end() - 1);
        w.row(head);
        w.row(std::vector<double>{m.fz, m.fn, m.mse_beta, m.mse_xi, m.rmse_xi, m.pmse});
    }
}

int cmd_simulate(const ExperimentConfig& cfg)
{
    if (cfg.scenario == Scenario::csv) throw Error("simulate needs scenario example1 or example2");
    const Example1Generator gen = make_generator(cfg, cfg.amplitudes().front());
    SimulatedSample s;
    const Dataset raw = gen.raw_dataset(cfg.sim.n, data_seed(cfg, 0), &s);
    {
        csv::Writer w(out_file(cfg, "y.csv"));
        w.row(std::vector<std::string>{"y"});
        w.matrix(raw.y);
    }
    {
        csv::Writer w(out_file(cfg, "x.csv"));
        std::vector<std::string> head;
        for (Index j = 0; j < raw.p(); ++j) head.push_back("x" + std::to_string(j + 1));
        w.row(head);
        w.matrix(raw.x);
    }
    csv::Writer(out_file(cfg, "z.csv")).matrix(raw.z);
    {
        csv::Writer w(out_file(cfg, "truth.csv"));
        w.row(std::vector<std::string>{"component", "index", "t", "value"});
        for (Index j = 0; j < gen.beta().size(); ++j)
            w.row(std::vector<std::string>{"beta", std::to_string(j + 1), "NA", csv::fmt(gen.beta()(j))});
        for (Index k = 0; k < gen.xi_coef().size(); ++k)
            w.row(std::vector<std::string>{"xi_coef", std::to_string(k + 1), "NA", csv::fmt(gen.xi_coef()(k))});
        const Vec xg = gen.xi_grid();
        for (Index t = 0; t < xg.size(); ++t)
            w.row(std::vector<std::string>{"xi", std::to_string(t + 1), csv::fmt(gen.grid()->axis(0)(t)), csv::fmt(xg(t))});
        w.row(std::vector<std::string>{"noise_var", "1", "NA", csv::fmt(cfg.sim.noise_sd * cfg.sim.noise_sd)});
        w.row(std::vector<std::string>{"jittered", "1", "NA", gen.jittered() ? "1" : "0"});
    }
    return 0;
}

int cmd_fit(const ExperimentConfig& cfg)
{
    if (!cfg.lambda || !cfg.sparsity) throw Error("fit needs both 'lambda' and 'j'; use 'tune' to select them");
    const Problem pr = load_problem(cfg);
    const Estimate e = estimate(cfg, pr.data);
    write_fit(cfg, pr, e);
    return e.fit.converged ? 0 : 2;
}

int cmd_tune(const ExperimentConfig& base)
{
    ExperimentConfig cfg = base;
    cfg.lambda.reset();
    cfg.sparsity.reset();
    const Problem pr = load_problem(cfg);
    const Estimate e = estimate(cfg, pr.data);
    write_surface(out_file(cfg, "surface.csv"), {{cfg.scenario == Scenario::csv ? 0.0 : cfg.amplitudes().front(), &e.tuning.cells}});
    {
        csv::Writer w(out_file(cfg, "selection.csv"));
        w.row(std::vector<std::string>{"J", "lambda_gcv", "hbic", "selected"});
        for (std::size_t k = 0; k < cfg.grid.js.size(); ++k)
            w.row(std::vector<std::string>{std::to_string(cfg.grid.js[k]), csv::fmt(e.tuning.lambda_for_j[k]),
                                           csv::fmt(e.tuning.hbic_for_j[k]), cfg.grid.js[k] == e.tuning.j_star ? "1" : "0"});
    }
    write_fit(cfg, pr, e);
    int failed = 0;
    for (const auto& c : e.tuning.cells) failed += c.ok ? 0 : 1;
    return failed > 0 ? 2 : 0;
}

int cmd_test(const ExperimentConfig& cfg)
{
    const Problem pr = load_problem(cfg);
    const Estimate e = estimate(cfg, pr.data);
    BootstrapOptions bo;
    bo.seed = boot_seed(cfg, 0, 0);
    bo.threads = cfg.threads;
    SolverConfig defaults = cfg.solver;
    if (!e.kept.empty()) defaults.always_active.clear();
    const TestResult t = test_functional(e.data, *e.gram, e.fit, cfg.calibration, bo, defaults);
    csv::Writer w(out_file(cfg, "test.csv"));
    w.row(std::vector<std::string>{"statistic", "p_value", "reject", "alpha", "calibration", "lambda", "J", "null_loss",
                                   "alt_loss", "bootstrap_failures"});
    w.row(std::vector<std::string>{csv::fmt(t.statistic), csv::fmt(t.p_value), t.p_value <= cfg.alpha ? "1" : "0",
                                   csv::fmt(cfg.alpha), t.calibration.to_string(), csv::fmt(t.lambda),
                                   std::to_string(t.sparsity), csv::fmt(t.null_loss), csv::fmt(t.alt_loss),
                                   std::to_string(t.bootstrap_failures)});
    std::cout << "T = " << csv::fmt(t.statistic) << ", p = " << csv::fmt(t.p_value) << "\n";
    return t.bootstrap_failures > 0 ? 2 : 0;
}

int cmd_bench(const ExperimentConfig& cfg, bool oracle)
{
    if (oracle) {
        csv::Writer w(out_file(cfg, "oracle_agreement.csv"));
        w.row(std::vector<std::string>{"instance", "rho2", "lambda", "fsdar_objective", "oracle_objective", "abs_diff",
                                       "same_support", "kkt_residual", "iterations"});
        int agree = 0;
        for (int i = 0; i < cfg.oracle_instances; ++i) {
            const auto inst = oracle_instance(derive_seed(cfg.seed, static_cast<std::uint64_t>(i), 3), 50, 10, 3, i % 2 ? 0.5 : 0.3);
            const auto c = compare_with_oracle(inst, cfg.kernel);
            const double diff = std::abs(c.fsdar_objective - c.oracle_objective);
            agree += diff <= 1e-8 ? 1 : 0;
            w.row(std::vector<std::string>{std::to_string(i), csv::fmt(inst.rho2), csv::fmt(inst.lambda), csv::fmt(c.fsdar_objective),
                                           csv::fmt(c.oracle_objective), csv::fmt(diff), c.same_support ? "1" : "0",
                                           csv::fmt(c.kkt), std::to_string(c.iterations)});
        }
        std::cout << agree << " of " << cfg.oracle_instances << " instances match the oracle within 1e-8\n";
        return 0;
    }
    csv::Writer w(out_file(cfg, "bench.csv"));
    w.row(std::vector<std::string>{"kind", "n", "p", "m", "seconds", "iterations", "seconds_per_iteration"});
    for (Index p : cfg.bench_ps) {
        const auto t = time_iterations(cfg.sim.n, p);
        w.row(std::vector<std::string>{"fsdar", std::to_string(t.n), std::to_string(t.p), std::to_string(cfg.sim.m),
                                       csv::fmt(t.seconds), std::to_string(t.iterations), csv::fmt(t.per_iteration)});
    }
    for (Index n : cfg.bench_ns) {
        const double s = time_gram(n, cfg.sim.m);
        w.row(std::vector<std::string>{"gram", std::to_string(n), "NA", std::to_string(cfg.sim.m), csv::fmt(s), "NA", "NA"});
    }
    return 0;
}

int cmd_experiment(const ExperimentConfig& cfg)
{
    const auto rep = run_experiment(cfg);
    for (const auto& f : rep.files) std::cout << f << "\n";
    if (rep.failed > 0) std::cerr << rep.failed << " replicate(s) failed; see replicates.csv\n";
    return rep.exit_code;
}

} // namespace

int main(int argc, char** argv)
{
    CLI::App app{"Sparse partially functional linear regression"};
    app.require_subcommand(1);
    std::string config_path;
    std::optional<std::uint64_t> seed;
    std::optional<unsigned> threads;
    std::string out;
    std::vector<std::string> sets;
    app.add_option("--config", config_path, "key = value configuration file")->check(CLI::ExistingFile);
    app.add_option("--seed", seed, "root seed");
    app.add_option("--threads", threads, "worker threads")->check(CLI::PositiveNumber);
    app.add_option("--out", out, "output directory");
    app.add_option("--set", sets, "override a config key (key=value), repeatable");

    auto* sim = app.add_subcommand("simulate", "draw a dataset and write y, x, z and truth CSVs");
    auto* fit = app.add_subcommand("fit", "fit at fixed lambda and J");
    auto* tun = app.add_subcommand("tune", "GCV/HBIC grid search; writes the criterion surface");
    auto* tst = app.add_subcommand("test", "test H0: xi = 0");
    std::string calibration;
    tst->add_option("--calibration", calibration, "bootstrap:B=<n> | chisq:df=<v>");
    auto* bch = app.add_subcommand("bench", "timing probes, or oracle agreement with --oracle");
    bool oracle = false;
    bch->add_flag("--oracle", oracle, "compare against exhaustive best-subset search");
    auto* exp = app.add_subcommand("experiment", "Monte Carlo replication study");

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e);
        return code == 0 ? 0 : 1;
    }

    try {
        ExperimentConfig cfg = config_path.empty() ? ExperimentConfig{} : load_config(config_path);
        for (const auto& s : sets) apply_text(cfg, s, "--set");
        if (seed) cfg.seed = *seed;
        if (threads) cfg.threads = *threads;
        if (!out.empty()) cfg.out = out;
        if (!calibration.empty()) cfg.calibration = Calibration::parse(calibration);
        cfg.validate();

        if (*sim) return cmd_simulate(cfg);
        if (*fit) return cmd_fit(cfg);
        if (*tun) return cmd_tune(cfg);
        if (*tst) return cmd_test(cfg);
        if (*bch) return cmd_bench(cfg, oracle);
        if (*exp) return cmd_experiment(cfg);
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    }
    return 1;
}
