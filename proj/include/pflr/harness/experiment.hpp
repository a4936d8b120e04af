#pragma once

// Monte Carlo runner: generate -> (screen) -> tune -> fit -> test -> metrics,
// then per-replicate, aggregate, surface, path and power CSVs.

#include "pflr/harness/config.hpp"
#include "pflr/harness/csv.hpp"
#include "pflr/harness/metrics.hpp"
#include "pflr/harness/screen.hpp"

#include <chrono>
#include <filesystem>

namespace pflr::harness {

inline const std::vector<std::string>& table_columns()
{
    static const std::vector<std::string> cols{"FZ", "FN", "MSE_β", "MSE_ξ", "RMSE_ξ", "PMSE", "Time(s)"};
    return cols;
}

inline GridPtr make_grid(const std::vector<Index>& shape, Index m)
{
    if (shape.empty()) return std::make_shared<Grid>(Grid::uniform(m));
    if (shape.size() == 1) {
        if (shape[0] != m) throw Error(pflr::detail::concat("grid_shape ", shape[0], " does not match ", m, " z columns"));
        return std::make_shared<Grid>(Grid::uniform(m));
    }
    if (shape[0] * shape[1] != m)
        throw Error(pflr::detail::concat("grid_shape ", shape[0], "x", shape[1], " does not match ", m, " z columns"));
    return std::make_shared<Grid>(Grid::uniform2d(shape[0], shape[1]));
}

/// Uncentered dataset from y.csv, x.csv, z.csv.
inline Dataset load_csv_dataset(const ExperimentConfig& cfg, std::vector<std::string>* names = nullptr)
{
    const auto y = csv::read(cfg.y_path);
    const auto x = csv::read(cfg.x_path);
    const auto z = csv::read(cfg.z_path);
    if (y.values.cols() != 1) throw Error("y.csv must have exactly one column");
    Dataset d{y.values.col(0), x.values, make_grid(cfg.grid_shape, z.values.cols()), z.values, cfg.solver.always_active, {}};
    d.validate();
    if (names) {
        *names = x.header;
        if (names->empty())
            for (Index j = 0; j < d.p(); ++j) names->push_back("x" + std::to_string(j + 1));
    }
    return d;
}

inline std::uint64_t data_seed(const ExperimentConfig& cfg, int r) { return derive_seed(cfg.seed, static_cast<std::uint64_t>(r), 0); }
inline std::uint64_t test_seed(const ExperimentConfig& cfg, int r) { return derive_seed(cfg.seed, static_cast<std::uint64_t>(r), 1); }
inline std::uint64_t boot_seed(const ExperimentConfig& cfg, int r, std::size_t bi)
{
    return derive_seed(cfg.seed, static_cast<std::uint64_t>(r), 2 + bi);
}

inline Example1Generator make_generator(const ExperimentConfig& cfg, double b)
{
    Example1Config sim = cfg.sim;
    sim.amplitude = b;
    return Example1Generator(sim);
}

/// Fit outcome mapped back to all p columns when screening was used.
struct Estimate {
    TuningReport tuning;      // cells empty when lambda and J were fixed
    FitResult fit;
    Dataset data;             // the (possibly screened) centered dataset the fit used
    std::vector<Index> kept;  // screened columns; empty when no screening
    std::optional<GramMatrix> gram;
};

inline FitResult expand_fit(const FitResult& f, const std::vector<Index>& kept, Index p)
{
    FitResult out = f;
    out.beta = Vec::Zero(p);
    out.d = Vec::Zero(p);
    for (std::size_t k = 0; k < kept.size(); ++k) {
        out.beta(kept[k]) = f.beta(static_cast<Index>(k));
        out.d(kept[k]) = f.d(static_cast<Index>(k));
    }
    out.active_set.clear();
    for (Index i : f.active_set) out.active_set.push_back(kept[static_cast<std::size_t>(i)]);
    out.support.clear();
    for (Index i : f.support) out.support.push_back(kept[static_cast<std::size_t>(i)]);
    return out;
}

/// Tunes (or uses fixed lambda, J) on a centered dataset.
inline Estimate estimate(const ExperimentConfig& cfg, const Dataset& centered)
{
    Estimate e;
    e.data = centered;
    if (cfg.keep_top > 0 && cfg.keep_top < centered.p()) {
        e.kept = screen(centered, cfg.keep_top, centered.always_active);
        std::vector<Index> cols = e.kept;
        cols.insert(cols.end(), centered.always_active.begin(), centered.always_active.end());
        std::sort(cols.begin(), cols.end());
        e.kept = cols;
        e.data = select_columns(centered, cols);
    }
    e.gram.emplace(gram(cfg.kernel, e.data));
    SolverConfig defaults = cfg.solver;
    if (!e.kept.empty()) defaults.always_active.clear();  // already remapped into data.always_active
    if (cfg.lambda && cfg.sparsity) {
        defaults.lambda = *cfg.lambda;
        defaults.sparsity = *cfg.sparsity;
        e.fit = fsdar_fit(e.data, *e.gram, defaults);
        e.tuning.lambda_star = *cfg.lambda;
        e.tuning.j_star = *cfg.sparsity;
        e.tuning.fit = e.fit;
    } else {
        TuningGrid grid = cfg.grid;
        if (cfg.lambda) grid.lambdas = {*cfg.lambda};
        if (cfg.sparsity) grid.js = {*cfg.sparsity};
        TuneOptions opt;
        opt.p_total = centered.p();
        e.tuning = tune(e.data, *e.gram, grid, defaults, opt);
        e.fit = e.tuning.fit;
    }
    return e;
}

inline FitResult full_fit(const Estimate& e, Index p) { return e.kept.empty() ? e.fit : expand_fit(e.fit, e.kept, p); }

struct ReplicateRecord {
    double b = 0.0;
    int replicate = 0;
    std::uint64_t seed = 0;
    bool ok = false;
    std::string error;
    MetricsRow metrics;
    bool tested = false;
    double statistic = std::numeric_limits<double>::quiet_NaN();
    double p_value = std::numeric_limits<double>::quiet_NaN();
    bool reject = false;
    int bootstrap_failures = 0;
    // replicate 0 only
    std::vector<TuningCell> surface;
    Mat path;
    std::vector<int> path_js;
};

inline ReplicateRecord run_replicate(const ExperimentConfig& cfg, const Example1Generator& gen, std::size_t bi, int r)
{
    ReplicateRecord rec;
    rec.b = cfg.amplitudes()[bi];
    rec.replicate = r;
    rec.seed = data_seed(cfg, r);
    try {
        auto [data, truth] = gen.generate(rec.seed);
        data.always_active = cfg.solver.always_active;
        data.validate();
        const auto t0 = std::chrono::steady_clock::now();
        Estimate e = estimate(cfg, data);
        const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
        const FitResult fit = full_fit(e, data.p());
        const Dataset test = gen.raw_dataset(cfg.n_test, test_seed(cfg, r));
        rec.metrics = compute_metrics(fit, truth, *data.grid, test);
        rec.metrics.wall_time_seconds = cfg.timing ? secs : std::numeric_limits<double>::quiet_NaN();
        if (cfg.test_enabled()) {
            BootstrapOptions bo;
            bo.seed = boot_seed(cfg, r, bi);
            SolverConfig defaults = cfg.solver;
            if (!e.kept.empty()) defaults.always_active.clear();
            const TestResult t = test_functional(e.data, *e.gram, e.fit, cfg.calibration, bo, defaults);
            rec.tested = true;
            rec.statistic = t.statistic;
            rec.p_value = t.p_value;
            rec.reject = t.p_value <= cfg.alpha;
            rec.bootstrap_failures = t.bootstrap_failures;
        }
        if (r == 0) {
            rec.surface = e.tuning.cells;
            rec.path_js = cfg.sparsity ? std::vector<int>{*cfg.sparsity} : cfg.grid.js;
            SolverConfig defaults = cfg.solver;
            if (!e.kept.empty()) defaults.always_active.clear();
            const Mat sub = solution_path(e.data, *e.gram, e.fit.lambda, rec.path_js, defaults);
            if (e.kept.empty()) {
                rec.path = sub;
            } else {
                rec.path = Mat::Zero(sub.rows(), data.p());
                for (std::size_t k = 0; k < e.kept.size(); ++k) rec.path.col(e.kept[k]) = sub.col(static_cast<Index>(k));
            }
        }
        rec.ok = true;
    } catch (const std::exception& ex) {
        rec.ok = false;
        rec.error = ex.what();
    }
    return rec;
}

struct Aggregate {
    double b = 0.0;
    int ok = 0;
    int failed = 0;
    std::vector<double> mean, sd;  // in table_columns() order
    int tested = 0;
    int rejections = 0;
};

inline std::vector<double> metric_values(const MetricsRow& m)
{
    return {m.fz, m.fn, m.mse_beta, m.mse_xi, m.rmse_xi, m.pmse, m.wall_time_seconds};
}

/// Mean and sample sd over finite values; NaN when none (sd NaN with a single value).
inline std::pair<double, double> mean_sd(const std::vector<double>& v)
{
    double s = 0.0;
    int k = 0;
    for (double x : v)
        if (std::isfinite(x)) {
            s += x;
            ++k;
        }
    const double nan = std::numeric_limits<double>::quiet_NaN();
    if (k == 0) return {nan, nan};
    const double mean = s / k;
    if (k == 1) return {mean, nan};
    double ss = 0.0;
    for (double x : v)
        if (std::isfinite(x)) ss += (x - mean) * (x - mean);
    return {mean, std::sqrt(ss / (k - 1))};
}

inline Aggregate aggregate(const std::vector<ReplicateRecord>& recs, double b)
{
    Aggregate a;
    a.b = b;
    const std::size_t nm = table_columns().size();
    std::vector<std::vector<double>> cols(nm);
    for (const auto& r : recs) {
        if (r.b != b) continue;
        if (!r.ok) {
            ++a.failed;
            continue;
        }
        ++a.ok;
        const auto v = metric_values(r.metrics);
        for (std::size_t k = 0; k < nm; ++k) cols[k].push_back(v[k]);
        if (r.tested) {
            ++a.tested;
            a.rejections += r.reject ? 1 : 0;
        }
    }
    for (std::size_t k = 0; k < nm; ++k) {
        const auto [m, s] = mean_sd(cols[k]);
        a.mean.push_back(m);
        a.sd.push_back(s);
    }
    return a;
}

struct ExperimentReport {
    std::vector<ReplicateRecord> records;
    std::vector<Aggregate> aggregates;
    int failed = 0;
    int exit_code = 0;  // 0 ok, 2 partial failure
    std::vector<std::string> files;
};

inline std::string cell_mean_sd(double m, double s)
{
    if (!std::isfinite(m)) return "NA";
    return csv::fmt_fixed(m) + "(" + (std::isfinite(s) ? csv::fmt_fixed(s) : std::string("NA")) + ")";
}

namespace detail {

inline void write_replicates(const std::string& path, const std::vector<ReplicateRecord>& recs)
{
    csv::Writer w(path);
    std::vector<std::string> head{"B", "replicate", "seed", "status"};
    for (const auto& c : table_columns()) head.push_back(c);
    for (const char* c : {"lambda", "J", "converged", "cycled", "T", "p_value", "reject", "bootstrap_failures", "error"})
        head.push_back(c);
    w.row(head);
    for (const auto& r : recs) {
        std::vector<std::string> row{csv::fmt(r.b), std::to_string(r.replicate), std::to_string(r.seed), r.ok ? "ok" : "failed"};
        const double nan = std::numeric_limits<double>::quiet_NaN();
        for (double v : metric_values(r.metrics)) row.push_back(r.ok ? csv::fmt(v) : csv::fmt(nan));
        row.push_back(r.ok ? csv::fmt(r.metrics.lambda) : "NA");
        row.push_back(r.ok ? std::to_string(r.metrics.sparsity) : "NA");
        row.push_back(r.ok ? (r.metrics.converged ? "1" : "0") : "NA");
        row.push_back(r.ok ? (r.metrics.cycled ? "1" : "0") : "NA");
        row.push_back(csv::fmt(r.statistic));
        row.push_back(csv::fmt(r.p_value));
        row.push_back(r.tested ? (r.reject ? "1" : "0") : "NA");
        row.push_back(std::to_string(r.bootstrap_failures));
        row.push_back(r.error);
        w.row(row);
    }
}

} // namespace detail

inline void write_surface(const std::string& path, const std::vector<std::pair<double, const std::vector<TuningCell>*>>& surfaces)
{
    csv::Writer w(path);
    w.row(std::vector<std::string>{"B", "lambda", "J", "ok", "saturated", "gcv", "hbic", "profiled_loss", "objective", "iterations", "converged"});
    for (const auto& [b, cells] : surfaces)
        for (const auto& c : *cells)
            w.row(std::vector<std::string>{csv::fmt(b), csv::fmt(c.lambda), std::to_string(c.sparsity), c.ok ? "1" : "0",
                                           c.saturated ? "1" : "0", csv::fmt(c.gcv), csv::fmt(c.hbic),
                                           csv::fmt(c.profiled_loss), csv::fmt(c.objective),
                                           std::to_string(c.iterations), c.converged ? "1" : "0"});
}

/**
 * Runs every (B, replicate) task on a pool of cfg.threads workers and writes
 * the CSVs into cfg.out. Throws when more than failure_threshold of the
 * replicates fail (after writing replicates.csv).
 */
inline ExperimentReport run_experiment(const ExperimentConfig& cfg)
{
    cfg.validate();
    if (cfg.scenario == Scenario::csv) throw Error("experiment needs a simulated scenario (example1 or example2)");
    namespace fs = std::filesystem;
    std::error_code ec;
    fs::create_directories(cfg.out, ec);
    if (ec || !fs::is_directory(cfg.out)) throw Error("cannot create output directory '" + cfg.out + "'");

    const auto amps = cfg.amplitudes();
    const std::size_t nb = amps.size();
    const std::size_t reps = static_cast<std::size_t>(cfg.replicates);
    std::vector<Example1Generator> gens;
    for (double b : amps) gens.push_back(make_generator(cfg, b));

    ExperimentReport rep;
    rep.records.resize(nb * reps);
    parallel_for(nb * reps, cfg.threads, [&](std::size_t task) {
        const std::size_t bi = task / reps;
        rep.records[task] = run_replicate(cfg, gens[bi], bi, static_cast<int>(task % reps));
    });

    const fs::path out(cfg.out);
    auto file = [&](const char* name) {
        rep.files.push_back((out / name).string());
        return rep.files.back();
    };
    detail::write_replicates(file("replicates.csv"), rep.records);
    for (const auto& r : rep.records) rep.failed += r.ok ? 0 : 1;
    if (static_cast<double>(rep.failed) > cfg.failure_threshold * static_cast<double>(rep.records.size())) {
        std::string first;
        for (const auto& r : rep.records)
            if (!r.ok) {
                first = r.error;
                break;
            }
        throw Error(pflr::detail::concat(rep.failed, " of ", rep.records.size(), " replicates failed (first: ", first, ")"));
    }
    rep.exit_code = rep.failed > 0 ? 2 : 0;

    for (double b : amps) rep.aggregates.push_back(aggregate(rep.records, b));

    {
        csv::Writer w(file("table.csv"));
        w.row(table_columns());
        for (const auto& a : rep.aggregates) {
            std::vector<std::string> row;
            for (std::size_t k = 0; k < a.mean.size(); ++k) row.push_back(cell_mean_sd(a.mean[k], a.sd[k]));
            w.row(row);
        }
    }
    {
        csv::Writer w(file("summary.csv"));
        std::vector<std::string> head{"B", "n", "p", "replicates", "ok", "failed"};
        for (const char* k : {"FZ", "FN", "MSE_beta", "MSE_xi", "RMSE_xi", "PMSE", "Time"}) {
            head.push_back(std::string("mean_") + k);
            head.push_back(std::string("sd_") + k);
        }
        w.row(head);
        for (const auto& a : rep.aggregates) {
            std::vector<std::string> row{csv::fmt(a.b), std::to_string(cfg.sim.n), std::to_string(cfg.sim.p),
                                         std::to_string(cfg.replicates), std::to_string(a.ok), std::to_string(a.failed)};
            for (std::size_t k = 0; k < a.mean.size(); ++k) {
                row.push_back(csv::fmt(a.mean[k]));
                row.push_back(csv::fmt(a.sd[k]));
            }
            w.row(row);
        }
    }
    std::vector<std::pair<double, const std::vector<TuningCell>*>> surfaces;
    for (const auto& r : rep.records)
        if (r.replicate == 0 && r.ok) surfaces.emplace_back(r.b, &r.surface);
    write_surface(file("surface.csv"), surfaces);
    {
        csv::Writer w(file("solution_path.csv"));
        std::vector<std::string> head{"B", "lambda", "J"};
        for (Index j = 0; j < cfg.sim.p; ++j) head.push_back("beta_" + std::to_string(j + 1));
        w.row(head);
        for (const auto& r : rep.records) {
            if (r.replicate != 0 || !r.ok) continue;
            for (Index k = 0; k < r.path.rows(); ++k) {
                std::vector<std::string> row{csv::fmt(r.b), csv::fmt(r.metrics.lambda), std::to_string(r.path_js[static_cast<std::size_t>(k)])};
                for (Index j = 0; j < r.path.cols(); ++j) row.push_back(csv::fmt(r.path(k, j)));
                w.row(row);
            }
        }
    }
    if (cfg.test_enabled()) {
        csv::Writer w(file("power.csv"));
        w.row(std::vector<std::string>{"B", "n", "p", "tested", "rejections", "rate", "alpha", "calibration"});
        for (const auto& a : rep.aggregates)
            w.row(std::vector<std::string>{csv::fmt(a.b), std::to_string(cfg.sim.n), std::to_string(cfg.sim.p),
                                           std::to_string(a.tested), std::to_string(a.rejections),
                                           a.tested ? csv::fmt(static_cast<double>(a.rejections) / a.tested) : "NA",
                                           csv::fmt(cfg.alpha), cfg.calibration.to_string()});
    }
    return rep;
}

} // namespace pflr::harness
