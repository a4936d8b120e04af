#pragma once

// key = value run configuration. Unknown keys are rejected.

#include "pflr/inference.hpp"
#include "pflr/rkhs.hpp"
#include "pflr/simgen.hpp"
#include "pflr/tuning.hpp"

#include <fstream>
#include <map>

namespace pflr::harness {

enum class Scenario { example1, example2, csv };

inline const char* to_string(Scenario s)
{
    switch (s) {
    case Scenario::example1: return "example1";
    case Scenario::example2: return "example2";
    default: return "csv";
    }
}

struct ExperimentConfig {
    Scenario scenario = Scenario::example1;
    int replicates = 1;
    Example1Config sim;
    std::vector<double> b_values;     // functional amplitudes; empty: scenario default
    KernelSpec kernel;
    TuningGrid grid = TuningGrid::defaults();
    std::optional<double> lambda;      // fixed lambda for fit/test (skips tuning when set with j)
    std::optional<int> sparsity;
    SolverConfig solver;
    Calibration calibration = Calibration::bootstrap(500);
    std::optional<bool> run_test;      // default: on for example2 only
    double alpha = 0.05;
    Index n_test = 200;
    std::uint64_t seed = 1;
    unsigned threads = 1;
    double failure_threshold = 0.2;
    bool timing = true;
    std::string y_path, x_path, z_path;
    std::vector<Index> grid_shape;     // empty: z columns on a 1D grid
    Index keep_top = 0;                // 0: no screening
    std::string out = "out";
    int oracle_instances = 20;
    std::vector<Index> bench_ps{1500, 3000};
    std::vector<Index> bench_ns{100, 200};

    /// Example 1 uses amplitude 4; Example 2 sweeps B over {0, 0.05, 0.1}.
    std::vector<double> amplitudes() const
    {
        if (!b_values.empty()) return b_values;
        if (scenario == Scenario::example2) return {0.0, 0.05, 0.1};
        return {4.0};
    }

    bool test_enabled() const { return run_test.value_or(scenario == Scenario::example2); }

    void validate() const
    {
        if (replicates < 1) throw Error("replicates must be at least 1");
        for (double b : b_values)
            if (!(b >= 0.0)) throw Error("b_values must be nonnegative");
        for (std::size_t k = 1; k < b_values.size(); ++k)
            for (std::size_t l = 0; l < k; ++l)
                if (b_values[k] == b_values[l]) throw Error("b_values must be distinct");
        if (scenario != Scenario::csv) sim.validate();
        if (scenario == Scenario::csv && (y_path.empty() || x_path.empty() || z_path.empty()))
            throw Error("csv scenario needs y, x and z paths");
        kernel.first.validate();
        if (kernel.second) kernel.second->validate();
        grid.validate();
        if (!(alpha > 0.0 && alpha < 1.0)) throw Error("alpha must lie in (0, 1)");
        if (!(failure_threshold >= 0.0 && failure_threshold <= 1.0)) throw Error("failure_threshold must lie in [0, 1]");
        if (n_test < 1) throw Error("n_test must be positive");
        if (threads < 1) throw Error("threads must be positive");
        if (solver.max_iter < 1) throw Error("max_iter must be positive");
        if (grid_shape.size() > 2) throw Error("grid_shape has at most two axes");
    }
};

namespace detail {

inline std::string trim(const std::string& s)
{
    const auto a = s.find_first_not_of(" \t\r\n");
    if (a == std::string::npos) return {};
    const auto b = s.find_last_not_of(" \t\r\n");
    return s.substr(a, b - a + 1);
}

inline std::vector<std::string> split_list(const std::string& s, char sep = ',')
{
    std::vector<std::string> out;
    std::stringstream ss(s);
    std::string tok;
    while (std::getline(ss, tok, sep)) {
        tok = trim(tok);
        if (!tok.empty()) out.push_back(tok);
    }
    return out;
}

inline double to_double(const std::string& key, const std::string& v)
{
    try {
        std::size_t used = 0;
        const double d = std::stod(v, &used);
        if (used == v.size()) return d;
    } catch (const std::exception&) {
    }
    throw Error("config key '" + key + "': expected a number, got '" + v + "'");
}

inline long long to_int(const std::string& key, const std::string& v)
{
    long long out = 0;
    const auto [ptr, ec] = std::from_chars(v.data(), v.data() + v.size(), out);
    if (ec != std::errc() || ptr != v.data() + v.size())
        throw Error("config key '" + key + "': expected an integer, got '" + v + "'");
    return out;
}

inline bool to_bool(const std::string& key, const std::string& v)
{
    if (v == "on" || v == "true" || v == "1" || v == "yes") return true;
    if (v == "off" || v == "false" || v == "0" || v == "no") return false;
    throw Error("config key '" + key + "': expected on/off, got '" + v + "'");
}

// linspace:lo,hi,count | logspace:lo,hi,count | v1,v2,...
inline std::vector<double> parse_reals(const std::string& key, const std::string& v)
{
    for (const char* tag : {"linspace:", "logspace:"}) {
        const std::string t(tag);
        if (v.rfind(t, 0) != 0) continue;
        auto parts = split_list(v.substr(t.size()));
        if (parts.size() != 3) throw Error("config key '" + key + "': " + t + " needs lo,hi,count");
        const double lo = to_double(key, parts[0]), hi = to_double(key, parts[1]);
        const int count = static_cast<int>(to_int(key, parts[2]));
        if (t == "linspace:") return TuningGrid::linspace(lo, hi, count);
        if (!(lo > 0.0 && hi > 0.0)) throw Error("config key '" + key + "': logspace bounds must be positive");
        auto e = TuningGrid::linspace(std::log10(lo), std::log10(hi), count);
        for (double& x : e) x = std::pow(10.0, x);
        return e;
    }
    std::vector<double> out;
    for (const auto& s : split_list(v)) out.push_back(to_double(key, s));
    if (out.empty()) throw Error("config key '" + key + "' is empty");
    return out;
}

// a:b | v1,v2,...
inline std::vector<long long> parse_ints(const std::string& key, const std::string& v)
{
    std::vector<long long> out;
    for (const auto& s : split_list(v)) {
        const auto colon = s.find(':');
        if (colon == std::string::npos) {
            out.push_back(to_int(key, s));
            continue;
        }
        const long long a = to_int(key, trim(s.substr(0, colon))), b = to_int(key, trim(s.substr(colon + 1)));
        if (b < a) throw Error("config key '" + key + "': empty range '" + s + "'");
        for (long long k = a; k <= b; ++k) out.push_back(k);
    }
    if (out.empty()) throw Error("config key '" + key + "' is empty");
    return out;
}

} // namespace detail

inline const std::vector<std::string>& config_keys()
{
    static const std::vector<std::string> keys{
        "scenario", "replicates", "n", "p", "c0", "rho1", "rho2", "m", "noise_sd", "variance_mode", "b", "b_values",
        "seed", "kernel", "lambdas", "js", "lambda", "j", "max_iter", "always_active", "calibration", "run_test",
        "alpha", "n_test", "threads", "failure_threshold", "timing", "y", "x", "z", "grid_shape", "keep_top", "out",
        "oracle_instances", "bench_ps", "bench_ns"};
    return keys;
}

/// Applies one key. always_active is 1-based here, zero-based in the library.
inline void apply(ExperimentConfig& c, const std::string& key, const std::string& raw)
{
    using namespace detail;
    const std::string v = trim(raw);
    if (key == "scenario") {
        if (v == "example1") c.scenario = Scenario::example1;
        else if (v == "example2") c.scenario = Scenario::example2;
        else if (v == "csv") c.scenario = Scenario::csv;
        else throw Error("scenario must be example1, example2 or csv, got '" + v + "'");
    } else if (key == "replicates") c.replicates = static_cast<int>(to_int(key, v));
    else if (key == "n") c.sim.n = to_int(key, v);
    else if (key == "p") c.sim.p = to_int(key, v);
    else if (key == "c0") c.sim.c0 = to_double(key, v);
    else if (key == "rho1") c.sim.rho1 = to_double(key, v);
    else if (key == "rho2") c.sim.rho2 = to_double(key, v);
    else if (key == "m") c.sim.m = to_int(key, v);
    else if (key == "noise_sd") c.sim.noise_sd = to_double(key, v);
    else if (key == "variance_mode") c.sim.variance_mode = parse_variance_mode(v);
    else if (key == "b") c.b_values = {to_double(key, v)};
    else if (key == "b_values") c.b_values = parse_reals(key, v);
    else if (key == "seed") c.seed = static_cast<std::uint64_t>(to_int(key, v));
    else if (key == "kernel") c.kernel = KernelSpec::parse(v);
    else if (key == "lambdas") c.grid.lambdas = parse_reals(key, v);
    else if (key == "js") {
        c.grid.js.clear();
        for (long long j : parse_ints(key, v)) c.grid.js.push_back(static_cast<int>(j));
    } else if (key == "lambda") c.lambda = to_double(key, v);
    else if (key == "j") c.sparsity = static_cast<int>(to_int(key, v));
    else if (key == "max_iter") c.solver.max_iter = static_cast<int>(to_int(key, v));
    else if (key == "always_active") {
        c.solver.always_active.clear();
        if (v != "none")
            for (long long j : parse_ints(key, v)) {
                if (j < 1) throw Error("always_active indices are 1-based");
                c.solver.always_active.push_back(static_cast<Index>(j - 1));
            }
    } else if (key == "calibration") c.calibration = Calibration::parse(v);
    else if (key == "run_test") {
        if (v == "auto") c.run_test.reset();
        else c.run_test = to_bool(key, v);
    } else if (key == "alpha") c.alpha = to_double(key, v);
    else if (key == "n_test") c.n_test = to_int(key, v);
    else if (key == "threads") {
        const long long t = to_int(key, v);
        if (t < 1) throw Error("threads must be positive");
        c.threads = static_cast<unsigned>(t);
    } else if (key == "failure_threshold") c.failure_threshold = to_double(key, v);
    else if (key == "timing") c.timing = to_bool(key, v);
    else if (key == "y") c.y_path = v;
    else if (key == "x") c.x_path = v;
    else if (key == "z") c.z_path = v;
    else if (key == "grid_shape") {
        c.grid_shape.clear();
        for (const auto& s : split_list(v, 'x')) c.grid_shape.push_back(to_int(key, s));
    } else if (key == "keep_top") c.keep_top = to_int(key, v);
    else if (key == "out") c.out = v;
    else if (key == "oracle_instances") c.oracle_instances = static_cast<int>(to_int(key, v));
    else if (key == "bench_ps") {
        c.bench_ps.clear();
        for (long long p : parse_ints(key, v)) c.bench_ps.push_back(p);
    } else if (key == "bench_ns") {
        c.bench_ns.clear();
        for (long long n : parse_ints(key, v)) c.bench_ns.push_back(n);
    } else throw Error("unknown config key '" + key + "'");
}

/// Parses "key = value" lines; '#' starts a comment.
inline void apply_text(ExperimentConfig& c, const std::string& text, const std::string& origin = "config")
{
    std::stringstream ss(text);
    std::string line;
    int lineno = 0;
    while (std::getline(ss, line)) {
        ++lineno;
        if (const auto h = line.find('#'); h != std::string::npos) line.erase(h);
        line = detail::trim(line);
        if (line.empty()) continue;
        const auto eq = line.find('=');
        if (eq == std::string::npos)
            throw Error(pflr::detail::concat(origin, ":", lineno, ": expected key = value"));
        const std::string key = detail::trim(line.substr(0, eq));
        try {
            apply(c, key, line.substr(eq + 1));
        } catch (const Error& e) {
            throw Error(pflr::detail::concat(origin, ":", lineno, ": ", e.what()));
        }
    }
}

inline ExperimentConfig load_config(const std::string& path)
{
    std::ifstream in(path);
    if (!in) throw Error("cannot open config '" + path + "'");
    std::stringstream ss;
    ss << in.rdbuf();
    ExperimentConfig c;
    apply_text(c, ss.str(), path);
    return c;
}

} // namespace pflr::harness
