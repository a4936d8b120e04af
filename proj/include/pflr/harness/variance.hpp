#pragma once

// Shares of Var(y) carried by groups of fitted contributions.

#include "pflr/core.hpp"

namespace pflr::harness {

struct VarianceGroup {
    std::string name;
    std::vector<Index> columns;
    bool functional = false;  // the int Z xi-hat term
};

struct VarianceShare {
    std::string name;
    double proportion = 0.0;
};

inline double empirical_variance(const Vec& v)
{
    const Index n = v.size();
    if (n < 2) return 0.0;
    return (v.array() - v.mean()).square().sum() / static_cast<double>(n - 1);
}

/// Var(X_G beta_G) / Var(y) per group; the functional group uses Var(int Z_i xi-hat).
inline std::vector<VarianceShare> variance_explained(const Dataset& data, const FitResult& fit,
                                                     const std::vector<VarianceGroup>& groups)
{
    const double vy = empirical_variance(data.y);
    if (!(vy > 0.0)) throw Error("response has zero variance");
    if (fit.beta.size() != data.p() || fit.xi_eval.size() != data.m()) throw Error("fit does not match the dataset");
    std::vector<char> used(static_cast<std::size_t>(data.p()), 0);
    bool functional_used = false;
    std::vector<VarianceShare> out;
    for (const auto& g : groups) {
        Vec contrib = Vec::Zero(data.n());
        if (g.functional) {
            if (functional_used) throw Error("functional term assigned to two groups");
            functional_used = true;
            contrib += data.z * data.grid->weights().cwiseProduct(fit.xi_eval);
        }
        for (Index j : g.columns) {
            if (j < 0 || j >= data.p()) throw Error(pflr::detail::concat("group '", g.name, "' has index ", j, " out of range"));
            if (used[static_cast<std::size_t>(j)]) throw Error(pflr::detail::concat("column ", j, " assigned to two groups"));
            used[static_cast<std::size_t>(j)] = 1;
            contrib += data.x.col(j) * fit.beta(j);
        }
        out.push_back({g.name, empirical_variance(contrib) / vy});
    }
    return out;
}

} // namespace pflr::harness
