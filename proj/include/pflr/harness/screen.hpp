#pragma once

// Marginal correlation screening after partialling out control covariates.

#include "pflr/core.hpp"

#include <Eigen/QR>

#include <numeric>

namespace pflr::harness {

/// Non-control columns, most correlated with y (given intercept + controls) first; ties by index.
inline std::vector<Index> screen_ranking(const Dataset& data, const std::vector<Index>& controls = {})
{
    const Index n = data.n(), p = data.p();
    std::vector<char> is_control(static_cast<std::size_t>(p), 0);
    for (Index j : controls) {
        if (j < 0 || j >= p) throw Error(pflr::detail::concat("control index ", j, " out of range"));
        is_control[static_cast<std::size_t>(j)] = 1;
    }
    Mat c(n, static_cast<Index>(controls.size()) + 1);
    c.col(0).setOnes();
    for (std::size_t k = 0; k < controls.size(); ++k) c.col(static_cast<Index>(k) + 1) = data.x.col(controls[k]);
    Eigen::ColPivHouseholderQR<Mat> qr(c);
    qr.setThreshold(1e-10);
    if (qr.rank() < c.cols()) throw Error("screening controls are collinear");

    const Vec ry = data.y - c * qr.solve(data.y);
    const Mat rx = data.x - c * qr.solve(data.x);
    const double ny = ry.norm();
    std::vector<double> score(static_cast<std::size_t>(p), 0.0);
    std::vector<Index> order;
    for (Index j = 0; j < p; ++j) {
        if (is_control[static_cast<std::size_t>(j)]) continue;
        const double nx = rx.col(j).norm();
        score[static_cast<std::size_t>(j)] = (nx > 0.0 && ny > 0.0) ? std::abs(rx.col(j).dot(ry)) / (nx * ny) : 0.0;
        order.push_back(j);
    }
    std::stable_sort(order.begin(), order.end(), [&](Index a, Index b) {
        return score[static_cast<std::size_t>(a)] > score[static_cast<std::size_t>(b)];
    });
    return order;
}

/// Top keep_top columns in ascending index order. Controls are never candidates.
inline std::vector<Index> screen(const Dataset& data, Index keep_top, const std::vector<Index>& controls = {})
{
    if (keep_top < 0 || keep_top > data.p())
        throw Error(pflr::detail::concat("keep_top must lie in [0, ", data.p(), "]"));
    auto order = screen_ranking(data, controls);
    if (keep_top > static_cast<Index>(order.size()))
        throw Error(pflr::detail::concat("keep_top ", keep_top, " exceeds the ", order.size(), " non-control columns"));
    order.resize(static_cast<std::size_t>(keep_top));
    std::sort(order.begin(), order.end());
    return order;
}

/// Restricts a dataset to the given columns; always-active indices are remapped (dropped if not kept).
inline Dataset select_columns(const Dataset& data, const std::vector<Index>& cols)
{
    Dataset out = data;
    out.x.resize(data.n(), static_cast<Index>(cols.size()));
    out.always_active.clear();
    for (std::size_t k = 0; k < cols.size(); ++k) {
        out.x.col(static_cast<Index>(k)) = data.x.col(cols[k]);
        if (std::find(data.always_active.begin(), data.always_active.end(), cols[k]) != data.always_active.end())
            out.always_active.push_back(static_cast<Index>(k));
    }
    if (data.centering.x_mean.size() == data.p()) {
        out.centering.x_mean.resize(static_cast<Index>(cols.size()));
        for (std::size_t k = 0; k < cols.size(); ++k) out.centering.x_mean(static_cast<Index>(k)) = data.centering.x_mean(cols[k]);
    }
    return out;
}

} // namespace pflr::harness
