#pragma once

// Central finite-difference oracle used to check reverse-mode gradients.
// Kept independent of the backward pass: it only calls forward().

#include <cmath>
#include <cstddef>

#include "geoclus/graph.hpp"

namespace geoclus::testing {

using diffcore::Graph;
using diffcore::NodeId;
using diffcore::Tensor;

inline Tensor finite_diff(Graph& g, NodeId root, NodeId param, double h = 1e-5) {
    Tensor base = g.value(param);
    Tensor out(base.shape());
    for (std::size_t i = 0; i < base.size(); ++i) {
        Tensor bumped = base;
        bumped[i] = base[i] + h;
        g.set_value(param, bumped);
        double up = g.forward(root)[0];
        bumped[i] = base[i] - h;
        g.set_value(param, bumped);
        double down = g.forward(root)[0];
        out[i] = (up - down) / (2.0 * h);
    }
    g.set_value(param, base);
    g.forward(root);
    return out;
}

// Max relative error between analytic and finite-difference gradients,
// with an absolute floor so near-zero entries do not blow up the ratio.
inline double max_rel_err(const Tensor& analytic, const Tensor& numeric, double floor = 1e-6) {
    double worst = 0.0;
    for (std::size_t i = 0; i < analytic.size(); ++i) {
        double denom = std::max({std::abs(analytic[i]), std::abs(numeric[i]), floor});
        worst = std::max(worst, std::abs(analytic[i] - numeric[i]) / denom);
    }
    return worst;
}

}  // namespace geoclus::testing
