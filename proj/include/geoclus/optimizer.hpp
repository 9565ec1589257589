#pragma once

#include <cstdint>
#include <vector>

#include "geoclus/graph.hpp"

namespace geoclus::diffcore {

struct AdamConfig {
    double learning_rate = 1e-3;
    double beta1 = 0.9;
    double beta2 = 0.999;
    double epsilon = 1e-8;
};

// Adam with bias correction over a fixed set of parameter nodes.
// beta1 = beta2 = 0 degenerates to plain gradient descent: the first
// moment becomes the raw gradient and a zero beta2 disables the
// second-moment denominator entirely.
class Adam {
public:
    Adam(Graph& g, std::vector<NodeId> params, AdamConfig cfg = {});

    // Applies one update from the gradients currently stored in the graph.
    // Throws on non-finite gradients.
    void step();

    void reset_moments();
    long step_count() const { return steps_; }
    AdamConfig& config() { return cfg_; }
    const std::vector<NodeId>& params() const { return params_; }

private:
    Graph* graph_;
    std::vector<NodeId> params_;
    std::vector<Tensor> m_, v_;
    AdamConfig cfg_;
    long steps_ = 0;
};

}  // namespace geoclus::diffcore
