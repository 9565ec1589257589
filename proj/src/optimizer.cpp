#include "geoclus/optimizer.hpp"

#include <cmath>
#include <stdexcept>

namespace geoclus::diffcore {

Adam::Adam(Graph& g, std::vector<NodeId> params, AdamConfig cfg)
    : graph_(&g), params_(std::move(params)), cfg_(cfg) {
    for (NodeId p : params_) {
        if (!g.needs_grad(p))
            throw std::invalid_argument("Adam: node is not a trainable parameter");
        m_.emplace_back(g.value(p).shape());
        v_.emplace_back(g.value(p).shape());
    }
}

void Adam::reset_moments() {
    for (auto& t : m_) t.fill(0.0);
    for (auto& t : v_) t.fill(0.0);
    steps_ = 0;
}

void Adam::step() {
    ++steps_;
    double bc1 = 1.0 - std::pow(cfg_.beta1, static_cast<double>(steps_));
    double bc2 = 1.0 - std::pow(cfg_.beta2, static_cast<double>(steps_));
    for (std::size_t i = 0; i < params_.size(); ++i) {
        const Tensor& g = graph_->grad(params_[i]);
        require_finite(g, "gradient");
        Tensor& value = graph_->leaf_value(params_[i]);
        double* w = value.data();
        double* m = m_[i].data();
        double* v = v_[i].data();
        const double* gp = g.data();
        std::size_t n = value.size();
        for (std::size_t j = 0; j < n; ++j) {
            m[j] = cfg_.beta1 * m[j] + (1.0 - cfg_.beta1) * gp[j];
            v[j] = cfg_.beta2 * v[j] + (1.0 - cfg_.beta2) * gp[j] * gp[j];
            double mhat = m[j] / bc1;
            double denom = cfg_.beta2 == 0.0 ? 1.0 : std::sqrt(v[j] / bc2) + cfg_.epsilon;
            w[j] -= cfg_.learning_rate * mhat / denom;
        }
    }
}

}  // namespace geoclus::diffcore
