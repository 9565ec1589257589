#include "geoclus/mlp.hpp"

#include <cmath>
#include <stdexcept>
#include <string>

namespace geoclus::diffcore {

const char* activation_name(Activation a) {
    switch (a) {
        case Activation::kIdentity: return "identity";
        case Activation::kRelu: return "relu";
        case Activation::kSoftplus: return "softplus";
        case Activation::kSigmoid: return "sigmoid";
        case Activation::kTanh: return "tanh";
    }
    return "?";
}

Activation activation_from_name(const std::string& name) {
    if (name == "identity") return Activation::kIdentity;
    if (name == "relu") return Activation::kRelu;
    if (name == "softplus") return Activation::kSoftplus;
    if (name == "sigmoid") return Activation::kSigmoid;
    if (name == "tanh") return Activation::kTanh;
    throw std::invalid_argument("unknown activation: " + name);
}

void MlpSpec::validate() const {
    if (widths.size() < 2) throw std::invalid_argument("MlpSpec: need at least input and output widths");
    for (std::size_t w : widths)
        if (w == 0) throw std::invalid_argument("MlpSpec: zero layer width");
    if (activations.size() != widths.size() - 1)
        throw std::invalid_argument("MlpSpec: activation count must be widths.size() - 1");
}

void Mlp::validate() const {
    spec.validate();
    if (weights.size() != spec.layer_count() || biases.size() != spec.layer_count())
        throw std::invalid_argument("Mlp: parameter count does not match spec");
    for (std::size_t i = 0; i < weights.size(); ++i) {
        if (weights[i].rank() != 2 || weights[i].rows() != spec.widths[i] ||
            weights[i].cols() != spec.widths[i + 1])
            throw std::invalid_argument("Mlp: weight shape mismatch at layer " + std::to_string(i));
        if (biases[i].size() != spec.widths[i + 1])
            throw std::invalid_argument("Mlp: bias shape mismatch at layer " + std::to_string(i));
    }
}

Mlp mlp_init(const MlpSpec& spec, Rng& rng) {
    spec.validate();
    Mlp mlp{spec, {}, {}};
    for (std::size_t i = 0; i < spec.layer_count(); ++i) {
        std::size_t fan_in = spec.widths[i], fan_out = spec.widths[i + 1];
        double bound = std::sqrt(6.0 / static_cast<double>(fan_in + fan_out));
        Tensor w({fan_in, fan_out});
        for (std::size_t j = 0; j < w.size(); ++j) w[j] = rng.uniform(-bound, bound);
        mlp.weights.push_back(std::move(w));
        mlp.biases.push_back(Tensor({fan_out}));
    }
    return mlp;
}

Mlp mlp_zeros(const MlpSpec& spec) {
    spec.validate();
    Mlp mlp{spec, {}, {}};
    for (std::size_t i = 0; i < spec.layer_count(); ++i) {
        mlp.weights.push_back(Tensor({spec.widths[i], spec.widths[i + 1]}));
        mlp.biases.push_back(Tensor({spec.widths[i + 1]}));
    }
    return mlp;
}

Mlp mlp_concat(const Mlp& first, const Mlp& second) {
    first.validate();
    second.validate();
    if (first.spec.output_width() != second.spec.input_width())
        throw std::invalid_argument("mlp_concat: width mismatch at the seam");
    Mlp out;
    out.spec.widths = first.spec.widths;
    out.spec.widths.insert(out.spec.widths.end(), second.spec.widths.begin() + 1,
                           second.spec.widths.end());
    out.spec.activations = first.spec.activations;
    out.spec.activations.insert(out.spec.activations.end(), second.spec.activations.begin(),
                                second.spec.activations.end());
    out.weights = first.weights;
    out.weights.insert(out.weights.end(), second.weights.begin(), second.weights.end());
    out.biases = first.biases;
    out.biases.insert(out.biases.end(), second.biases.begin(), second.biases.end());
    return out;
}

void MlpGraphParams::append_to(std::vector<NodeId>& out) const {
    out.insert(out.end(), weights.begin(), weights.end());
    out.insert(out.end(), biases.begin(), biases.end());
}

MlpGraphParams mlp_add_params(Graph& g, const Mlp& mlp, bool trainable) {
    mlp.validate();
    MlpGraphParams p;
    for (std::size_t i = 0; i < mlp.weights.size(); ++i) {
        if (trainable) {
            p.weights.push_back(g.parameter(mlp.weights[i], "W" + std::to_string(i)));
            p.biases.push_back(g.parameter(mlp.biases[i], "b" + std::to_string(i)));
        } else {
            p.weights.push_back(g.constant(mlp.weights[i]));
            p.biases.push_back(g.constant(mlp.biases[i]));
        }
    }
    return p;
}

NodeId mlp_apply(Graph& g, const MlpSpec& spec, const MlpGraphParams& params, NodeId x) {
    spec.validate();
    if (params.weights.size() != spec.layer_count())
        throw std::invalid_argument("mlp_apply: parameter/spec mismatch");
    NodeId h = x;
    for (std::size_t i = 0; i < spec.layer_count(); ++i) {
        h = g.add(g.matmul(h, params.weights[i]), params.biases[i]);
        switch (spec.activations[i]) {
            case Activation::kIdentity: break;
            case Activation::kRelu: h = g.relu(h); break;
            case Activation::kSoftplus: h = g.softplus(h); break;
            case Activation::kSigmoid: h = g.sigmoid(h); break;
            case Activation::kTanh: h = g.tanh(h); break;
        }
    }
    return h;
}

void mlp_read_params(const Graph& g, const MlpGraphParams& params, Mlp& into) {
    for (std::size_t i = 0; i < params.weights.size(); ++i) {
        into.weights[i] = g.value(params.weights[i]);
        into.biases[i] = g.value(params.biases[i]);
    }
}

namespace {

inline double apply_act(Activation a, double x) {
    switch (a) {
        case Activation::kIdentity: return x;
        case Activation::kRelu: return x > 0.0 ? x : 0.0;
        case Activation::kSoftplus:
            return x > 0.0 ? x + std::log1p(std::exp(-x)) : std::log1p(std::exp(x));
        case Activation::kSigmoid:
            return x >= 0.0 ? 1.0 / (1.0 + std::exp(-x))
                            : std::exp(x) / (1.0 + std::exp(x));
        case Activation::kTanh: return std::tanh(x);
    }
    return x;
}

}  // namespace

void mlp_eval(const Mlp& mlp, std::span<const double> x, std::vector<double>& out, MlpWork& work) {
    if (x.size() != mlp.spec.input_width())
        throw std::invalid_argument("mlp_eval: input width mismatch");
    work.a.assign(x.begin(), x.end());
    for (std::size_t layer = 0; layer < mlp.spec.layer_count(); ++layer) {
        const Tensor& W = mlp.weights[layer];
        const Tensor& b = mlp.biases[layer];
        std::size_t in = W.rows(), outw = W.cols();
        work.b.assign(b.data(), b.data() + outw);
        for (std::size_t k = 0; k < in; ++k) {
            double av = work.a[k];
            const double* wrow = W.data() + k * outw;
            for (std::size_t j = 0; j < outw; ++j) work.b[j] += av * wrow[j];
        }
        Activation act = mlp.spec.activations[layer];
        if (act != Activation::kIdentity)
            for (double& v : work.b) v = apply_act(act, v);
        std::swap(work.a, work.b);
    }
    out.assign(work.a.begin(), work.a.end());
}

std::vector<double> mlp_eval(const Mlp& mlp, std::span<const double> x) {
    MlpWork work;
    std::vector<double> out;
    mlp_eval(mlp, x, out, work);
    return out;
}

}  // namespace geoclus::diffcore
