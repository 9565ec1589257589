#pragma once

#include <cstdint>
#include <span>
#include <vector>

#include "geoclus/graph.hpp"
#include "geoclus/rng.hpp"
#include "geoclus/tensor.hpp"

namespace geoclus::diffcore {

enum class Activation : std::uint8_t { kIdentity, kRelu, kSoftplus, kSigmoid, kTanh };

const char* activation_name(Activation a);
Activation activation_from_name(const std::string& name);

struct MlpSpec {
    std::vector<std::size_t> widths;      // layer widths, first is the input width
    std::vector<Activation> activations;  // one per layer, widths.size() - 1 entries

    std::size_t layer_count() const { return activations.size(); }
    std::size_t input_width() const { return widths.front(); }
    std::size_t output_width() const { return widths.back(); }
    void validate() const;  // throws on malformed spec
};

// A fully-connected network with materialized parameters. Layer i maps
// widths[i] -> widths[i+1] as act(x W + b), W stored [in, out].
struct Mlp {
    MlpSpec spec;
    std::vector<Tensor> weights;
    std::vector<Tensor> biases;

    void validate() const;
};

// Weights uniform in +-sqrt(6 / (fan_in + fan_out)), biases zero.
Mlp mlp_init(const MlpSpec& spec, Rng& rng);
Mlp mlp_zeros(const MlpSpec& spec);

// Concatenates two networks into one (output width of `first` must equal
// input width of `second`).
Mlp mlp_concat(const Mlp& first, const Mlp& second);

// --- graph path ---------------------------------------------------------

struct MlpGraphParams {
    std::vector<NodeId> weights;
    std::vector<NodeId> biases;

    void append_to(std::vector<NodeId>& out) const;
};

// Adds the network's parameters to the graph; trainable ones as parameter
// nodes, frozen ones as constants.
MlpGraphParams mlp_add_params(Graph& g, const Mlp& mlp, bool trainable);

// Wires act(x W + b) per layer; x must be rank-2 [batch, input_width].
NodeId mlp_apply(Graph& g, const MlpSpec& spec, const MlpGraphParams& params, NodeId x);

// Copies current graph values back into the Mlp (after training).
void mlp_read_params(const Graph& g, const MlpGraphParams& params, Mlp& into);

// --- eager path ---------------------------------------------------------

// Scratch buffers so hot loops do not allocate.
struct MlpWork {
    std::vector<double> a, b;
};

// Single-point forward pass; x.size() must equal spec.input_width().
void mlp_eval(const Mlp& mlp, std::span<const double> x, std::vector<double>& out, MlpWork& work);
std::vector<double> mlp_eval(const Mlp& mlp, std::span<const double> x);

}  // namespace geoclus::diffcore
