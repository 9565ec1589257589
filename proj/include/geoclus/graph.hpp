#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "geoclus/tensor.hpp"

namespace geoclus::diffcore {

enum class OpKind : std::uint8_t {
    kConstant,
    kParameter,
    kMatMul,
    kAdd,
    kMul,
    kSoftplus,
    kRelu,
    kSigmoid,
    kTanh,
    kExp,
    kLog,
    kSquare,
    kSum,
    kMean,
    kNegate,
};

using NodeId = std::uint32_t;

// Reverse-mode autodiff over a static DAG. Nodes are appended in
// topological order by construction (inputs must already exist), so
// forward() is a single in-order sweep and backward() the reverse sweep.
// Leaf values (parameters and constants) may be mutated between sweeps;
// the graph structure itself is immutable once built.
//
// Gradients are tracked only through subgraphs reachable from parameter
// nodes; constants never receive adjoints, which keeps repeated
// forward/backward passes cheap when most of the graph (say, a trained
// decoder) is frozen.
//
// add/mul broadcasting: identical shapes, scalar against anything, or a
// rank-1 [c] (or [1,c]) vector against the rows of a rank-2 [r,c] matrix.
class Graph {
public:
    NodeId constant(Tensor value);
    NodeId parameter(Tensor value, std::string name = {});

    NodeId matmul(NodeId a, NodeId b);
    NodeId add(NodeId a, NodeId b);
    NodeId mul(NodeId a, NodeId b);
    NodeId softplus(NodeId x);
    NodeId relu(NodeId x);
    NodeId sigmoid(NodeId x);
    NodeId tanh(NodeId x);
    NodeId exp(NodeId x);
    NodeId log(NodeId x);
    NodeId square(NodeId x);
    NodeId sum(NodeId x);
    NodeId mean(NodeId x);
    NodeId negate(NodeId x);

    // conveniences built from the primitive ops
    NodeId sub(NodeId a, NodeId b) { return add(a, negate(b)); }
    NodeId scale(NodeId x, double s) { return mul(x, constant(Tensor::scalar(s))); }
    NodeId shift(NodeId x, double s) { return add(x, constant(Tensor::scalar(s))); }

    std::size_t node_count() const { return nodes_.size(); }
    OpKind kind(NodeId id) const { return nodes_[id].kind; }
    bool is_leaf(NodeId id) const;
    bool needs_grad(NodeId id) const { return nodes_[id].needs_grad; }
    const std::string& name(NodeId id) const { return nodes_[id].name; }

    const Tensor& value(NodeId id) const { return nodes_[id].value; }
    // Leaf mutation; shape must match the shape the node was built with.
    void set_value(NodeId leaf, const Tensor& v);
    void set_value(NodeId leaf, std::span<const double> v);
    Tensor& leaf_value(NodeId leaf);

    // Evaluates every node up to and including `root` and returns its value.
    // Throws on shape violations (caught at build time) and on any
    // non-finite intermediate.
    const Tensor& forward(NodeId root);

    // Accumulates d(root)/d(node) into every gradient-tracked node.
    // Requires forward(root) first and a scalar root.
    void backward(NodeId root);

    // Valid after backward() for nodes with needs_grad.
    const Tensor& grad(NodeId id) const;

private:
    struct Node {
        OpKind kind = OpKind::kConstant;
        NodeId a = 0, b = 0;
        Tensor value;
        Tensor grad;  // allocated only when needs_grad
        Tensor aux;   // op-specific forward cache (softplus derivative)
        bool needs_grad = false;
        std::string name;
    };

    NodeId push(Node n);
    NodeId unary(OpKind kind, NodeId x);
    void check_exists(NodeId id, const char* op) const;
    void eval_node(Node& n);
    void backprop_node(Node& n);

    std::vector<Node> nodes_;
    NodeId last_forward_root_ = 0;
    bool forward_done_ = false;
};

}  // namespace geoclus::diffcore
