#include "geoclus/graph.hpp"

#include <cmath>
#include <stdexcept>

namespace geoclus::diffcore {

namespace {

double softplus_stable(double x) {
    // log(1 + e^x) without overflow for large |x|
    return x > 0.0 ? x + std::log1p(std::exp(-x)) : std::log1p(std::exp(x));
}

// writes softplus into out and its derivative (the sigmoid) into aux,
// sharing one exp per element; branch-free so the loop vectorizes
// (e is in (0,1], so plain log(1+e) is well-conditioned)
void softplus_with_derivative(const double* x, double* out, double* aux, std::size_t n) {
    for (std::size_t i = 0; i < n; ++i) {
        double e = std::exp(-std::fabs(x[i]));
        double l = std::log(1.0 + e);
        double inv = 1.0 / (1.0 + e);
        double pos = x[i] > 0.0 ? 1.0 : 0.0;
        out[i] = pos * x[i] + l;
        aux[i] = pos * inv + (1.0 - pos) * e * inv;
    }
}

double sigmoid_stable(double x) {
    if (x >= 0.0) {
        double e = std::exp(-x);
        return 1.0 / (1.0 + e);
    }
    double e = std::exp(x);
    return e / (1.0 + e);
}

enum class Broadcast { kSame, kScalarA, kScalarB, kRowB };

Broadcast classify_broadcast(const Tensor& a, const Tensor& b, const char* op) {
    if (a.same_shape(b)) return Broadcast::kSame;
    if (b.is_scalar()) return Broadcast::kScalarB;
    if (a.is_scalar()) return Broadcast::kScalarA;
    if (a.rank() == 2) {
        std::size_t c = a.shape()[1];
        if ((b.rank() == 1 && b.shape()[0] == c) ||
            (b.rank() == 2 && b.shape()[0] == 1 && b.shape()[1] == c))
            return Broadcast::kRowB;
    }
    throw std::invalid_argument(std::string(op) + ": incompatible shapes " + a.shape_str() +
                                " and " + b.shape_str());
}

}  // namespace

bool Graph::is_leaf(NodeId id) const {
    OpKind k = nodes_[id].kind;
    return k == OpKind::kConstant || k == OpKind::kParameter;
}

NodeId Graph::push(Node n) {
    nodes_.push_back(std::move(n));
    forward_done_ = false;
    return static_cast<NodeId>(nodes_.size() - 1);
}

void Graph::check_exists(NodeId id, const char* op) const {
    if (id >= nodes_.size())
        throw std::invalid_argument(std::string(op) + ": unknown node id");
}

NodeId Graph::constant(Tensor value) {
    Node n;
    n.kind = OpKind::kConstant;
    n.value = std::move(value);
    return push(std::move(n));
}

NodeId Graph::parameter(Tensor value, std::string name) {
    Node n;
    n.kind = OpKind::kParameter;
    n.value = std::move(value);
    n.grad = Tensor(n.value.shape());
    n.needs_grad = true;
    n.name = std::move(name);
    return push(std::move(n));
}

NodeId Graph::matmul(NodeId a, NodeId b) {
    check_exists(a, "matmul");
    check_exists(b, "matmul");
    const Tensor& ta = nodes_[a].value;
    const Tensor& tb = nodes_[b].value;
    if (ta.rank() != 2 || tb.rank() != 2 || ta.cols() != tb.rows())
        throw std::invalid_argument("matmul: incompatible shapes " + ta.shape_str() + " and " +
                                    tb.shape_str());
    Node n;
    n.kind = OpKind::kMatMul;
    n.a = a;
    n.b = b;
    n.needs_grad = nodes_[a].needs_grad || nodes_[b].needs_grad;
    n.value = Tensor({ta.rows(), tb.cols()});
    if (n.needs_grad) n.grad = Tensor(n.value.shape());
    return push(std::move(n));
}

NodeId Graph::add(NodeId a, NodeId b) {
    check_exists(a, "add");
    check_exists(b, "add");
    classify_broadcast(nodes_[a].value, nodes_[b].value, "add");
    Node n;
    n.kind = OpKind::kAdd;
    n.a = a;
    n.b = b;
    n.needs_grad = nodes_[a].needs_grad || nodes_[b].needs_grad;
    const Tensor& big =
        nodes_[a].value.size() >= nodes_[b].value.size() ? nodes_[a].value : nodes_[b].value;
    n.value = Tensor(big.shape());
    if (n.needs_grad) n.grad = Tensor(n.value.shape());
    return push(std::move(n));
}

NodeId Graph::mul(NodeId a, NodeId b) {
    check_exists(a, "mul");
    check_exists(b, "mul");
    classify_broadcast(nodes_[a].value, nodes_[b].value, "mul");
    Node n;
    n.kind = OpKind::kMul;
    n.a = a;
    n.b = b;
    n.needs_grad = nodes_[a].needs_grad || nodes_[b].needs_grad;
    const Tensor& big =
        nodes_[a].value.size() >= nodes_[b].value.size() ? nodes_[a].value : nodes_[b].value;
    n.value = Tensor(big.shape());
    if (n.needs_grad) n.grad = Tensor(n.value.shape());
    return push(std::move(n));
}

NodeId Graph::unary(OpKind kind, NodeId x) {
    check_exists(x, "unary op");
    Node n;
    n.kind = kind;
    n.a = x;
    n.needs_grad = nodes_[x].needs_grad;
    if (kind == OpKind::kSum || kind == OpKind::kMean)
        n.value = Tensor::scalar(0.0);
    else
        n.value = Tensor(nodes_[x].value.shape());
    if (n.needs_grad) {
        n.grad = Tensor(n.value.shape());
        if (kind == OpKind::kSoftplus) n.aux = Tensor(n.value.shape());
    }
    return push(std::move(n));
}

NodeId Graph::softplus(NodeId x) { return unary(OpKind::kSoftplus, x); }
NodeId Graph::relu(NodeId x) { return unary(OpKind::kRelu, x); }
NodeId Graph::sigmoid(NodeId x) { return unary(OpKind::kSigmoid, x); }
NodeId Graph::tanh(NodeId x) { return unary(OpKind::kTanh, x); }
NodeId Graph::exp(NodeId x) { return unary(OpKind::kExp, x); }
NodeId Graph::log(NodeId x) { return unary(OpKind::kLog, x); }
NodeId Graph::square(NodeId x) { return unary(OpKind::kSquare, x); }
NodeId Graph::sum(NodeId x) { return unary(OpKind::kSum, x); }
NodeId Graph::mean(NodeId x) { return unary(OpKind::kMean, x); }
NodeId Graph::negate(NodeId x) { return unary(OpKind::kNegate, x); }

void Graph::set_value(NodeId leaf, const Tensor& v) {
    check_exists(leaf, "set_value");
    if (!is_leaf(leaf)) throw std::invalid_argument("set_value: node is not a leaf");
    if (!nodes_[leaf].value.same_shape(v))
        throw std::invalid_argument("set_value: shape mismatch");
    nodes_[leaf].value = v;
    forward_done_ = false;
}

void Graph::set_value(NodeId leaf, std::span<const double> v) {
    check_exists(leaf, "set_value");
    if (!is_leaf(leaf)) throw std::invalid_argument("set_value: node is not a leaf");
    nodes_[leaf].value.set_values(v);
    forward_done_ = false;
}

Tensor& Graph::leaf_value(NodeId leaf) {
    check_exists(leaf, "leaf_value");
    if (!is_leaf(leaf)) throw std::invalid_argument("leaf_value: node is not a leaf");
    forward_done_ = false;
    return nodes_[leaf].value;
}

void Graph::eval_node(Node& n) {
    const double* pa = nullptr;
    const double* pb = nullptr;
    std::size_t sa = 0;
    if (n.kind != OpKind::kConstant && n.kind != OpKind::kParameter) {
        pa = nodes_[n.a].value.data();
        sa = nodes_[n.a].value.size();
    }
    double* out = n.value.data();
    std::size_t sz = n.value.size();

    switch (n.kind) {
        case OpKind::kConstant:
        case OpKind::kParameter:
            return;  // leaves carry their own values
        case OpKind::kMatMul: {
            const Tensor& A = nodes_[n.a].value;
            const Tensor& B = nodes_[n.b].value;
            std::size_t r = A.rows(), k = A.cols(), c = B.cols();
            n.value.fill(0.0);
            for (std::size_t i = 0; i < r; ++i) {
                const double* arow = A.data() + i * k;
                double* orow = out + i * c;
                for (std::size_t kk = 0; kk < k; ++kk) {
                    double av = arow[kk];
                    const double* brow = B.data() + kk * c;
                    for (std::size_t j = 0; j < c; ++j) orow[j] += av * brow[j];
                }
            }
            break;
        }
        case OpKind::kAdd:
        case OpKind::kMul: {
            const Tensor& A = nodes_[n.a].value;
            const Tensor& B = nodes_[n.b].value;
            pb = B.data();
            bool is_add = n.kind == OpKind::kAdd;
            Broadcast bc = classify_broadcast(A, B, is_add ? "add" : "mul");
            switch (bc) {
                case Broadcast::kSame:
                    if (is_add)
                        for (std::size_t i = 0; i < sz; ++i) out[i] = pa[i] + pb[i];
                    else
                        for (std::size_t i = 0; i < sz; ++i) out[i] = pa[i] * pb[i];
                    break;
                case Broadcast::kScalarB:
                    if (is_add)
                        for (std::size_t i = 0; i < sz; ++i) out[i] = pa[i] + pb[0];
                    else
                        for (std::size_t i = 0; i < sz; ++i) out[i] = pa[i] * pb[0];
                    break;
                case Broadcast::kScalarA:
                    if (is_add)
                        for (std::size_t i = 0; i < sz; ++i) out[i] = pa[0] + pb[i];
                    else
                        for (std::size_t i = 0; i < sz; ++i) out[i] = pa[0] * pb[i];
                    break;
                case Broadcast::kRowB: {
                    std::size_t c = A.shape()[1];
                    for (std::size_t i = 0; i < sz; ++i) {
                        double bv = pb[i % c];
                        out[i] = is_add ? pa[i] + bv : pa[i] * bv;
                    }
                    break;
                }
            }
            break;
        }
        case OpKind::kSoftplus:
            if (n.needs_grad)
                softplus_with_derivative(pa, out, n.aux.data(), sz);
            else
                for (std::size_t i = 0; i < sz; ++i) out[i] = softplus_stable(pa[i]);
            break;
        case OpKind::kRelu:
            for (std::size_t i = 0; i < sz; ++i) out[i] = pa[i] > 0.0 ? pa[i] : 0.0;
            break;
        case OpKind::kSigmoid:
            for (std::size_t i = 0; i < sz; ++i) out[i] = sigmoid_stable(pa[i]);
            break;
        case OpKind::kTanh:
            for (std::size_t i = 0; i < sz; ++i) out[i] = std::tanh(pa[i]);
            break;
        case OpKind::kExp:
            for (std::size_t i = 0; i < sz; ++i) out[i] = std::exp(pa[i]);
            break;
        case OpKind::kLog:
            for (std::size_t i = 0; i < sz; ++i) out[i] = std::log(pa[i]);
            break;
        case OpKind::kSquare:
            for (std::size_t i = 0; i < sz; ++i) out[i] = pa[i] * pa[i];
            break;
        case OpKind::kSum: {
            double acc = 0.0;
            for (std::size_t i = 0; i < sa; ++i) acc += pa[i];
            out[0] = acc;
            break;
        }
        case OpKind::kMean: {
            double acc = 0.0;
            for (std::size_t i = 0; i < sa; ++i) acc += pa[i];
            out[0] = acc / static_cast<double>(sa);
            break;
        }
        case OpKind::kNegate:
            for (std::size_t i = 0; i < sz; ++i) out[i] = -pa[i];
            break;
    }
}

const Tensor& Graph::forward(NodeId root) {
    check_exists(root, "forward");
    for (NodeId i = 0; i <= root; ++i) {
        Node& n = nodes_[i];
        eval_node(n);
        if (!n.value.all_finite())
            throw std::runtime_error("forward: non-finite value at node " + std::to_string(i) +
                                     (n.name.empty() ? "" : " (" + n.name + ")"));
    }
    last_forward_root_ = root;
    forward_done_ = true;
    return nodes_[root].value;
}

void Graph::backprop_node(Node& n) {
    const double* g = n.grad.data();
    std::size_t sz = n.grad.size();
    Node& na = nodes_[n.a];

    auto accumulate = [](Node& dst, auto&& fn) {
        if (!dst.needs_grad) return;
        fn(dst.grad.data());
    };

    switch (n.kind) {
        case OpKind::kConstant:
        case OpKind::kParameter:
            return;
        case OpKind::kMatMul: {
            Node& nb = nodes_[n.b];
            const Tensor& A = na.value;
            const Tensor& B = nb.value;
            std::size_t r = A.rows(), k = A.cols(), c = B.cols();
            if (na.needs_grad) {
                // dA = G * B^T
                double* da = na.grad.data();
                for (std::size_t i = 0; i < r; ++i) {
                    const double* grow = g + i * c;
                    double* darow = da + i * k;
                    for (std::size_t kk = 0; kk < k; ++kk) {
                        const double* brow = B.data() + kk * c;
                        double acc = 0.0;
                        for (std::size_t j = 0; j < c; ++j) acc += grow[j] * brow[j];
                        darow[kk] += acc;
                    }
                }
            }
            if (nb.needs_grad) {
                // dB = A^T * G
                double* db = nb.grad.data();
                for (std::size_t i = 0; i < r; ++i) {
                    const double* arow = A.data() + i * k;
                    const double* grow = g + i * c;
                    for (std::size_t kk = 0; kk < k; ++kk) {
                        double av = arow[kk];
                        double* dbrow = db + kk * c;
                        for (std::size_t j = 0; j < c; ++j) dbrow[j] += av * grow[j];
                    }
                }
            }
            return;
        }
        case OpKind::kAdd:
        case OpKind::kMul: {
            Node& nb = nodes_[n.b];
            const Tensor& A = na.value;
            const Tensor& B = nb.value;
            bool is_add = n.kind == OpKind::kAdd;
            Broadcast bc = classify_broadcast(A, B, "add/mul backward");
            const double* pa = A.data();
            const double* pb = B.data();
            switch (bc) {
                case Broadcast::kSame:
                    accumulate(na, [&](double* d) {
                        for (std::size_t i = 0; i < sz; ++i) d[i] += is_add ? g[i] : g[i] * pb[i];
                    });
                    accumulate(nb, [&](double* d) {
                        for (std::size_t i = 0; i < sz; ++i) d[i] += is_add ? g[i] : g[i] * pa[i];
                    });
                    return;
                case Broadcast::kScalarB:
                    accumulate(na, [&](double* d) {
                        for (std::size_t i = 0; i < sz; ++i) d[i] += is_add ? g[i] : g[i] * pb[0];
                    });
                    accumulate(nb, [&](double* d) {
                        double acc = 0.0;
                        for (std::size_t i = 0; i < sz; ++i) acc += is_add ? g[i] : g[i] * pa[i];
                        d[0] += acc;
                    });
                    return;
                case Broadcast::kScalarA:
                    accumulate(na, [&](double* d) {
                        double acc = 0.0;
                        for (std::size_t i = 0; i < sz; ++i) acc += is_add ? g[i] : g[i] * pb[i];
                        d[0] += acc;
                    });
                    accumulate(nb, [&](double* d) {
                        for (std::size_t i = 0; i < sz; ++i) d[i] += is_add ? g[i] : g[i] * pa[0];
                    });
                    return;
                case Broadcast::kRowB: {
                    std::size_t c = A.shape()[1];
                    accumulate(na, [&](double* d) {
                        for (std::size_t i = 0; i < sz; ++i)
                            d[i] += is_add ? g[i] : g[i] * pb[i % c];
                    });
                    accumulate(nb, [&](double* d) {
                        for (std::size_t i = 0; i < sz; ++i)
                            d[i % c] += is_add ? g[i] : g[i] * pa[i];
                    });
                    return;
                }
            }
            return;
        }
        case OpKind::kSoftplus:
            accumulate(na, [&](double* d) {
                const double* s = n.aux.data();
                for (std::size_t i = 0; i < sz; ++i) d[i] += g[i] * s[i];
            });
            return;
        case OpKind::kRelu:
            accumulate(na, [&](double* d) {
                const double* x = na.value.data();
                for (std::size_t i = 0; i < sz; ++i) d[i] += x[i] > 0.0 ? g[i] : 0.0;
            });
            return;
        case OpKind::kSigmoid:
            accumulate(na, [&](double* d) {
                const double* y = n.value.data();
                for (std::size_t i = 0; i < sz; ++i) d[i] += g[i] * y[i] * (1.0 - y[i]);
            });
            return;
        case OpKind::kTanh:
            accumulate(na, [&](double* d) {
                const double* y = n.value.data();
                for (std::size_t i = 0; i < sz; ++i) d[i] += g[i] * (1.0 - y[i] * y[i]);
            });
            return;
        case OpKind::kExp:
            accumulate(na, [&](double* d) {
                const double* y = n.value.data();
                for (std::size_t i = 0; i < sz; ++i) d[i] += g[i] * y[i];
            });
            return;
        case OpKind::kLog:
            accumulate(na, [&](double* d) {
                const double* x = na.value.data();
                for (std::size_t i = 0; i < sz; ++i) d[i] += g[i] / x[i];
            });
            return;
        case OpKind::kSquare:
            accumulate(na, [&](double* d) {
                const double* x = na.value.data();
                for (std::size_t i = 0; i < sz; ++i) d[i] += g[i] * 2.0 * x[i];
            });
            return;
        case OpKind::kSum:
            accumulate(na, [&](double* d) {
                std::size_t in_sz = na.value.size();
                for (std::size_t i = 0; i < in_sz; ++i) d[i] += g[0];
            });
            return;
        case OpKind::kMean:
            accumulate(na, [&](double* d) {
                std::size_t in_sz = na.value.size();
                double gv = g[0] / static_cast<double>(in_sz);
                for (std::size_t i = 0; i < in_sz; ++i) d[i] += gv;
            });
            return;
        case OpKind::kNegate:
            accumulate(na, [&](double* d) {
                for (std::size_t i = 0; i < sz; ++i) d[i] -= g[i];
            });
            return;
    }
}

void Graph::backward(NodeId root) {
    check_exists(root, "backward");
    if (!forward_done_ || last_forward_root_ < root)
        throw std::logic_error("backward: forward has not been run for this root");
    if (!nodes_[root].value.is_scalar())
        throw std::invalid_argument("backward: root is not scalar, shape " +
                                    nodes_[root].value.shape_str());
    for (NodeId i = 0; i <= root; ++i)
        if (nodes_[i].needs_grad) nodes_[i].grad.fill(0.0);
    if (!nodes_[root].needs_grad) return;  // no parameters involved
    nodes_[root].grad.fill(1.0);
    for (NodeId i = root + 1; i-- > 0;) {
        Node& n = nodes_[i];
        if (n.needs_grad) backprop_node(n);
    }
}

const Tensor& Graph::grad(NodeId id) const {
    if (id >= nodes_.size() || !nodes_[id].needs_grad)
        throw std::invalid_argument("grad: node does not track gradients");
    return nodes_[id].grad;
}

}  // namespace geoclus::diffcore
