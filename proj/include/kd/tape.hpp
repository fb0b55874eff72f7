#pragma once

#include <cmath>
#include <functional>
#include <utility>
#include <vector>

#include "kd/errors.hpp"
#include "kd/tensor.hpp"

namespace kd {

template <typename T>
class Tape;

// Handle to a node on a Tape. Cheap to copy; valid for the tape's lifetime.
template <typename T>
struct Var {
    Tape<T>* tape = nullptr;
    int index = -1;
};

// Reverse-mode autodiff tape. Nodes are recorded in evaluation order, so the
// node list is already a topological order: every node's inputs precede it.
// A tape is built for one forward pass, consumed by backward(), and discarded.
// Gradient accumulation always walks nodes in decreasing index order, which
// makes repeated backward passes bitwise identical.
template <typename T>
class Tape {
public:
    using BackwardFn = std::function<void(Tape&, int)>;

    // Input the loss will be differentiated against.
    Var<T> leaf(Tensor<T> value) { return push(std::move(value), {}, true, nullptr); }

    // Recorded value that never receives a gradient (teacher tensors, labels).
    Var<T> constant(Tensor<T> value) { return push(std::move(value), {}, false, nullptr); }

    // Record a primitive with a custom backward. needs_grad is inherited from
    // the parents; the backward closure must accumulate (+=) into parent grads.
    Var<T> record(Tensor<T> value, const std::vector<int>& parents, BackwardFn fn) {
        bool needs = false;
        for (int p : parents) {
            if (p < 0 || p >= static_cast<int>(nodes_.size())) {
                throw ContractError("tape node parent index out of range");
            }
            needs = needs || nodes_[p].needs_grad;
        }
        return push(std::move(value), parents, needs, needs ? std::move(fn) : nullptr);
    }

    // Gradient of a scalar root with respect to every recorded node. Nodes not
    // reachable from the root keep their zero gradient.
    void backward(Var<T> root) {
        if (root.tape != this || root.index < 0) {
            throw ContractError("backward: root does not belong to this tape");
        }
        if (nodes_[root.index].value.size() != 1) {
            throw ContractError("backward: root must be scalar, got shape " +
                                nodes_[root.index].value.shape_string());
        }
        grads_.clear();
        grads_.reserve(nodes_.size());
        for (const Node& n : nodes_) {
            grads_.emplace_back(n.value.channels(), n.value.width(), n.value.height());
        }
        grads_ready_ = true;
        grads_[root.index][0] = T(1);
        for (int i = root.index; i >= 0; --i) {
            const Node& n = nodes_[i];
            if (n.needs_grad && n.backward) n.backward(*this, i);
        }
    }

    const Tensor<T>& value(Var<T> v) const { return nodes_[v.index].value; }

    const Tensor<T>& grad(Var<T> v) const {
        if (!grads_ready_) throw ContractError("grad: backward has not run on this tape");
        return grads_[v.index];
    }

    // accessors for backward closures
    const Tensor<T>& value_at(int i) const { return nodes_[i].value; }
    const Tensor<T>& grad_at(int i) const { return grads_[i]; }
    Tensor<T>& grad_mut(int i) { return grads_[i]; }
    bool needs_grad_at(int i) const { return nodes_[i].needs_grad; }

    std::size_t num_nodes() const { return nodes_.size(); }

private:
    struct Node {
        Tensor<T> value;
        std::vector<int> parents;
        bool needs_grad = false;
        BackwardFn backward;
    };

    Var<T> push(Tensor<T> value, std::vector<int> parents, bool needs_grad, BackwardFn fn) {
        Node n;
        n.value = std::move(value);
        n.parents = std::move(parents);
        n.needs_grad = needs_grad;
        n.backward = std::move(fn);
        nodes_.push_back(std::move(n));
        return Var<T>{this, static_cast<int>(nodes_.size()) - 1};
    }

    std::vector<Node> nodes_;
    std::vector<Tensor<T>> grads_;
    bool grads_ready_ = false;
};

namespace detail {

template <typename T>
void check_same_tape(Var<T> a, Var<T> b) {
    if (a.tape != b.tape) throw ContractError("operands recorded on different tapes");
}

template <typename T>
void check_same_shape(const Tensor<T>& a, const Tensor<T>& b, const char* op) {
    if (!a.same_shape(b)) {
        throw DimensionError(std::string(op) + ": shape mismatch " + a.shape_string() +
                             " vs " + b.shape_string());
    }
}

} // namespace detail

// ---- elementwise primitives -------------------------------------------------

template <typename T>
Var<T> add(Var<T> a, Var<T> b) {
    detail::check_same_tape(a, b);
    Tape<T>& t = *a.tape;
    const Tensor<T>& va = t.value(a);
    const Tensor<T>& vb = t.value(b);
    detail::check_same_shape(va, vb, "add");
    Tensor<T> out(va.channels(), va.width(), va.height());
    for (std::size_t i = 0; i < out.size(); ++i) out[i] = va[i] + vb[i];
    return t.record(std::move(out), {a.index, b.index},
                    [ai = a.index, bi = b.index](Tape<T>& tp, int self) {
                        const Tensor<T>& g = tp.grad_at(self);
                        if (tp.needs_grad_at(ai)) {
                            Tensor<T>& ga = tp.grad_mut(ai);
                            for (std::size_t i = 0; i < g.size(); ++i) ga[i] += g[i];
                        }
                        if (tp.needs_grad_at(bi)) {
                            Tensor<T>& gb = tp.grad_mut(bi);
                            for (std::size_t i = 0; i < g.size(); ++i) gb[i] += g[i];
                        }
                    });
}

template <typename T>
Var<T> sub(Var<T> a, Var<T> b) {
    detail::check_same_tape(a, b);
    Tape<T>& t = *a.tape;
    const Tensor<T>& va = t.value(a);
    const Tensor<T>& vb = t.value(b);
    detail::check_same_shape(va, vb, "sub");
    Tensor<T> out(va.channels(), va.width(), va.height());
    for (std::size_t i = 0; i < out.size(); ++i) out[i] = va[i] - vb[i];
    return t.record(std::move(out), {a.index, b.index},
                    [ai = a.index, bi = b.index](Tape<T>& tp, int self) {
                        const Tensor<T>& g = tp.grad_at(self);
                        if (tp.needs_grad_at(ai)) {
                            Tensor<T>& ga = tp.grad_mut(ai);
                            for (std::size_t i = 0; i < g.size(); ++i) ga[i] += g[i];
                        }
                        if (tp.needs_grad_at(bi)) {
                            Tensor<T>& gb = tp.grad_mut(bi);
                            for (std::size_t i = 0; i < g.size(); ++i) gb[i] -= g[i];
                        }
                    });
}

template <typename T>
Var<T> mul(Var<T> a, Var<T> b) {
    detail::check_same_tape(a, b);
    Tape<T>& t = *a.tape;
    const Tensor<T>& va = t.value(a);
    const Tensor<T>& vb = t.value(b);
    detail::check_same_shape(va, vb, "mul");
    Tensor<T> out(va.channels(), va.width(), va.height());
    for (std::size_t i = 0; i < out.size(); ++i) out[i] = va[i] * vb[i];
    return t.record(std::move(out), {a.index, b.index},
                    [ai = a.index, bi = b.index](Tape<T>& tp, int self) {
                        const Tensor<T>& g = tp.grad_at(self);
                        const Tensor<T>& va2 = tp.value_at(ai);
                        const Tensor<T>& vb2 = tp.value_at(bi);
                        if (tp.needs_grad_at(ai)) {
                            Tensor<T>& ga = tp.grad_mut(ai);
                            for (std::size_t i = 0; i < g.size(); ++i) ga[i] += g[i] * vb2[i];
                        }
                        if (tp.needs_grad_at(bi)) {
                            Tensor<T>& gb = tp.grad_mut(bi);
                            for (std::size_t i = 0; i < g.size(); ++i) gb[i] += g[i] * va2[i];
                        }
                    });
}

// Hadamard square
template <typename T>
Var<T> square(Var<T> a) {
    Tape<T>& t = *a.tape;
    const Tensor<T>& va = t.value(a);
    Tensor<T> out(va.channels(), va.width(), va.height());
    for (std::size_t i = 0; i < out.size(); ++i) out[i] = va[i] * va[i];
    return t.record(std::move(out), {a.index}, [ai = a.index](Tape<T>& tp, int self) {
        const Tensor<T>& g = tp.grad_at(self);
        const Tensor<T>& va2 = tp.value_at(ai);
        Tensor<T>& ga = tp.grad_mut(ai);
        for (std::size_t i = 0; i < g.size(); ++i) ga[i] += T(2) * va2[i] * g[i];
    });
}

template <typename T>
Var<T> scale(Var<T> a, T k) {
    Tape<T>& t = *a.tape;
    const Tensor<T>& va = t.value(a);
    Tensor<T> out(va.channels(), va.width(), va.height());
    for (std::size_t i = 0; i < out.size(); ++i) out[i] = va[i] * k;
    return t.record(std::move(out), {a.index}, [ai = a.index, k](Tape<T>& tp, int self) {
        const Tensor<T>& g = tp.grad_at(self);
        Tensor<T>& ga = tp.grad_mut(ai);
        for (std::size_t i = 0; i < g.size(); ++i) ga[i] += k * g[i];
    });
}

template <typename T>
Var<T> exp(Var<T> a) {
    Tape<T>& t = *a.tape;
    const Tensor<T>& va = t.value(a);
    Tensor<T> out(va.channels(), va.width(), va.height());
    for (std::size_t i = 0; i < out.size(); ++i) out[i] = std::exp(va[i]);
    return t.record(std::move(out), {a.index}, [ai = a.index](Tape<T>& tp, int self) {
        const Tensor<T>& g = tp.grad_at(self);
        const Tensor<T>& vo = tp.value_at(self);
        Tensor<T>& ga = tp.grad_mut(ai);
        for (std::size_t i = 0; i < g.size(); ++i) ga[i] += vo[i] * g[i];
    });
}

template <typename T>
Var<T> relu(Var<T> a) {
    Tape<T>& t = *a.tape;
    const Tensor<T>& va = t.value(a);
    Tensor<T> out(va.channels(), va.width(), va.height());
    for (std::size_t i = 0; i < out.size(); ++i) out[i] = va[i] > T(0) ? va[i] : T(0);
    return t.record(std::move(out), {a.index}, [ai = a.index](Tape<T>& tp, int self) {
        const Tensor<T>& g = tp.grad_at(self);
        const Tensor<T>& va2 = tp.value_at(ai);
        Tensor<T>& ga = tp.grad_mut(ai);
        for (std::size_t i = 0; i < g.size(); ++i) {
            if (va2[i] > T(0)) ga[i] += g[i];
        }
    });
}

// ---- reductions --------------------------------------------------------------

template <typename T>
Var<T> frobenius_norm_sq(Var<T> a) {
    Tape<T>& t = *a.tape;
    const Tensor<T>& va = t.value(a);
    T s = T(0);
    for (std::size_t i = 0; i < va.size(); ++i) s += va[i] * va[i];
    return t.record(Tensor<T>::scalar(s), {a.index}, [ai = a.index](Tape<T>& tp, int self) {
        const T g = tp.grad_at(self)[0];
        const Tensor<T>& va2 = tp.value_at(ai);
        Tensor<T>& ga = tp.grad_mut(ai);
        for (std::size_t i = 0; i < va2.size(); ++i) ga[i] += T(2) * va2[i] * g;
    });
}

template <typename T>
Var<T> sum_all(Var<T> a) {
    Tape<T>& t = *a.tape;
    const Tensor<T>& va = t.value(a);
    T s = T(0);
    for (std::size_t i = 0; i < va.size(); ++i) s += va[i];
    return t.record(Tensor<T>::scalar(s), {a.index}, [ai = a.index](Tape<T>& tp, int self) {
        const T g = tp.grad_at(self)[0];
        Tensor<T>& ga = tp.grad_mut(ai);
        for (std::size_t i = 0; i < ga.size(); ++i) ga[i] += g;
    });
}

// n-ary sum of scalar nodes; keeps batch reductions at one node instead of a
// chain of adds
template <typename T>
Var<T> sum_scalars(Tape<T>& t, const std::vector<Var<T>>& xs) {
    if (xs.empty()) throw ContractError("sum_scalars: empty operand list");
    std::vector<int> parents;
    parents.reserve(xs.size());
    T s = T(0);
    for (Var<T> x : xs) {
        if (x.tape != &t) throw ContractError("sum_scalars: operand from another tape");
        if (t.value(x).size() != 1) throw ContractError("sum_scalars: non-scalar operand");
        s += t.value(x)[0];
        parents.push_back(x.index);
    }
    return t.record(Tensor<T>::scalar(s), parents, [parents](Tape<T>& tp, int self) {
        const T g = tp.grad_at(self)[0];
        for (int p : parents) {
            if (tp.needs_grad_at(p)) tp.grad_mut(p)[0] += g;
        }
    });
}

// ---- value-level helpers (no tape) -------------------------------------------

template <typename T>
T frobenius_norm_sq(const Tensor<T>& a) {
    T s = T(0);
    for (std::size_t i = 0; i < a.size(); ++i) s += a[i] * a[i];
    return s;
}

} // namespace kd
