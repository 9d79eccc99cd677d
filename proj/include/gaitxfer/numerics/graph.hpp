#pragma once

#include "gaitxfer/numerics/parameters.hpp"
#include "gaitxfer/numerics/tensor.hpp"

#include <deque>
#include <functional>
#include <map>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

namespace gaitxfer::nx {

/// Raised when a forward or backward pass produces NaN or Inf.
class NonFiniteError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// Handle to a node of a Graph.
struct Var {
    std::size_t id = static_cast<std::size_t>(-1);
};

/// Reverse-mode tape.
///
/// Nodes are appended in evaluation order, so reverse creation order is a
/// valid topological order for backpropagation. Node values are never
/// modified after they are recorded. A graph is owned by one training step
/// (or one inference call) and discarded afterwards.
template <class T>
class Graph {
public:
    /// Receives the gradient flowing into the node and pushes contributions
    /// into its parents via accumulate().
    using BackwardFn = std::function<void(Graph&, const Tensor<T>& out_grad)>;

    explicit Graph(bool grad_enabled = true) : grad_enabled_(grad_enabled) {}

    Graph(const Graph&) = delete;
    Graph& operator=(const Graph&) = delete;

    bool grad_enabled() const noexcept { return grad_enabled_; }

    Var constant(Tensor<T> value)
    {
        Node n;
        n.own = std::move(value);
        n.op = "constant";
        return push(std::move(n));
    }

    /// Leaf whose gradient is tracked (useful for input-gradient checks).
    Var leaf(Tensor<T> value, std::string name = "input")
    {
        Node n;
        n.own = std::move(value);
        n.needs_grad = grad_enabled_;
        n.op = "leaf";
        n.name = std::move(name);
        return push(std::move(n));
    }

    /// Binds a parameter by reference; repeated binds return the same node.
    Var param(const ParameterSet<T>& params, const std::string& name)
    {
        if (auto it = param_nodes_.find(name); it != param_nodes_.end()) return Var{it->second};
        Node n;
        n.ext = &params[name];
        n.needs_grad = grad_enabled_;
        n.op = "param";
        n.name = name;
        Var v = push(std::move(n));
        param_nodes_.emplace(name, v.id);
        return v;
    }

    const Tensor<T>& value(Var v) const
    {
        const Node& n = node(v);
        return n.ext ? *n.ext : n.own;
    }

    bool needs_grad(Var v) const { return node(v).needs_grad; }

    /// Gradient accumulated at a node after backward(); zero-shaped if none.
    const Tensor<T>& grad(Var v) const { return node(v).grad; }

    /// Records the result of an operation.
    Var record(const char* op, Tensor<T> value, std::initializer_list<Var> parents, BackwardFn fn)
    {
        if (check_finite_ && !value.all_finite())
            throw NonFiniteError(std::string("non-finite value produced by ") + op);
        Node n;
        n.own = std::move(value);
        n.op = op;
        if (grad_enabled_) {
            for (Var p : parents) n.needs_grad = n.needs_grad || node(p).needs_grad;
            if (n.needs_grad) n.backward = std::move(fn);
        }
        return push(std::move(n));
    }

    /// Adds `contribution` into the gradient buffer of `target` if it tracks one.
    void accumulate(Var target, const Tensor<T>& contribution)
    {
        Node& n = node(target);
        if (!n.needs_grad) return;
        Tensor<T>& g = grad_buffer(n);
        for (std::size_t i = 0; i < g.size(); ++i) g[i] += contribution[i];
    }

    /// Direct access to a parent's gradient buffer for ops that accumulate in place.
    /// Returns nullptr if the parent does not need a gradient.
    Tensor<T>* grad_target(Var target)
    {
        Node& n = node(target);
        if (!n.needs_grad) return nullptr;
        return &grad_buffer(n);
    }

    /// Backpropagates from a scalar node (seed gradient 1).
    void backward(Var root)
    {
        if (!grad_enabled_) throw std::logic_error("backward() on a graph built without gradients");
        Node& r = node(root);
        if (value(root).size() != 1)
            throw ShapeError("backward() needs a scalar root, got " + shape_str(value(root).shape()));
        grad_buffer(r)[0] = T{1};
        for (std::size_t i = root.id + 1; i-- > 0;) {
            Node& n = nodes_[i];
            if (!n.backward || n.grad.empty()) continue;
            n.backward(*this, n.grad);
        }
        if (check_finite_) {
            for (const auto& [name, id] : param_nodes_) {
                if (!nodes_[id].grad.all_finite())
                    throw NonFiniteError("non-finite gradient for parameter '" + name + "'");
            }
        }
    }

    /// Gradients of every bound parameter (zeros for parameters that did not
    /// influence the root).
    Gradients<T> param_grads() const
    {
        Gradients<T> out;
        for (const auto& [name, id] : param_nodes_) {
            const Node& n = nodes_[id];
            out.emplace(name, n.grad.empty() ? Tensor<T>(n.ext->shape()) : n.grad);
        }
        return out;
    }

    void set_check_finite(bool on) noexcept { check_finite_ = on; }
    std::size_t node_count() const noexcept { return nodes_.size(); }

private:
    struct Node {
        Tensor<T> own;
        const Tensor<T>* ext = nullptr;
        Tensor<T> grad;
        bool needs_grad = false;
        BackwardFn backward;
        const char* op = "";
        std::string name;
    };

    Var push(Node n)
    {
        nodes_.push_back(std::move(n));
        return Var{nodes_.size() - 1};
    }

    Node& node(Var v)
    {
        if (v.id >= nodes_.size()) throw std::out_of_range("Var does not belong to this graph");
        return nodes_[v.id];
    }
    const Node& node(Var v) const
    {
        if (v.id >= nodes_.size()) throw std::out_of_range("Var does not belong to this graph");
        return nodes_[v.id];
    }

    Tensor<T>& grad_buffer(Node& n)
    {
        if (n.grad.empty()) {
            const Tensor<T>& v = n.ext ? *n.ext : n.own;
            n.grad = Tensor<T>(v.shape());
        }
        return n.grad;
    }

    std::deque<Node> nodes_;
    std::map<std::string, std::size_t> param_nodes_;
    bool grad_enabled_;
    bool check_finite_ = true;
};

} // namespace gaitxfer::nx
