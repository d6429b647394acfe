#pragma once

#include <deque>
#include <functional>
#include <stdexcept>

#include "tamperlab/nn/tensor.hpp"

namespace tamperlab::nn {

// Define-by-run reverse-mode tape. Ops append nodes during the forward pass
// and register closures that scatter gradients to their inputs; running the
// closures in reverse creation order is a topological sweep.
//
// Interior nodes own their buffers. Parameter leaves alias the persistent
// Param storage so backward() accumulates straight into Param::grad.
template <class T>
class Tape {
public:
    struct Node {
        Shape shape;
        std::vector<T> val_buf, grad_buf;
        T* val = nullptr;
        T* grad = nullptr;
        std::int64_t size = 0;
        std::function<void(Tape&)> backward;
    };

    int new_node(Shape shape) {
        nodes_.emplace_back();
        Node& n = nodes_.back();
        n.size = numel(shape);
        n.shape = std::move(shape);
        n.val_buf.assign(static_cast<std::size_t>(n.size), T(0));
        n.grad_buf.assign(static_cast<std::size_t>(n.size), T(0));
        n.val = n.val_buf.data();
        n.grad = n.grad_buf.data();
        return static_cast<int>(nodes_.size()) - 1;
    }

    int leaf_param(Param<T>& p) {
        nodes_.emplace_back();
        Node& n = nodes_.back();
        n.shape = p.value.shape;
        n.size = p.value.size();
        n.val = p.value.v.data();
        n.grad = p.grad.v.data();
        return static_cast<int>(nodes_.size()) - 1;
    }

    // Input leaf: values aliased read-only, gradient buffer owned.
    int leaf_input(const Tensor<T>& t) {
        nodes_.emplace_back();
        Node& n = nodes_.back();
        n.shape = t.shape;
        n.size = t.size();
        n.val = const_cast<T*>(t.v.data());
        n.grad_buf.assign(static_cast<std::size_t>(n.size), T(0));
        n.grad = n.grad_buf.data();
        return static_cast<int>(nodes_.size()) - 1;
    }

    Node& at(int i) { return nodes_[static_cast<std::size_t>(i)]; }
    const Node& at(int i) const { return nodes_[static_cast<std::size_t>(i)]; }

    void set_backward(int i, std::function<void(Tape&)> fn) { at(i).backward = std::move(fn); }

    void backward(int loss) {
        Node& l = at(loss);
        if (l.size != 1) throw std::logic_error("backward() expects a scalar loss node");
        if (!std::isfinite(static_cast<double>(l.val[0])))
            throw std::runtime_error("non-finite loss; aborting step");
        l.grad[0] = T(1);
        for (int i = loss; i >= 0; --i)
            if (nodes_[static_cast<std::size_t>(i)].backward) nodes_[static_cast<std::size_t>(i)].backward(*this);
    }

    void check_finite(int i, const char* op_name) const {
        if (!finite_checks) return;
        const Node& n = at(i);
        for (std::int64_t k = 0; k < n.size; ++k)
            if (!std::isfinite(static_cast<double>(n.val[k])))
                throw std::runtime_error(std::string("non-finite value after op ") + op_name);
    }

    std::size_t node_count() const { return nodes_.size(); }

    // Per-op finiteness verification; enabled in tests, off in the hot path
    // where the per-step loss check guards the same invariant.
    bool finite_checks = false;

private:
    std::deque<Node> nodes_;
};

} // namespace tamperlab::nn
