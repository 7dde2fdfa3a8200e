#pragma once

#include <functional>
#include <utility>
#include <vector>

#include "gazeread/errors.hpp"
#include "gazeread/tensor.hpp"

namespace gazeread {

// Handle into a Tape. Plain index; cheap to copy.
struct Var {
    int id = -1;
    bool valid() const { return id >= 0; }
};

// Reverse-mode tape over a fixed op set. Nodes are appended in topological
// order by construction, so backward() is a single reverse sweep. The model
// architecture is static, which keeps this sufficient: no graph compiler,
// no dynamic shapes beyond what the ops declare.
template <class Real>
class Tape {
  public:
    struct Node {
        Tensor<Real> value;
        Tensor<Real> grad;   // allocated on first accumulation
        bool touched = false;
        std::function<void(Tape&, int)> backward; // null for leaves
    };

    Var input(Tensor<Real> v) {
        nodes_.push_back(Node{std::move(v), {}, false, nullptr});
        return Var{static_cast<int>(nodes_.size()) - 1};
    }

    int emplace(Tensor<Real> value, std::function<void(Tape&, int)> bw) {
        nodes_.push_back(Node{std::move(value), {}, false, std::move(bw)});
        return static_cast<int>(nodes_.size()) - 1;
    }

    const Tensor<Real>& value(Var v) const { return nodes_.at(static_cast<std::size_t>(v.id)).value; }
    const Tensor<Real>& value(int id) const { return nodes_.at(static_cast<std::size_t>(id)).value; }

    // Gradient accumulation target; zero-initialized on first touch.
    Tensor<Real>& grad_buf(int id) {
        Node& n = nodes_.at(static_cast<std::size_t>(id));
        if (!n.touched) {
            n.grad = Tensor<Real>::zeros(n.value.shape);
            n.touched = true;
        }
        return n.grad;
    }

    // Gradient of a node after backward(); exact zeros if the loss never
    // reached it.
    const Tensor<Real>& grad(Var v) {
        Node& n = nodes_.at(static_cast<std::size_t>(v.id));
        if (!n.touched) {
            n.grad = Tensor<Real>::zeros(n.value.shape);
            n.touched = true;
        }
        return n.grad;
    }

    void backward(Var loss) {
        Node& l = nodes_.at(static_cast<std::size_t>(loss.id));
        if (l.value.numel() != 1) throw ShapeError("backward() expects a scalar loss node");
        grad_buf(loss.id).data[0] = Real(1);
        for (int id = loss.id; id >= 0; --id) {
            Node& n = nodes_[static_cast<std::size_t>(id)];
            if (n.touched && n.backward) n.backward(*this, id);
        }
    }

    int size() const { return static_cast<int>(nodes_.size()); }

    void reserve(std::size_t n) { nodes_.reserve(n); }

  private:
    std::vector<Node> nodes_;
};

} // namespace gazeread
