#pragma once

// Matrix-valued reverse-mode automatic differentiation. A Tape records each
// operation with its value; backward() walks the record in reverse and
// accumulates adjoints. Only the handful of operations the attention
// network needs are provided.

#include <cstdint>
#include <functional>
#include <vector>

#include <Eigen/Dense>

namespace vsn::ad {

using Eigen::MatrixXd;

struct Var {
    std::size_t id = 0;
};

class Tape {
public:
    /// Leaf whose gradient is wanted.
    Var input(MatrixXd value);
    /// Leaf treated as data.
    Var constant(MatrixXd value);

    const MatrixXd& value(Var v) const { return nodes_.at(v.id).value; }
    const MatrixXd& grad(Var v) const { return nodes_.at(v.id).grad; }
    std::size_t size() const noexcept { return nodes_.size(); }

    Var matmul(Var a, Var b);
    Var matmul_t(Var a, Var b);  // a * b^T
    Var add(Var a, Var b);
    Var add_row(Var a, Var row);  // row (1 x n) broadcast over the rows of a
    Var scale(Var a, double s);
    /// Pairwise rotation y = x .* cos + rot(x) .* sin, where rot maps each
    /// pair (x0, x1) to (-x1, x0). cos/sin have the shape of x.
    Var rotate_pairs(Var x, const MatrixXd& cos, const MatrixXd& sin);
    /// Row softmax after adding -1e9 to columns whose key_mask entry is 0.
    Var softmax_rows(Var s, const std::vector<std::uint8_t>& key_mask);
    /// Mean over the rows whose mask entry is 1, as a 1 x n row.
    Var masked_mean_rows(Var x, const std::vector<std::uint8_t>& row_mask);
    Var softmax_row(Var z);
    /// -log softmax(logits)[target] for a 1 x C row.
    Var softmax_cross_entropy(Var logits, int target);
    /// Mean squared error against a constant target of the same shape.
    Var mse(Var y, const MatrixXd& target);

    /// Seeds d(loss)/d(loss) = 1 for a 1 x 1 node and propagates.
    void backward(Var loss);

private:
    struct Node {
        MatrixXd value;
        MatrixXd grad;
        bool requires_grad = false;
        std::function<void(Tape&, std::size_t)> back;
    };

    Var push(MatrixXd value, bool requires_grad, std::function<void(Tape&, std::size_t)> back);
    bool needs(Var v) const { return nodes_[v.id].requires_grad; }
    MatrixXd& g(std::size_t id) { return nodes_[id].grad; }

    std::vector<Node> nodes_;
};

}  // namespace vsn::ad
