#include "vsn/ad.hpp"

#include <cmath>

#include "vsn/error.hpp"

namespace vsn::ad {

using Eigen::Index;

namespace {
constexpr double kMaskedLogit = -1e9;

void check(bool ok, const char* what) {
    if (!ok) throw Error(Errc::ShapeMismatch, what);
}
}  // namespace

Var Tape::push(MatrixXd value, bool requires_grad, std::function<void(Tape&, std::size_t)> back) {
    Node n;
    n.grad = MatrixXd::Zero(value.rows(), value.cols());
    n.value = std::move(value);
    n.requires_grad = requires_grad;
    if (requires_grad) n.back = std::move(back);
    nodes_.push_back(std::move(n));
    return Var{nodes_.size() - 1};
}

Var Tape::input(MatrixXd value) { return push(std::move(value), true, nullptr); }
Var Tape::constant(MatrixXd value) { return push(std::move(value), false, nullptr); }

Var Tape::matmul(Var a, Var b) {
    check(value(a).cols() == value(b).rows(), "matmul: inner dimensions differ");
    return push(value(a) * value(b), needs(a) || needs(b), [a, b](Tape& t, std::size_t self) {
        const MatrixXd& gy = t.g(self);
        if (t.needs(a)) t.g(a.id).noalias() += gy * t.value(b).transpose();
        if (t.needs(b)) t.g(b.id).noalias() += t.value(a).transpose() * gy;
    });
}

Var Tape::matmul_t(Var a, Var b) {
    check(value(a).cols() == value(b).cols(), "matmul_t: column counts differ");
    return push(value(a) * value(b).transpose(), needs(a) || needs(b), [a, b](Tape& t, std::size_t self) {
        const MatrixXd& gy = t.g(self);
        if (t.needs(a)) t.g(a.id).noalias() += gy * t.value(b);
        if (t.needs(b)) t.g(b.id).noalias() += gy.transpose() * t.value(a);
    });
}

Var Tape::add(Var a, Var b) {
    check(value(a).rows() == value(b).rows() && value(a).cols() == value(b).cols(), "add: shapes differ");
    return push(value(a) + value(b), needs(a) || needs(b), [a, b](Tape& t, std::size_t self) {
        if (t.needs(a)) t.g(a.id) += t.g(self);
        if (t.needs(b)) t.g(b.id) += t.g(self);
    });
}

Var Tape::add_row(Var a, Var row) {
    check(value(row).rows() == 1 && value(row).cols() == value(a).cols(), "add_row: bias shape");
    MatrixXd y = value(a).rowwise() + value(row).row(0);
    return push(std::move(y), needs(a) || needs(row), [a, row](Tape& t, std::size_t self) {
        if (t.needs(a)) t.g(a.id) += t.g(self);
        if (t.needs(row)) t.g(row.id) += t.g(self).colwise().sum();
    });
}

Var Tape::scale(Var a, double s) {
    return push(value(a) * s, needs(a), [a, s](Tape& t, std::size_t self) { t.g(a.id) += s * t.g(self); });
}

namespace {
// rot(x): (x0, x1) -> (-x1, x0) on consecutive column pairs; a trailing odd
// column maps to 0.
MatrixXd rot(const MatrixXd& x) {
    MatrixXd r = MatrixXd::Zero(x.rows(), x.cols());
    for (Index c = 0; c + 1 < x.cols(); c += 2) {
        r.col(c) = -x.col(c + 1);
        r.col(c + 1) = x.col(c);
    }
    return r;
}
// transpose of rot: (g0, g1) -> (g1, -g0)
MatrixXd rot_t(const MatrixXd& g) {
    MatrixXd r = MatrixXd::Zero(g.rows(), g.cols());
    for (Index c = 0; c + 1 < g.cols(); c += 2) {
        r.col(c) = g.col(c + 1);
        r.col(c + 1) = -g.col(c);
    }
    return r;
}
}  // namespace

Var Tape::rotate_pairs(Var x, const MatrixXd& cos, const MatrixXd& sin) {
    const MatrixXd& v = value(x);
    check(cos.rows() == v.rows() && cos.cols() == v.cols() && sin.rows() == v.rows() && sin.cols() == v.cols(),
          "rotate_pairs: angle table shape");
    MatrixXd y = v.cwiseProduct(cos) + rot(v).cwiseProduct(sin);
    return push(std::move(y), needs(x), [x, cos, sin](Tape& t, std::size_t self) {
        const MatrixXd& gy = t.g(self);
        t.g(x.id) += gy.cwiseProduct(cos) + rot_t(gy.cwiseProduct(sin));
    });
}

Var Tape::softmax_rows(Var s, const std::vector<std::uint8_t>& key_mask) {
    const MatrixXd& v = value(s);
    check(static_cast<Index>(key_mask.size()) == v.cols(), "softmax_rows: mask length");
    MatrixXd y = v;
    for (Index c = 0; c < y.cols(); ++c)
        if (!key_mask[static_cast<std::size_t>(c)]) y.col(c).array() += kMaskedLogit;
    for (Index r = 0; r < y.rows(); ++r) {
        const double mx = y.row(r).maxCoeff();
        y.row(r) = (y.row(r).array() - mx).exp();
        y.row(r) /= y.row(r).sum();
    }
    return push(std::move(y), needs(s), [s](Tape& t, std::size_t self) {
        const MatrixXd& a = t.value(Var{self});
        const MatrixXd& gy = t.g(self);
        const Eigen::VectorXd dot = gy.cwiseProduct(a).rowwise().sum();
        t.g(s.id) += a.cwiseProduct(gy - dot.replicate(1, gy.cols()));
    });
}

Var Tape::masked_mean_rows(Var x, const std::vector<std::uint8_t>& row_mask) {
    const MatrixXd& v = value(x);
    check(static_cast<Index>(row_mask.size()) == v.rows(), "masked_mean_rows: mask length");
    double n = 0;
    MatrixXd y = MatrixXd::Zero(1, v.cols());
    for (Index r = 0; r < v.rows(); ++r)
        if (row_mask[static_cast<std::size_t>(r)]) {
            y += v.row(r);
            n += 1;
        }
    check(n > 0, "masked_mean_rows: every row is masked");
    y /= n;
    return push(std::move(y), needs(x), [x, row_mask, n](Tape& t, std::size_t self) {
        const MatrixXd& gy = t.g(self);
        MatrixXd& gx = t.g(x.id);
        for (Index r = 0; r < gx.rows(); ++r)
            if (row_mask[static_cast<std::size_t>(r)]) gx.row(r) += gy / n;
    });
}

Var Tape::softmax_row(Var z) {
    check(value(z).rows() == 1, "softmax_row: expects a row");
    MatrixXd y = value(z);
    y = (y.array() - y.maxCoeff()).exp();
    y /= y.sum();
    return push(std::move(y), needs(z), [z](Tape& t, std::size_t self) {
        const MatrixXd& a = t.value(Var{self});
        const MatrixXd& gy = t.g(self);
        const double dot = gy.cwiseProduct(a).sum();
        t.g(z.id) += a.cwiseProduct((gy.array() - dot).matrix());
    });
}

Var Tape::softmax_cross_entropy(Var logits, int target) {
    const MatrixXd& z = value(logits);
    check(z.rows() == 1 && target >= 0 && target < z.cols(), "softmax_cross_entropy: target out of range");
    const double mx = z.maxCoeff();
    const double lse = mx + std::log((z.array() - mx).exp().sum());
    MatrixXd y(1, 1);
    y(0, 0) = lse - z(0, target);
    return push(std::move(y), needs(logits), [logits, target, lse](Tape& t, std::size_t self) {
        const double gy = t.g(self)(0, 0);
        MatrixXd p = (t.value(logits).array() - lse).exp();
        p(0, target) -= 1.0;
        t.g(logits.id) += gy * p;
    });
}

Var Tape::mse(Var y, const MatrixXd& target) {
    const MatrixXd& v = value(y);
    check(v.rows() == target.rows() && v.cols() == target.cols(), "mse: target shape");
    MatrixXd out(1, 1);
    out(0, 0) = (v - target).squaredNorm() / static_cast<double>(v.size());
    return push(std::move(out), needs(y), [y, target](Tape& t, std::size_t self) {
        const double gy = t.g(self)(0, 0);
        t.g(y.id) += gy * 2.0 / static_cast<double>(target.size()) * (t.value(y) - target);
    });
}

void Tape::backward(Var loss) {
    check(value(loss).size() == 1, "backward: loss must be a scalar");
    for (auto& n : nodes_) n.grad.setZero();
    nodes_[loss.id].grad(0, 0) = 1.0;
    for (std::size_t i = loss.id + 1; i-- > 0;)
        if (nodes_[i].back) nodes_[i].back(*this, i);
}

}  // namespace vsn::ad
