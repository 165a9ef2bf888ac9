#include <doctest.h>

#include <random>

#include "vsn/ad.hpp"

using namespace vsn::ad;
using Eigen::MatrixXd;

namespace {

MatrixXd rnd(std::mt19937_64& rng, Eigen::Index r, Eigen::Index c) {
    std::normal_distribution<double> n(0, 1);
    MatrixXd m(r, c);
    for (Eigen::Index i = 0; i < m.size(); ++i) m.data()[i] = n(rng);
    return m;
}

// f builds a scalar loss from the given leaves; compares tape gradients
// with central differences on every entry of every leaf.
double check(const std::vector<MatrixXd>& leaves, const std::function<Var(Tape&, const std::vector<Var>&)>& f) {
    Tape tape;
    std::vector<Var> in;
    for (const auto& m : leaves) in.push_back(tape.input(m));
    const Var loss = f(tape, in);
    tape.backward(loss);
    auto eval = [&](const std::vector<MatrixXd>& ls) {
        Tape t;
        std::vector<Var> v;
        for (const auto& m : ls) v.push_back(t.input(m));
        return t.value(f(t, v))(0, 0);
    };
    double worst = 0;
    for (std::size_t l = 0; l < leaves.size(); ++l) {
        for (Eigen::Index i = 0; i < leaves[l].size(); ++i) {
            auto up = leaves, down = leaves;
            up[l].data()[i] += 1e-6;
            down[l].data()[i] -= 1e-6;
            const double fd = (eval(up) - eval(down)) / 2e-6;
            const double g = tape.grad(in[l]).data()[i];
            worst = std::max(worst, std::abs(g - fd) / std::max({1.0, std::abs(g), std::abs(fd)}));
        }
    }
    return worst;
}

}  // namespace

TEST_CASE("tape operations agree with finite differences") {
    std::mt19937_64 rng(51);
    const MatrixXd target = rnd(rng, 3, 4), row_target = rnd(rng, 1, 4);

    CHECK(check({rnd(rng, 3, 2), rnd(rng, 2, 4)},
                [&](Tape& t, auto& v) { return t.mse(t.matmul(v[0], v[1]), target); }) < 1e-7);
    CHECK(check({rnd(rng, 3, 2), rnd(rng, 4, 2)},
                [&](Tape& t, auto& v) { return t.mse(t.matmul_t(v[0], v[1]), target); }) < 1e-7);
    CHECK(check({rnd(rng, 3, 4), rnd(rng, 3, 4)},
                [&](Tape& t, auto& v) { return t.mse(t.add(v[0], v[1]), target); }) < 1e-7);
    CHECK(check({rnd(rng, 3, 4), rnd(rng, 1, 4)},
                [&](Tape& t, auto& v) { return t.mse(t.add_row(v[0], v[1]), target); }) < 1e-7);
    CHECK(check({rnd(rng, 3, 4)}, [&](Tape& t, auto& v) { return t.mse(t.scale(v[0], -0.7), target); }) < 1e-7);

    const MatrixXd angles = rnd(rng, 3, 4);
    const MatrixXd c = angles.array().cos(), s = angles.array().sin();
    CHECK(check({rnd(rng, 3, 4)}, [&](Tape& t, auto& v) { return t.mse(t.rotate_pairs(v[0], c, s), target); }) <
          1e-7);

    const std::vector<std::uint8_t> keys = {1, 0, 1, 1};
    CHECK(check({rnd(rng, 3, 4)}, [&](Tape& t, auto& v) { return t.mse(t.softmax_rows(v[0], keys), target); }) <
          1e-7);
    const std::vector<std::uint8_t> rows = {1, 0, 1};
    CHECK(check({rnd(rng, 3, 4)},
                [&](Tape& t, auto& v) { return t.mse(t.masked_mean_rows(v[0], rows), row_target); }) < 1e-7);
    CHECK(check({rnd(rng, 1, 4)}, [&](Tape& t, auto& v) { return t.mse(t.softmax_row(v[0]), row_target); }) < 1e-7);
    CHECK(check({rnd(rng, 1, 4)}, [&](Tape& t, auto& v) { return t.softmax_cross_entropy(v[0], 2); }) < 1e-7);
}

TEST_CASE("masked softmax gives masked keys no weight and rows sum to one") {
    Tape t;
    std::mt19937_64 rng(52);
    const Var s = t.constant(rnd(rng, 5, 5) * 10);
    const MatrixXd a = t.value(t.softmax_rows(s, {1, 1, 0, 1, 0}));
    for (int i = 0; i < 5; ++i) {
        CHECK(a.row(i).sum() == doctest::Approx(1.0).epsilon(1e-12));
        CHECK(a(i, 2) < 1e-12);
        CHECK(a(i, 4) < 1e-12);
    }
}

TEST_CASE("shared subexpressions accumulate adjoints") {
    Tape t;
    MatrixXd x0(1, 1);
    x0 << 3.0;
    const Var x = t.input(x0);
    const Var y = t.matmul(x, x);  // x^2
    const Var z = t.add(y, x);     // x^2 + x
    t.backward(z);
    CHECK(t.grad(x)(0, 0) == doctest::Approx(7.0));
}
