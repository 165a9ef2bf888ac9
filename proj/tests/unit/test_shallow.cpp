#include <doctest.h>

#include <cmath>
#include <random>

#include "support/oracles.hpp"
#include "support/tmpdir.hpp"
#include "vsn/error.hpp"
#include "vsn/eval.hpp"
#include "vsn/shallow.hpp"

using namespace vsn;
using namespace vsn::shallow;

namespace {

MatrixXd rnd(std::mt19937_64& rng, Eigen::Index r, Eigen::Index c) {
    std::normal_distribution<double> n(0, 1);
    MatrixXd m(r, c);
    for (Eigen::Index i = 0; i < m.size(); ++i) m.data()[i] = n(rng);
    return m;
}

FeatureMatrix fm(const MatrixXd& X) {
    FeatureMatrix f;
    f.X = X;
    for (Eigen::Index i = 0; i < X.rows(); ++i) f.ids.push_back("p" + std::to_string(i));
    for (Eigen::Index j = 0; j < X.cols(); ++j) f.columns.push_back("f" + std::to_string(j));
    return f;
}

// Two gaussian blobs, class 1 shifted along every axis.
std::pair<MatrixXd, std::vector<int>> blobs(std::mt19937_64& rng, int n, int d, double shift) {
    MatrixXd X = rnd(rng, n, d);
    std::vector<int> y(static_cast<std::size_t>(n));
    for (int i = 0; i < n; ++i) {
        y[static_cast<std::size_t>(i)] = i % 2;
        if (i % 2) X.row(i).array() += shift;
    }
    return {X, y};
}

}  // namespace

TEST_CASE("dual solver matches the exhaustive QP on six points") {
    std::mt19937_64 rng(71);
    for (int trial = 0; trial < 10; ++trial) {
        const MatrixXd Z = rnd(rng, 6, 2);
        VectorXd y(6);
        for (int i = 0; i < 6; ++i) y(i) = (i % 2) ? 1.0 : -1.0;
        Kernel k{trial % 2 ? KernelType::linear : KernelType::rbf, 0.5};
        const MatrixXd G = k.gram(Z, Z);
        const MatrixXd Q = (y * y.transpose()).cwiseProduct(G);
        const VectorXd p = VectorXd::Constant(6, -1.0);
        const double C = trial < 5 ? 1.0 : 10.0;
        const auto sol = solve_dual(Q, p, y, VectorXd::Constant(6, C));
        const auto ref = oracle::brute_force_qp(Q, p, y, C);
        CHECK(sol.converged);
        CHECK(std::abs(sol.objective - ref.objective) <= 1e-4);
        CHECK(sol.kkt_violation <= 1e-3);
        CHECK(std::abs(y.dot(sol.alpha)) <= 1e-12);
        CHECK(sol.alpha.minCoeff() >= 0);
        CHECK(sol.alpha.maxCoeff() <= C + 1e-12);
        // objective reported is the objective of the returned alpha
        CHECK(sol.objective == doctest::Approx(0.5 * sol.alpha.dot(Q * sol.alpha) + p.dot(sol.alpha)));
    }
}

TEST_CASE("svm: separable points and rbf xor") {
    MatrixXd Z(4, 2);
    Z << 0, 0, 1, 1, 0, 1, 1, 0;
    const std::vector<double> xor_y = {0, 0, 1, 1};
    SvmParams prm;
    prm.kernel = {KernelType::rbf, 1.0};
    const auto m = fit_svm(Z, xor_y, SvmVariant::classifier, prm);
    for (int i = 0; i < 4; ++i) CHECK((m.decision(Z.row(i).transpose()) > 0) == (xor_y[static_cast<std::size_t>(i)] == 1));

    MatrixXd L(4, 2);
    L << 0, 0, 0, 1, 3, 0, 3, 1;
    const std::vector<double> ly = {0, 0, 1, 1};
    prm.kernel = {KernelType::linear, 0};
    const auto lm = fit_svm(L, ly, SvmVariant::classifier, prm);
    for (int i = 0; i < 4; ++i) CHECK((lm.predict(L.row(i).transpose()) >= 0.5) == (ly[static_cast<std::size_t>(i)] == 1));

    CHECK_THROWS_AS(fit_svm(L, std::vector<double>{1, 1, 1, 1}, SvmVariant::classifier, prm), Error);
}

TEST_CASE("svm: duplicating a non-support vector changes nothing") {
    std::mt19937_64 rng(72);
    auto [X, y] = blobs(rng, 30, 2, 4.0);
    std::vector<double> yd(y.begin(), y.end());
    SvmParams prm;
    prm.kernel = {KernelType::rbf, 0.3};
    prm.tol = 1e-8;
    const auto m = fit_svm(X, yd, SvmVariant::classifier, prm);
    int spare = -1;
    for (int i = 0; i < X.rows() && spare < 0; ++i) {
        bool sv = false;
        for (int s = 0; s < m.support_vectors.rows(); ++s) sv |= m.support_vectors.row(s) == X.row(i);
        if (!sv) spare = i;
    }
    REQUIRE(spare >= 0);
    MatrixXd X2(X.rows() + 1, X.cols());
    X2 << X, X.row(spare);
    auto y2 = yd;
    y2.push_back(yd[static_cast<std::size_t>(spare)]);
    const auto m2 = fit_svm(X2, y2, SvmVariant::classifier, prm);
    const MatrixXd probe = rnd(rng, 20, 2) * 3;
    for (int i = 0; i < probe.rows(); ++i)
        CHECK(std::abs(m.decision(probe.row(i).transpose()) - m2.decision(probe.row(i).transpose())) <= 1e-6);
}

TEST_CASE("svm: epsilon regression fits a line") {
    std::mt19937_64 rng(73);
    MatrixXd X(20, 1);
    std::vector<double> y;
    for (int i = 0; i < 20; ++i) {
        X(i, 0) = i / 19.0;
        y.push_back(0.2 + 0.5 * X(i, 0));
    }
    SvmParams prm;
    prm.kernel = {KernelType::linear, 0};
    prm.epsilon = 0.01;
    prm.C = 100;
    const auto m = fit_svm(X, y, SvmVariant::epsilon_regressor, prm);
    for (int i = 0; i < 20; ++i) CHECK(std::abs(m.predict(X.row(i).transpose()) - y[static_cast<std::size_t>(i)]) <= 0.011);
}

TEST_CASE("platt: increasing in the decision value, bounded") {
    const std::vector<double> f = {-3, -2, -1, -0.5, 0.2, 1, 2, 3};
    const std::vector<int> l = {0, 0, 0, 1, 0, 1, 1, 1};
    const auto [A, B] = platt_fit(f, l);
    CHECK(A < 0);
    auto prob = [&](double x) { return 1 / (1 + std::exp(A * x + B)); };
    CHECK(prob(-3) < 0.5);
    CHECK(prob(3) > 0.5);
}

TEST_CASE("pca: orthonormal and agrees with a Jacobi eigensolver") {
    std::mt19937_64 rng(74);
    for (int trial = 0; trial < 5; ++trial) {
        MatrixXd X = rnd(rng, 20, 8);
        X.col(1) += 2 * X.col(0);
        X.col(3) *= 3;
        const auto m = PcaModel::fit(X, 5);
        const MatrixXd I = m.components * m.components.transpose();
        CHECK((I - MatrixXd::Identity(5, 5)).cwiseAbs().maxCoeff() <= 1e-8);

        const MatrixXd centered = X.rowwise() - X.colwise().mean();
        const MatrixXd cov = centered.transpose() * centered / 19.0;
        VectorXd vals;
        MatrixXd vecs;
        oracle::jacobi_eigen(cov, vals, vecs);
        CHECK(oracle::max_subspace_angle(m.components, vecs.leftCols(5).transpose()) <= 1e-6);
        for (int i = 0; i < 5; ++i) CHECK(m.explained_variance(i) == doctest::Approx(vals(i)).epsilon(1e-9));

        const MatrixXd T = m.transform(X);
        const MatrixXd tc = T.rowwise() - T.colwise().mean();
        const MatrixXd tcov = tc.transpose() * tc / 19.0;
        for (int i = 0; i < 5; ++i)
            for (int j = 0; j < 5; ++j)
                if (i != j) CHECK(std::abs(tcov(i, j)) < 1e-8);
        CHECK(m.transform(X.colwise().mean()).norm() < 1e-12);
        for (int i = 0; i < 5; ++i) {
            Eigen::Index at;
            m.components.row(i).cwiseAbs().maxCoeff(&at);
            CHECK(m.components(i, at) > 0);
        }
    }
}

TEST_CASE("pca: points on a line") {
    MatrixXd X(5, 2);
    X << 0, 0, 1, 2, 2, 4, 3, 6, 4, 8;
    const auto m = PcaModel::fit(X, 1);
    CHECK(std::abs(m.components(0, 1) / m.components(0, 0) - 2.0) < 1e-12);
    const auto m2 = PcaModel::fit(X, 2);  // rank one: second component kept with ~0 variance
    CHECK(m2.explained_variance(1) < 1e-12);
    CHECK(m2.explained_variance(0) / m2.explained_variance.sum() == doctest::Approx(1.0));
}

TEST_CASE("standardizer: median imputation and train-only statistics") {
    MatrixXd X(4, 2);
    X << 1, 10, 2, NAN, 3, 30, 100, 40;
    const auto s = Standardizer::fit(X);
    CHECK(s.median(0) == doctest::Approx(2.5));
    CHECK(s.median(1) == doctest::Approx(30));
    const MatrixXd Z = s.transform(X);
    CHECK(Z.allFinite());
    CHECK(Z(1, 1) == doctest::Approx((30 - s.mean(1)) / s.scale(1)));

    MatrixXd C(3, 1);
    C << 5, 5, 5;
    CHECK(Standardizer::fit(C).transform(C).isZero());
}

TEST_CASE("pipeline: fitted on training rows only") {
    std::mt19937_64 rng(75);
    auto [X, y] = blobs(rng, 40, 6, 2.0);
    const FeatureMatrix all = fm(X);
    std::vector<std::size_t> tr, te;
    for (std::size_t i = 0; i < 40; ++i) (i < 30 ? tr : te).push_back(i);
    const auto train = all.select_rows(tr);
    std::vector<double> ytr;
    for (auto i : tr) ytr.push_back(y[i]);
    PipelineParams pp;
    const auto m = ShallowModel::fit(train, ytr, pp);
    const VectorXd train_mean = train.X.colwise().mean();
    CHECK((m.standardizer.mean - train_mean).norm() < 1e-12);

    // perturbing test rows cannot move the fitted model or other predictions
    const auto before = m.predict(all.select_rows(tr).X);
    MatrixXd wild = all.select_rows(te).X * 1000;
    (void)m.predict(wild);
    CHECK(m.predict(all.select_rows(tr).X) == before);

    const auto pred = m.predict(all.select_rows(te).X);
    std::vector<int> yte;
    for (auto i : te) yte.push_back(y[i]);
    CHECK(eval::classification_metrics(pred, yte).accuracy >= 0.8);
}

TEST_CASE("grid search agrees with exhaustive cross-validation") {
    std::mt19937_64 rng(76);
    auto [X, y] = blobs(rng, 24, 5, 1.0);
    const FeatureMatrix f = fm(X);
    std::vector<GridCell> grid;
    for (auto k : {KernelType::rbf, KernelType::linear})
        for (double C : {0.1, 1.0, 10.0}) grid.push_back({k, C, 3});
    const auto res = grid_search(f, y, grid, 3, 5);

    const auto folds = stratified_folds(y, 3, 5);
    std::vector<double> f1;
    for (const auto& cell : grid) {
        std::vector<double> scores(24);
        for (std::size_t k = 0; k < 3; ++k) {
            std::vector<std::size_t> tr, te;
            for (std::size_t i = 0; i < 24; ++i) (folds[i] == k ? te : tr).push_back(i);
            std::vector<double> ytr;
            for (auto i : tr) ytr.push_back(y[i]);
            PipelineParams pp;
            pp.n_components = cell.n_components;
            pp.svm.C = cell.C;
            pp.svm.kernel.type = cell.kernel;
            const auto m = ShallowModel::fit(f.select_rows(tr), ytr, pp);
            const auto p = m.predict(f.select_rows(te).X);
            for (std::size_t j = 0; j < te.size(); ++j) scores[te[j]] = p[j];
        }
        f1.push_back(eval::classification_metrics(scores, y).f1);
    }
    std::size_t best = 0;
    for (std::size_t i = 1; i < grid.size(); ++i) {
        const bool better = f1[i] > f1[best] || (f1[i] == f1[best] && grid[i].C < grid[best].C);
        if (better) best = i;
    }
    for (std::size_t i = 0; i < grid.size(); ++i) CHECK(res.cell_f1[i] == doctest::Approx(f1[i]));
    CHECK(res.best.kernel == grid[best].kernel);
    CHECK(res.best.C == grid[best].C);

    const std::vector<GridCell> one = {{KernelType::linear, 2.0, 2}};
    CHECK(grid_search(f, y, one, 3, 5).best.C == 2.0);
}

TEST_CASE("stratified folds balance each class") {
    std::vector<int> y;
    for (int i = 0; i < 23; ++i) y.push_back(i % 3 == 0);
    const auto f = stratified_folds(y, 4, 9);
    std::array<std::array<int, 2>, 4> count{};
    for (std::size_t i = 0; i < y.size(); ++i) count[f[i]][static_cast<std::size_t>(y[i])]++;
    for (int c = 0; c < 2; ++c) {
        int lo = 100, hi = 0;
        for (auto& k : count) {
            lo = std::min(lo, k[static_cast<std::size_t>(c)]);
            hi = std::max(hi, k[static_cast<std::size_t>(c)]);
        }
        CHECK(hi - lo <= 1);
    }
    CHECK(stratified_folds(y, 4, 9) == f);
}

TEST_CASE("feature csv, join and model artifacts round trip") {
    testutil::TempDir d;
    MatrixXd X(3, 2);
    X << 1.5, NAN, -2, 0.125, 1e-17, 3;
    auto f = fm(X);
    f.write_csv(d / "f.csv");
    const auto back = FeatureMatrix::read_csv(d / "f.csv");
    CHECK(back.ids == f.ids);
    CHECK(back.columns == f.columns);
    CHECK(std::isnan(back.X(0, 1)));
    CHECK(back.X(2, 0) == 1e-17);
    CHECK(back.X(1, 1) == 0.125);

    FeatureMatrix g;
    g.ids = {"p2", "p0"};
    g.columns = {"g"};
    g.X.resize(2, 1);
    g.X << 20, 0;
    const std::vector<FeatureMatrix> parts = {f, g};
    const auto j = join_columns(parts);
    CHECK(j.ids == std::vector<std::string>{"p0", "p2"});
    CHECK(j.columns.size() == 3);
    CHECK(j.X(1, 2) == 20);

    std::mt19937_64 rng(77);
    auto [Y, lab] = blobs(rng, 20, 4, 2.0);
    std::vector<double> yd(lab.begin(), lab.end());
    const auto m = ShallowModel::fit(fm(Y), yd, PipelineParams{});
    save_model(m, d / "m.nmt", {{"k", 1}});
    nlohmann::json prov;
    const auto m2 = load_model(d / "m.nmt", &prov);
    CHECK(prov["k"] == 1);
    const auto a = m.predict(Y), b = m2.predict(Y);
    for (std::size_t i = 0; i < a.size(); ++i) CHECK(std::abs(a[i] - b[i]) < 1e-5);
}
