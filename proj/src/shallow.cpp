#include "vsn/shallow.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <map>
#include <numeric>
#include <random>
#include <set>

#include <fmt/format.h>

#include "vsn/container.hpp"
#include "vsn/csv.hpp"
#include "vsn/error.hpp"

namespace vsn::shallow {

using Eigen::Index;
namespace fs = std::filesystem;

namespace {
constexpr double kNaN = std::numeric_limits<double>::quiet_NaN();
constexpr double kTau = 1e-12;
}  // namespace

// --- feature matrix -----------------------------------------------------

void FeatureMatrix::validate() const {
    if (static_cast<Index>(ids.size()) != X.rows() || static_cast<Index>(columns.size()) != X.cols())
        throw Error(Errc::ShapeMismatch, "feature matrix shape does not match its labels");
    std::set<std::string> seen;
    for (const auto& c : columns)
        if (!seen.insert(c).second) throw Error(Errc::DuplicateId, "duplicate feature column '" + c + "'");
}

FeatureMatrix FeatureMatrix::select_rows(std::span<const std::size_t> idx) const {
    FeatureMatrix out;
    out.columns = columns;
    out.X.resize(static_cast<Index>(idx.size()), X.cols());
    for (std::size_t i = 0; i < idx.size(); ++i) {
        out.ids.push_back(ids.at(idx[i]));
        out.X.row(static_cast<Index>(i)) = X.row(static_cast<Index>(idx[i]));
    }
    return out;
}

FeatureMatrix FeatureMatrix::read_csv(const fs::path& path) {
    if (!fs::exists(path)) throw Error(Errc::MissingArtifact, "feature file not found: " + path.string());
    const csv::Table t = csv::read(path);
    if (t.header.empty() || t.header[0] != "id") throw Error(Errc::MalformedRecord, path.string() + ": first column must be 'id'");
    FeatureMatrix m;
    m.columns.assign(t.header.begin() + 1, t.header.end());
    m.X.resize(static_cast<Index>(t.rows.size()), static_cast<Index>(m.columns.size()));
    for (std::size_t r = 0; r < t.rows.size(); ++r) {
        m.ids.push_back(t.rows[r][0]);
        for (std::size_t c = 0; c < m.columns.size(); ++c) {
            const std::string& cell = t.rows[r][c + 1];
            double v = kNaN;
            if (!cell.empty() && cell != "nan") {
                try {
                    std::size_t used = 0;
                    v = std::stod(cell, &used);
                    if (used != cell.size()) throw std::invalid_argument(cell);
                } catch (const std::exception&) {
                    throw Error(Errc::MalformedRecord, fmt::format("{}: row {} column '{}' is not a number", path.string(),
                                                                   r + 2, m.columns[c]));
                }
            }
            m.X(static_cast<Index>(r), static_cast<Index>(c)) = v;
        }
    }
    m.validate();
    return m;
}

void FeatureMatrix::write_csv(const fs::path& path) const {
    validate();
    csv::Table t;
    t.header.push_back("id");
    t.header.insert(t.header.end(), columns.begin(), columns.end());
    for (std::size_t r = 0; r < ids.size(); ++r) {
        csv::Row row{ids[r]};
        for (Index c = 0; c < X.cols(); ++c) row.push_back(csv::num(X(static_cast<Index>(r), c)));
        t.rows.push_back(std::move(row));
    }
    csv::write(t, path);
}

FeatureMatrix join_columns(std::span<const FeatureMatrix> parts) {
    FeatureMatrix out;
    if (parts.empty()) return out;
    std::vector<std::map<std::string, Index>> index(parts.size());
    for (std::size_t p = 0; p < parts.size(); ++p) {
        for (std::size_t r = 0; r < parts[p].ids.size(); ++r) index[p][parts[p].ids[r]] = static_cast<Index>(r);
        out.columns.insert(out.columns.end(), parts[p].columns.begin(), parts[p].columns.end());
    }
    std::vector<std::string> keep;
    for (const auto& id : parts[0].ids)
        if (std::all_of(index.begin(), index.end(), [&](const auto& m) { return m.count(id) > 0; })) keep.push_back(id);
    out.X.resize(static_cast<Index>(keep.size()), static_cast<Index>(out.columns.size()));
    for (std::size_t r = 0; r < keep.size(); ++r) {
        Index c0 = 0;
        for (std::size_t p = 0; p < parts.size(); ++p) {
            const Index w = parts[p].X.cols();
            out.X.block(static_cast<Index>(r), c0, 1, w) = parts[p].X.row(index[p].at(keep[r]));
            c0 += w;
        }
    }
    out.ids = std::move(keep);
    out.validate();
    return out;
}

// --- standardizer -------------------------------------------------------

Standardizer Standardizer::fit(const MatrixXd& X) {
    if (X.rows() == 0) throw Error(Errc::InvalidArgument, "cannot fit a standardizer on zero rows");
    Standardizer s;
    const Index D = X.cols();
    s.median = VectorXd::Zero(D);
    s.mean = VectorXd::Zero(D);
    s.scale = VectorXd::Ones(D);
    for (Index c = 0; c < D; ++c) {
        std::vector<double> v;
        for (Index r = 0; r < X.rows(); ++r)
            if (std::isfinite(X(r, c))) v.push_back(X(r, c));
        if (!v.empty()) {
            std::sort(v.begin(), v.end());
            const std::size_t n = v.size();
            s.median(c) = n % 2 ? v[n / 2] : 0.5 * (v[n / 2 - 1] + v[n / 2]);
        }
        double sum = 0, sq = 0;
        for (Index r = 0; r < X.rows(); ++r) {
            const double x = std::isfinite(X(r, c)) ? X(r, c) : s.median(c);
            sum += x;
        }
        s.mean(c) = sum / static_cast<double>(X.rows());
        for (Index r = 0; r < X.rows(); ++r) {
            const double x = std::isfinite(X(r, c)) ? X(r, c) : s.median(c);
            sq += (x - s.mean(c)) * (x - s.mean(c));
        }
        const double sd = std::sqrt(sq / static_cast<double>(X.rows()));
        s.scale(c) = sd > 0 ? sd : 1.0;
    }
    return s;
}

MatrixXd Standardizer::transform(const MatrixXd& X) const {
    if (X.cols() != mean.size()) throw Error(Errc::ShapeMismatch, "standardizer column count differs");
    MatrixXd out(X.rows(), X.cols());
    for (Index r = 0; r < X.rows(); ++r)
        for (Index c = 0; c < X.cols(); ++c) {
            const double x = std::isfinite(X(r, c)) ? X(r, c) : median(c);
            out(r, c) = (x - mean(c)) / scale(c);
        }
    return out;
}

// --- PCA ------------------------------------------------------------------

PcaModel PcaModel::fit(const MatrixXd& X, std::size_t n_components) {
    if (X.rows() < 2) throw Error(Errc::InvalidArgument, "PCA needs at least two rows");
    if (n_components == 0) throw Error(Errc::InvalidArgument, "n_components must be positive");
    PcaModel m;
    m.mean = X.colwise().mean().transpose();
    const MatrixXd Xc = X.rowwise() - m.mean.transpose();
    const MatrixXd cov = Xc.transpose() * Xc / static_cast<double>(X.rows() - 1);
    Eigen::SelfAdjointEigenSolver<MatrixXd> es(cov);
    const VectorXd& ev = es.eigenvalues();  // ascending
    const Index D = cov.rows();
    const double top = std::max(ev(D - 1), 0.0);
    Index rank = 0;
    for (Index i = 0; i < D; ++i)
        if (ev(i) > 1e-12 * std::max(1.0, top)) ++rank;
    Index keep = std::min<Index>(static_cast<Index>(n_components), D);
    if (keep > rank) {
        warn(fmt::format("RankDeficient: asked for {} components, data has rank {}", n_components, rank));
        keep = std::max<Index>(rank, 1);
    }
    m.components.resize(keep, D);
    m.explained_variance.resize(keep);
    for (Index k = 0; k < keep; ++k) {
        VectorXd v = es.eigenvectors().col(D - 1 - k);
        Index arg = 0;
        v.cwiseAbs().maxCoeff(&arg);
        if (v(arg) < 0) v = -v;
        m.components.row(k) = v.transpose();
        m.explained_variance(k) = std::max(ev(D - 1 - k), 0.0);
    }
    return m;
}

MatrixXd PcaModel::transform(const MatrixXd& X) const {
    if (X.cols() != mean.size()) throw Error(Errc::ShapeMismatch, "PCA column count differs");
    return (X.rowwise() - mean.transpose()) * components.transpose();
}

// --- kernels and the dual solver -----------------------------------------

double Kernel::operator()(const VectorXd& a, const VectorXd& b) const {
    if (type == KernelType::linear) return a.dot(b);
    return std::exp(-gamma * (a - b).squaredNorm());
}

MatrixXd Kernel::gram(const MatrixXd& A, const MatrixXd& B) const {
    MatrixXd G = A * B.transpose();
    if (type == KernelType::linear) return G;
    const VectorXd na = A.rowwise().squaredNorm(), nb = B.rowwise().squaredNorm();
    for (Index i = 0; i < G.rows(); ++i)
        for (Index j = 0; j < G.cols(); ++j) G(i, j) = std::exp(-gamma * std::max(0.0, na(i) + nb(j) - 2 * G(i, j)));
    return G;
}

DualSolution solve_dual(const MatrixXd& Q, const VectorXd& p, const VectorXd& y, const VectorXd& C, double tol,
                        std::size_t max_iter) {
    const Index n = p.size();
    if (Q.rows() != n || Q.cols() != n || y.size() != n || C.size() != n)
        throw Error(Errc::ShapeMismatch, "dual problem dimensions disagree");
    DualSolution s;
    s.alpha = VectorXd::Zero(n);
    VectorXd G = p;
    VectorXd& a = s.alpha;
    auto upper = [&](Index t) { return a(t) >= C(t); };
    auto lower = [&](Index t) { return a(t) <= 0; };

    while (s.iterations < max_iter) {
        double gmax = -std::numeric_limits<double>::infinity(), gmax2 = gmax;
        Index i = -1, j = -1;
        for (Index t = 0; t < n; ++t) {
            if (y(t) > 0) {
                if (!upper(t) && -G(t) >= gmax) gmax = -G(t), i = t;
            } else if (!lower(t) && G(t) >= gmax) {
                gmax = G(t), i = t;
            }
        }
        double best = std::numeric_limits<double>::infinity();
        for (Index t = 0; t < n; ++t) {
            if (y(t) > 0) {
                if (lower(t)) continue;
                const double diff = gmax + G(t);
                gmax2 = std::max(gmax2, G(t));
                if (i >= 0 && diff > 0) {
                    double quad = Q(i, i) + Q(t, t) - 2.0 * y(i) * Q(i, t);
                    if (quad <= 0) quad = kTau;
                    if (-diff * diff / quad <= best) best = -diff * diff / quad, j = t;
                }
            } else {
                if (upper(t)) continue;
                const double diff = gmax - G(t);
                gmax2 = std::max(gmax2, -G(t));
                if (i >= 0 && diff > 0) {
                    double quad = Q(i, i) + Q(t, t) + 2.0 * y(i) * Q(i, t);
                    if (quad <= 0) quad = kTau;
                    if (-diff * diff / quad <= best) best = -diff * diff / quad, j = t;
                }
            }
        }
        s.kkt_violation = std::max(0.0, gmax + gmax2);
        if (i < 0 || j < 0 || gmax + gmax2 < tol) {
            s.converged = true;
            break;
        }
        ++s.iterations;

        const double ai = a(i), aj = a(j), Ci = C(i), Cj = C(j);
        if (y(i) != y(j)) {
            double quad = Q(i, i) + Q(j, j) + 2 * Q(i, j);
            if (quad <= 0) quad = kTau;
            const double delta = (-G(i) - G(j)) / quad;
            const double diff = ai - aj;
            a(i) += delta;
            a(j) += delta;
            if (diff > 0) {
                if (a(j) < 0) a(j) = 0, a(i) = diff;
            } else if (a(i) < 0) {
                a(i) = 0, a(j) = -diff;
            }
            if (diff > Ci - Cj) {
                if (a(i) > Ci) a(i) = Ci, a(j) = Ci - diff;
            } else if (a(j) > Cj) {
                a(j) = Cj, a(i) = Cj + diff;
            }
        } else {
            double quad = Q(i, i) + Q(j, j) - 2 * Q(i, j);
            if (quad <= 0) quad = kTau;
            const double delta = (G(i) - G(j)) / quad;
            const double sum = ai + aj;
            a(i) -= delta;
            a(j) += delta;
            if (sum > Ci) {
                if (a(i) > Ci) a(i) = Ci, a(j) = sum - Ci;
            } else if (a(j) < 0) {
                a(j) = 0, a(i) = sum;
            }
            if (sum > Cj) {
                if (a(j) > Cj) a(j) = Cj, a(i) = sum - Cj;
            } else if (a(i) < 0) {
                a(i) = 0, a(j) = sum;
            }
        }
        G += Q.col(i) * (a(i) - ai) + Q.col(j) * (a(j) - aj);
    }
    if (!s.converged)
        warn(fmt::format("NonConvergence: SMO stopped after {} iterations, KKT violation {}", s.iterations,
                         s.kkt_violation));

    double ub = std::numeric_limits<double>::infinity(), lb = -ub, free_sum = 0;
    std::size_t n_free = 0;
    for (Index t = 0; t < n; ++t) {
        const double yG = y(t) * G(t);
        if (upper(t)) {
            if (y(t) < 0) ub = std::min(ub, yG);
            else lb = std::max(lb, yG);
        } else if (lower(t)) {
            if (y(t) > 0) ub = std::min(ub, yG);
            else lb = std::max(lb, yG);
        } else {
            ++n_free;
            free_sum += yG;
        }
    }
    s.rho = n_free ? free_sum / static_cast<double>(n_free) : 0.5 * (ub + lb);
    s.objective = 0.5 * a.dot(Q * a) + p.dot(a);
    return s;
}

// --- SVM ------------------------------------------------------------------

double SvmModel::decision(const VectorXd& z) const {
    double f = -rho;
    for (Index i = 0; i < support_vectors.rows(); ++i) f += coef(i) * kernel(support_vectors.row(i).transpose(), z);
    return f;
}

double SvmModel::predict(const VectorXd& z) const {
    const double f = decision(z);
    if (variant == SvmVariant::epsilon_regressor) return f;
    const double fab = platt_a * f + platt_b;
    return fab >= 0 ? std::exp(-fab) / (1.0 + std::exp(-fab)) : 1.0 / (1.0 + std::exp(fab));
}

std::pair<double, double> platt_fit(std::span<const double> f, std::span<const int> labels) {
    if (f.size() != labels.size()) throw Error(Errc::ShapeMismatch, "platt_fit: lengths differ");
    double prior1 = 0, prior0 = 0;
    for (int y : labels) (y == 1 ? prior1 : prior0) += 1;
    const double hi = (prior1 + 1) / (prior1 + 2), lo = 1 / (prior0 + 2);
    std::vector<double> t(f.size());
    for (std::size_t i = 0; i < f.size(); ++i) t[i] = labels[i] == 1 ? hi : lo;

    double A = 0, B = std::log((prior0 + 1) / (prior1 + 1));
    auto objective = [&](double a, double b) {
        double v = 0;
        for (std::size_t i = 0; i < f.size(); ++i) {
            const double z = f[i] * a + b;
            v += z >= 0 ? t[i] * z + std::log1p(std::exp(-z)) : (t[i] - 1) * z + std::log1p(std::exp(z));
        }
        return v;
    };
    double fval = objective(A, B);
    for (int iter = 0; iter < 100; ++iter) {
        double h11 = 1e-12, h22 = 1e-12, h21 = 0, g1 = 0, g2 = 0;
        for (std::size_t i = 0; i < f.size(); ++i) {
            const double z = f[i] * A + B;
            double p, q;
            if (z >= 0) {
                p = std::exp(-z) / (1 + std::exp(-z));
                q = 1 / (1 + std::exp(-z));
            } else {
                p = 1 / (1 + std::exp(z));
                q = std::exp(z) / (1 + std::exp(z));
            }
            const double d2 = p * q;
            h11 += f[i] * f[i] * d2;
            h22 += d2;
            h21 += f[i] * d2;
            const double d1 = t[i] - p;
            g1 += f[i] * d1;
            g2 += d1;
        }
        if (std::fabs(g1) < 1e-5 && std::fabs(g2) < 1e-5) break;
        const double det = h11 * h22 - h21 * h21;
        const double dA = -(h22 * g1 - h21 * g2) / det;
        const double dB = -(-h21 * g1 + h11 * g2) / det;
        const double gd = g1 * dA + g2 * dB;
        double step = 1;
        while (step >= 1e-10) {
            const double nf = objective(A + step * dA, B + step * dB);
            if (nf < fval + 1e-4 * step * gd) {
                A += step * dA;
                B += step * dB;
                fval = nf;
                break;
            }
            step /= 2;
        }
        if (step < 1e-10) break;
    }
    return {A, B};
}

SvmModel fit_svm(const MatrixXd& Z, std::span<const double> y, SvmVariant variant, const SvmParams& params) {
    const Index n = Z.rows();
    if (static_cast<Index>(y.size()) != n) throw Error(Errc::ShapeMismatch, "fit_svm: label count differs from rows");
    if (n == 0) throw Error(Errc::InvalidArgument, "fit_svm: no rows");
    if (!(params.C > 0)) throw Error(Errc::InvalidArgument, "C must be positive");

    SvmModel m;
    m.variant = variant;
    m.kernel = params.kernel;
    if (m.kernel.type == KernelType::rbf && m.kernel.gamma <= 0) {
        const double mu = Z.mean();
        const double var = (Z.array() - mu).square().mean();
        m.kernel.gamma = var > 0 ? 1.0 / (static_cast<double>(Z.cols()) * var) : 1.0;
    }
    const MatrixXd K = m.kernel.gram(Z, Z);

    if (variant == SvmVariant::classifier) {
        VectorXd s(n);
        std::vector<int> labels(static_cast<std::size_t>(n));
        for (Index i = 0; i < n; ++i) {
            if (y[static_cast<std::size_t>(i)] != 0.0 && y[static_cast<std::size_t>(i)] != 1.0)
                throw Error(Errc::InvalidArgument, "classifier labels must be 0 or 1");
            labels[static_cast<std::size_t>(i)] = static_cast<int>(y[static_cast<std::size_t>(i)]);
            s(i) = labels[static_cast<std::size_t>(i)] == 1 ? 1.0 : -1.0;
        }
        if ((s.array() > 0).all() || (s.array() < 0).all()) throw Error(Errc::SingleClass, "training labels have one class");
        const MatrixXd Q = (s * s.transpose()).cwiseProduct(K);
        m.dual = solve_dual(Q, VectorXd::Constant(n, -1.0), s, VectorXd::Constant(n, params.C), params.tol,
                            params.max_iter);
        m.rho = m.dual.rho;
        std::vector<Index> sv;
        for (Index i = 0; i < n; ++i)
            if (m.dual.alpha(i) > 0) sv.push_back(i);
        m.support_vectors.resize(static_cast<Index>(sv.size()), Z.cols());
        m.coef.resize(static_cast<Index>(sv.size()));
        for (std::size_t k = 0; k < sv.size(); ++k) {
            m.support_vectors.row(static_cast<Index>(k)) = Z.row(sv[k]);
            m.coef(static_cast<Index>(k)) = s(sv[k]) * m.dual.alpha(sv[k]);
        }
        std::vector<double> f(static_cast<std::size_t>(n));
        for (Index i = 0; i < n; ++i) f[static_cast<std::size_t>(i)] = m.decision(Z.row(i).transpose());
        std::tie(m.platt_a, m.platt_b) = platt_fit(f, labels);
    } else {
        VectorXd s(2 * n), p(2 * n);
        MatrixXd Q(2 * n, 2 * n);
        for (Index i = 0; i < n; ++i) {
            s(i) = 1.0;
            s(i + n) = -1.0;
            p(i) = params.epsilon - y[static_cast<std::size_t>(i)];
            p(i + n) = params.epsilon + y[static_cast<std::size_t>(i)];
        }
        Q << K, -K, -K, K;
        m.dual = solve_dual(Q, p, s, VectorXd::Constant(2 * n, params.C), params.tol, params.max_iter);
        m.rho = m.dual.rho;
        std::vector<Index> sv;
        for (Index i = 0; i < n; ++i)
            if (m.dual.alpha(i) - m.dual.alpha(i + n) != 0.0) sv.push_back(i);
        m.support_vectors.resize(static_cast<Index>(sv.size()), Z.cols());
        m.coef.resize(static_cast<Index>(sv.size()));
        for (std::size_t k = 0; k < sv.size(); ++k) {
            m.support_vectors.row(static_cast<Index>(k)) = Z.row(sv[k]);
            m.coef(static_cast<Index>(k)) = m.dual.alpha(sv[k]) - m.dual.alpha(sv[k] + n);
        }
    }
    return m;
}

// --- pipeline -------------------------------------------------------------

ShallowModel ShallowModel::fit(const FeatureMatrix& train, std::span<const double> y, const PipelineParams& params) {
    train.validate();
    ShallowModel m;
    m.columns = train.columns;
    m.params = params;
    m.standardizer = Standardizer::fit(train.X);
    const MatrixXd Xs = m.standardizer.transform(train.X);
    m.pca = PcaModel::fit(Xs, params.n_components);
    m.svm = fit_svm(m.pca.transform(Xs), y, params.variant, params.svm);
    return m;
}

std::vector<double> ShallowModel::predict(const MatrixXd& X) const {
    const MatrixXd Z = pca.transform(standardizer.transform(X));
    std::vector<double> out;
    for (Index i = 0; i < Z.rows(); ++i) out.push_back(svm.predict(Z.row(i).transpose()));
    return out;
}

std::vector<std::size_t> stratified_folds(std::span<const int> labels, std::size_t folds, std::uint64_t seed) {
    if (folds < 2) throw Error(Errc::InvalidArgument, "need at least two folds");
    if (labels.size() < folds) throw Error(Errc::InvalidArgument, "more folds than rows");
    std::mt19937_64 rng(seed);
    std::vector<std::size_t> out(labels.size());
    std::set<int> classes(labels.begin(), labels.end());
    std::size_t counter = 0;
    for (int c : classes) {
        std::vector<std::size_t> idx;
        for (std::size_t i = 0; i < labels.size(); ++i)
            if (labels[i] == c) idx.push_back(i);
        std::shuffle(idx.begin(), idx.end(), rng);
        for (std::size_t i : idx) out[i] = counter++ % folds;
    }
    return out;
}

GridResult grid_search(const FeatureMatrix& X, std::span<const int> labels, std::span<const GridCell> grid,
                       std::size_t folds, std::uint64_t seed) {
    if (grid.empty()) throw Error(Errc::InvalidArgument, "empty parameter grid");
    if (labels.size() != X.rows()) throw Error(Errc::ShapeMismatch, "grid_search: label count differs from rows");
    const auto fold = stratified_folds(labels, folds, seed);
    GridResult res;
    std::ptrdiff_t best = -1;
    for (std::size_t g = 0; g < grid.size(); ++g) {
        double f1 = kNaN;
        try {
            std::size_t tp = 0, fp = 0, fn = 0;
            for (std::size_t k = 0; k < folds; ++k) {
                std::vector<std::size_t> tr, te;
                for (std::size_t i = 0; i < labels.size(); ++i) (fold[i] == k ? te : tr).push_back(i);
                std::vector<double> y;
                for (std::size_t i : tr) y.push_back(labels[i]);
                PipelineParams pp;
                pp.n_components = grid[g].n_components;
                pp.svm.C = grid[g].C;
                pp.svm.kernel.type = grid[g].kernel;
                const ShallowModel m = ShallowModel::fit(X.select_rows(tr), y, pp);
                const auto pred = m.predict(X.select_rows(te).X);
                for (std::size_t i = 0; i < te.size(); ++i) {
                    const bool pos = pred[i] >= 0.5, truth = labels[te[i]] == 1;
                    tp += pos && truth;
                    fp += pos && !truth;
                    fn += !pos && truth;
                }
            }
            f1 = tp ? 2.0 * static_cast<double>(tp) / static_cast<double>(2 * tp + fp + fn) : 0.0;
        } catch (const Error& e) {
            warn(fmt::format("grid cell {} failed: {}", g, e.what()));
        }
        res.cell_f1.push_back(f1);
        if (std::isnan(f1)) continue;
        if (best < 0) {
            best = static_cast<std::ptrdiff_t>(g);
            continue;
        }
        const auto& b = grid[static_cast<std::size_t>(best)];
        const double bf = res.cell_f1[static_cast<std::size_t>(best)];
        if (f1 > bf || (f1 == bf && (grid[g].C < b.C || (grid[g].C == b.C && grid[g].n_components < b.n_components))))
            best = static_cast<std::ptrdiff_t>(g);
    }
    if (best < 0) throw Error(Errc::NonConvergence, "every grid cell failed");
    res.best = grid[static_cast<std::size_t>(best)];
    return res;
}

// --- artifacts ------------------------------------------------------------

void save_model(const ShallowModel& m, const fs::path& path, const nlohmann::json& provenance) {
    TensorArchive ar;
    ar.header = {{"kind", "shallow"},
                 {"columns", m.columns},
                 {"n_components", m.params.n_components},
                 {"variant", m.svm.variant == SvmVariant::classifier ? "classifier" : "epsilon_regressor"},
                 {"kernel", m.svm.kernel.type == KernelType::rbf ? "rbf" : "linear"},
                 {"gamma", m.svm.kernel.gamma},
                 {"C", m.params.svm.C},
                 {"epsilon", m.params.svm.epsilon},
                 {"tol", m.params.svm.tol},
                 {"rho", m.svm.rho},
                 {"platt_a", m.svm.platt_a},
                 {"platt_b", m.svm.platt_b},
                 {"provenance", provenance}};
    ar.tensors["median"] = Tensor::from(m.standardizer.median, DType::f64);
    ar.tensors["mean"] = Tensor::from(m.standardizer.mean, DType::f64);
    ar.tensors["scale"] = Tensor::from(m.standardizer.scale, DType::f64);
    ar.tensors["pca_mean"] = Tensor::from(m.pca.mean, DType::f64);
    ar.tensors["components"] = Tensor::from(m.pca.components, DType::f64);
    ar.tensors["explained_variance"] = Tensor::from(m.pca.explained_variance, DType::f64);
    ar.tensors["support_vectors"] = Tensor::from(m.svm.support_vectors, DType::f64);
    ar.tensors["coef"] = Tensor::from(m.svm.coef, DType::f64);
    ar.save(path);
}

ShallowModel load_model(const fs::path& path, nlohmann::json* provenance) {
    const TensorArchive ar = TensorArchive::load(path);
    const auto& h = ar.header;
    if (h.value("kind", "") != "shallow") throw Error(Errc::ShapeMismatch, path.string() + " is not a shallow model");
    ShallowModel m;
    m.columns = h.at("columns").get<std::vector<std::string>>();
    m.params.n_components = h.at("n_components");
    m.params.variant = h.at("variant") == "classifier" ? SvmVariant::classifier : SvmVariant::epsilon_regressor;
    m.params.svm.C = h.at("C");
    m.params.svm.epsilon = h.at("epsilon");
    m.params.svm.tol = h.at("tol");
    m.svm.variant = m.params.variant;
    m.svm.kernel.type = h.at("kernel") == "rbf" ? KernelType::rbf : KernelType::linear;
    m.svm.kernel.gamma = h.at("gamma");
    m.params.svm.kernel = m.svm.kernel;
    m.svm.rho = h.at("rho");
    m.svm.platt_a = h.at("platt_a");
    m.svm.platt_b = h.at("platt_b");
    m.standardizer.median = ar.at("median").vector();
    m.standardizer.mean = ar.at("mean").vector();
    m.standardizer.scale = ar.at("scale").vector();
    m.pca.mean = ar.at("pca_mean").vector();
    m.pca.components = ar.at("components").matrix();
    m.pca.explained_variance = ar.at("explained_variance").vector();
    m.svm.support_vectors = ar.at("support_vectors").matrix();
    m.svm.coef = ar.at("coef").vector();
    if (provenance) *provenance = h.value("provenance", nlohmann::json::object());
    return m;
}

}  // namespace vsn::shallow
