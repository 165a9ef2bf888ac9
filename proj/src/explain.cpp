#include "vsn/explain.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <random>

#include <boost/math/distributions/students_t.hpp>
#include <fmt/format.h>

#include "vsn/csv.hpp"
#include "vsn/error.hpp"

namespace vsn::explain {

using Eigen::Index;

namespace {

constexpr std::size_t kExactMax = 15;
constexpr double kClamp = 1e-6;

double median(std::vector<double> v) {
    if (v.empty()) return 0.0;
    std::sort(v.begin(), v.end());
    const std::size_t n = v.size();
    return n % 2 ? v[n / 2] : 0.5 * (v[n / 2 - 1] + v[n / 2]);
}

ShapResult exact_shapley(const std::function<double(std::uint64_t)>& value, std::size_t D) {
    const std::uint64_t n = std::uint64_t{1} << D;
    std::vector<double> v(n);
    for (std::uint64_t s = 0; s < n; ++s) v[s] = value(s);
    // w[k] = k! (D-k-1)! / D!
    std::vector<double> w(D);
    for (std::size_t k = 0; k < D; ++k)
        w[k] = std::exp(std::lgamma(static_cast<double>(k + 1)) + std::lgamma(static_cast<double>(D - k)) -
                        std::lgamma(static_cast<double>(D + 1)));
    ShapResult r;
    r.method = ShapMethod::exact;
    r.phi = VectorXd::Zero(static_cast<Index>(D));
    r.std_error = VectorXd::Zero(static_cast<Index>(D));
    for (std::size_t i = 0; i < D; ++i) {
        const std::uint64_t bit = std::uint64_t{1} << i;
        long double acc = 0;
        for (std::uint64_t s = 0; s < n; ++s)
            if (!(s & bit)) acc += w[static_cast<std::size_t>(std::popcount(s))] * (v[s | bit] - v[s]);
        r.phi(static_cast<Index>(i)) = static_cast<double>(acc);
    }
    r.base_value = v[0];
    r.full_value = v[n - 1];
    return r;
}

ShapResult sampled_shapley(const std::function<double(std::uint64_t)>& value, std::size_t D, std::size_t n_samples,
                           std::uint64_t seed) {
    const std::size_t pairs = std::max<std::size_t>(1, n_samples / 2);
    std::mt19937_64 rng(seed);
    std::vector<std::size_t> perm(D);
    std::iota(perm.begin(), perm.end(), 0);
    MatrixXd samples(static_cast<Index>(pairs), static_cast<Index>(D));
    VectorXd contrib(static_cast<Index>(D));
    const std::uint64_t full = D == 64 ? ~std::uint64_t{0} : (std::uint64_t{1} << D) - 1;
    const double v0 = value(0), vfull = value(full);

    auto walk = [&](auto begin, auto end) {
        std::uint64_t s = 0;
        double prev = v0;
        for (auto it = begin; it != end; ++it) {
            s |= std::uint64_t{1} << *it;
            const double cur = s == full ? vfull : value(s);
            contrib(static_cast<Index>(*it)) = cur - prev;
            prev = cur;
        }
    };
    for (std::size_t m = 0; m < pairs; ++m) {
        std::shuffle(perm.begin(), perm.end(), rng);
        walk(perm.begin(), perm.end());
        VectorXd first = contrib;
        walk(perm.rbegin(), perm.rend());
        samples.row(static_cast<Index>(m)) = (0.5 * (first + contrib)).transpose();
    }
    ShapResult r;
    r.method = ShapMethod::permutation_mc;
    r.phi = samples.colwise().mean().transpose();
    r.std_error = VectorXd::Zero(static_cast<Index>(D));
    if (pairs > 1)
        for (Index i = 0; i < r.phi.size(); ++i) {
            const double var = (samples.col(i).array() - r.phi(i)).square().sum() / static_cast<double>(pairs - 1);
            r.std_error(i) = std::sqrt(var / static_cast<double>(pairs));
        }
    r.base_value = v0;
    r.full_value = vfull;
    return r;
}

}  // namespace

ShapResult shapley(const std::function<double(std::uint64_t)>& value, std::size_t D, const ShapOptions& opts) {
    if (D == 0 || D > 64) throw Error(Errc::InvalidArgument, fmt::format("feature count {} outside 1..64", D));
    ShapMethod method = opts.method;
    if (method == ShapMethod::automatic) method = D <= opts.exact_limit ? ShapMethod::exact : ShapMethod::permutation_mc;
    if (method == ShapMethod::exact) {
        if (D > kExactMax)
            throw Error(Errc::TooManyFeaturesForExact, fmt::format("{} features, exact enumeration allows {}", D, kExactMax));
        return exact_shapley(value, D);
    }
    return sampled_shapley(value, D, opts.n_samples, opts.seed);
}

ShapResult shap_values(const ModelFn& model, const VectorXd& x, const MatrixXd& background, const ShapOptions& opts) {
    const Index D = x.size();
    if (background.cols() != D) throw Error(Errc::ShapeMismatch, "background width differs from the instance");
    if (background.rows() == 0) throw Error(Errc::InvalidArgument, "empty background");
    VectorXd ref(D);
    for (Index c = 0; c < D; ++c) {
        std::vector<double> col;
        for (Index r = 0; r < background.rows(); ++r)
            if (std::isfinite(background(r, c))) col.push_back(background(r, c));
        ref(c) = median(std::move(col));
    }
    auto value = [&](std::uint64_t s) {
        VectorXd z = ref;
        for (Index i = 0; i < D; ++i)
            if (s >> i & 1) z(i) = x(i);
        const double p = model(z);
        if (!std::isfinite(p)) throw Error(Errc::DegenerateProbability, "model returned a non-finite probability");
        const double q = std::clamp(p, kClamp, 1.0 - kClamp);
        return std::log(q / (1.0 - q));
    };
    return shapley(value, static_cast<std::size_t>(D), opts);
}

std::vector<double> average_ranks(std::span<const double> v) {
    const std::size_t n = v.size();
    std::vector<std::size_t> idx(n);
    std::iota(idx.begin(), idx.end(), 0);
    std::stable_sort(idx.begin(), idx.end(), [&](std::size_t a, std::size_t b) { return v[a] < v[b]; });
    std::vector<double> r(n);
    for (std::size_t i = 0; i < n;) {
        std::size_t j = i;
        while (j + 1 < n && v[idx[j + 1]] == v[idx[i]]) ++j;
        for (std::size_t k = i; k <= j; ++k) r[idx[k]] = 0.5 * static_cast<double>(i + j) + 1.0;
        i = j + 1;
    }
    return r;
}

std::pair<double, double> spearman(std::span<const double> a, std::span<const double> b) {
    if (a.size() != b.size()) throw Error(Errc::ShapeMismatch, "spearman: lengths differ");
    const std::size_t n = a.size();
    if (n < 3) throw Error(Errc::InvalidArgument, "spearman needs at least three samples");
    const auto ra = average_ranks(a), rb = average_ranks(b);
    const double ma = std::accumulate(ra.begin(), ra.end(), 0.0) / static_cast<double>(n);
    const double mb = std::accumulate(rb.begin(), rb.end(), 0.0) / static_cast<double>(n);
    double sab = 0, saa = 0, sbb = 0;
    for (std::size_t i = 0; i < n; ++i) {
        sab += (ra[i] - ma) * (rb[i] - mb);
        saa += (ra[i] - ma) * (ra[i] - ma);
        sbb += (rb[i] - mb) * (rb[i] - mb);
    }
    if (saa == 0 || sbb == 0) return {0.0, 1.0};
    const double rho = std::clamp(sab / std::sqrt(saa * sbb), -1.0, 1.0);
    if (std::fabs(rho) >= 1.0) return {rho, 0.0};
    const double dof = static_cast<double>(n - 2);
    const double t = rho * std::sqrt(dof / (1.0 - rho * rho));
    const boost::math::students_t dist(dof);
    const double p = 2.0 * boost::math::cdf(boost::math::complement(dist, std::fabs(t)));
    return {rho, std::clamp(p, 0.0, 1.0)};
}

std::vector<CorrelationEntry> spearman_rank(const shallow::FeatureMatrix& X, std::span<const int> labels) {
    X.validate();
    if (labels.size() != X.rows()) throw Error(Errc::ShapeMismatch, "spearman_rank: label count differs from rows");
    if (std::all_of(labels.begin(), labels.end(), [&](int y) { return y == labels[0]; }))
        throw Error(Errc::SingleClassLabels, "labels have one class");
    std::vector<double> y(labels.begin(), labels.end());
    std::vector<CorrelationEntry> out;
    for (Index c = 0; c < X.X.cols(); ++c) {
        std::vector<double> col, yy;
        for (Index r = 0; r < X.X.rows(); ++r)
            if (std::isfinite(X.X(r, c))) {
                col.push_back(X.X(r, c));
                yy.push_back(y[static_cast<std::size_t>(r)]);
            }
        CorrelationEntry e;
        e.feature = X.columns[static_cast<std::size_t>(c)];
        e.constant = col.size() < 3 || std::all_of(col.begin(), col.end(), [&](double v) { return v == col[0]; });
        if (!e.constant) std::tie(e.rho, e.p_value) = spearman(col, yy);
        out.push_back(std::move(e));
    }
    std::stable_sort(out.begin(), out.end(), [](const CorrelationEntry& a, const CorrelationEntry& b) {
        const double fa = std::fabs(a.rho), fb = std::fabs(b.rho);
        return fa != fb ? fa > fb : a.feature < b.feature;
    });
    for (std::size_t i = 0; i < out.size(); ++i) out[i].rank = i + 1;
    return out;
}

void write_shap_csv(const std::vector<std::string>& ids, const std::vector<std::string>& features,
                    const std::vector<ShapResult>& results, const std::filesystem::path& path) {
    if (ids.size() != results.size()) throw Error(Errc::ShapeMismatch, "one SHAP result per id required");
    csv::Table t;
    t.header = {"id", "base_value", "full_value"};
    t.header.insert(t.header.end(), features.begin(), features.end());
    for (std::size_t r = 0; r < ids.size(); ++r) {
        csv::Row row{ids[r], csv::num(results[r].base_value), csv::num(results[r].full_value)};
        for (Index i = 0; i < results[r].phi.size(); ++i) row.push_back(csv::num(results[r].phi(i)));
        t.rows.push_back(std::move(row));
    }
    csv::write(t, path);
}

void write_shap_summary_csv(const std::vector<std::string>& features, const std::vector<ShapResult>& results,
                            const std::filesystem::path& path) {
    std::vector<std::pair<std::string, double>> m;
    for (std::size_t i = 0; i < features.size(); ++i) {
        double s = 0;
        for (const auto& r : results) s += std::fabs(r.phi(static_cast<Index>(i)));
        m.emplace_back(features[i], results.empty() ? 0.0 : s / static_cast<double>(results.size()));
    }
    std::stable_sort(m.begin(), m.end(), [](const auto& a, const auto& b) {
        return a.second != b.second ? a.second > b.second : a.first < b.first;
    });
    csv::Table t;
    t.header = {"feature", "mean_abs_shap", "rank"};
    for (std::size_t i = 0; i < m.size(); ++i) t.rows.push_back({m[i].first, csv::num(m[i].second), std::to_string(i + 1)});
    csv::write(t, path);
}

void write_correlation_csv(const std::vector<CorrelationEntry>& entries, const std::filesystem::path& path) {
    csv::Table t;
    t.header = {"feature", "rho", "p_value", "rank", "constant"};
    for (const auto& e : entries)
        t.rows.push_back({e.feature, csv::num(e.rho), csv::num(e.p_value), std::to_string(e.rank), e.constant ? "1" : "0"});
    csv::write(t, path);
}

}  // namespace vsn::explain
