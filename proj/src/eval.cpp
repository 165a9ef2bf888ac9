#include "vsn/eval.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include <fmt/format.h>

#include "vsn/csv.hpp"
#include "vsn/error.hpp"

namespace vsn::eval {

namespace {

void check_binary(std::span<const double> scores, std::span<const int> labels) {
    if (scores.size() != labels.size()) throw Error(Errc::ShapeMismatch, "scores and labels differ in length");
    if (scores.empty()) throw Error(Errc::InvalidArgument, "no samples");
    for (int y : labels)
        if (y != 0 && y != 1) throw Error(Errc::InvalidArgument, fmt::format("label {} is not binary", y));
    const auto pos = std::count(labels.begin(), labels.end(), 1);
    if (pos == 0 || pos == static_cast<std::ptrdiff_t>(labels.size()))
        throw Error(Errc::SingleClassLabels, "AUC needs both classes");
}

}  // namespace

double roc_auc(std::span<const double> scores, std::span<const int> labels) {
    check_binary(scores, labels);
    // Mann-Whitney statistic from midranks.
    const std::size_t n = scores.size();
    std::vector<std::size_t> idx(n);
    std::iota(idx.begin(), idx.end(), 0);
    std::sort(idx.begin(), idx.end(), [&](std::size_t a, std::size_t b) { return scores[a] < scores[b]; });
    std::vector<double> rank(n);
    for (std::size_t i = 0; i < n;) {
        std::size_t j = i;
        while (j + 1 < n && scores[idx[j + 1]] == scores[idx[i]]) ++j;
        const double r = 0.5 * static_cast<double>(i + j) + 1.0;
        for (std::size_t k = i; k <= j; ++k) rank[idx[k]] = r;
        i = j + 1;
    }
    double pos = 0, sum = 0;
    for (std::size_t i = 0; i < n; ++i)
        if (labels[i] == 1) {
            pos += 1;
            sum += rank[i];
        }
    const double neg = static_cast<double>(n) - pos;
    return (sum - pos * (pos + 1) / 2) / (pos * neg);
}

ClassificationMetrics classification_metrics(std::span<const double> scores, std::span<const int> labels,
                                             double threshold) {
    check_binary(scores, labels);
    for (double s : scores)
        if (!(s >= 0.0 && s <= 1.0)) throw Error(Errc::InvalidArgument, fmt::format("score {} outside [0, 1]", s));
    ClassificationMetrics m;
    auto& c = m.confusion;
    for (std::size_t i = 0; i < scores.size(); ++i) {
        const bool pred = scores[i] >= threshold;
        if (labels[i] == 1)
            ++(pred ? c.tp : c.fn);
        else
            ++(pred ? c.fp : c.tn);
    }
    const double tp = static_cast<double>(c.tp);
    m.precision = c.tp + c.fp ? tp / static_cast<double>(c.tp + c.fp) : 0.0;
    m.recall = tp / static_cast<double>(c.tp + c.fn);
    m.f1 = m.precision + m.recall > 0 ? 2 * m.precision * m.recall / (m.precision + m.recall) : 0.0;
    m.accuracy = static_cast<double>(c.tp + c.tn) / static_cast<double>(scores.size());
    m.auc = roc_auc(scores, labels);
    return m;
}

RegressionMetrics regression_metrics(std::span<const double> preds, std::span<const double> labels) {
    if (preds.size() != labels.size()) throw Error(Errc::ShapeMismatch, "predictions and labels differ in length");
    if (preds.empty()) throw Error(Errc::InvalidArgument, "no samples");
    const double n = static_cast<double>(labels.size());
    const double mean = std::accumulate(labels.begin(), labels.end(), 0.0) / n;
    double ss_res = 0, ss_tot = 0;
    for (std::size_t i = 0; i < labels.size(); ++i) {
        ss_res += (labels[i] - preds[i]) * (labels[i] - preds[i]);
        ss_tot += (labels[i] - mean) * (labels[i] - mean);
    }
    if (ss_tot == 0) throw Error(Errc::ZeroVariance, "R^2 undefined for constant labels");
    return {1.0 - ss_res / ss_tot, std::sqrt(ss_res / n)};
}

double normalize_label(int label) {
    if (label < 0 || label > 4) throw Error(Errc::InvalidArgument, fmt::format("label {} outside 0..4", label));
    return label / 4.0;
}

int binary_label(int label) {
    if (label < 0 || label > 4) throw Error(Errc::InvalidArgument, fmt::format("label {} outside 0..4", label));
    return label >= 2 ? 1 : 0;
}

std::map<std::string, double> epoch_average(const MetricLog& log, std::size_t window) {
    if (window == 0) throw Error(Errc::InvalidArgument, "window must be positive");
    if (log.size() < window)
        throw Error(Errc::TooFewEpochs, fmt::format("{} epochs logged, window is {}", log.size(), window));
    std::map<std::string, double> out;
    for (std::size_t i = log.size() - window; i < log.size(); ++i)
        for (const auto& [k, v] : log[i]) out[k] += v;
    for (auto& [k, v] : out) v /= static_cast<double>(window);
    return out;
}

namespace {
const std::vector<std::string> kColumns = {"f1", "auc", "recall", "precision", "accuracy", "r2", "rmse"};
}

void write_report_csv(const std::vector<ReportRow>& rows, const Provenance& prov, const std::filesystem::path& path) {
    csv::Table t;
    t.header = {"system", "features", "model"};
    t.header.insert(t.header.end(), kColumns.begin(), kColumns.end());
    t.header.insert(t.header.end(), {"seed", "config_hash", "epoch_window"});
    for (const auto& r : rows) {
        csv::Row row = {std::to_string(r.system), r.features, r.model};
        for (const auto& c : kColumns) {
            auto it = r.metrics.find(c);
            row.push_back(it == r.metrics.end() ? "" : csv::num(it->second));
        }
        row.insert(row.end(), {std::to_string(prov.seed), prov.config_hash, std::to_string(prov.epoch_window)});
        t.rows.push_back(std::move(row));
    }
    csv::write(t, path);
}

std::string format_report(const std::vector<ReportRow>& rows, const Provenance& prov) {
    std::string out = fmt::format("{:<7} {:<28} {:<8}", "System", "Features", "Model");
    for (const auto& c : kColumns) out += fmt::format(" {:>9}", c);
    out += '\n';
    for (const auto& r : rows) {
        out += fmt::format("{:<7} {:<28} {:<8}", r.system, r.features, r.model);
        for (const auto& c : kColumns) {
            auto it = r.metrics.find(c);
            out += it == r.metrics.end() ? fmt::format(" {:>9}", "-") : fmt::format(" {:>9.4f}", it->second);
        }
        out += '\n';
    }
    out += fmt::format("seed {}  config {}  final-epoch window {}\n", prov.seed, prov.config_hash, prov.epoch_window);
    return out;
}

}  // namespace vsn::eval
