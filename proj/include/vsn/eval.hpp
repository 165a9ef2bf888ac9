#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <span>
#include <string>
#include <vector>

namespace vsn::eval {

struct Confusion {
    std::size_t tp = 0, fp = 0, fn = 0, tn = 0;
};

/// Metrics on the positive (NCD) class; a score >= threshold predicts
/// positive.
struct ClassificationMetrics {
    double f1 = 0, auc = 0, recall = 0, precision = 0, accuracy = 0;
    Confusion confusion;
};

struct RegressionMetrics {
    double r2 = 0, rmse = 0;
};

/// Area under the empirical ROC curve; tied scores count one half.
double roc_auc(std::span<const double> scores, std::span<const int> labels);

ClassificationMetrics classification_metrics(std::span<const double> scores, std::span<const int> labels,
                                             double threshold = 0.5);

RegressionMetrics regression_metrics(std::span<const double> preds, std::span<const double> labels);

/// 0..4 severity label mapped onto [0, 1].
double normalize_label(int label);
/// 1 for NCD (labels 2..4), 0 for healthy controls.
int binary_label(int label);

using MetricLog = std::vector<std::map<std::string, double>>;

/// Mean of every metric over the last `window` entries.
std::map<std::string, double> epoch_average(const MetricLog& log, std::size_t window = 5);

struct ReportRow {
    int system = 0;
    std::string features;
    std::string model;
    std::map<std::string, double> metrics;
};

struct Provenance {
    std::uint64_t seed = 0;
    std::string config_hash;
    std::size_t epoch_window = 5;
};

/// CSV with one row per system; metric columns in a fixed order.
void write_report_csv(const std::vector<ReportRow>& rows, const Provenance& prov, const std::filesystem::path& path);
std::string format_report(const std::vector<ReportRow>& rows, const Provenance& prov);

}  // namespace vsn::eval
