#pragma once

#include <cstdint>
#include <filesystem>
#include <functional>
#include <span>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "vsn/shallow.hpp"

namespace vsn::explain {

using Eigen::MatrixXd;
using Eigen::VectorXd;

enum class ShapMethod { automatic, exact, permutation_mc };

/// Probability of the positive class for a full feature vector.
using ModelFn = std::function<double(const VectorXd&)>;

struct ShapResult {
    VectorXd phi;
    VectorXd std_error;  // zero for the exact method
    double base_value = 0.0;  // f(empty set)
    double full_value = 0.0;  // f(all features)
    ShapMethod method = ShapMethod::exact;
};

struct ShapOptions {
    ShapMethod method = ShapMethod::automatic;
    std::size_t n_samples = 2048;  // permutations, counted in antithetic pairs' members
    std::uint64_t seed = 0;
    std::size_t exact_limit = 12;  // automatic switches to sampling above this
};

/// Shapley values of f(S) = logit(P(x_S, background medians elsewhere)),
/// P clamped to [1e-6, 1 - 1e-6].
ShapResult shap_values(const ModelFn& model, const VectorXd& x, const MatrixXd& background,
                       const ShapOptions& opts = {});

/// Same game with an arbitrary set function over feature subsets given as
/// bitmasks. Used by shap_values and handy for axiom tests.
ShapResult shapley(const std::function<double(std::uint64_t)>& value, std::size_t D, const ShapOptions& opts = {});

struct CorrelationEntry {
    std::string feature;
    double rho = 0.0;
    double p_value = 1.0;
    std::size_t rank = 0;  // 1 = largest |rho|
    bool constant = false;
};

/// Spearman correlation of each column with the binary labels, ranked by
/// |rho| with ties broken by feature name.
std::vector<CorrelationEntry> spearman_rank(const shallow::FeatureMatrix& X, std::span<const int> labels);

/// Spearman rho and two-sided p-value (t approximation, n - 2 dof).
std::pair<double, double> spearman(std::span<const double> a, std::span<const double> b);

/// Average ranks (1-based) with ties sharing their mean rank.
std::vector<double> average_ranks(std::span<const double> v);

void write_shap_csv(const std::vector<std::string>& ids, const std::vector<std::string>& features,
                    const std::vector<ShapResult>& results, const std::filesystem::path& path);
/// feature, mean |phi|, rank by mean |phi| (ties by name).
void write_shap_summary_csv(const std::vector<std::string>& features, const std::vector<ShapResult>& results,
                            const std::filesystem::path& path);
void write_correlation_csv(const std::vector<CorrelationEntry>& entries, const std::filesystem::path& path);

}  // namespace vsn::explain
