#pragma once

// Statistical-feature baselines: median imputation and z-scoring, PCA, and
// kernel support vector classification / regression.

#include <cstdint>
#include <filesystem>
#include <span>
#include <string>
#include <vector>

#include <Eigen/Dense>
#include <json.hpp>

namespace vsn::shallow {

using Eigen::MatrixXd;
using Eigen::VectorXd;

/// Participants x named features. NaN marks a missing value.
struct FeatureMatrix {
    std::vector<std::string> ids;
    std::vector<std::string> columns;
    MatrixXd X;

    std::size_t rows() const noexcept { return ids.size(); }
    void validate() const;
    FeatureMatrix select_rows(std::span<const std::size_t> idx) const;

    /// Header "id,<columns...>"; empty or "nan" cells are missing.
    static FeatureMatrix read_csv(const std::filesystem::path& path);
    void write_csv(const std::filesystem::path& path) const;
};

/// Column-wise join on participant id; rows missing from any part are
/// dropped, order follows `parts[0]`.
FeatureMatrix join_columns(std::span<const FeatureMatrix> parts);

struct Standardizer {
    VectorXd median, mean, scale;

    static Standardizer fit(const MatrixXd& X);
    /// Imputes missing entries with the fitted medians, then z-scores.
    MatrixXd transform(const MatrixXd& X) const;
};

struct PcaModel {
    VectorXd mean;
    MatrixXd components;  // n_components x D, orthonormal rows
    VectorXd explained_variance;

    /// Components come from the eigendecomposition of the sample covariance.
    /// Each component's largest-magnitude entry is made positive.
    static PcaModel fit(const MatrixXd& X, std::size_t n_components = 5);
    MatrixXd transform(const MatrixXd& X) const;
};

enum class KernelType { rbf, linear };
enum class SvmVariant { classifier, epsilon_regressor };

struct Kernel {
    KernelType type = KernelType::rbf;
    double gamma = 0.0;  // 0 asks fit_svm for 1 / (D * Var(Z))

    double operator()(const VectorXd& a, const VectorXd& b) const;
    MatrixXd gram(const MatrixXd& A, const MatrixXd& B) const;
};

/// min 0.5 a'Qa + p'a  s.t.  y'a = 0, 0 <= a_i <= C_i, with y_i = +-1 and
/// Q_ij = y_i y_j K_ij, solved by SMO with second-order working-set
/// selection.
struct DualSolution {
    VectorXd alpha;
    double rho = 0.0;
    double objective = 0.0;
    double kkt_violation = 0.0;  // max gap between the two index sets at exit
    std::size_t iterations = 0;
    bool converged = false;
};

DualSolution solve_dual(const MatrixXd& Q, const VectorXd& p, const VectorXd& y, const VectorXd& C, double tol = 1e-3,
                        std::size_t max_iter = 10'000'000);

struct SvmParams {
    double C = 1.0;
    double epsilon = 0.1;
    double tol = 1e-3;
    std::size_t max_iter = 10'000'000;
    Kernel kernel;
};

struct SvmModel {
    SvmVariant variant = SvmVariant::classifier;
    Kernel kernel;
    MatrixXd support_vectors;
    VectorXd coef;  // y_i alpha_i (classifier) or alpha_i - alpha*_i (regressor)
    double rho = 0.0;
    double platt_a = 0.0, platt_b = 0.0;
    DualSolution dual;

    double decision(const VectorXd& z) const;
    /// Calibrated P(positive) for the classifier, the raw prediction for the
    /// regressor.
    double predict(const VectorXd& z) const;
};

/// Classifier labels are 0/1; regressor targets are real.
SvmModel fit_svm(const MatrixXd& Z, std::span<const double> y, SvmVariant variant, const SvmParams& params = {});

/// Sigmoid 1 / (1 + exp(A f + B)) fitted to decision values by the
/// regularised-target Newton method.
std::pair<double, double> platt_fit(std::span<const double> f, std::span<const int> labels);

struct PipelineParams {
    std::size_t n_components = 5;
    SvmParams svm;
    SvmVariant variant = SvmVariant::classifier;
};

/// Standardizer -> PCA -> SVM, fitted on training rows only.
struct ShallowModel {
    std::vector<std::string> columns;
    Standardizer standardizer;
    PcaModel pca;
    SvmModel svm;
    PipelineParams params;

    static ShallowModel fit(const FeatureMatrix& train, std::span<const double> y, const PipelineParams& params);
    std::vector<double> predict(const MatrixXd& X) const;
};

struct GridCell {
    KernelType kernel = KernelType::rbf;
    double C = 1.0;
    std::size_t n_components = 5;
};

struct GridResult {
    GridCell best;
    std::vector<double> cell_f1;  // NaN when the cell failed to fit
};

/// Stratified k-fold cross-validation; the cell with the highest pooled F1
/// wins, ties broken by smaller C, then fewer components, then grid order.
GridResult grid_search(const FeatureMatrix& X, std::span<const int> labels, std::span<const GridCell> grid,
                       std::size_t folds = 5, std::uint64_t seed = 0);

/// Fold index of every row; each class is spread round-robin over the
/// folds after a seeded shuffle.
std::vector<std::size_t> stratified_folds(std::span<const int> labels, std::size_t folds, std::uint64_t seed);

void save_model(const ShallowModel& m, const std::filesystem::path& path,
                const nlohmann::json& provenance = nlohmann::json::object());
ShallowModel load_model(const std::filesystem::path& path, nlohmann::json* provenance = nullptr);

}  // namespace vsn::shallow
