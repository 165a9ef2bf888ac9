#pragma once

// Dynamic topic model over time-sliced narratives.
//
// Each participant transcript is cut into T slices; slice t of every
// participant is a document at time t. Topic k at time t is a softmax over
// natural parameters beta[k](t, :), and each natural parameter follows a
// Gaussian random walk over t with variance sigma2.
//
// Inference is variational EM. The posterior over every chain
// beta[k](., w) is Gaussian with free means and the covariance of a
// Kalman smoother with fixed pseudo-observation variance `obs_var`; the
// per-slice documents get the usual Dirichlet/multinomial factors. The
// bound on E[log softmax] is Jensen's: E[lse(beta)] <= lse(m + v/2).
//
// Each EM update maximises the bound exactly in its block (document
// updates in closed form, chain means by a quadratic minorizer whose
// maximiser is a forward-backward smoothing pass), so the ELBO never
// decreases.

#include <array>
#include <cstdint>
#include <filesystem>
#include <set>
#include <span>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

#include <Eigen/Dense>
#include <json.hpp>

#include "vsn/corpus.hpp"

namespace vsn::dtm {

struct DtmConfig {
    std::size_t K = 5;
    std::size_t T = 15;
    double alpha = 0.1;     // symmetric Dirichlet concentration
    double sigma2 = 0.005;  // drift variance per time step
    double obs_var = 0.5;   // variational pseudo-observation variance
    double init_var = 5.0;  // prior variance of beta at t = 0
    std::size_t vocab_min_count = 1;
    std::size_t max_em_iters = 300;
    double elbo_tol = 1e-6;  // relative change that stops EM
    std::size_t estep_max_iters = 100;
    double estep_tol = 1e-8;
    std::size_t mstep_iters = 20;  // minorize-maximize passes per M-step
    std::size_t restarts = 4;        // independent initialisations
    std::size_t restart_iters = 25;  // burn-in before the best restart is kept
    std::uint64_t seed = 0;

    void validate() const;
};

struct Vocabulary {
    std::vector<std::string> words;
    std::unordered_map<std::string, int> index;

    int find(const std::string& w) const {
        auto it = index.find(w);
        return it == index.end() ? -1 : it->second;
    }
    std::size_t size() const noexcept { return words.size(); }
};

/// Posterior of one scalar Gaussian random walk observed through noisy
/// pseudo-observations, computed with a forward filter and an RTS
/// backward pass. Columns of `mean` are independent chains sharing the
/// observation precisions.
struct ChainPosterior {
    Eigen::MatrixXd mean;     // T x columns
    Eigen::VectorXd variance; // T
    Eigen::VectorXd lag_cov;  // T-1, Cov(beta_t+1, beta_t)
    double log_det = 0.0;     // log det of the T x T posterior covariance
};

/// `precision(t) == 0` means no observation at t.
ChainPosterior smooth_chain(const Eigen::MatrixXd& obs, const Eigen::VectorXd& precision, double sigma2,
                            double init_var);

struct TopicModelState {
    DtmConfig config;
    Vocabulary vocab;
    std::vector<Eigen::MatrixXd> beta;  // K matrices of T x V natural-parameter means
    Eigen::VectorXd variance;           // chain marginal variances (shared)
    Eigen::VectorXd lag_cov;
    double log_det = 0.0;
    Eigen::MatrixXd train_mean_theta;   // T x K corpus-mean topic proportions
    std::vector<int> dominant_topic;    // argmax_k train_mean_theta(t, k)
    std::vector<double> elbo_trace;
    bool converged = false;
    std::vector<Eigen::MatrixXd> train_theta;  // per training document, T x K

    std::size_t K() const noexcept { return beta.size(); }
    std::size_t T() const noexcept { return beta.empty() ? 0 : static_cast<std::size_t>(beta[0].rows()); }
    std::size_t V() const noexcept { return vocab.size(); }

    /// softmax(beta[k](t, :))
    Eigen::VectorXd word_distribution(std::size_t k, std::size_t t) const;
};

TopicModelState fit_dtm(std::span<const SlicedTranscript> corpus, const DtmConfig& cfg);

struct TopicTrajectory {
    Eigen::MatrixXd theta;       // T x K, rows on the simplex
    std::vector<bool> fallback;  // slice had no in-vocabulary words
};

TopicTrajectory infer_trajectory(const TopicModelState& state, const SlicedTranscript& doc);

/// Highest-probability words of topic k at slice t; ties go to the lower
/// vocabulary index.
std::vector<std::string> top_words(const TopicModelState& state, std::size_t k, std::size_t t, std::size_t n = 10);

struct DtmStatistics {
    double topic_consistency = 0.0;
    double topic_cycle = 0.0;
    double topic_variability = 0.0;
    double topic_temporal_corr = 0.0;
    double topic_ptp_range = 0.0;
    double topic_change_rate = 0.0;
    bool degenerate = false;  // some topic series was constant; its correlation counted as 0

    static constexpr std::size_t kCount = 6;
    std::array<double, kCount> values() const;
    static const std::array<std::string_view, kCount>& names();
};

/// Variability, lag-1 temporal correlation, peak-to-peak range and change
/// rate of a T x K trajectory. Consistency and cycle are left at 0.
DtmStatistics trajectory_statistics(const Eigen::MatrixXd& theta);

DtmStatistics dtm_statistics(const TopicModelState& state, const SlicedTranscript& doc, const TopicTrajectory& traj,
                             const std::set<std::string>& cycle_lexicon = {"home"});

void save_model(const TopicModelState& state, const std::filesystem::path& path,
                const nlohmann::json& provenance = nlohmann::json::object());
TopicModelState load_model(const std::filesystem::path& path, nlohmann::json* provenance = nullptr);

double digamma(double x);

}  // namespace vsn::dtm
