#pragma once

// Text-image temporal alignment network: image and text embedding rows are
// stacked, projected to a small bottleneck, mixed by one masked attention
// layer whose queries and keys carry per-modality rotary position codes,
// projected back up with residuals, mean-pooled over valid rows and mapped
// to a class distribution or a scalar score.

#include <array>
#include <cstdint>
#include <filesystem>
#include <functional>
#include <span>
#include <string>
#include <vector>

#include <Eigen/Dense>
#include <json.hpp>

#include "vsn/corpus.hpp"

namespace vsn::titan {

using Eigen::MatrixXd;
using Eigen::VectorXd;

enum class Task { classify, regress };
enum class Modality { image, text };

const char* to_string(Task t) noexcept;
Task parse_task(const std::string& s);

struct TitanConfig {
    std::size_t H = 512;
    std::size_t H_prime = 5;
    std::size_t C = 2;
    Task task = Task::classify;
    std::size_t epochs = 100;
    double lr = 1e-3;
    double weight_decay = 1e-2;
    std::size_t batch_size = 64;
    std::uint64_t seed = 0;
    bool use_rope = true;
    double image_base = 10000.0;
    double text_base = 500.0;
    double beta1 = 0.9;
    double beta2 = 0.999;
    double eps = 1e-8;
    std::size_t keep_last = 5;  // snapshots retained for final-epoch averaging

    void validate() const;
    nlohmann::json to_json() const;
    static TitanConfig from_json(const nlohmann::json& j);
};

struct TitanParameters {
    static constexpr std::size_t kCount = 9;
    MatrixXd W_down, b_down;  // H' x H, 1 x H'
    MatrixXd W_Q, W_K, W_V;   // H' x H'
    MatrixXd W_up, b_up;      // H x H', 1 x H
    MatrixXd W_fc, b_fc;      // C x H, 1 x C

    static const std::array<std::string, kCount>& names();
    std::array<MatrixXd*, kCount> tensors();
    std::array<const MatrixXd*, kCount> tensors() const;

    /// Uniform(-1/sqrt(fan_in), 1/sqrt(fan_in)) for weights and biases.
    static TitanParameters init(const TitanConfig& cfg, std::uint64_t seed);
    static TitanParameters zeros_like(const TitanParameters& p);
};

/// Rotary position code for one modality. Column pairs (2j, 2j+1) of row i
/// are rotated by positions[i] * base^(-2j/H') with H' = x.cols().
MatrixXd rope_encode(const MatrixXd& x, std::span<const std::size_t> positions, Modality modality,
                     const TitanConfig& cfg = {});

struct ForwardTrace {
    std::size_t J = 0, K = 0;
    std::vector<std::uint8_t> mask;  // J + K, images first
    MatrixXd X;        // stacked input rows
    MatrixXd D;        // down-projection
    MatrixXd Q, Kx, V;
    MatrixXd Qr, Kr;   // after rotary coding
    MatrixXd A;        // (J+K) x (J+K) attention weights
    MatrixXd Z;        // attention output plus bottleneck residual
    MatrixXd R;        // up-projection plus input residual
    VectorXd pooled;
    VectorXd logits;
    VectorXd y_hat;    // class probabilities or the regression score
};

ForwardTrace forward(const TitanParameters& p, const EmbeddingSequence& seq, const TitanConfig& cfg);

/// Loss of one sample and its gradient with respect to every parameter.
/// `target` is a class index for classification and a value in [0, 1] for
/// regression.
double loss_and_gradient(const TitanParameters& p, const EmbeddingSequence& seq, double target,
                         const TitanConfig& cfg, TitanParameters* grad);

struct AdamState {
    TitanParameters m, v;
    std::uint64_t step = 0;
};

/// Decoupled-weight-decay Adam step.
void adamw_step(TitanParameters& p, const TitanParameters& grad, AdamState& s, const TitanConfig& cfg);

struct Sample {
    const EmbeddingSequence* seq = nullptr;
    double target = 0.0;
};

struct EpochRecord {
    std::size_t epoch = 0;
    double train_loss = 0.0;
    nlohmann::json metrics = nlohmann::json::object();
};

struct TrainResult {
    TitanParameters params;
    std::vector<TitanParameters> snapshots;  // parameters after each of the last keep_last epochs
    std::vector<EpochRecord> log;
};

/// Seeded mini-batch training. `on_epoch` may attach validation metrics to
/// each record.
TrainResult train(std::span<const Sample> data, const TitanConfig& cfg,
                  const std::function<nlohmann::json(std::size_t epoch, const TitanParameters&)>& on_epoch = {});

/// Text-query x image-key block of the attention matrix (K x J).
MatrixXd attention_map(const ForwardTrace& trace);

/// Cosine similarity between raw image rows and text rows (J x K).
MatrixXd crossmodal_corr(const EmbeddingSequence& seq);

void save_checkpoint(const TrainResult& result, const TitanConfig& cfg, const std::filesystem::path& path,
                     const nlohmann::json& provenance = nlohmann::json::object());
TrainResult load_checkpoint(const std::filesystem::path& path, TitanConfig* cfg,
                            nlohmann::json* provenance = nullptr);

}  // namespace vsn::titan
