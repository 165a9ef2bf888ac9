#pragma once

// Study orchestration behind the command-line tool. Every command reads the
// same flat config, writes under one output directory and stamps its
// artifacts with the config hash.
//
//   out/features/{acoustic,linguistic,reference,dtm}.csv, features_sysN.csv,
//                labels.csv, extract_errors.csv, provenance.json
//   out/dtm/model.nmt, trajectories.csv
//   out/models/svm_sysN.nmt, titan.nmt, titan_epochs.jsonl
//   out/eval/report_sysN.{csv,txt}, predictions_sysN.csv
//   out/explain/shap_sysN.csv, shap_summary_sysN.csv, spearman_sysN.csv
//   out/plot/*.csv

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include <json.hpp>

#include "vsn/dtm.hpp"
#include "vsn/titan.hpp"

namespace vsn::pipeline {

namespace fs = std::filesystem;

/// Feature family blocks that make up systems 1..7; system 8 is TITAN.
struct SystemSpec {
    int id = 0;
    std::string description;
    std::vector<std::string> families;  // acoustic, linguistic, reference, dtm
    std::size_t n_features = 0;
};

const SystemSpec& system_spec(int system);

struct RunConfig {
    fs::path config_path;
    fs::path base_dir;  // relative resource paths resolve here
    nlohmann::json values = nlohmann::json::object();
    int system = 8;
    std::uint64_t seed = 0;
    fs::path out = "out";

    /// Flat JSON object with dotted keys ("dtm.K": 3). Unknown keys warn.
    static RunConfig load(const fs::path& config_path, int system, std::uint64_t seed, const fs::path& out);

    bool has(const std::string& key) const { return values.contains(key); }
    template <class T>
    T get(const std::string& key, const T& fallback) const {
        return values.contains(key) ? values.at(key).get<T>() : fallback;
    }
    /// Path-valued key resolved against base_dir; throws MissingArtifact if
    /// the key is absent.
    fs::path path(const std::string& key) const;

    /// FNV-1a 64 of the canonical config text and the seed, hex encoded.
    /// The system number is not part of the hash so features extracted once
    /// serve every system.
    std::string hash() const;
    nlohmann::json provenance() const;

    dtm::DtmConfig dtm_config() const;
    titan::TitanConfig titan_config(std::size_t H) const;
};

/// Exclusive ownership of the output directory for the life of the object.
class OutputLock {
public:
    explicit OutputLock(const fs::path& out);
    ~OutputLock();
    OutputLock(const OutputLock&) = delete;
    OutputLock& operator=(const OutputLock&) = delete;

private:
    fs::path path_;
};

struct ExtractSummary {
    std::size_t participants = 0;
    std::size_t failures = 0;  // participant-family pairs that failed
    std::size_t columns = 0;
};

ExtractSummary cmd_extract(const RunConfig& cfg);
/// Fits the topic model, writes trajectories and the six statistics.
void cmd_train_dtm(const RunConfig& cfg);
void cmd_train_titan(const RunConfig& cfg);
void cmd_train_svm(const RunConfig& cfg);
void cmd_eval(const RunConfig& cfg);
void cmd_explain(const RunConfig& cfg);
void cmd_plotdata(const RunConfig& cfg);

/// Dispatches by subcommand name; holds the output lock while running.
void run(const std::string& command, const RunConfig& cfg);

/// Linear resampling of the columns of m to `n` columns.
Eigen::MatrixXd resample_cols(const Eigen::MatrixXd& m, std::size_t n);

}  // namespace vsn::pipeline
