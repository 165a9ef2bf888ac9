#pragma once

// Seeded synthetic corpora for tests, acceptance runs and the CLI demo.

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "vsn/corpus.hpp"

namespace vsn::synth {

struct DtmCorpusSpec {
    std::size_t K = 3;
    std::size_t V = 50;
    std::size_t T = 15;
    std::size_t n_docs = 200;          // participants; each yields T slice documents
    double sigma2 = 0.005;
    double alpha = 0.1;
    double init_sd = 2.0;              // spread of beta at the first slice
    std::size_t words_per_slice = 30;
    std::uint64_t seed = 0;
};

struct DtmCorpus {
    std::vector<SlicedTranscript> docs;
    std::vector<std::string> vocab;      // "w00", "w01", ...
    std::vector<Eigen::MatrixXd> beta;   // K x (T x V) natural parameters used to sample
    std::vector<Eigen::MatrixXd> theta;  // per document, T x K
};

/// Samples documents from the drifting-topic generative process: beta
/// random walks, per-slice Dirichlet proportions, per-word topic draws.
DtmCorpus gen_dtm_corpus(const DtmCorpusSpec& spec);

struct EmbeddingCorpusSpec {
    std::size_t n = 200;
    std::size_t J = 15;
    std::size_t K = 30;
    std::size_t H = 32;
    double separation = 3.0;  // 0 makes the classes identically distributed
    double noise = 0.5;       // norm of the per-row text noise
    double test_fraction = 0.3;
    std::uint64_t seed = 0;
};

struct SyntheticParticipant {
    std::string id;
    int label = 0;  // 0..4
    Split split = Split::train;
    EmbeddingSequence emb;
};

/// One shared image set; healthy text rows follow the image rows in order,
/// NCD rows drift toward a common generic direction and lose their order.
std::vector<SyntheticParticipant> gen_embedding_corpus(const EmbeddingCorpusSpec& spec);

/// Writes NME1 files, placeholder transcripts and a manifest under `dir`;
/// returns the manifest path.
std::filesystem::path write_embedding_corpus(const std::vector<SyntheticParticipant>& corpus,
                                             const std::filesystem::path& dir);

/// Complete English fixture corpus for the command-line pipeline:
/// transcripts, VAD, embeddings, lexicons, visual lexicon, categories,
/// references and config.json. Returns the config path.
std::filesystem::path write_fixture_corpus(const std::filesystem::path& dir, std::uint64_t seed = 7);

}  // namespace vsn::synth
