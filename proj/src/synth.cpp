#include "vsn/synth.hpp"

#include <algorithm>
#include <cmath>
#include <random>

#include <fmt/format.h>

#include "vsn/error.hpp"

namespace vsn::synth {

using Eigen::Index;
using Eigen::MatrixXd;
using Eigen::MatrixXf;
using Eigen::VectorXd;
namespace fs = std::filesystem;

namespace {

VectorXd sample_dirichlet(std::mt19937_64& rng, std::size_t K, double alpha) {
    std::gamma_distribution<double> g(alpha, 1.0);
    VectorXd v(static_cast<Index>(K));
    for (Index k = 0; k < v.size(); ++k) v(k) = g(rng);
    const double s = v.sum();
    if (s <= 0) return VectorXd::Constant(v.size(), 1.0 / static_cast<double>(K));
    return v / s;
}

std::size_t sample_categorical(std::mt19937_64& rng, const VectorXd& p) {
    std::uniform_real_distribution<double> u(0.0, 1.0);
    double r = u(rng) * p.sum();
    for (Index i = 0; i < p.size(); ++i) {
        r -= p(i);
        if (r < 0) return static_cast<std::size_t>(i);
    }
    return static_cast<std::size_t>(p.size() - 1);
}

}  // namespace

DtmCorpus gen_dtm_corpus(const DtmCorpusSpec& spec) {
    if (spec.K == 0 || spec.V == 0 || spec.T == 0 || spec.n_docs == 0)
        throw Error(Errc::InvalidArgument, "gen_dtm_corpus: sizes must be positive");
    std::mt19937_64 rng(spec.seed);
    std::normal_distribution<double> normal(0.0, 1.0);
    const Index K = static_cast<Index>(spec.K), V = static_cast<Index>(spec.V), T = static_cast<Index>(spec.T);

    DtmCorpus out;
    const int width = static_cast<int>(std::to_string(spec.V - 1).size());
    for (std::size_t w = 0; w < spec.V; ++w) out.vocab.push_back(fmt::format("w{:0{}}", w, width));

    const double drift = std::sqrt(std::max(spec.sigma2, 0.0));
    for (Index k = 0; k < K; ++k) {
        MatrixXd b(T, V);
        for (Index w = 0; w < V; ++w) b(0, w) = spec.init_sd * normal(rng);
        for (Index t = 1; t < T; ++t)
            for (Index w = 0; w < V; ++w) b(t, w) = b(t - 1, w) + drift * normal(rng);
        out.beta.push_back(std::move(b));
    }
    std::vector<MatrixXd> probs;
    for (const auto& b : out.beta) {
        MatrixXd p(T, V);
        for (Index t = 0; t < T; ++t) {
            const auto row = b.row(t);
            p.row(t) = (row.array() - row.maxCoeff()).exp();
            p.row(t) /= p.row(t).sum();
        }
        probs.push_back(std::move(p));
    }

    for (std::size_t d = 0; d < spec.n_docs; ++d) {
        SlicedTranscript doc;
        MatrixXd theta(T, K);
        std::size_t offset = 0;
        doc.boundaries.push_back(0);
        for (Index t = 0; t < T; ++t) {
            const VectorXd th = sample_dirichlet(rng, spec.K, spec.alpha);
            theta.row(t) = th.transpose();
            std::vector<std::string> words;
            std::string text;
            for (std::size_t n = 0; n < spec.words_per_slice; ++n) {
                const std::size_t z = sample_categorical(rng, th);
                const std::size_t w = sample_categorical(rng, probs[z].row(t).transpose());
                words.push_back(out.vocab[w]);
                if (!text.empty()) text += ' ';
                text += out.vocab[w];
            }
            offset += text.size();
            doc.slices.push_back(std::move(text));
            doc.boundaries.push_back(offset);
            doc.words.push_back(std::move(words));
        }
        out.docs.push_back(std::move(doc));
        out.theta.push_back(std::move(theta));
    }
    return out;
}

std::vector<SyntheticParticipant> gen_embedding_corpus(const EmbeddingCorpusSpec& spec) {
    if (spec.n < 2 || spec.J == 0 || spec.K == 0 || spec.H == 0)
        throw Error(Errc::InvalidArgument, "gen_embedding_corpus: sizes must be positive and n >= 2");
    if (spec.separation < 0) throw Error(Errc::InvalidArgument, "separation must be >= 0");
    std::mt19937_64 rng(spec.seed);
    std::normal_distribution<double> normal(0.0, 1.0);
    const Index J = static_cast<Index>(spec.J), K = static_cast<Index>(spec.K), H = static_cast<Index>(spec.H);

    auto unit = [&] {
        Eigen::VectorXd v(H);
        for (Index h = 0; h < H; ++h) v(h) = normal(rng);
        return Eigen::VectorXd(v / v.norm());
    };
    MatrixXd image(J, H);
    for (Index j = 0; j < J; ++j) image.row(j) = unit().transpose();
    const Eigen::VectorXd generic = unit();
    // share of each NCD text row that is replaced by the generic direction
    const double a = 1.0 - std::exp(-spec.separation);

    const std::size_t n_ncd = spec.n / 2, n_hc = spec.n - n_ncd;
    std::vector<int> labels;
    std::uniform_int_distribution<int> hc_label(0, 1), ncd_label(2, 4);
    for (std::size_t i = 0; i < n_hc; ++i) labels.push_back(hc_label(rng));
    for (std::size_t i = 0; i < n_ncd; ++i) labels.push_back(ncd_label(rng));
    std::shuffle(labels.begin(), labels.end(), rng);

    std::vector<SyntheticParticipant> out;
    std::uniform_real_distribution<double> u01(0.0, 1.0);
    std::uniform_int_distribution<Index> len(std::max<Index>(1, (K + 1) / 2), K);
    const int width = static_cast<int>(std::to_string(spec.n).size());
    for (std::size_t i = 0; i < spec.n; ++i) {
        SyntheticParticipant p;
        p.id = fmt::format("S{:0{}}", i, width);
        p.label = labels[i];
        const bool ncd = p.label >= 2;
        const Index Ki = len(rng);
        p.emb.image = image.cast<float>();
        p.emb.text = MatrixXf::Zero(K, H);
        p.emb.mask.assign(static_cast<std::size_t>(J + K), 0);
        std::fill_n(p.emb.mask.begin(), J, 1);
        for (Index k = 0; k < Ki; ++k) {
            Index j = std::min<Index>(J - 1, k * J / Ki);
            Eigen::VectorXd row = image.row(j).transpose();
            if (ncd) {
                if (u01(rng) < a) j = std::uniform_int_distribution<Index>(0, J - 1)(rng);
                row = (1.0 - a) * image.row(j).transpose() + a * generic;
            }
            Eigen::VectorXd noise(H);
            for (Index h = 0; h < H; ++h) noise(h) = normal(rng);
            row += spec.noise * noise / std::sqrt(static_cast<double>(H));
            p.emb.text.row(k) = row.transpose().cast<float>();
            p.emb.mask[static_cast<std::size_t>(J + k)] = 1;
        }
        out.push_back(std::move(p));
    }

    // Stratified split: the first test_fraction of each class, in id order
    // after a seeded shuffle, goes to test.
    for (bool cls : {false, true}) {
        std::vector<std::size_t> idx;
        for (std::size_t i = 0; i < out.size(); ++i)
            if ((out[i].label >= 2) == cls) idx.push_back(i);
        std::shuffle(idx.begin(), idx.end(), rng);
        const auto n_test = static_cast<std::size_t>(std::llround(spec.test_fraction * static_cast<double>(idx.size())));
        for (std::size_t r = 0; r < idx.size(); ++r) out[idx[r]].split = r < n_test ? Split::test : Split::train;
    }
    return out;
}

fs::path write_embedding_corpus(const std::vector<SyntheticParticipant>& corpus, const fs::path& dir) {
    fs::create_directories(dir / "emb");
    fs::create_directories(dir / "transcripts");
    std::vector<ParticipantRecord> records;
    for (const auto& p : corpus) {
        ParticipantRecord r;
        r.id = p.id;
        r.label = p.label;
        r.split = p.split;
        r.language = Language::english;
        r.transcript_path = dir / "transcripts" / (p.id + ".json");
        r.text_emb_path = dir / "emb" / (p.id + ".nme");
        r.image_set_id = "story";
        write_transcript(tokenize_whitespace("the boy went home ."), r.transcript_path);
        write_embeddings(p.emb, r.text_emb_path);
        records.push_back(std::move(r));
    }
    const fs::path manifest = dir / "manifest.jsonl";
    write_manifest(records, manifest);
    return manifest;
}

}  // namespace vsn::synth
