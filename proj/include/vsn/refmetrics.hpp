#pragma once

#include <array>
#include <filesystem>
#include <map>
#include <set>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include <Eigen/Dense>

#include "vsn/corpus.hpp"
#include "vsn/linguistic.hpp"

namespace vsn::refmetrics {

using linguistic::PosClass;
using Tokens = std::vector<std::string>;

struct RankedWord {
    std::string word;
    double relevance = 0.0;  // mean cosine to the stimulus images
    PosClass pos_class = PosClass::other;
};

inline constexpr std::array<std::string_view, 4> kCategories = {"introduction", "character", "object", "action"};

struct VisualLexicon {
    std::vector<RankedWord> ranked_words;  // relevance descending
    std::map<std::string, std::set<std::string>> categories;
};

struct ReferenceSet {
    std::vector<Tokens> references;
};

/// Ranks candidate words by mean cosine similarity to the J image
/// embeddings. Rows of `word_embs` align with `words`. Ties are ordered by
/// the word itself.
VisualLexicon rank_visual_words(std::span<const std::string> words, std::span<const PosClass> classes,
                                const Eigen::MatrixXd& word_embs, const Eigen::MatrixXd& image_embs);

/// "[category]" header lines followed by one entry per line.
std::map<std::string, std::set<std::string>> read_categories(const std::filesystem::path& path);
void write_categories(const std::map<std::string, std::set<std::string>>& cats, const std::filesystem::path& path);

/// Tab-separated word, relevance, PoS class.
std::vector<RankedWord> read_visual_lexicon(const std::filesystem::path& path);
void write_visual_lexicon(const std::vector<RankedWord>& words, const std::filesystem::path& path);

struct CoverageFeatures {
    static constexpr std::size_t kCount = 10;
    std::array<double, kCount> values{};
    static const std::array<std::string_view, kCount>& names();
};

/// Four category coverages then top-k coverages for noun, verb, pronoun,
/// adjective, adverb and all classes.
CoverageFeatures coverage_features(const TokenizedTranscript& t, const VisualLexicon& vl, std::size_t top_k = 50);

/// Clipped n-gram precision BLEU against several references at once
/// (max-reference clipping, closest reference length for the brevity
/// penalty). Returns 0 when any order has no matches.
double sentence_bleu(const Tokens& hyp, std::span<const Tokens> refs, int n);

/// Mean over references of single-reference BLEU-n.
double bleu_n(const Tokens& hyp, const ReferenceSet& refs, int n);

double rouge_l(const Tokens& hyp, const Tokens& ref);

struct MeteorParams {
    double alpha = 0.9;
    double beta = 3.0;
    double gamma = 0.5;
    std::size_t search_budget = 2'000'000;  // alignment search nodes
};

struct Alignment {
    std::size_t matches = 0;
    std::size_t chunks = 0;
    bool exact = true;  // false when the search budget ran out
};

/// Exact-match alignment with the maximum number of matches and, among
/// those, the fewest chunks.
Alignment align_exact(const Tokens& hyp, const Tokens& ref, std::size_t search_budget = 2'000'000);

double meteor(const Tokens& hyp, const Tokens& ref, const MeteorParams& p = {});

struct TextMetrics {
    static constexpr std::size_t kCount = 6;
    std::array<double, kCount> values{};  // bleu1..bleu4, meteor, rouge_l
    static const std::array<std::string_view, kCount>& names();
};

/// Every score averaged over the individual references.
TextMetrics text_metrics(const Tokens& hyp, const ReferenceSet& refs);

}  // namespace vsn::refmetrics
