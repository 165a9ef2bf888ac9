#include "vsn/refmetrics.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <sstream>
#include <unordered_map>
#include <unordered_set>

#include <fmt/format.h>

#include "binary_io.hpp"
#include "vsn/error.hpp"

namespace vsn::refmetrics {

namespace fs = std::filesystem;

VisualLexicon rank_visual_words(std::span<const std::string> words, std::span<const PosClass> classes,
                                const Eigen::MatrixXd& word_embs, const Eigen::MatrixXd& image_embs) {
    if (word_embs.rows() != static_cast<Eigen::Index>(words.size()) || classes.size() != words.size())
        throw Error(Errc::DimensionMismatch, "words, classes and word embedding rows must align");
    if (word_embs.cols() != image_embs.cols())
        throw Error(Errc::DimensionMismatch, "word and image embeddings differ in H");
    if (image_embs.rows() == 0) throw Error(Errc::InvalidArgument, "no image embeddings");

    const Eigen::VectorXd image_norms = image_embs.rowwise().norm();
    VisualLexicon vl;
    vl.ranked_words.reserve(words.size());
    for (std::size_t i = 0; i < words.size(); ++i) {
        const auto row = word_embs.row(static_cast<Eigen::Index>(i));
        const double wn = row.norm();
        double total = 0.0;
        for (Eigen::Index j = 0; j < image_embs.rows(); ++j) {
            const double denom = wn * image_norms(j);
            total += denom > 0.0 ? row.dot(image_embs.row(j)) / denom : 0.0;
        }
        vl.ranked_words.push_back({words[i], total / static_cast<double>(image_embs.rows()), classes[i]});
    }
    std::stable_sort(vl.ranked_words.begin(), vl.ranked_words.end(), [](const RankedWord& a, const RankedWord& b) {
        if (a.relevance != b.relevance) return a.relevance > b.relevance;
        return a.word < b.word;
    });
    return vl;
}

namespace {

std::string trim(std::string s) {
    const auto b = s.find_first_not_of(" \t\r\n");
    if (b == std::string::npos) return {};
    const auto e = s.find_last_not_of(" \t\r\n");
    return s.substr(b, e - b + 1);
}

std::vector<std::string> split_ws(const std::string& s) {
    std::istringstream ss(s);
    std::vector<std::string> out;
    for (std::string w; ss >> w;) out.push_back(w);
    return out;
}

/// Contiguous occurrence of a (possibly multi-word) entry.
class PresenceIndex {
public:
    explicit PresenceIndex(std::vector<std::string> words) : words_(std::move(words)), set_(words_.begin(), words_.end()) {}

    bool contains(const std::string& entry) const {
        if (entry.find(' ') == std::string::npos) return set_.count(entry) > 0;
        const auto parts = split_ws(entry);
        if (parts.empty() || parts.size() > words_.size()) return false;
        for (std::size_t i = 0; i + parts.size() <= words_.size(); ++i)
            if (std::equal(parts.begin(), parts.end(), words_.begin() + static_cast<std::ptrdiff_t>(i))) return true;
        return false;
    }

private:
    std::vector<std::string> words_;
    std::unordered_set<std::string> set_;
};

}  // namespace

std::map<std::string, std::set<std::string>> read_categories(const fs::path& path) {
    std::ifstream in(path);
    if (!in) throw Error(Errc::UnresolvablePath, "category file " + path.string());
    std::map<std::string, std::set<std::string>> cats;
    std::string current;
    std::string line;
    while (std::getline(in, line)) {
        if (auto hash = line.find('#'); hash != std::string::npos) line.resize(hash);
        line = trim(line);
        if (line.empty()) continue;
        if (line.front() == '[' && line.back() == ']') {
            current = text::to_lower(line.substr(1, line.size() - 2));
            cats[current];
            continue;
        }
        if (current.empty()) throw Error(Errc::MalformedRecord, "category entry before any [header]: " + line);
        cats[current].insert(text::to_lower(line));
    }
    return cats;
}

void write_categories(const std::map<std::string, std::set<std::string>>& cats, const fs::path& path) {
    std::string out;
    for (const auto& [name, words] : cats) {
        out += "[" + name + "]\n";
        for (const auto& w : words) out += w + "\n";
    }
    detail::spit(path, out);
}

std::vector<RankedWord> read_visual_lexicon(const fs::path& path) {
    std::ifstream in(path);
    if (!in) throw Error(Errc::UnresolvablePath, "visual lexicon " + path.string());
    std::vector<RankedWord> words;
    std::string line;
    while (std::getline(in, line)) {
        if (line.empty() || line.front() == '#') continue;
        std::istringstream ss(line);
        std::string word, rel, cls;
        if (!std::getline(ss, word, '\t') || !std::getline(ss, rel, '\t') || !std::getline(ss, cls))
            throw Error(Errc::MalformedRecord, "visual lexicon line: " + line);
        words.push_back({text::to_lower(word), std::stod(rel), linguistic::parse_pos_class(trim(cls))});
    }
    std::stable_sort(words.begin(), words.end(),
                     [](const RankedWord& a, const RankedWord& b) { return a.relevance > b.relevance; });
    return words;
}

void write_visual_lexicon(const std::vector<RankedWord>& words, const fs::path& path) {
    std::string out = "# word\trelevance\tpos_class\n";
    for (const auto& w : words) out += fmt::format("{}\t{:.17g}\t{}\n", w.word, w.relevance, linguistic::to_string(w.pos_class));
    detail::spit(path, out);
}

const std::array<std::string_view, CoverageFeatures::kCount>& CoverageFeatures::names() {
    static const std::array<std::string_view, kCount> n = {
        "cvg_introduction", "cvg_character", "cvg_object", "cvg_action", "cvg_noun",
        "cvg_verb",         "cvg_pronoun",   "cvg_adj",    "cvg_adv",    "cvg_all"};
    return n;
}

CoverageFeatures coverage_features(const TokenizedTranscript& t, const VisualLexicon& vl, std::size_t top_k) {
    if (top_k == 0) throw Error(Errc::InvalidArgument, "top_k must be >= 1");
    const PresenceIndex present(transcript_words(t));
    CoverageFeatures out;

    auto ratio = [&](const auto& entries, std::string_view what) {
        if (entries.empty()) {
            warn(fmt::format("EmptyCategory: '{}' has no entries, coverage set to 0", what));
            return 0.0;
        }
        std::size_t hit = 0;
        for (const auto& e : entries) hit += present.contains(e) ? 1 : 0;
        return static_cast<double>(hit) / static_cast<double>(entries.size());
    };

    for (std::size_t c = 0; c < kCategories.size(); ++c) {
        auto it = vl.categories.find(std::string(kCategories[c]));
        const std::set<std::string> none;
        out.values[c] = ratio(it == vl.categories.end() ? none : it->second, kCategories[c]);
    }

    const std::array<PosClass, 5> classes = {PosClass::noun, PosClass::verb, PosClass::pronoun, PosClass::adjective,
                                             PosClass::adverb};
    for (std::size_t c = 0; c <= classes.size(); ++c) {
        std::vector<std::string> top;
        for (const auto& rw : vl.ranked_words) {
            if (top.size() >= top_k) break;
            if (c == classes.size() || rw.pos_class == classes[c]) top.push_back(rw.word);
        }
        out.values[4 + c] = ratio(top, CoverageFeatures::names()[4 + c]);
    }
    return out;
}

// --- BLEU ---------------------------------------------------------------

namespace {

using NgramCounts = std::unordered_map<std::string, std::size_t>;

NgramCounts count_ngrams(const Tokens& toks, int n) {
    NgramCounts counts;
    if (static_cast<int>(toks.size()) < n) return counts;
    for (std::size_t i = 0; i + static_cast<std::size_t>(n) <= toks.size(); ++i) {
        std::string key;
        for (int k = 0; k < n; ++k) {
            key += toks[i + static_cast<std::size_t>(k)];
            key += '\x1f';
        }
        ++counts[key];
    }
    return counts;
}

}  // namespace

double sentence_bleu(const Tokens& hyp, std::span<const Tokens> refs, int n) {
    if (n < 1 || n > 4) throw Error(Errc::InvalidArgument, "BLEU order must be 1..4");
    if (hyp.empty() || refs.empty()) return 0.0;

    double log_sum = 0.0;
    for (int order = 1; order <= n; ++order) {
        const NgramCounts h = count_ngrams(hyp, order);
        NgramCounts max_ref;
        for (const auto& r : refs)
            for (const auto& [g, c] : count_ngrams(r, order)) max_ref[g] = std::max(max_ref[g], c);
        std::size_t clipped = 0, total = 0;
        for (const auto& [g, c] : h) {
            total += c;
            auto it = max_ref.find(g);
            if (it != max_ref.end()) clipped += std::min(c, it->second);
        }
        if (total == 0 || clipped == 0) return 0.0;
        log_sum += std::log(static_cast<double>(clipped) / static_cast<double>(total));
    }

    // Closest reference length, shorter one on ties.
    const auto hl = static_cast<double>(hyp.size());
    double best_len = static_cast<double>(refs.front().size());
    for (const auto& r : refs) {
        const auto rl = static_cast<double>(r.size());
        if (std::abs(rl - hl) < std::abs(best_len - hl) || (std::abs(rl - hl) == std::abs(best_len - hl) && rl < best_len))
            best_len = rl;
    }
    const double bp = hl > best_len ? 1.0 : std::exp(1.0 - best_len / hl);
    return bp * std::exp(log_sum / n);
}

double bleu_n(const Tokens& hyp, const ReferenceSet& refs, int n) {
    if (refs.references.empty()) throw Error(Errc::InvalidArgument, "reference set is empty");
    double total = 0.0;
    for (const auto& r : refs.references) total += sentence_bleu(hyp, std::span<const Tokens>(&r, 1), n);
    return total / static_cast<double>(refs.references.size());
}

// --- ROUGE-L ------------------------------------------------------------

double rouge_l(const Tokens& hyp, const Tokens& ref) {
    if (hyp.empty() || ref.empty()) return 0.0;
    std::vector<std::size_t> prev(ref.size() + 1, 0), cur(ref.size() + 1, 0);
    for (std::size_t i = 1; i <= hyp.size(); ++i) {
        for (std::size_t j = 1; j <= ref.size(); ++j)
            cur[j] = hyp[i - 1] == ref[j - 1] ? prev[j - 1] + 1 : std::max(prev[j], cur[j - 1]);
        std::swap(prev, cur);
    }
    const auto lcs = static_cast<double>(prev[ref.size()]);
    if (lcs == 0.0) return 0.0;
    const double p = lcs / static_cast<double>(hyp.size());
    const double r = lcs / static_cast<double>(ref.size());
    return 2.0 * p * r / (p + r);
}

// --- METEOR -------------------------------------------------------------

namespace {

// Depth-first search over hypothesis positions. Each position is either
// matched to an unused reference position holding the same word or left
// unmatched while its word type still has spare hypothesis occurrences.
// Maximises adjacencies (i, j) -> (i+1, j+1); chunks = matches - adjacencies.
class AlignmentSearch {
public:
    AlignmentSearch(const Tokens& hyp, const Tokens& ref, std::size_t budget) : budget_(budget) {
        std::unordered_map<std::string, int> ids;
        auto id_of = [&](const std::string& w) { return ids.emplace(w, static_cast<int>(ids.size())).first->second; };
        for (const auto& w : hyp) hyp_.push_back(id_of(w));
        for (const auto& w : ref) ref_.push_back(id_of(w));
        const std::size_t types = ids.size();
        std::vector<int> ch(types, 0), cr(types, 0);
        for (int w : hyp_) ++ch[static_cast<std::size_t>(w)];
        for (int w : ref_) ++cr[static_cast<std::size_t>(w)];
        slack_.resize(types);
        for (std::size_t w = 0; w < types; ++w) {
            const int m = std::min(ch[w], cr[w]);
            matches_ += static_cast<std::size_t>(m);
            slack_[w] = ch[w] - m;
        }
        candidates_.resize(hyp_.size());
        for (std::size_t i = 0; i < hyp_.size(); ++i)
            for (std::size_t j = 0; j < ref_.size(); ++j)
                if (hyp_[i] == ref_[j]) candidates_[i].push_back(static_cast<int>(j));
        used_.assign(ref_.size(), false);
        link_.assign(hyp_.size(), -1);
    }

    Alignment run() {
        Alignment a;
        a.matches = matches_;
        if (matches_ == 0) return a;
        dfs(0, 0, 0);
        a.chunks = matches_ - static_cast<std::size_t>(best_);
        a.exact = nodes_ <= budget_;
        return a;
    }

private:
    void dfs(std::size_t i, int adj, std::size_t matched) {
        if (++nodes_ > budget_) return;
        if (i == hyp_.size()) {
            best_ = std::max(best_, adj);
            return;
        }
        const auto remaining_matches = static_cast<int>(matches_ - matched);
        if (adj + std::min(remaining_matches, static_cast<int>(hyp_.size() - i)) <= best_) return;

        const int prev = i > 0 ? link_[i - 1] : -2;
        // Extending the current chunk first gives a strong early incumbent.
        const int extend = prev >= 0 ? prev + 1 : -1;
        if (extend >= 0 && extend < static_cast<int>(ref_.size()) && !used_[static_cast<std::size_t>(extend)] &&
            ref_[static_cast<std::size_t>(extend)] == hyp_[i])
            take(i, extend, adj + 1, matched);
        for (int j : candidates_[i]) {
            if (j == extend || used_[static_cast<std::size_t>(j)]) continue;
            take(i, j, adj, matched);
            if (nodes_ > budget_) return;
        }
        auto& slack = slack_[static_cast<std::size_t>(hyp_[i])];
        if (slack > 0) {
            --slack;
            dfs(i + 1, adj, matched);
            ++slack;
        }
    }

    void take(std::size_t i, int j, int adj, std::size_t matched) {
        used_[static_cast<std::size_t>(j)] = true;
        link_[i] = j;
        dfs(i + 1, adj, matched + 1);
        link_[i] = -1;
        used_[static_cast<std::size_t>(j)] = false;
    }

    std::vector<int> hyp_, ref_;
    std::vector<std::vector<int>> candidates_;
    std::vector<int> slack_;
    std::vector<bool> used_;
    std::vector<int> link_;
    std::size_t matches_ = 0;
    std::size_t budget_;
    std::size_t nodes_ = 0;
    int best_ = -1;
};

}  // namespace

Alignment align_exact(const Tokens& hyp, const Tokens& ref, std::size_t search_budget) {
    return AlignmentSearch(hyp, ref, search_budget).run();
}

double meteor(const Tokens& hyp, const Tokens& ref, const MeteorParams& p) {
    if (hyp.empty() || ref.empty()) return 0.0;
    const Alignment a = align_exact(hyp, ref, p.search_budget);
    if (a.matches == 0) return 0.0;
    const auto m = static_cast<double>(a.matches);
    const double precision = m / static_cast<double>(hyp.size());
    const double recall = m / static_cast<double>(ref.size());
    const double fmean = precision * recall / (p.alpha * precision + (1.0 - p.alpha) * recall);
    const double penalty = p.gamma * std::pow(static_cast<double>(a.chunks) / m, p.beta);
    return fmean * (1.0 - penalty);
}

const std::array<std::string_view, TextMetrics::kCount>& TextMetrics::names() {
    static const std::array<std::string_view, kCount> n = {"bleu1", "bleu2", "bleu3", "bleu4", "meteor", "rouge_l"};
    return n;
}

TextMetrics text_metrics(const Tokens& hyp, const ReferenceSet& refs) {
    if (refs.references.empty()) throw Error(Errc::InvalidArgument, "reference set is empty");
    TextMetrics out;
    for (int n = 1; n <= 4; ++n) out.values[static_cast<std::size_t>(n - 1)] = bleu_n(hyp, refs, n);
    double met = 0.0, rl = 0.0;
    for (const auto& r : refs.references) {
        met += meteor(hyp, r);
        rl += rouge_l(hyp, r);
    }
    const auto count = static_cast<double>(refs.references.size());
    out.values[4] = met / count;
    out.values[5] = rl / count;
    return out;
}

}  // namespace vsn::refmetrics
