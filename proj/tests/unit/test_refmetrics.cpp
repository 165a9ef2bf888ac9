#include <doctest.h>

#include <cmath>
#include <random>

#include "support/oracles.hpp"
#include "support/tmpdir.hpp"
#include "vsn/corpus.hpp"
#include "vsn/error.hpp"
#include "vsn/refmetrics.hpp"

using namespace vsn;
using namespace vsn::refmetrics;

namespace {

Tokens toks(const std::string& s) {
    Tokens out;
    std::string w;
    for (char c : s) {
        if (c == ' ') {
            if (!w.empty()) out.push_back(w);
            w.clear();
        } else {
            w += c;
        }
    }
    if (!w.empty()) out.push_back(w);
    return out;
}

Tokens random_tokens(std::mt19937_64& rng, std::size_t lo, std::size_t hi, std::size_t vocab) {
    Tokens t(lo + rng() % (hi - lo + 1));
    for (auto& w : t) w = std::string(1, static_cast<char>('a' + rng() % vocab));
    return t;
}

TokenizedTranscript transcript(const std::string& s) {
    auto t = tokenize_whitespace(s);
    return t;
}

VisualLexicon lexicon() {
    VisualLexicon vl;
    vl.ranked_words = {{"rabbit", 0.9, PosClass::noun}, {"run", 0.8, PosClass::verb},   {"he", 0.7, PosClass::pronoun},
                       {"wet", 0.6, PosClass::adjective}, {"fast", 0.5, PosClass::adverb}, {"rain", 0.4, PosClass::noun},
                       {"jump", 0.3, PosClass::verb}};
    vl.categories = {{"introduction", {"day", "rain", "once", "morning", "sky"}},
                     {"character", {"rabbit", "boy"}},
                     {"object", {"umbrella"}},
                     {"action", {"run", "jump"}}};
    return vl;
}

}  // namespace

TEST_CASE("bleu: identity scores one for every order") {
    const Tokens t = toks("the boy went out in the rain");
    const ReferenceSet refs{{t}};
    for (int n = 1; n <= 4; ++n) CHECK(bleu_n(t, refs, n) == doctest::Approx(1.0).epsilon(1e-12));
}

TEST_CASE("bleu: unigram clipping") {
    const Tokens hyp = toks("the the the"), ref = toks("the cat");
    // p1 = 1/3, h > r so no brevity penalty
    CHECK(bleu_n(hyp, ReferenceSet{{ref}}, 1) == doctest::Approx(1.0 / 3));
}

TEST_CASE("bleu: brevity penalty for a short hypothesis") {
    const Tokens hyp = toks("a b"), ref = toks("a b c d");
    CHECK(bleu_n(hyp, ReferenceSet{{ref}}, 1) == doctest::Approx(std::exp(1.0 - 2.0)));
    CHECK(bleu_n(hyp, ReferenceSet{{ref}}, 2) == doctest::Approx(std::exp(1.0 - 2.0)));
}

TEST_CASE("bleu: matches the brute-force counter on random cases") {
    std::mt19937_64 rng(31);
    for (int trial = 0; trial < 50; ++trial) {
        const Tokens hyp = random_tokens(rng, 1, 12, 4), ref = random_tokens(rng, 1, 12, 4);
        for (int n = 1; n <= 4; ++n)
            CHECK(std::abs(bleu_n(hyp, ReferenceSet{{ref}}, n) - oracle::bleu(hyp, ref, n)) <= 1e-9);
    }
}

TEST_CASE("bleu: score with several references is the mean of single-reference scores") {
    std::mt19937_64 rng(32);
    for (int trial = 0; trial < 50; ++trial) {
        const Tokens hyp = random_tokens(rng, 2, 10, 3);
        ReferenceSet refs{{random_tokens(rng, 2, 10, 3), random_tokens(rng, 2, 10, 3)}};
        for (int n = 1; n <= 4; ++n) {
            const double want = (oracle::bleu(hyp, refs.references[0], n) + oracle::bleu(hyp, refs.references[1], n)) / 2;
            CHECK(std::abs(bleu_n(hyp, refs, n) - want) <= 1e-9);
        }
    }
}

TEST_CASE("bleu: multi-reference sentence score clips by the max reference count") {
    const Tokens hyp = toks("the the cat");
    const std::vector<Tokens> refs = {toks("the cat sat"), toks("the the dog")};
    // p1: the clipped at 2 (second ref), cat 1 -> 3/3; closest ref length 3
    CHECK(sentence_bleu(hyp, refs, 1) == doctest::Approx(1.0));
}

TEST_CASE("rouge-l: hand example and oracle") {
    CHECK(rouge_l(toks("a c d"), toks("a b c d")) == doctest::Approx(6.0 / 7));
    CHECK(rouge_l(toks("a b"), toks("a b")) == 1.0);
    CHECK(rouge_l(toks("a b"), toks("c d")) == 0.0);
    std::mt19937_64 rng(33);
    for (int trial = 0; trial < 50; ++trial) {
        const Tokens hyp = random_tokens(rng, 1, 14, 5), ref = random_tokens(rng, 1, 14, 5);
        CHECK(std::abs(rouge_l(hyp, ref) - oracle::rouge_l(hyp, ref)) <= 1e-9);
    }
}

TEST_CASE("meteor: alignment and score match exhaustive matching") {
    std::mt19937_64 rng(34);
    for (int trial = 0; trial < 50; ++trial) {
        const Tokens hyp = random_tokens(rng, 1, 9, 4), ref = random_tokens(rng, 1, 9, 4);
        const auto a = align_exact(hyp, ref);
        const auto [m, ch] = oracle::meteor_alignment(hyp, ref);
        CHECK(a.exact);
        CHECK(a.matches == m);
        CHECK(a.chunks == ch);
        CHECK(std::abs(meteor(hyp, ref) - oracle::meteor(hyp, ref)) <= 1e-9);
    }
}

TEST_CASE("meteor: hand example") {
    // hyp "a b x c", ref "a b c": m=3, chunks 2, P=3/4, R=1
    const double P = 0.75, R = 1.0;
    const double f = P * R / (0.9 * P + 0.1 * R);
    const double pen = 0.5 * std::pow(2.0 / 3, 3);
    CHECK(meteor(toks("a b x c"), toks("a b c")) == doctest::Approx(f * (1 - pen)));
    CHECK(meteor(toks("a b"), toks("c d")) == 0.0);
}

TEST_CASE("meteor: identity keeps the single-chunk penalty") {
    // one chunk over m matches still costs gamma * (1/m)^beta
    const Tokens t = toks("the boy went out in the rain");
    CHECK(meteor(t, t) == doctest::Approx(1.0 - 0.5 / std::pow(7.0, 3)));
}

TEST_CASE("meteor: a tiny budget falls back to the best alignment found") {
    const Tokens hyp = toks("a a a a a a a a b b b b"), ref = toks("b b b b a a a a a a a a");
    const auto a = align_exact(hyp, ref, 10);
    CHECK(a.matches <= 12);
    CHECK(align_exact(hyp, ref).matches == 12);
}

TEST_CASE("property: scores in range, bleu orders") {
    std::mt19937_64 rng(35);
    std::size_t increases = 0;
    for (int trial = 0; trial < 500; ++trial) {
        const Tokens hyp = random_tokens(rng, 1, 15, 4), ref = random_tokens(rng, 1, 15, 4);
        const auto tm = text_metrics(hyp, ReferenceSet{{ref}});
        for (double x : tm.values) {
            CHECK(x >= 0);
            CHECK(x <= 1);
        }
        for (int n = 2; n <= 4; ++n)
            if (tm.values[n - 1] > tm.values[n - 2] + 1e-12) ++increases;
    }
    // clipped higher-order precision can exceed the lower-order geometric
    // mean, so this is a tendency, not a law
    MESSAGE("bleu increased with n in " << increases << " of 1500 order steps");
    CHECK(increases < 25);
}

TEST_CASE("rank_visual_words: cosine ordering and scale invariance") {
    Eigen::MatrixXd images(2, 3);
    images << 1, 0, 0, 0, 1, 0;
    Eigen::MatrixXd words(3, 3);
    words << 1, 0, 0,  // cos 1 and 0 -> 0.5
        0, 0, 1,       // orthogonal -> 0
        1, 1, 0;       // 1/sqrt2 twice -> 0.707
    const std::vector<std::string> names = {"first", "ortho", "both"};
    const std::vector<PosClass> classes = {PosClass::noun, PosClass::verb, PosClass::adjective};
    const auto vl = rank_visual_words(names, classes, words, images);
    REQUIRE(vl.ranked_words.size() == 3);
    CHECK(vl.ranked_words[0].word == "both");
    CHECK(vl.ranked_words[0].relevance == doctest::Approx(std::sqrt(0.5)));
    CHECK(vl.ranked_words[1].word == "first");
    CHECK(vl.ranked_words[1].relevance == doctest::Approx(0.5));
    CHECK(vl.ranked_words[2].relevance == doctest::Approx(0.0));
    CHECK(vl.ranked_words[0].pos_class == PosClass::adjective);

    const auto scaled = rank_visual_words(names, classes, words * 7.5, images * 0.1);
    for (std::size_t i = 0; i < 3; ++i) CHECK(scaled.ranked_words[i].word == vl.ranked_words[i].word);

    CHECK_THROWS_AS(rank_visual_words(names, classes, words, Eigen::MatrixXd::Ones(2, 4)), Error);
}

TEST_CASE("coverage: category and class ratios") {
    const auto vl = lexicon();
    const auto full = coverage_features(transcript("once on a rainy day in the morning sky rain the rabbit and boy run jump"), vl, 50);
    // introduction: once, day, morning, sky, rain -> 5/5
    CHECK(full.values[0] == 1.0);
    CHECK(full.values[1] == 1.0);
    CHECK(full.values[2] == 0.0);
    CHECK(full.values[3] == 1.0);

    const auto partial = coverage_features(transcript("one day the sky had rain"), vl, 50);
    CHECK(partial.values[0] == doctest::Approx(0.6));

    const auto c = coverage_features(transcript("the rabbit ran in the rain"), vl, 50);
    CHECK(c.values[4] == doctest::Approx(1.0));      // nouns: rabbit, rain
    CHECK(c.values[5] == 0.0);                       // verbs: run, jump
    CHECK(c.values[9] == doctest::Approx(2.0 / 7));  // all classes

    // top_k = 1 keeps only the highest-ranked word of each class
    const auto top1 = coverage_features(transcript("the rain fell"), vl, 1);
    CHECK(top1.values[4] == 0.0);
}

TEST_CASE("property: coverage ignores order and duplication") {
    const auto vl = lexicon();
    std::mt19937_64 rng(36);
    const std::vector<std::string> pool = {"rabbit", "run", "he", "wet", "fast", "rain", "jump", "day", "boy", "umbrella", "x", "y"};
    for (int trial = 0; trial < 100; ++trial) {
        std::vector<std::string> words(1 + rng() % 12);
        for (auto& w : words) w = pool[rng() % pool.size()];
        auto join = [](const std::vector<std::string>& ws) {
            std::string s;
            for (const auto& w : ws) s += w + " ";
            return s;
        };
        const auto base = coverage_features(transcript(join(words)), vl, 3);
        auto shuffled = words;
        std::shuffle(shuffled.begin(), shuffled.end(), rng);
        auto doubled = words;
        doubled.insert(doubled.end(), words.begin(), words.end());
        CHECK(coverage_features(transcript(join(shuffled)), vl, 3).values == base.values);
        CHECK(coverage_features(transcript(join(doubled)), vl, 3).values == base.values);
        for (double v : base.values) {
            CHECK(v >= 0);
            CHECK(v <= 1);
        }
    }
}

TEST_CASE("visual lexicon and category files round trip") {
    testutil::TempDir d;
    const auto vl = lexicon();
    write_visual_lexicon(vl.ranked_words, d / "vl.tsv");
    const auto back = read_visual_lexicon(d / "vl.tsv");
    REQUIRE(back.size() == vl.ranked_words.size());
    for (std::size_t i = 0; i < back.size(); ++i) {
        CHECK(back[i].word == vl.ranked_words[i].word);
        CHECK(back[i].relevance == vl.ranked_words[i].relevance);
        CHECK(back[i].pos_class == vl.ranked_words[i].pos_class);
    }
    write_categories(vl.categories, d / "cat.txt");
    CHECK(read_categories(d / "cat.txt") == vl.categories);
}
