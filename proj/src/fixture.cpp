#include <algorithm>
#include <cmath>
#include <fstream>
#include <map>
#include <random>

#include <fmt/format.h>
#include <json.hpp>

#include "binary_io.hpp"
#include "vsn/error.hpp"
#include "vsn/linguistic.hpp"
#include "vsn/refmetrics.hpp"
#include "vsn/synth.hpp"

namespace vsn::synth {

namespace fs = std::filesystem;
using Eigen::Index;
using Eigen::MatrixXd;
using Eigen::VectorXd;

namespace {

// A fifteen-picture story; sentence j describes picture j.
const std::vector<std::string> kScenes = {
    "one morning a boy woke up in his bed",
    "his mother made breakfast in the kitchen",
    "the boy ate bread and drank milk",
    "he packed his book into his bag",
    "he walked to the bus with his dog",
    "the yellow bus took him to school",
    "the teacher read a story to the class",
    "the boy played ball with his friends",
    "it started to rain in the afternoon",
    "the boy lost his umbrella near the park",
    "a kind girl shared her umbrella with him",
    "they walked together along the river",
    "the boy said goodbye to the girl",
    "he ran back home in the rain",
    "his mother gave him a warm towel at home",
};

const std::vector<std::string> kReferences = {
    "one morning a boy woke up in his bed . his mother made breakfast in the kitchen . the boy ate bread and "
    "drank milk . he packed his book into his bag . he walked to the bus with his dog . the yellow bus took him "
    "to school . the teacher read a story to the class . the boy played ball with his friends . it started to "
    "rain in the afternoon . the boy lost his umbrella near the park . a kind girl shared her umbrella with him . "
    "they walked together along the river . the boy said goodbye to the girl . he ran back home in the rain . "
    "his mother gave him a warm towel at home .",
    "a boy wakes up and his mother cooks breakfast . he eats bread and milk and packs his bag . he takes the bus "
    "to school with his dog . the teacher reads a story and the boy plays ball with friends . it rains and he "
    "loses his umbrella in the park . a girl shares her umbrella and they walk along the river . he says goodbye "
    "and runs home where his mother gives him a towel .",
};

const std::map<std::string, std::string>& pos_dictionary() {
    static const std::map<std::string, std::string> d = [] {
        std::map<std::string, std::string> m;
        auto add = [&](const char* tag, std::initializer_list<const char*> words) {
            for (auto w : words) m[w] = tag;
        };
        add("NOUN", {"morning", "boy", "bed", "mother", "breakfast", "kitchen", "bread", "milk", "book", "bag",
                     "bus", "dog", "school", "teacher", "story", "class", "ball", "friends", "friend", "rain",
                     "afternoon", "umbrella", "park", "girl", "river", "goodbye", "home", "towel", "thing",
                     "stuff", "picture", "kid", "woman", "man"});
        add("VERB", {"woke", "made", "ate", "drank", "packed", "walked", "took", "read", "played", "started",
                     "lost", "shared", "said", "ran", "gave", "wakes", "cooks", "eats", "packs", "takes", "reads",
                     "plays", "rains", "loses", "shares", "walk", "says", "runs", "gives", "went", "see", "think",
                     "know", "is", "was", "go", "going", "doing", "looks"});
        add("ADJ", {"yellow", "kind", "warm", "little", "happy", "big", "wet", "nice"});
        add("ADV", {"up", "together", "back", "then", "there", "again", "maybe", "just", "really", "where"});
        add("PRON", {"he", "his", "him", "her", "they", "it", "she", "i", "you", "something", "what", "them"});
        add("DET", {"a", "the", "one", "this", "that", "some"});
        add("ADP", {"in", "into", "to", "with", "near", "along", "at", "of", "on"});
        add("CCONJ", {"and", "but", "so"});
        add("INTJ", {"um", "uh", "er", "hmm", "well", "yeah", "okay", "like"});
        return m;
    }();
    return d;
}

std::string tag_of(const std::string& w) {
    const auto& d = pos_dictionary();
    auto it = d.find(w);
    return it == d.end() ? "NOUN" : it->second;
}

int syllables_of(const std::string& w) {
    int n = 0;
    bool prev = false;
    for (char c : w) {
        const bool v = std::string_view("aeiouy").find(c) != std::string_view::npos;
        if (v && !prev) ++n;
        prev = v;
    }
    if (w.size() > 2 && w.back() == 'e' && n > 1) --n;
    return std::max(n, 1);
}

std::vector<std::string> split(const std::string& s) {
    std::vector<std::string> out;
    std::size_t i = 0;
    while (i < s.size()) {
        while (i < s.size() && s[i] == ' ') ++i;
        std::size_t j = i;
        while (j < s.size() && s[j] != ' ') ++j;
        if (j > i) out.push_back(s.substr(i, j - i));
        i = j;
    }
    return out;
}

struct Narrative {
    std::vector<std::vector<std::string>> sentences;  // words, no punctuation
    std::vector<int> scene;                           // picture behind each sentence, -1 for none
};

Narrative narrate(bool ncd, std::mt19937_64& rng) {
    std::uniform_real_distribution<double> u(0.0, 1.0);
    Narrative n;
    std::vector<int> order;
    for (int j = 0; j < static_cast<int>(kScenes.size()); ++j)
        if (u(rng) < (ncd ? 0.6 : 0.95)) order.push_back(j);
    if (ncd) {
        // local reordering: adjacent swaps
        for (std::size_t i = 0; i + 1 < order.size(); ++i)
            if (u(rng) < 0.35) std::swap(order[i], order[i + 1]);
        // the ending is often lost
        while (!order.empty() && order.back() >= 13 && u(rng) < 0.7) order.pop_back();
    }
    static const std::vector<std::string> fillers = {"um", "uh", "er", "hmm"};
    static const std::vector<std::string> lexical = {"well", "like"};
    static const std::vector<std::string> vague = {"thing", "stuff", "something"};
    for (int j : order) {
        auto words = split(kScenes[static_cast<std::size_t>(j)]);
        if (!ncd && u(rng) < 0.3) {
            // harmless paraphrase
            for (auto& w : words)
                if (w == "boy" && u(rng) < 0.5) w = "kid";
        }
        if (ncd) {
            std::vector<std::string> out;
            for (auto& w : words) {
                if (u(rng) < 0.15) out.push_back(fillers[rng() % fillers.size()]);
                if (tag_of(w) == "NOUN" && u(rng) < 0.3) {
                    out.push_back(vague[rng() % vague.size()]);
                    continue;
                }
                out.push_back(w);
                if (u(rng) < 0.1) out.push_back(w);  // repetition
            }
            if (u(rng) < 0.3) out.insert(out.begin(), lexical[rng() % lexical.size()]);
            words = std::move(out);
        } else if (u(rng) < 0.08) {
            words.insert(words.begin(), fillers[rng() % fillers.size()]);
        }
        n.sentences.push_back(std::move(words));
        n.scene.push_back(j);
    }
    if (ncd) {
        // off-picture remarks
        const int extra = 1 + static_cast<int>(rng() % 3);
        for (int e = 0; e < extra; ++e) {
            std::vector<std::string> s = u(rng) < 0.5 ? split("i think there is a picture of a man")
                                                      : split("yeah okay i do not know what he is doing");
            const auto pos = rng() % (n.sentences.size() + 1);
            n.sentences.insert(n.sentences.begin() + static_cast<long>(pos), std::move(s));
            n.scene.insert(n.scene.begin() + static_cast<long>(pos), -1);
        }
    }
    return n;
}

TokenizedTranscript to_transcript(const Narrative& n) {
    std::string raw;
    for (const auto& s : n.sentences) {
        for (std::size_t i = 0; i < s.size(); ++i) {
            if (!raw.empty()) raw += ' ';
            raw += (i == 0 && !s[i].empty()) ? std::string(1, static_cast<char>(std::toupper(s[i][0]))) + s[i].substr(1)
                                             : s[i];
        }
        raw += '.';
    }
    TokenizedTranscript t = tokenize_whitespace(raw);
    for (auto& tok : t.tokens)
        if (tok.pos != "PUNCT") tok.pos = tag_of(text::to_lower(tok.surface));
    return t;
}

// Speech timeline: words run together inside a sentence, sentences are
// separated by pauses, fillers add hesitation. Returns voiced segments and
// the syllable total.
std::pair<VadSegments, int> speak(const Narrative& n, bool ncd, std::mt19937_64& rng) {
    std::uniform_real_distribution<double> u(0.0, 1.0);
    const double syl = ncd ? 0.26 : 0.2;
    VadSegments v;
    double now = 0.3 + 0.2 * u(rng);
    int total = 0;
    for (const auto& s : n.sentences) {
        double start = now;
        for (const auto& w : s) {
            const int k = syllables_of(w);
            total += k;
            const bool hesitation = (w == "um" || w == "uh" || w == "er" || w == "hmm");
            if (hesitation && now > start) {
                v.segments.push_back({start, now});
                now += (ncd ? 0.8 : 0.4) + 0.6 * u(rng);
                start = now;
            }
            now += k * syl * (0.85 + 0.3 * u(rng)) + 0.03;
        }
        v.segments.push_back({start, now});
        now += ncd ? 0.9 + 1.8 * u(rng) : 0.35 + 0.5 * u(rng);
    }
    return {v, total};
}

void write_text(const fs::path& p, const std::string& s) { detail::spit(p, s); }

void copy_lexicons(const fs::path& dir) {
    fs::create_directories(dir);
    write_text(dir / "stopwords.txt",
               "a\nan\nthe\nand\nor\nbut\nso\nthen\nof\nin\non\nat\nto\nfor\nwith\ninto\nup\nis\nwas\nare\nbe\n"
               "do\nit\nhe\nhim\nhis\nshe\nher\nthey\nthem\ni\nyou\nthis\nthat\nthere\nnot\n");
    write_text(dir / "filled_pauses.txt", "um\nuh\ner\nhmm\n");
    write_text(dir / "lexical_fillers.txt", "well\nlike\n");
    write_text(dir / "backchannels.txt", "yeah\nokay\n");
    write_text(dir / "functional_tags.txt", "DET\nADP\nCCONJ\nSCONJ\nAUX\nPART\n");
    write_text(dir / "pos_classes.txt",
               "ADJ adjective\nADV adverb\nNOUN noun\nPROPN noun\nPRON pronoun\nVERB verb\nDET other\nADP other\n"
               "CCONJ other\nSCONJ other\nAUX other\nPART other\nINTJ other\nNUM other\nPUNCT other\nX other\n");
}

}  // namespace

fs::path write_fixture_corpus(const fs::path& dir, std::uint64_t seed) {
    std::mt19937_64 rng(seed);
    std::normal_distribution<double> normal(0.0, 1.0);
    fs::create_directories(dir / "transcripts");
    fs::create_directories(dir / "vad");
    fs::create_directories(dir / "emb");

    constexpr Index J = 15, Kmax = 24, H = 32;
    auto unit = [&] {
        VectorXd v(H);
        for (Index h = 0; h < H; ++h) v(h) = normal(rng);
        return VectorXd(v / v.norm());
    };
    MatrixXd image(J, H);
    for (Index j = 0; j < J; ++j) image.row(j) = unit().transpose();
    const VectorXd generic = unit();

    // 6 HC (labels 0/1) and 6 NCD (labels 2..4); 4 + 4 train, 2 + 2 test.
    const std::vector<int> labels = {0, 1, 0, 1, 0, 1, 2, 3, 4, 2, 3, 4};
    const std::vector<int> test_slot = {0, 0, 0, 0, 1, 1, 0, 0, 0, 0, 1, 1};
    std::vector<ParticipantRecord> records;
    for (std::size_t i = 0; i < labels.size(); ++i) {
        ParticipantRecord r;
        r.id = fmt::format("P{:02}", i + 1);
        r.label = labels[i];
        r.split = test_slot[i] ? Split::test : Split::train;
        r.language = Language::english;
        r.image_set_id = "rainy_day";
        const bool ncd = r.label >= 2;

        const Narrative n = narrate(ncd, rng);
        const TokenizedTranscript t = to_transcript(n);
        r.transcript_path = dir / "transcripts" / (r.id + ".json");
        write_transcript(t, r.transcript_path);

        auto [vad, syl] = speak(n, ncd, rng);
        r.vad_path = dir / "vad" / (r.id + ".json");
        write_vad(vad, r.vad_path);
        r.syllable_count = syl;

        EmbeddingSequence e;
        e.image = image.cast<float>();
        e.text = Eigen::MatrixXf::Zero(Kmax, H);
        e.mask.assign(static_cast<std::size_t>(J + Kmax), 0);
        std::fill_n(e.mask.begin(), J, 1);
        const Index Ki = std::min<Index>(Kmax, static_cast<Index>(n.sentences.size()));
        for (Index k = 0; k < Ki; ++k) {
            const int scene = n.scene[static_cast<std::size_t>(k)];
            VectorXd row = scene >= 0 ? VectorXd(image.row(scene).transpose()) : generic;
            if (ncd) row = 0.5 * row + 0.5 * generic;
            VectorXd noise(H);
            for (Index h = 0; h < H; ++h) noise(h) = normal(rng);
            row += 0.4 * noise / std::sqrt(static_cast<double>(H));
            e.text.row(k) = row.transpose().cast<float>();
            e.mask[static_cast<std::size_t>(J + k)] = 1;
        }
        r.text_emb_path = dir / "emb" / (r.id + ".nme");
        write_embeddings(e, r.text_emb_path);
        records.push_back(std::move(r));
    }
    write_manifest(records, dir / "manifest.jsonl");

    copy_lexicons(dir / "lexicons");
    std::string tags;
    for (const char* tg : {"ADJ", "ADP", "ADV", "AUX", "CCONJ", "DET", "INTJ", "NOUN", "NUM", "PART", "PRON",
                           "PROPN", "PUNCT", "SCONJ", "VERB", "X"})
        tags += std::string(tg) + "\n";
    write_text(dir / "lexicons" / "tag_set.txt", tags);

    // Visual lexicon: a content word's embedding sits near the pictures whose
    // sentences use it.
    const linguistic::Lexicons lex = linguistic::Lexicons::load_dir(dir / "lexicons");
    std::vector<std::string> words;
    std::vector<linguistic::PosClass> classes;
    std::vector<VectorXd> embs;
    for (const auto& [w, tag] : pos_dictionary()) {
        const auto cls = lex.class_of(tag);
        if (cls == linguistic::PosClass::other) continue;
        VectorXd acc = VectorXd::Zero(H);
        for (Index j = 0; j < J; ++j) {
            const auto ws = split(kScenes[static_cast<std::size_t>(j)]);
            if (std::find(ws.begin(), ws.end(), w) != ws.end()) acc += image.row(j).transpose();
        }
        if (acc.norm() == 0) acc = generic;
        VectorXd noise(H);
        for (Index h = 0; h < H; ++h) noise(h) = normal(rng);
        acc = acc / acc.norm() + 0.3 * noise / std::sqrt(static_cast<double>(H));
        words.push_back(w);
        classes.push_back(cls);
        embs.push_back(acc);
    }
    MatrixXd W(static_cast<Index>(embs.size()), H);
    for (std::size_t i = 0; i < embs.size(); ++i) W.row(static_cast<Index>(i)) = embs[i].transpose();
    const auto vl = refmetrics::rank_visual_words(words, classes, W, image);
    refmetrics::write_visual_lexicon(vl.ranked_words, dir / "visual_lexicon.tsv");

    refmetrics::write_categories({{"introduction", {"morning", "woke", "bed", "boy"}},
                                  {"character", {"boy", "mother", "teacher", "girl", "dog", "friends"}},
                                  {"object", {"bus", "umbrella", "bag", "book", "towel", "ball", "bread"}},
                                  {"action", {"walked", "ran", "played", "shared", "ate", "packed", "lost"}}},
                                 dir / "categories.txt");

    std::string refs;
    for (const auto& r : kReferences) refs += r + "\n";
    write_text(dir / "references.txt", refs);

    nlohmann::json cfg = {
        {"manifest", "manifest.jsonl"},
        {"lexicon_dir", "lexicons"},
        {"tag_set", "lexicons/tag_set.txt"},
        {"visual_lexicon", "visual_lexicon.tsv"},
        {"categories", "categories.txt"},
        {"references", "references.txt"},
        {"coverage.top_k", 50},
        {"dtm.K", 3},
        {"dtm.T", 15},
        {"dtm.max_em_iters", 60},
        {"dtm.restarts", 2},
        {"dtm.restart_iters", 10},
        {"dtm.cycle_lexicon", {"home"}},
        {"titan.epochs", 100},
        {"titan.batch_size", 4},
        {"titan.H_prime", 5},
        {"titan.lr", 0.01},
        {"titan.task", "classify"},
        {"pca.n_components", 5},
        {"svm.kernel", "rbf"},
        {"svm.C", 1.0},
        {"grid.C", {0.1, 1.0, 10.0}},
        {"grid.kernel", {"rbf", "linear"}},
        {"grid.n_components", {2, 5}},
        {"grid.folds", 2},
        {"explain.n_samples", 256},
    };
    const fs::path cfg_path = dir / "config.json";
    write_text(cfg_path, cfg.dump(2) + "\n");
    return cfg_path;
}

}  // namespace vsn::synth
