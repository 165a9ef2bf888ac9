#include "vsn/linguistic.hpp"

#include <cmath>
#include <fstream>
#include <unordered_set>

#include "vsn/error.hpp"

namespace vsn::linguistic {

namespace fs = std::filesystem;

PosClass parse_pos_class(std::string_view name) {
    const std::string n = text::to_lower(name);
    if (n == "adj" || n == "adjective") return PosClass::adjective;
    if (n == "adv" || n == "adverb") return PosClass::adverb;
    if (n == "noun") return PosClass::noun;
    if (n == "pronoun" || n == "pron") return PosClass::pronoun;
    if (n == "verb") return PosClass::verb;
    if (n == "other" || n == "functional") return PosClass::other;
    throw Error(Errc::InvalidArgument, "unknown PoS class '" + std::string(name) + "'");
}

const char* to_string(PosClass c) noexcept {
    switch (c) {
        case PosClass::adjective: return "adj";
        case PosClass::adverb: return "adv";
        case PosClass::noun: return "noun";
        case PosClass::pronoun: return "pronoun";
        case PosClass::verb: return "verb";
        case PosClass::other: return "other";
    }
    return "other";
}

PosClass Lexicons::class_of(const std::string& tag) const {
    auto it = pos_classes.find(tag);
    return it == pos_classes.end() ? PosClass::other : it->second;
}

namespace {

std::string trim(const std::string& s) {
    const auto b = s.find_first_not_of(" \t\r\n");
    if (b == std::string::npos) return {};
    const auto e = s.find_last_not_of(" \t\r\n");
    return s.substr(b, e - b + 1);
}

std::vector<std::string> read_lines(const fs::path& path) {
    std::vector<std::string> lines;
    std::ifstream in(path);
    if (!in) return lines;
    std::string line;
    while (std::getline(in, line)) {
        if (auto hash = line.find('#'); hash != std::string::npos) line.resize(hash);
        line = trim(line);
        if (!line.empty()) lines.push_back(line);
    }
    return lines;
}

}  // namespace

std::set<std::string> read_word_list(const fs::path& path) {
    std::set<std::string> out;
    for (auto& l : read_lines(path)) out.insert(text::to_lower(l));
    return out;
}

Lexicons Lexicons::load_dir(const fs::path& dir) {
    if (!fs::is_directory(dir)) throw Error(Errc::UnresolvablePath, "lexicon directory " + dir.string());
    Lexicons lex;
    lex.stopwords = read_word_list(dir / "stopwords.txt");
    lex.filled_pauses = read_word_list(dir / "filled_pauses.txt");
    lex.lexical_fillers = read_word_list(dir / "lexical_fillers.txt");
    lex.backchannels = read_word_list(dir / "backchannels.txt");
    for (auto& l : read_lines(dir / "functional_tags.txt")) lex.functional_pos_tags.insert(l);
    for (auto& l : read_lines(dir / "pos_classes.txt")) {
        const auto sp = l.find_first_of(" \t");
        if (sp == std::string::npos) throw Error(Errc::MalformedRecord, "pos_classes.txt: '" + l + "'");
        lex.pos_classes[l.substr(0, sp)] = parse_pos_class(trim(l.substr(sp)));
    }
    return lex;
}

std::array<double, LinguisticFeatures::kCount> LinguisticFeatures::values() const {
    return {n_words,      stopword_ratio, filled_pause_ratio, lexical_filler_ratio, backchannel_ratio,
            repetition_ratio, adjective_ratio, adverb_ratio,   noun_ratio,          pronoun_ratio,
            verb_ratio,   functional_ratio, cttr};
}

const std::array<std::string_view, LinguisticFeatures::kCount>& LinguisticFeatures::names() {
    static const std::array<std::string_view, kCount> n = {
        "n_words",          "stopword_ratio",  "filled_pause_ratio", "lexical_filler_ratio", "backchannel_ratio",
        "repetition_ratio", "adjective_ratio", "adverb_ratio",       "noun_ratio",           "pronoun_ratio",
        "verb_ratio",       "functional_ratio", "cttr"};
    return n;
}

LinguisticFeatures linguistic_features(const TokenizedTranscript& t, const Lexicons& lex) {
    std::size_t words = 0, stop = 0, filled = 0, lexical = 0, backchannel = 0, repeats = 0, functional = 0;
    std::array<std::size_t, 6> by_class{};
    std::unordered_set<std::string> types;
    std::string previous;

    for (const auto& tok : t.tokens) {
        if (text::is_punctuation_token(tok.surface)) continue;
        const std::string w = text::to_lower(tok.surface);
        ++words;
        stop += lex.stopwords.count(w);
        filled += lex.filled_pauses.count(w);
        lexical += lex.lexical_fillers.count(w);
        backchannel += lex.backchannels.count(w);
        if (words > 1 && previous == w) ++repeats;
        ++by_class[static_cast<std::size_t>(lex.class_of(tok.pos))];
        functional += lex.functional_pos_tags.count(tok.pos);
        types.insert(w);
        previous = w;
    }
    if (words == 0) throw Error(Errc::EmptyTranscript, "transcript has no words");

    const double n = static_cast<double>(words);
    LinguisticFeatures f;
    f.n_words = n;
    f.stopword_ratio = stop / n;
    f.filled_pause_ratio = filled / n;
    f.lexical_filler_ratio = lexical / n;
    f.backchannel_ratio = backchannel / n;
    f.repetition_ratio = repeats / n;
    f.adjective_ratio = by_class[static_cast<std::size_t>(PosClass::adjective)] / n;
    f.adverb_ratio = by_class[static_cast<std::size_t>(PosClass::adverb)] / n;
    f.noun_ratio = by_class[static_cast<std::size_t>(PosClass::noun)] / n;
    f.pronoun_ratio = by_class[static_cast<std::size_t>(PosClass::pronoun)] / n;
    f.verb_ratio = by_class[static_cast<std::size_t>(PosClass::verb)] / n;
    f.functional_ratio = functional / n;
    f.cttr = static_cast<double>(types.size()) / std::sqrt(2.0 * n);
    return f;
}

}  // namespace vsn::linguistic
