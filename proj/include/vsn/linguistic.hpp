#pragma once

#include <array>
#include <filesystem>
#include <map>
#include <set>
#include <string>
#include <string_view>

#include "vsn/corpus.hpp"

namespace vsn::linguistic {

enum class PosClass { adjective, adverb, noun, pronoun, verb, other };

PosClass parse_pos_class(std::string_view name);
const char* to_string(PosClass c) noexcept;

/// Word lists and the corpus-tag -> PoS-class table. Entries are lowercase.
struct Lexicons {
    std::set<std::string> stopwords;
    std::set<std::string> filled_pauses;
    std::set<std::string> lexical_fillers;
    std::set<std::string> backchannels;
    std::set<std::string> functional_pos_tags;
    std::map<std::string, PosClass> pos_classes;

    PosClass class_of(const std::string& tag) const;

    /// Loads stopwords.txt, filled_pauses.txt, lexical_fillers.txt,
    /// backchannels.txt, functional_tags.txt and pos_classes.txt from `dir`.
    /// Missing files leave the corresponding set empty.
    static Lexicons load_dir(const std::filesystem::path& dir);
};

/// UTF-8 word list: one entry per line, '#' starts a comment.
std::set<std::string> read_word_list(const std::filesystem::path& path);

struct LinguisticFeatures {
    double n_words = 0;
    double stopword_ratio = 0;
    double filled_pause_ratio = 0;
    double lexical_filler_ratio = 0;
    double backchannel_ratio = 0;
    double repetition_ratio = 0;
    double adjective_ratio = 0;
    double adverb_ratio = 0;
    double noun_ratio = 0;
    double pronoun_ratio = 0;
    double verb_ratio = 0;
    double functional_ratio = 0;
    double cttr = 0;

    static constexpr std::size_t kCount = 13;
    std::array<double, kCount> values() const;
    static const std::array<std::string_view, kCount>& names();
};

LinguisticFeatures linguistic_features(const TokenizedTranscript& t, const Lexicons& lex);

}  // namespace vsn::linguistic
