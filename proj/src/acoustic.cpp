#include "vsn/acoustic.hpp"

#include "vsn/error.hpp"

namespace vsn::acoustic {

std::array<double, AcousticFeatures::kCount> AcousticFeatures::values() const {
    return {n_pauses,          total_pause_dur,     avg_pause_dur,     normalized_pause_dur, pause_frequency,
            pause_occurrence_rate, total_utterance_dur, avg_utterance_dur, articulation_rate,   speaking_rate};
}

const std::array<std::string_view, AcousticFeatures::kCount>& AcousticFeatures::names() {
    static const std::array<std::string_view, kCount> n = {
        "n_pauses",          "total_pause_dur",     "avg_pause_dur",     "normalized_pause_dur", "pause_frequency",
        "pause_occurrence_rate", "total_utterance_dur", "avg_utterance_dur", "articulation_rate",   "speaking_rate"};
    return n;
}

namespace {

double voiced_duration(const VadSegments& v) {
    double total = 0.0;
    for (const auto& s : v.segments) total += s.duration();
    return total;
}

}  // namespace

double avg_syllable_duration(const VadSegments& v, int syllables) {
    if (syllables <= 0) throw Error(Errc::ZeroSyllables, "syllable count must be positive");
    if (v.segments.empty()) throw Error(Errc::NoSegments, "no voiced segments");
    return voiced_duration(v) / syllables;
}

std::vector<Segment> detect_pauses(const VadSegments& v, double threshold) {
    if (!(threshold > 0.0)) throw Error(Errc::InvalidArgument, "pause threshold must be > 0");
    std::vector<Segment> pauses;
    for (std::size_t i = 1; i < v.segments.size(); ++i) {
        const Segment gap{v.segments[i - 1].end_s, v.segments[i].start_s};
        if (gap.duration() > threshold) pauses.push_back(gap);
    }
    return pauses;
}

AcousticFeatures acoustic_features(const VadSegments& v, int syllables) {
    validate_vad(v);
    const double threshold = avg_syllable_duration(v, syllables);
    const auto pauses = detect_pauses(v, threshold);

    AcousticFeatures f;
    f.n_pauses = static_cast<double>(pauses.size());
    for (const auto& p : pauses) f.total_pause_dur += p.duration();
    f.avg_pause_dur = pauses.empty() ? 0.0 : f.total_pause_dur / f.n_pauses;
    f.total_utterance_dur = voiced_duration(v);
    f.avg_utterance_dur = f.total_utterance_dur / static_cast<double>(v.segments.size());
    f.articulation_rate = syllables / f.total_utterance_dur;
    const double span = v.segments.back().end_s - v.segments.front().start_s;
    f.speaking_rate = syllables / span;
    f.normalized_pause_dur = f.total_pause_dur / f.articulation_rate;
    f.pause_frequency = f.n_pauses / f.total_utterance_dur;
    f.pause_occurrence_rate = f.n_pauses / syllables;
    return f;
}

int estimate_syllables(const TokenizedTranscript& t, Language language) {
    int count = 0;
    if (language == Language::cantonese) {
        for (char32_t c : text::utf8_decode(t.raw_text))
            if (!text::is_space(c) && text::kTokenPunctuation.find(c) == std::u32string_view::npos) ++count;
    } else {
        for (const auto& tok : t.tokens)
            if (!text::is_punctuation_token(tok.surface)) ++count;
    }
    return count;
}

}  // namespace vsn::acoustic
