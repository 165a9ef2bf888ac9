#pragma once

#include <array>
#include <string_view>
#include <vector>

#include "vsn/corpus.hpp"

namespace vsn::acoustic {

/// Pause and rate features computed from voiced-segment timestamps.
struct AcousticFeatures {
    double n_pauses = 0;
    double total_pause_dur = 0;        // seconds
    double avg_pause_dur = 0;          // seconds (0 without pauses)
    double normalized_pause_dur = 0;   // total pause / articulation rate
    double pause_frequency = 0;        // pauses per voiced second
    double pause_occurrence_rate = 0;  // pauses per syllable
    double total_utterance_dur = 0;    // seconds voiced
    double avg_utterance_dur = 0;      // seconds per segment
    double articulation_rate = 0;      // syllables per voiced second
    double speaking_rate = 0;          // syllables per second of span

    static constexpr std::size_t kCount = 10;
    std::array<double, kCount> values() const;
    static const std::array<std::string_view, kCount>& names();
};

double avg_syllable_duration(const VadSegments& v, int syllables);

/// Inter-segment gaps strictly longer than `threshold` seconds.
std::vector<Segment> detect_pauses(const VadSegments& v, double threshold);

/// The pause threshold is the speaker's average syllable duration.
AcousticFeatures acoustic_features(const VadSegments& v, int syllables);

/// Syllable count when the manifest does not carry one: per-character for
/// Cantonese, per-word for English.
int estimate_syllables(const TokenizedTranscript& t, Language language);

}  // namespace vsn::acoustic
