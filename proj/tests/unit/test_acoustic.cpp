#include <doctest.h>

#include <random>

#include "support/oracles.hpp"
#include "vsn/acoustic.hpp"
#include "vsn/error.hpp"

using namespace vsn;
using namespace vsn::acoustic;

namespace {

VadSegments vad(std::initializer_list<std::pair<double, double>> xs) {
    VadSegments v;
    for (auto [s, e] : xs) v.segments.push_back({s, e});
    return v;
}

struct Trace {
    VadSegments v;
    std::vector<oracle::Seg> segs;
    int syllables;
};

Trace random_trace(std::mt19937_64& rng) {
    std::uniform_real_distribution<double> seg(0.2, 3.0), gap(0.0, 1.5);
    Trace tr;
    const int n = 1 + static_cast<int>(rng() % 12);
    double t = gap(rng);
    for (int i = 0; i < n; ++i) {
        const double s = t, e = t + seg(rng);
        tr.v.segments.push_back({s, e});
        tr.segs.push_back({s, e});
        t = e + gap(rng) + 1e-3;
    }
    tr.syllables = 1 + static_cast<int>(rng() % 60);
    return tr;
}

}  // namespace

TEST_CASE("average syllable duration") {
    CHECK(avg_syllable_duration(vad({{0, 1}, {1.5, 2.5}}), 10) == doctest::Approx(0.2));
    CHECK(avg_syllable_duration(vad({{0, 1}}), 1) == 1.0);
    CHECK_THROWS_AS(avg_syllable_duration(vad({{0, 1}}), 0), Error);
    try {
        avg_syllable_duration(VadSegments{}, 3);
        FAIL("no throw");
    } catch (const Error& e) {
        CHECK(e.code() == Errc::NoSegments);
    }
}

TEST_CASE("pauses are gaps strictly above the threshold") {
    const auto p = detect_pauses(vad({{0, 1}, {1.5, 2.5}}), 0.2);
    REQUIRE(p.size() == 1);
    CHECK(p[0].start_s == 1.0);
    CHECK(p[0].end_s == 1.5);
    CHECK(detect_pauses(vad({{0, 1}, {1.1, 2}}), 0.2).empty());
    CHECK(detect_pauses(vad({{0, 1}}), 0.2).empty());
    CHECK(detect_pauses(vad({{0, 1}, {1.25, 2}}), 0.25).empty());
}

TEST_CASE("two segments, ten syllables") {
    const auto f = acoustic_features(vad({{0, 1}, {1.5, 2.5}}), 10);
    CHECK(f.n_pauses == 1);
    CHECK(f.total_pause_dur == doctest::Approx(0.5));
    CHECK(f.avg_pause_dur == doctest::Approx(0.5));
    CHECK(f.normalized_pause_dur == doctest::Approx(0.1));
    CHECK(f.total_utterance_dur == doctest::Approx(2.0));
    CHECK(f.articulation_rate == doctest::Approx(5.0));
    CHECK(f.speaking_rate == doctest::Approx(4.0));
    CHECK(f.pause_frequency == doctest::Approx(0.5));
    CHECK(f.pause_occurrence_rate == doctest::Approx(0.1));
    CHECK(f.avg_utterance_dur == doctest::Approx(1.0));
}

TEST_CASE("single segment has no pauses") {
    const auto f = acoustic_features(vad({{0, 2}}), 4);
    CHECK(f.n_pauses == 0);
    CHECK(f.avg_pause_dur == 0);
    CHECK(f.articulation_rate == 2.0);
    CHECK(f.speaking_rate == 2.0);
}

TEST_CASE("features match the definition oracle on random traces") {
    std::mt19937_64 rng(5);
    for (int trial = 0; trial < 40; ++trial) {
        const auto tr = random_trace(rng);
        const auto got = acoustic_features(tr.v, tr.syllables).values();
        const auto want = oracle::acoustic_features(tr.segs, tr.syllables);
        CHECK(got[0] == want[0]);  // pause count is exact
        for (std::size_t i = 1; i < want.size(); ++i) CHECK(got[i] == doctest::Approx(want[i]).epsilon(1e-12));
    }
}

TEST_CASE("property: ranges and rate ordering") {
    std::mt19937_64 rng(6);
    for (int trial = 0; trial < 500; ++trial) {
        const auto tr = random_trace(rng);
        const auto f = acoustic_features(tr.v, tr.syllables);
        for (double x : f.values()) {
            CHECK(std::isfinite(x));
            CHECK(x >= 0);
        }
        CHECK(f.n_pauses <= std::max<double>(0, tr.v.segments.size() - 1.0));
        CHECK(f.articulation_rate >= f.speaking_rate - 1e-12);
        if (f.n_pauses == 0) {
            CHECK(f.total_pause_dur == 0);
            CHECK(f.avg_pause_dur == 0);
            CHECK(f.normalized_pause_dur == 0);
            CHECK(f.pause_frequency == 0);
        }
    }
}

TEST_CASE("property: scaling time scales durations and inverts rates") {
    std::mt19937_64 rng(8);
    for (int trial = 0; trial < 100; ++trial) {
        auto tr = random_trace(rng);
        const double c = 0.25 + (rng() % 1000) / 250.0;
        VadSegments scaled = tr.v;
        for (auto& s : scaled.segments) {
            s.start_s *= c;
            s.end_s *= c;
        }
        const auto a = acoustic_features(tr.v, tr.syllables);
        const auto b = acoustic_features(scaled, tr.syllables);
        CHECK(b.n_pauses == a.n_pauses);
        CHECK(b.pause_occurrence_rate == doctest::Approx(a.pause_occurrence_rate));
        CHECK(b.total_pause_dur == doctest::Approx(c * a.total_pause_dur));
        CHECK(b.total_utterance_dur == doctest::Approx(c * a.total_utterance_dur));
        CHECK(b.avg_utterance_dur == doctest::Approx(c * a.avg_utterance_dur));
        CHECK(b.articulation_rate == doctest::Approx(a.articulation_rate / c));
        CHECK(b.speaking_rate == doctest::Approx(a.speaking_rate / c));
        CHECK(b.pause_frequency == doctest::Approx(a.pause_frequency / c));
        CHECK(b.normalized_pause_dur == doctest::Approx(c * c * a.normalized_pause_dur));
    }
}

TEST_CASE("syllable estimates") {
    CHECK(estimate_syllables(tokenize_whitespace("the boy, ran home."), Language::english) == 4);
    CHECK(estimate_syllables(tokenize_whitespace("佢跌低咗。"), Language::cantonese) == 4);
}
