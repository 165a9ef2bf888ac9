#include "vsn/error.hpp"

#include <atomic>
#include <iostream>

namespace vsn {

const char* to_string(Errc code) noexcept {
    switch (code) {
        case Errc::MalformedRecord: return "MalformedRecord";
        case Errc::DuplicateId: return "DuplicateId";
        case Errc::UnresolvablePath: return "UnresolvablePath";
        case Errc::EmptyTranscript: return "EmptyTranscript";
        case Errc::BadMagic: return "BadMagic";
        case Errc::VersionMismatch: return "VersionMismatch";
        case Errc::ShapeMismatch: return "ShapeMismatch";
        case Errc::NonFiniteValue: return "NonFiniteValue";
        case Errc::ZeroSyllables: return "ZeroSyllables";
        case Errc::NoSegments: return "NoSegments";
        case Errc::InvalidArgument: return "InvalidArgument";
        case Errc::DimensionMismatch: return "DimensionMismatch";
        case Errc::EmptyVocabulary: return "EmptyVocabulary";
        case Errc::InsufficientDocuments: return "InsufficientDocuments";
        case Errc::OddDimension: return "OddDimension";
        case Errc::NonFiniteActivation: return "NonFiniteActivation";
        case Errc::Divergence: return "Divergence";
        case Errc::SingleClass: return "SingleClass";
        case Errc::NonConvergence: return "NonConvergence";
        case Errc::TooManyFeaturesForExact: return "TooManyFeaturesForExact";
        case Errc::DegenerateProbability: return "DegenerateProbability";
        case Errc::SingleClassLabels: return "SingleClassLabels";
        case Errc::ZeroVariance: return "ZeroVariance";
        case Errc::TooFewEpochs: return "TooFewEpochs";
        case Errc::RankDeficient: return "RankDeficient";
        case Errc::MissingArtifact: return "MissingArtifact";
        case Errc::ConfigMismatch: return "ConfigMismatch";
        case Errc::Io: return "Io";
        case Errc::Locked: return "Locked";
    }
    return "Unknown";
}

namespace {
std::atomic<bool> g_warnings{true};
}

void warn(const std::string& message) {
    if (g_warnings.load(std::memory_order_relaxed)) std::cerr << "[vsn warning] " << message << '\n';
}

void set_warnings_enabled(bool enabled) { g_warnings.store(enabled, std::memory_order_relaxed); }

}  // namespace vsn
