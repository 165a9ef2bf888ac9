#pragma once

#include <stdexcept>
#include <string>

namespace vsn {

enum class Errc {
    MalformedRecord,
    DuplicateId,
    UnresolvablePath,
    EmptyTranscript,
    BadMagic,
    VersionMismatch,
    ShapeMismatch,
    NonFiniteValue,
    ZeroSyllables,
    NoSegments,
    InvalidArgument,
    DimensionMismatch,
    EmptyVocabulary,
    InsufficientDocuments,
    OddDimension,
    NonFiniteActivation,
    Divergence,
    SingleClass,
    NonConvergence,
    TooManyFeaturesForExact,
    DegenerateProbability,
    SingleClassLabels,
    ZeroVariance,
    TooFewEpochs,
    RankDeficient,
    MissingArtifact,
    ConfigMismatch,
    Io,
    Locked,
};

const char* to_string(Errc code) noexcept;

/// Library-wide exception. Every throw site in vsn raises this type, so
/// callers can branch on `code()` rather than parse messages.
class Error : public std::runtime_error {
public:
    Error(Errc code, const std::string& what)
        : std::runtime_error(std::string(to_string(code)) + ": " + what), code_(code) {}

    Errc code() const noexcept { return code_; }

private:
    Errc code_;
};

// Non-fatal diagnostics (rank-deficient PCA, empty coverage category, ...).
// Routed to stderr unless silenced.
void warn(const std::string& message);
void set_warnings_enabled(bool enabled);

}  // namespace vsn
