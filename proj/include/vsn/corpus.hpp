#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <optional>
#include <set>
#include <string>
#include <string_view>
#include <vector>

#include <Eigen/Dense>

#include "vsn/text.hpp"

namespace vsn {

enum class Split { train, test };
enum class Language { cantonese, english };

const char* to_string(Split s) noexcept;
const char* to_string(Language l) noexcept;

/// One subject of the study. Labels use the 0..4 severity scale:
/// 0-1 are healthy controls, 2-4 increasingly severe NCD.
struct ParticipantRecord {
    std::string id;
    int label = 0;
    Split split = Split::train;
    Language language = Language::english;
    std::filesystem::path transcript_path;
    std::filesystem::path vad_path;       // empty when not supplied
    std::filesystem::path text_emb_path;  // empty when not supplied
    std::string image_set_id;
    std::optional<int> syllable_count;

    bool is_ncd() const noexcept { return label >= 2; }
    int binary_label() const noexcept { return is_ncd() ? 1 : 0; }
    double normalized_label() const noexcept { return label / 4.0; }
};

struct Token {
    std::string surface;
    std::string pos;
    std::size_t char_start = 0;  // code-point offset into raw_text
};

struct TokenizedTranscript {
    std::string raw_text;
    std::vector<Token> tokens;
};

struct Segment {
    double start_s = 0.0;
    double end_s = 0.0;
    double duration() const noexcept { return end_s - start_s; }
};

struct VadSegments {
    std::vector<Segment> segments;
};

/// Image rows (J x H) followed by text rows (K x H) in a shared space.
/// mask[i] == 1 marks a valid row; images come first in the mask.
struct EmbeddingSequence {
    Eigen::MatrixXf image;
    Eigen::MatrixXf text;
    std::vector<std::uint8_t> mask;

    std::size_t H() const noexcept { return static_cast<std::size_t>(image.cols()); }
    std::size_t J() const noexcept { return static_cast<std::size_t>(image.rows()); }
    std::size_t K() const noexcept { return static_cast<std::size_t>(text.rows()); }
};

struct SlicedTranscript {
    std::vector<std::string> slices;        // T raw-text pieces
    std::vector<std::size_t> boundaries;    // T+1 code-point offsets
    std::vector<std::vector<std::string>> words;  // lowercased words per slice

    std::size_t T() const noexcept { return slices.size(); }
    bool is_empty(std::size_t t) const { return words.at(t).empty(); }
};

// --- manifest -----------------------------------------------------------

/// Reads the line-delimited manifest. Relative resource paths resolve
/// against the manifest's directory.
std::vector<ParticipantRecord> load_manifest(const std::filesystem::path& path);
void write_manifest(const std::vector<ParticipantRecord>& records,
                    const std::filesystem::path& path);

// --- transcripts and VAD ------------------------------------------------

TokenizedTranscript read_transcript(const std::filesystem::path& path,
                                    const std::set<std::string>* tag_set = nullptr);
void write_transcript(const TokenizedTranscript& t, const std::filesystem::path& path);
void validate_transcript(const TokenizedTranscript& t,
                         const std::set<std::string>* tag_set = nullptr);

/// Builds a transcript by splitting on whitespace and separating
/// trailing punctuation into its own token tagged "PUNCT".
TokenizedTranscript tokenize_whitespace(std::string_view raw_text);

VadSegments read_vad(const std::filesystem::path& path);
void write_vad(const VadSegments& v, const std::filesystem::path& path);
void validate_vad(const VadSegments& v);

// --- slicing ------------------------------------------------------------

/// Splits raw_text into `T` pieces. Arithmetic cuts round(i*L/T) are shifted
/// to the nearest punctuation character inside the cut's own window (half
/// way to each neighbouring cut); equidistant candidates resolve to the later
/// position. Words are assigned to slices by token start offset.
SlicedTranscript slice_transcript(const TokenizedTranscript& t, std::size_t T = 15,
                                  std::u32string_view punctuation = text::kDefaultSlicePunctuation);

/// Lowercased non-punctuation surfaces in order.
std::vector<std::string> transcript_words(const TokenizedTranscript& t);

// --- embeddings ---------------------------------------------------------

inline constexpr std::uint16_t kEmbeddingVersion = 1;

void validate_embeddings(const EmbeddingSequence& seq);
EmbeddingSequence read_embeddings(const std::filesystem::path& path);
void write_embeddings(const EmbeddingSequence& seq, const std::filesystem::path& path);
EmbeddingSequence decode_embeddings(std::string_view bytes);
std::string encode_embeddings(const EmbeddingSequence& seq);

}  // namespace vsn
