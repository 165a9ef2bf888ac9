#include "vsn/corpus.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <unordered_set>

#include <json.hpp>

#include "binary_io.hpp"
#include "vsn/error.hpp"

namespace vsn {

namespace fs = std::filesystem;
using nlohmann::json;

const char* to_string(Split s) noexcept { return s == Split::train ? "train" : "test"; }
const char* to_string(Language l) noexcept { return l == Language::cantonese ? "cantonese" : "english"; }

namespace {

[[noreturn]] void malformed(std::size_t line, const std::string& why) {
    throw Error(Errc::MalformedRecord, "line " + std::to_string(line) + ": " + why);
}

fs::path resolve(const fs::path& base, const std::string& p) {
    if (p.empty()) return {};
    fs::path q(p);
    return q.is_absolute() ? q : base / q;
}

std::string require_string(const json& obj, const char* key, std::size_t line) {
    if (!obj.contains(key)) malformed(line, std::string("missing key '") + key + "'");
    if (!obj[key].is_string()) malformed(line, std::string("key '") + key + "' must be a string");
    return obj[key].get<std::string>();
}

std::string optional_string(const json& obj, const char* key, std::size_t line) {
    if (!obj.contains(key) || obj[key].is_null()) return {};
    if (!obj[key].is_string()) malformed(line, std::string("key '") + key + "' must be a string");
    return obj[key].get<std::string>();
}

}  // namespace

std::vector<ParticipantRecord> load_manifest(const fs::path& path) {
    std::ifstream in(path);
    if (!in) throw Error(Errc::UnresolvablePath, "manifest not found: " + path.string());
    const fs::path base = path.has_parent_path() ? path.parent_path() : fs::path(".");
    static const std::unordered_set<std::string> known = {
        "id", "label", "split", "language", "transcript", "vad", "text_emb", "image_set", "syllables"};

    std::vector<ParticipantRecord> records;
    std::unordered_set<std::string> seen;
    std::string line;
    std::size_t line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
        json obj;
        try {
            obj = json::parse(line);
        } catch (const json::parse_error& e) {
            malformed(line_no, e.what());
        }
        if (!obj.is_object()) malformed(line_no, "record must be a key:value object");
        for (const auto& [k, _] : obj.items())
            if (!known.count(k)) malformed(line_no, "unknown key '" + k + "'");

        ParticipantRecord r;
        r.id = require_string(obj, "id", line_no);
        if (r.id.empty()) malformed(line_no, "empty id");
        if (!obj.contains("label") || !obj["label"].is_number_integer()) malformed(line_no, "label must be an integer");
        r.label = obj["label"].get<int>();
        if (r.label < 0 || r.label > 4) malformed(line_no, "label " + std::to_string(r.label) + " outside 0..4");

        const std::string split = require_string(obj, "split", line_no);
        if (split == "train") r.split = Split::train;
        else if (split == "test") r.split = Split::test;
        else malformed(line_no, "split must be train|test");

        const std::string lang = require_string(obj, "language", line_no);
        if (lang == "cantonese") r.language = Language::cantonese;
        else if (lang == "english") r.language = Language::english;
        else malformed(line_no, "language must be cantonese|english");

        r.transcript_path = resolve(base, require_string(obj, "transcript", line_no));
        r.vad_path = resolve(base, optional_string(obj, "vad", line_no));
        r.text_emb_path = resolve(base, optional_string(obj, "text_emb", line_no));
        r.image_set_id = optional_string(obj, "image_set", line_no);
        if (obj.contains("syllables") && !obj["syllables"].is_null()) {
            if (!obj["syllables"].is_number_integer() || obj["syllables"].get<long long>() <= 0)
                malformed(line_no, "syllables must be a positive integer");
            r.syllable_count = obj["syllables"].get<int>();
        }

        for (const fs::path* p : {&r.transcript_path, &r.vad_path, &r.text_emb_path})
            if (!p->empty() && !fs::exists(*p))
                throw Error(Errc::UnresolvablePath, "line " + std::to_string(line_no) + ": " + p->string());

        if (!seen.insert(r.id).second)
            throw Error(Errc::DuplicateId, "line " + std::to_string(line_no) + ": " + r.id);
        records.push_back(std::move(r));
    }
    return records;
}

void write_manifest(const std::vector<ParticipantRecord>& records, const fs::path& path) {
    const fs::path base = path.has_parent_path() ? path.parent_path() : fs::path(".");
    auto rel = [&](const fs::path& p) -> std::string {
        if (p.empty()) return {};
        return p.is_absolute() ? p.lexically_relative(fs::absolute(base)).generic_string()
                               : p.lexically_relative(base).generic_string();
    };
    std::string out;
    for (const auto& r : records) {
        json obj;
        obj["id"] = r.id;
        obj["label"] = r.label;
        obj["split"] = to_string(r.split);
        obj["language"] = to_string(r.language);
        obj["transcript"] = rel(r.transcript_path);
        if (!r.vad_path.empty()) obj["vad"] = rel(r.vad_path);
        if (!r.text_emb_path.empty()) obj["text_emb"] = rel(r.text_emb_path);
        if (!r.image_set_id.empty()) obj["image_set"] = r.image_set_id;
        if (r.syllable_count) obj["syllables"] = *r.syllable_count;
        out += obj.dump();
        out += '\n';
    }
    detail::spit(path, out);
}

// --- transcripts --------------------------------------------------------

void validate_transcript(const TokenizedTranscript& t, const std::set<std::string>* tag_set) {
    const std::size_t length = text::utf8_decode(t.raw_text).size();
    for (std::size_t i = 0; i < t.tokens.size(); ++i) {
        const Token& tok = t.tokens[i];
        if (i > 0 && tok.char_start <= t.tokens[i - 1].char_start)
            throw Error(Errc::MalformedRecord, "token " + std::to_string(i) + ": char_start not strictly increasing");
        if (tok.char_start >= length && length > 0)
            throw Error(Errc::MalformedRecord, "token " + std::to_string(i) + ": char_start beyond text");
        if (tag_set && !tag_set->count(tok.pos))
            throw Error(Errc::MalformedRecord, "token " + std::to_string(i) + ": unknown PoS tag '" + tok.pos + "'");
    }
}

TokenizedTranscript read_transcript(const fs::path& path, const std::set<std::string>* tag_set) {
    json doc;
    try {
        doc = json::parse(detail::slurp(path));
    } catch (const json::parse_error& e) {
        throw Error(Errc::MalformedRecord, path.string() + ": " + e.what());
    }
    if (!doc.is_object() || !doc.contains("raw_text") || !doc["raw_text"].is_string() || !doc.contains("tokens") ||
        !doc["tokens"].is_array())
        throw Error(Errc::MalformedRecord, path.string() + ": expected {raw_text, tokens}");
    TokenizedTranscript t;
    t.raw_text = doc["raw_text"].get<std::string>();
    for (const auto& tok : doc["tokens"]) {
        if (!tok.is_object() || !tok.contains("surface") || !tok.contains("pos") || !tok.contains("start"))
            throw Error(Errc::MalformedRecord, path.string() + ": token needs surface/pos/start");
        t.tokens.push_back({tok["surface"].get<std::string>(), tok["pos"].get<std::string>(),
                            tok["start"].get<std::size_t>()});
    }
    validate_transcript(t, tag_set);
    return t;
}

void write_transcript(const TokenizedTranscript& t, const fs::path& path) {
    json doc;
    doc["raw_text"] = t.raw_text;
    doc["tokens"] = json::array();
    for (const auto& tok : t.tokens)
        doc["tokens"].push_back({{"surface", tok.surface}, {"pos", tok.pos}, {"start", tok.char_start}});
    detail::spit(path, doc.dump(1) + "\n");
}

TokenizedTranscript tokenize_whitespace(std::string_view raw_text) {
    TokenizedTranscript t;
    t.raw_text = std::string(raw_text);
    const std::u32string cps = text::utf8_decode(raw_text);
    std::size_t i = 0;
    while (i < cps.size()) {
        if (text::is_space(cps[i])) {
            ++i;
            continue;
        }
        std::size_t j = i;
        while (j < cps.size() && !text::is_space(cps[j])) ++j;
        // Peel trailing punctuation into separate tokens.
        std::size_t word_end = j;
        while (word_end > i && text::kTokenPunctuation.find(cps[word_end - 1]) != std::u32string_view::npos)
            --word_end;
        if (word_end > i)
            t.tokens.push_back({text::utf8_encode(std::u32string_view(cps).substr(i, word_end - i)), "X", i});
        for (std::size_t p = word_end; p < j; ++p)
            t.tokens.push_back({text::utf8_encode(std::u32string_view(cps).substr(p, 1)), "PUNCT", p});
        i = j;
    }
    return t;
}

std::vector<std::string> transcript_words(const TokenizedTranscript& t) {
    std::vector<std::string> words;
    words.reserve(t.tokens.size());
    for (const auto& tok : t.tokens)
        if (!text::is_punctuation_token(tok.surface)) words.push_back(text::to_lower(tok.surface));
    return words;
}

// --- VAD ----------------------------------------------------------------

void validate_vad(const VadSegments& v) {
    for (std::size_t i = 0; i < v.segments.size(); ++i) {
        const Segment& s = v.segments[i];
        if (!std::isfinite(s.start_s) || !std::isfinite(s.end_s))
            throw Error(Errc::NonFiniteValue, "segment " + std::to_string(i));
        if (s.start_s < 0.0 || s.start_s >= s.end_s)
            throw Error(Errc::MalformedRecord, "segment " + std::to_string(i) + ": need 0 <= start < end");
        if (i > 0 && s.start_s < v.segments[i - 1].end_s)
            throw Error(Errc::MalformedRecord, "segment " + std::to_string(i) + ": overlaps or out of order");
    }
}

VadSegments read_vad(const fs::path& path) {
    json doc;
    try {
        doc = json::parse(detail::slurp(path));
    } catch (const json::parse_error& e) {
        throw Error(Errc::MalformedRecord, path.string() + ": " + e.what());
    }
    if (!doc.is_array()) throw Error(Errc::MalformedRecord, path.string() + ": expected [[start,end],...]");
    VadSegments v;
    for (const auto& pair : doc) {
        if (!pair.is_array() || pair.size() != 2 || !pair[0].is_number() || !pair[1].is_number())
            throw Error(Errc::MalformedRecord, path.string() + ": each segment is [start_s, end_s]");
        v.segments.push_back({pair[0].get<double>(), pair[1].get<double>()});
    }
    validate_vad(v);
    return v;
}

void write_vad(const VadSegments& v, const fs::path& path) {
    json doc = json::array();
    for (const auto& s : v.segments) doc.push_back({s.start_s, s.end_s});
    detail::spit(path, doc.dump() + "\n");
}

// --- slicing ------------------------------------------------------------

SlicedTranscript slice_transcript(const TokenizedTranscript& t, std::size_t T, std::u32string_view punctuation) {
    if (T == 0) throw Error(Errc::InvalidArgument, "slice count must be positive");
    const std::u32string cps = text::utf8_decode(t.raw_text);
    const std::size_t L = cps.size();
    if (L == 0) throw Error(Errc::EmptyTranscript, "raw_text is empty");

    std::vector<std::size_t> cuts(T + 1);
    for (std::size_t i = 0; i <= T; ++i) cuts[i] = (2 * i * L + T) / (2 * T);  // round(i*L/T), half up

    std::vector<std::size_t> punct_pos;
    for (std::size_t p = 0; p < L; ++p)
        if (punctuation.find(cps[p]) != std::u32string_view::npos) punct_pos.push_back(p);

    std::vector<std::size_t> bounds = cuts;
    for (std::size_t i = 1; i < T; ++i) {
        // Window (lo, hi]: half way to the neighbouring arithmetic cuts.
        const double lo = 0.5 * static_cast<double>(cuts[i - 1] + cuts[i]);
        const double hi = 0.5 * static_cast<double>(cuts[i] + cuts[i + 1]);
        std::size_t best = cuts[i];
        std::size_t best_dist = static_cast<std::size_t>(-1);
        for (std::size_t p : punct_pos) {
            const auto pd = static_cast<double>(p);
            if (pd <= lo || pd > hi || p == 0 || p >= L) continue;
            const std::size_t d = p > cuts[i] ? p - cuts[i] : cuts[i] - p;
            if (d <= best_dist) {  // later candidate wins ties
                best = p;
                best_dist = d;
            }
        }
        bounds[i] = best;
    }
    std::sort(bounds.begin(), bounds.end());

    SlicedTranscript out;
    out.boundaries = bounds;
    out.slices.reserve(T);
    for (std::size_t i = 0; i < T; ++i)
        out.slices.push_back(text::utf8_encode(std::u32string_view(cps).substr(bounds[i], bounds[i + 1] - bounds[i])));
    out.words.assign(T, {});
    for (const auto& tok : t.tokens) {
        if (text::is_punctuation_token(tok.surface)) continue;
        auto it = std::upper_bound(bounds.begin() + 1, bounds.end() - 1, tok.char_start);
        const auto slice = static_cast<std::size_t>(it - (bounds.begin() + 1));
        out.words[std::min(slice, T - 1)].push_back(text::to_lower(tok.surface));
    }
    return out;
}

// --- embeddings ---------------------------------------------------------

void validate_embeddings(const EmbeddingSequence& seq) {
    if (seq.J() < 1 || seq.K() < 1 || seq.H() < 1)
        throw Error(Errc::ShapeMismatch, "need J >= 1, K >= 1, H >= 1");
    if (static_cast<std::size_t>(seq.text.cols()) != seq.H())
        throw Error(Errc::ShapeMismatch, "image and text blocks differ in H");
    if (seq.mask.size() != seq.J() + seq.K()) throw Error(Errc::ShapeMismatch, "mask length != J+K");
    for (auto m : seq.mask)
        if (m > 1) throw Error(Errc::MalformedRecord, "mask bytes must be 0 or 1");
    if (!seq.image.allFinite() || !seq.text.allFinite()) throw Error(Errc::NonFiniteValue, "embedding payload");
}

std::string encode_embeddings(const EmbeddingSequence& seq) {
    validate_embeddings(seq);
    std::string out = "NME1";
    detail::put_le<std::uint16_t>(out, kEmbeddingVersion);
    detail::put_le<std::uint32_t>(out, static_cast<std::uint32_t>(seq.H()));
    detail::put_le<std::uint32_t>(out, static_cast<std::uint32_t>(seq.J()));
    detail::put_le<std::uint32_t>(out, static_cast<std::uint32_t>(seq.K()));
    for (const Eigen::MatrixXf* block : {&seq.image, &seq.text})
        for (Eigen::Index r = 0; r < block->rows(); ++r)
            for (Eigen::Index c = 0; c < block->cols(); ++c) detail::put_f32(out, (*block)(r, c));
    for (auto m : seq.mask) out.push_back(static_cast<char>(m));
    return out;
}

EmbeddingSequence decode_embeddings(std::string_view bytes) {
    if (bytes.size() < 4 || bytes.substr(0, 4) != "NME1") throw Error(Errc::BadMagic, "not an NME1 embedding file");
    detail::Reader rd(bytes.substr(4));
    const auto version = rd.le<std::uint16_t>();
    if (version != kEmbeddingVersion)
        throw Error(Errc::VersionMismatch, "version " + std::to_string(version));
    const auto H = rd.le<std::uint32_t>();
    const auto J = rd.le<std::uint32_t>();
    const auto K = rd.le<std::uint32_t>();
    const std::uint64_t expect = 4ull * (std::uint64_t(J) + K) * H + J + K;
    if (rd.remaining() != expect)
        throw Error(Errc::ShapeMismatch, "payload is " + std::to_string(rd.remaining()) + " bytes, header implies " +
                                             std::to_string(expect));
    EmbeddingSequence seq;
    seq.image.resize(J, H);
    seq.text.resize(K, H);
    for (Eigen::MatrixXf* block : {&seq.image, &seq.text})
        for (Eigen::Index r = 0; r < block->rows(); ++r)
            for (Eigen::Index c = 0; c < block->cols(); ++c) (*block)(r, c) = rd.f32();
    const auto mask = rd.take(J + K);
    seq.mask.assign(mask.begin(), mask.end());
    validate_embeddings(seq);
    return seq;
}

EmbeddingSequence read_embeddings(const fs::path& path) { return decode_embeddings(detail::slurp(path)); }

void write_embeddings(const EmbeddingSequence& seq, const fs::path& path) {
    detail::spit(path, encode_embeddings(seq));
}

}  // namespace vsn
