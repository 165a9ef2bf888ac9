#include "vsn/pipeline.hpp"

#include <fcntl.h>
#include <unistd.h>

#include <algorithm>
#include <cmath>
#include <fstream>
#include <map>
#include <optional>
#include <set>

#include <fmt/format.h>

#include "binary_io.hpp"
#include "vsn/acoustic.hpp"
#include "vsn/corpus.hpp"
#include "vsn/csv.hpp"
#include "vsn/error.hpp"
#include "vsn/eval.hpp"
#include "vsn/explain.hpp"
#include "vsn/linguistic.hpp"
#include "vsn/refmetrics.hpp"
#include "vsn/shallow.hpp"

namespace vsn::pipeline {

using Eigen::Index;
using Eigen::MatrixXd;
using Eigen::VectorXd;
using json = nlohmann::json;
using shallow::FeatureMatrix;

namespace {

const std::set<std::string> kPathKeys = {"manifest", "lexicon_dir", "tag_set", "visual_lexicon", "categories",
                                         "references"};
const std::set<std::string> kPrefixes = {"coverage.", "dtm.", "titan.", "svm.", "pca.", "grid.", "explain.", "eval."};

fs::path features_dir(const RunConfig& c) { return c.out / "features"; }
fs::path sys_features(const RunConfig& c, int s) { return features_dir(c) / fmt::format("features_sys{}.csv", s); }

void need(const fs::path& p, const std::string& hint) {
    if (!fs::exists(p)) throw Error(Errc::MissingArtifact, p.string() + " not found; " + hint);
}

void require_system(const RunConfig& c, bool ok, const char* what) {
    if (!ok) throw Error(Errc::InvalidArgument, fmt::format("{} does not apply to system {}", what, c.system));
}

void check_hash(const json& prov, const RunConfig& c, const fs::path& what) {
    const std::string h = prov.value("config_hash", "");
    if (h != c.hash())
        throw Error(Errc::ConfigMismatch, fmt::format("{} was produced under config {} but the current config is {}",
                                                      what.string(), h.empty() ? "<none>" : h, c.hash()));
}

json read_json(const fs::path& p) {
    try {
        return json::parse(detail::slurp(p));
    } catch (const json::exception& e) {
        throw Error(Errc::MalformedRecord, p.string() + ": " + e.what());
    }
}

std::vector<ParticipantRecord> load_records(const RunConfig& c) {
    auto recs = load_manifest(c.path("manifest"));
    if (recs.empty()) throw Error(Errc::InvalidArgument, "manifest lists no participants");
    return recs;
}

// Tags are case-sensitive identifiers, so the lowercasing word-list reader
// is not used for them.
std::set<std::string> read_tags(const fs::path& p) {
    std::set<std::string> out;
    std::ifstream in(p);
    if (!in) throw Error(Errc::UnresolvablePath, "tag set " + p.string());
    std::string line;
    while (std::getline(in, line)) {
        if (auto h = line.find('#'); h != std::string::npos) line.resize(h);
        while (!line.empty() && std::isspace(static_cast<unsigned char>(line.back()))) line.pop_back();
        std::size_t b = 0;
        while (b < line.size() && std::isspace(static_cast<unsigned char>(line[b]))) ++b;
        if (b < line.size()) out.insert(line.substr(b));
    }
    return out;
}

struct Failure {
    std::string id, stage, message;
};

void write_failures(const std::vector<Failure>& f, const fs::path& path) {
    csv::Table t{{"id", "stage", "error"}, {}};
    for (const auto& x : f) t.rows.push_back({x.id, x.stage, x.message});
    csv::write(t, path);
}

FeatureMatrix make_matrix(const std::vector<std::string>& columns) {
    FeatureMatrix m;
    m.columns = columns;
    m.X.resize(0, static_cast<Index>(columns.size()));
    return m;
}

template <std::size_t N>
void append_row(FeatureMatrix& m, const std::string& id, const std::array<double, N>& v) {
    m.ids.push_back(id);
    m.X.conservativeResize(m.X.rows() + 1, Eigen::NoChange);
    for (std::size_t i = 0; i < N; ++i) m.X(m.X.rows() - 1, static_cast<Index>(i)) = v[i];
}

template <std::size_t N>
std::vector<std::string> name_list(const std::array<std::string_view, N>& names, const std::string& prefix = "") {
    std::vector<std::string> out;
    for (auto n : names) out.push_back(prefix + std::string(n));
    return out;
}

refmetrics::ReferenceSet load_references(const fs::path& p) {
    std::ifstream in(p);
    if (!in) throw Error(Errc::UnresolvablePath, "references " + p.string());
    refmetrics::ReferenceSet refs;
    std::string line;
    while (std::getline(in, line)) {
        auto words = transcript_words(tokenize_whitespace(line));
        if (!words.empty()) refs.references.push_back(std::move(words));
    }
    if (refs.references.empty()) throw Error(Errc::InvalidArgument, p.string() + " holds no reference narrative");
    return refs;
}

void write_labels(const std::vector<ParticipantRecord>& recs, const fs::path& path) {
    csv::Table t{{"id", "label", "split", "binary"}, {}};
    for (const auto& r : recs)
        t.rows.push_back({r.id, std::to_string(r.label), to_string(r.split), std::to_string(r.binary_label())});
    csv::write(t, path);
}

struct LabelInfo {
    int label = 0;
    Split split = Split::train;
};

std::map<std::string, LabelInfo> read_labels(const RunConfig& c) {
    const fs::path p = features_dir(c) / "labels.csv";
    need(p, "run `extract` first");
    std::map<std::string, LabelInfo> out;
    for (const auto& row : csv::read(p).rows) {
        if (row.size() < 3) throw Error(Errc::MalformedRecord, p.string() + ": short row");
        out[row[0]] = {std::stoi(row[1]), row[2] == "test" ? Split::test : Split::train};
    }
    return out;
}

void write_matrix(const MatrixXd& m, const fs::path& path, const std::string& corner = "row") {
    csv::Table t;
    t.header.push_back(corner);
    for (Index c = 0; c < m.cols(); ++c) t.header.push_back(std::to_string(c));
    for (Index r = 0; r < m.rows(); ++r) {
        csv::Row row{std::to_string(r)};
        for (Index c = 0; c < m.cols(); ++c) row.push_back(csv::num(m(r, c)));
        t.rows.push_back(std::move(row));
    }
    csv::write(t, path);
}

std::map<std::string, double> score(std::span<const double> s, std::span<const int> labels, titan::Task task) {
    std::map<std::string, double> m;
    if (task == titan::Task::classify) {
        std::vector<int> bin;
        for (int l : labels) bin.push_back(eval::binary_label(l));
        const auto cm = eval::classification_metrics(s, bin);
        m = {{"f1", cm.f1}, {"auc", cm.auc}, {"recall", cm.recall}, {"precision", cm.precision},
             {"accuracy", cm.accuracy}};
    } else {
        std::vector<double> y;
        for (int l : labels) y.push_back(eval::normalize_label(l));
        const auto rm = eval::regression_metrics(s, y);
        m = {{"r2", rm.r2}, {"rmse", rm.rmse}};
    }
    return m;
}

void write_provenance(const RunConfig& c, const fs::path& path, json extra = json::object()) {
    json p = c.provenance();
    for (auto& [k, v] : extra.items()) p[k] = v;
    detail::spit(path, p.dump(2) + "\n");
}

// --- shared by extract and train-dtm --------------------------------------

struct SlicedCorpus {
    std::vector<ParticipantRecord> records;
    std::vector<SlicedTranscript> docs;  // aligned with records
};

SlicedCorpus slice_all(const RunConfig& c, const std::vector<ParticipantRecord>& recs, std::vector<Failure>& fails) {
    const auto tags = c.has("tag_set") ? std::optional(read_tags(c.path("tag_set"))) : std::nullopt;
    const std::size_t T = c.get<std::size_t>("dtm.T", 15);
    SlicedCorpus out;
    for (const auto& r : recs) {
        try {
            const auto t = read_transcript(r.transcript_path, tags ? &*tags : nullptr);
            out.docs.push_back(slice_transcript(t, T));
            out.records.push_back(r);
        } catch (const Error& e) {
            fails.push_back({r.id, "dtm", e.what()});
        }
    }
    return out;
}

void train_dtm(const RunConfig& c, std::vector<Failure>& fails) {
    const auto recs = load_records(c);
    const SlicedCorpus sc = slice_all(c, recs, fails);
    const std::string fit_on = c.get<std::string>("dtm.fit_on", "all");
    if (fit_on != "all" && fit_on != "train")
        throw Error(Errc::InvalidArgument, "dtm.fit_on must be \"all\" or \"train\"");
    std::vector<SlicedTranscript> fit_docs;
    for (std::size_t i = 0; i < sc.docs.size(); ++i)
        if (fit_on == "all" || sc.records[i].split == Split::train) fit_docs.push_back(sc.docs[i]);

    const dtm::DtmConfig dc = c.dtm_config();
    const dtm::TopicModelState state = dtm::fit_dtm(fit_docs, dc);
    fs::create_directories(c.out / "dtm");
    dtm::save_model(state, c.out / "dtm" / "model.nmt", c.provenance());

    std::set<std::string> cycle;
    for (const auto& w : c.get<std::vector<std::string>>("dtm.cycle_lexicon", {"home"})) cycle.insert(text::to_lower(w));

    csv::Table traj;
    traj.header = {"id", "t"};
    for (std::size_t k = 0; k < state.K(); ++k) traj.header.push_back(fmt::format("topic_{}", k));
    FeatureMatrix stats = make_matrix(name_list(dtm::DtmStatistics::names()));
    for (std::size_t i = 0; i < sc.docs.size(); ++i) {
        const auto& id = sc.records[i].id;
        try {
            const auto tr = dtm::infer_trajectory(state, sc.docs[i]);
            const auto st = dtm::dtm_statistics(state, sc.docs[i], tr, cycle);
            for (Index t = 0; t < tr.theta.rows(); ++t) {
                csv::Row row{id, std::to_string(t)};
                for (Index k = 0; k < tr.theta.cols(); ++k) row.push_back(csv::num(tr.theta(t, k)));
                traj.rows.push_back(std::move(row));
            }
            append_row(stats, id, st.values());
        } catch (const Error& e) {
            fails.push_back({id, "dtm", e.what()});
        }
    }
    csv::write(traj, c.out / "dtm" / "trajectories.csv");

    csv::Table top{{"topic", "t", "rank", "word"}, {}};
    for (std::size_t k = 0; k < state.K(); ++k)
        for (std::size_t t = 0; t < state.T(); ++t) {
            const auto words = dtm::top_words(state, k, t, 10);
            for (std::size_t r = 0; r < words.size(); ++r)
                top.rows.push_back({std::to_string(k), std::to_string(t), std::to_string(r + 1), words[r]});
        }
    csv::write(top, c.out / "dtm" / "top_words.csv");

    fs::create_directories(features_dir(c));
    stats.write_csv(features_dir(c) / "dtm.csv");
}

FeatureMatrix read_family(const RunConfig& c, const std::string& family) {
    const fs::path p = features_dir(c) / (family + ".csv");
    need(p, family == "dtm" ? "run `train-dtm` or `extract` for a system that uses topic statistics"
                            : "run `extract` first");
    return FeatureMatrix::read_csv(p);
}

struct Dataset {
    FeatureMatrix X;
    std::vector<int> labels;
    std::vector<std::size_t> train, test;
};

Dataset load_dataset(const RunConfig& c) {
    const fs::path p = sys_features(c, c.system);
    need(p, fmt::format("run `extract --system {}` first", c.system));
    check_hash(read_json(features_dir(c) / "provenance.json"), c, p);
    Dataset d;
    d.X = FeatureMatrix::read_csv(p);
    const auto labels = read_labels(c);
    for (std::size_t i = 0; i < d.X.rows(); ++i) {
        auto it = labels.find(d.X.ids[i]);
        if (it == labels.end()) throw Error(Errc::MalformedRecord, "no label for " + d.X.ids[i]);
        d.labels.push_back(it->second.label);
        (it->second.split == Split::test ? d.test : d.train).push_back(i);
    }
    if (d.train.empty() || d.test.empty()) throw Error(Errc::InvalidArgument, "need both train and test rows");
    return d;
}

fs::path svm_path(const RunConfig& c) { return c.out / "models" / fmt::format("svm_sys{}.nmt", c.system); }
fs::path titan_path(const RunConfig& c) { return c.out / "models" / "titan.nmt"; }

titan::Task svm_task(const RunConfig& c) { return titan::parse_task(c.get<std::string>("svm.task", "classify")); }

struct EmbeddedCorpus {
    std::vector<ParticipantRecord> records;
    std::vector<EmbeddingSequence> seqs;
};

EmbeddedCorpus load_embeddings(const RunConfig& c, std::vector<Failure>* fails) {
    EmbeddedCorpus ec;
    for (const auto& r : load_records(c)) {
        try {
            if (r.text_emb_path.empty()) throw Error(Errc::MissingArtifact, "manifest gives no text_emb file");
            auto s = read_embeddings(r.text_emb_path);
            if (!ec.seqs.empty() && (s.H() != ec.seqs[0].H() || s.J() != ec.seqs[0].J()))
                throw Error(Errc::DimensionMismatch, "embedding width or image count differs from the first participant");
            ec.seqs.push_back(std::move(s));
            ec.records.push_back(r);
        } catch (const Error& e) {
            if (!fails) throw;
            fails->push_back({r.id, "embeddings", e.what()});
        }
    }
    if (ec.seqs.empty()) throw Error(Errc::MissingArtifact, "no participant has readable embeddings");
    return ec;
}

double target_of(const ParticipantRecord& r, titan::Task task) {
    return task == titan::Task::classify ? r.binary_label() : r.normalized_label();
}

double positive_score(const titan::ForwardTrace& tr, titan::Task task) {
    return task == titan::Task::classify ? tr.y_hat(1) : tr.y_hat(0);
}

// Mean over group members of image x text matrices with the text axis
// resampled to `width` columns.
MatrixXd group_mean(const std::vector<MatrixXd>& ms, Index rows, std::size_t width) {
    MatrixXd acc = MatrixXd::Zero(rows, static_cast<Index>(width));
    if (ms.empty()) return acc;
    for (const auto& m : ms) acc += resample_cols(m, width);
    return acc / static_cast<double>(ms.size());
}

}  // namespace

// --- systems ------------------------------------------------------------

const SystemSpec& system_spec(int system) {
    static const std::vector<SystemSpec> specs = {
        {1, "Acoustics (10)", {"acoustic"}, 10},
        {2, "Linguistics (13)", {"linguistic"}, 13},
        {3, "Acoustics+Linguistics (23)", {"acoustic", "linguistic"}, 23},
        {4, "Reference-based (16)", {"reference"}, 16},
        {5, "Topic statistics (6)", {"dtm"}, 6},
        {6, "Reference+Topic (22)", {"reference", "dtm"}, 22},
        {7, "All statistics (45)", {"acoustic", "linguistic", "reference", "dtm"}, 45},
        {8, "Text-image sequences", {}, 0},
    };
    if (system < 1 || system > 8) throw Error(Errc::InvalidArgument, fmt::format("system must be 1..8, got {}", system));
    return specs[static_cast<std::size_t>(system - 1)];
}

// --- config -------------------------------------------------------------

RunConfig RunConfig::load(const fs::path& config_path, int system, std::uint64_t seed, const fs::path& out) {
    system_spec(system);
    if (!fs::exists(config_path)) throw Error(Errc::UnresolvablePath, "config " + config_path.string());
    RunConfig c;
    c.config_path = config_path;
    c.base_dir = config_path.parent_path();
    c.values = read_json(config_path);
    if (!c.values.is_object()) throw Error(Errc::MalformedRecord, config_path.string() + ": expected a JSON object");
    for (const auto& [k, v] : c.values.items()) {
        if (v.is_object()) throw Error(Errc::MalformedRecord, "config key '" + k + "' must not nest; use dotted keys");
        const bool known = kPathKeys.count(k) ||
                           std::any_of(kPrefixes.begin(), kPrefixes.end(), [&](const std::string& p) { return k.rfind(p, 0) == 0; });
        if (!known) warn("unknown config key '" + k + "'");
    }
    c.system = system;
    c.seed = seed;
    c.out = out;
    return c;
}

fs::path RunConfig::path(const std::string& key) const {
    if (!values.contains(key) || !values.at(key).is_string())
        throw Error(Errc::MissingArtifact, "config needs a path for '" + key + "'");
    fs::path p = values.at(key).get<std::string>();
    return p.is_absolute() ? p : base_dir / p;
}

std::string RunConfig::hash() const {
    std::uint64_t h = 0xcbf29ce484222325ULL;
    auto mix = [&](std::string_view s) {
        for (unsigned char ch : s) {
            h ^= ch;
            h *= 0x100000001b3ULL;
        }
    };
    mix(values.dump());
    mix("|seed=" + std::to_string(seed));
    return fmt::format("{:016x}", h);
}

json RunConfig::provenance() const { return {{"config_hash", hash()}, {"seed", seed}, {"config", values}}; }

dtm::DtmConfig RunConfig::dtm_config() const {
    dtm::DtmConfig d;
    d.K = get("dtm.K", d.K);
    d.T = get("dtm.T", d.T);
    d.alpha = get("dtm.alpha", d.alpha);
    d.sigma2 = get("dtm.sigma2", d.sigma2);
    d.obs_var = get("dtm.obs_var", d.obs_var);
    d.init_var = get("dtm.init_var", d.init_var);
    d.vocab_min_count = get("dtm.vocab_min_count", d.vocab_min_count);
    d.max_em_iters = get("dtm.max_em_iters", d.max_em_iters);
    d.elbo_tol = get("dtm.elbo_tol", d.elbo_tol);
    d.estep_max_iters = get("dtm.estep_max_iters", d.estep_max_iters);
    d.mstep_iters = get("dtm.mstep_iters", d.mstep_iters);
    d.restarts = get("dtm.restarts", d.restarts);
    d.restart_iters = get("dtm.restart_iters", d.restart_iters);
    d.seed = seed;
    d.validate();
    return d;
}

titan::TitanConfig RunConfig::titan_config(std::size_t H) const {
    titan::TitanConfig t;
    t.H = H;
    t.H_prime = get("titan.H_prime", t.H_prime);
    t.task = titan::parse_task(get<std::string>("titan.task", "classify"));
    t.C = t.task == titan::Task::classify ? 2 : 1;
    t.epochs = get("titan.epochs", t.epochs);
    t.lr = get("titan.lr", t.lr);
    t.weight_decay = get("titan.weight_decay", t.weight_decay);
    t.batch_size = get("titan.batch_size", t.batch_size);
    t.use_rope = get("titan.use_rope", t.use_rope);
    t.image_base = get("titan.image_base", t.image_base);
    t.text_base = get("titan.text_base", t.text_base);
    t.keep_last = get("titan.keep_last", t.keep_last);
    t.seed = seed;
    t.validate();
    return t;
}

// --- lock ---------------------------------------------------------------

OutputLock::OutputLock(const fs::path& out) : path_(out / ".lock") {
    fs::create_directories(out);
    const int fd = ::open(path_.c_str(), O_CREAT | O_EXCL | O_WRONLY, 0644);
    if (fd < 0)
        throw Error(Errc::Locked, path_.string() + " exists; another run owns this directory (delete the file if it is stale)");
    const std::string pid = std::to_string(::getpid()) + "\n";
    [[maybe_unused]] auto n = ::write(fd, pid.data(), pid.size());
    ::close(fd);
}

OutputLock::~OutputLock() {
    std::error_code ec;
    fs::remove(path_, ec);
}

// --- commands -----------------------------------------------------------

ExtractSummary cmd_extract(const RunConfig& c) {
    const auto recs = load_records(c);
    const auto tags = c.has("tag_set") ? std::optional(read_tags(c.path("tag_set"))) : std::nullopt;
    const auto lex = linguistic::Lexicons::load_dir(c.path("lexicon_dir"));
    refmetrics::VisualLexicon vl;
    vl.ranked_words = refmetrics::read_visual_lexicon(c.path("visual_lexicon"));
    vl.categories = refmetrics::read_categories(c.path("categories"));
    const auto refs = load_references(c.path("references"));
    const std::size_t top_k = c.get<std::size_t>("coverage.top_k", 50);

    FeatureMatrix ac = make_matrix(name_list(acoustic::AcousticFeatures::names()));
    FeatureMatrix li = make_matrix(name_list(linguistic::LinguisticFeatures::names()));
    auto ref_cols = name_list(refmetrics::CoverageFeatures::names());
    for (auto& n : name_list(refmetrics::TextMetrics::names())) ref_cols.push_back(n);
    FeatureMatrix rf = make_matrix(ref_cols);

    std::vector<Failure> fails;
    for (const auto& r : recs) {
        TokenizedTranscript t;
        try {
            t = read_transcript(r.transcript_path, tags ? &*tags : nullptr);
        } catch (const Error& e) {
            fails.push_back({r.id, "transcript", e.what()});
            continue;
        }
        try {
            if (r.vad_path.empty()) throw Error(Errc::MissingArtifact, "manifest gives no vad file");
            const int syl = r.syllable_count ? *r.syllable_count : acoustic::estimate_syllables(t, r.language);
            append_row(ac, r.id, acoustic::acoustic_features(read_vad(r.vad_path), syl).values());
        } catch (const Error& e) {
            fails.push_back({r.id, "acoustic", e.what()});
        }
        try {
            append_row(li, r.id, linguistic::linguistic_features(t, lex).values());
        } catch (const Error& e) {
            fails.push_back({r.id, "linguistic", e.what()});
        }
        try {
            const auto cov = refmetrics::coverage_features(t, vl, top_k);
            const auto tm = refmetrics::text_metrics(transcript_words(t), refs);
            std::array<double, 16> v{};
            std::copy(cov.values.begin(), cov.values.end(), v.begin());
            std::copy(tm.values.begin(), tm.values.end(), v.begin() + 10);
            append_row(rf, r.id, v);
        } catch (const Error& e) {
            fails.push_back({r.id, "reference", e.what()});
        }
    }

    fs::create_directories(features_dir(c));
    ac.write_csv(features_dir(c) / "acoustic.csv");
    li.write_csv(features_dir(c) / "linguistic.csv");
    rf.write_csv(features_dir(c) / "reference.csv");
    write_labels(recs, features_dir(c) / "labels.csv");

    const SystemSpec& spec = system_spec(c.system);
    const bool wants_dtm = std::find(spec.families.begin(), spec.families.end(), "dtm") != spec.families.end();
    if (wants_dtm) train_dtm(c, fails);
    write_failures(fails, features_dir(c) / "extract_errors.csv");
    write_provenance(c, features_dir(c) / "provenance.json");

    ExtractSummary s;
    s.participants = recs.size();
    s.failures = fails.size();
    if (!spec.families.empty()) {
        std::vector<FeatureMatrix> parts;
        for (const auto& f : spec.families) parts.push_back(read_family(c, f));
        const FeatureMatrix joined = shallow::join_columns(parts);
        if (joined.columns.size() != spec.n_features)
            throw Error(Errc::ShapeMismatch, fmt::format("system {} expects {} features, assembled {}", c.system,
                                                         spec.n_features, joined.columns.size()));
        joined.write_csv(sys_features(c, c.system));
        s.columns = joined.columns.size();
    }
    for (const auto& f : fails) warn(fmt::format("{} [{}]: {}", f.id, f.stage, f.message));
    return s;
}

void cmd_train_dtm(const RunConfig& c) {
    std::vector<Failure> fails;
    train_dtm(c, fails);
    write_failures(fails, c.out / "dtm" / "errors.csv");
    for (const auto& f : fails) warn(fmt::format("{} [{}]: {}", f.id, f.stage, f.message));
}

void cmd_train_svm(const RunConfig& c) {
    require_system(c, c.system <= 7, "train-svm");
    const Dataset d = load_dataset(c);
    const FeatureMatrix train = d.X.select_rows(d.train);
    std::vector<int> bin;
    for (std::size_t i : d.train) bin.push_back(eval::binary_label(d.labels[i]));

    const std::size_t D = d.X.columns.size();
    auto clip = [&](std::size_t n) { return std::max<std::size_t>(1, std::min(n, D)); };
    std::vector<shallow::GridCell> grid;
    const auto Cs = c.get<std::vector<double>>("grid.C", {c.get("svm.C", 1.0)});
    const auto kernels = c.get<std::vector<std::string>>("grid.kernel", {c.get<std::string>("svm.kernel", "rbf")});
    const auto comps = c.get<std::vector<std::size_t>>("grid.n_components", {c.get<std::size_t>("pca.n_components", 5)});
    for (const auto& k : kernels) {
        if (k != "rbf" && k != "linear") throw Error(Errc::InvalidArgument, "kernel must be rbf or linear, got " + k);
        for (double C : Cs)
            for (std::size_t n : comps) {
                shallow::GridCell g{k == "rbf" ? shallow::KernelType::rbf : shallow::KernelType::linear, C, clip(n)};
                const bool dup = std::any_of(grid.begin(), grid.end(), [&](const shallow::GridCell& o) {
                    return o.kernel == g.kernel && o.C == g.C && o.n_components == g.n_components;
                });
                if (!dup) grid.push_back(g);
            }
    }
    shallow::GridCell best = grid.front();
    json cv = json::array();
    if (grid.size() > 1) {
        const auto res = shallow::grid_search(train, bin, grid, c.get<std::size_t>("grid.folds", 5), c.seed);
        best = res.best;
        for (std::size_t g = 0; g < grid.size(); ++g)
            cv.push_back({{"kernel", grid[g].kernel == shallow::KernelType::rbf ? "rbf" : "linear"},
                          {"C", grid[g].C},
                          {"n_components", grid[g].n_components},
                          {"f1", std::isnan(res.cell_f1[g]) ? json(nullptr) : json(res.cell_f1[g])}});
    }

    shallow::PipelineParams pp;
    pp.n_components = best.n_components;
    pp.svm.C = best.C;
    pp.svm.kernel.type = best.kernel;
    pp.svm.kernel.gamma = c.get("svm.gamma", 0.0);
    pp.svm.epsilon = c.get("svm.epsilon", pp.svm.epsilon);
    const titan::Task task = svm_task(c);
    std::vector<double> y;
    if (task == titan::Task::classify) {
        pp.variant = shallow::SvmVariant::classifier;
        for (int b : bin) y.push_back(b);
    } else {
        pp.variant = shallow::SvmVariant::epsilon_regressor;
        for (std::size_t i : d.train) y.push_back(eval::normalize_label(d.labels[i]));
    }
    const auto model = shallow::ShallowModel::fit(train, y, pp);
    json prov = c.provenance();
    prov["system"] = c.system;
    prov["task"] = titan::to_string(task);
    prov["grid"] = cv;
    fs::create_directories(c.out / "models");
    shallow::save_model(model, svm_path(c), prov);
}

void cmd_train_titan(const RunConfig& c) {
    require_system(c, c.system == 8, "train-titan");
    std::vector<Failure> fails;
    const EmbeddedCorpus ec = load_embeddings(c, &fails);
    for (const auto& f : fails) warn(fmt::format("{} [{}]: {}", f.id, f.stage, f.message));
    const titan::TitanConfig tc = c.titan_config(ec.seqs[0].H());

    std::vector<titan::Sample> train;
    std::vector<std::size_t> test;
    std::vector<int> test_labels;
    for (std::size_t i = 0; i < ec.records.size(); ++i) {
        if (ec.records[i].split == Split::train) {
            train.push_back({&ec.seqs[i], target_of(ec.records[i], tc.task)});
        } else {
            test.push_back(i);
            test_labels.push_back(ec.records[i].label);
        }
    }
    if (train.empty() || test.empty()) throw Error(Errc::InvalidArgument, "need both train and test participants");

    auto on_epoch = [&](std::size_t, const titan::TitanParameters& p) -> json {
        std::vector<double> s;
        for (std::size_t i : test) s.push_back(positive_score(titan::forward(p, ec.seqs[i], tc), tc.task));
        return score(s, test_labels, tc.task);
    };
    const auto result = titan::train(train, tc, on_epoch);
    fs::create_directories(c.out / "models");
    json prov = c.provenance();
    prov["system"] = 8;
    titan::save_checkpoint(result, tc, titan_path(c), prov);

    std::string log;
    for (const auto& e : result.log)
        log += json{{"epoch", e.epoch}, {"train_loss", e.train_loss}, {"metrics", e.metrics}}.dump() + "\n";
    detail::spit(c.out / "models" / "titan_epochs.jsonl", log);
    write_failures(fails, c.out / "models" / "titan_errors.csv");
}

void cmd_eval(const RunConfig& c) {
    const SystemSpec& spec = system_spec(c.system);
    eval::ReportRow row;
    row.system = c.system;
    row.features = spec.description;
    eval::Provenance prov{c.seed, c.hash(), 1};
    csv::Table preds{{"id", "label", "score"}, {}};

    if (c.system <= 7) {
        need(svm_path(c), fmt::format("run `train-svm --system {}` first", c.system));
        json mp;
        const auto model = shallow::load_model(svm_path(c), &mp);
        check_hash(mp, c, svm_path(c));
        const Dataset d = load_dataset(c);
        const FeatureMatrix test = d.X.select_rows(d.test);
        const auto s = model.predict(test.X);
        std::vector<int> labels;
        for (std::size_t i = 0; i < d.test.size(); ++i) {
            labels.push_back(d.labels[d.test[i]]);
            preds.rows.push_back({test.ids[i], std::to_string(labels.back()), csv::num(s[i])});
        }
        row.model = "SVM";
        row.metrics = score(s, labels, titan::parse_task(mp.value("task", "classify")));
    } else {
        need(titan_path(c), "run `train-titan --system 8` first");
        titan::TitanConfig tc;
        json mp;
        const auto result = titan::load_checkpoint(titan_path(c), &tc, &mp);
        check_hash(mp, c, titan_path(c));
        eval::MetricLog log;
        for (const auto& e : result.log) {
            std::map<std::string, double> m;
            for (auto& [k, v] : e.metrics.items()) m[k] = v.get<double>();
            log.push_back(std::move(m));
        }
        const std::size_t window = c.get<std::size_t>("eval.epoch_window", 5);
        row.metrics = eval::epoch_average(log, window);
        prov.epoch_window = window;
        row.model = "TITAN";
        const EmbeddedCorpus ec = load_embeddings(c, nullptr);
        for (std::size_t i = 0; i < ec.records.size(); ++i)
            if (ec.records[i].split == Split::test) {
                const double s = positive_score(titan::forward(result.params, ec.seqs[i], tc), tc.task);
                preds.rows.push_back({ec.records[i].id, std::to_string(ec.records[i].label), csv::num(s)});
            }
    }
    fs::create_directories(c.out / "eval");
    eval::write_report_csv({row}, prov, c.out / "eval" / fmt::format("report_sys{}.csv", c.system));
    detail::spit(c.out / "eval" / fmt::format("report_sys{}.txt", c.system), eval::format_report({row}, prov));
    csv::write(preds, c.out / "eval" / fmt::format("predictions_sys{}.csv", c.system));
}

void cmd_explain(const RunConfig& c) {
    require_system(c, c.system <= 7, "explain");
    need(svm_path(c), fmt::format("run `train-svm --system {}` first", c.system));
    json mp;
    const auto model = shallow::load_model(svm_path(c), &mp);
    check_hash(mp, c, svm_path(c));
    if (mp.value("task", "classify") != "classify")
        throw Error(Errc::InvalidArgument, "explanations need a classifier (svm.task = classify)");
    const Dataset d = load_dataset(c);

    // Attributions are computed on imputed rows so every feature has a value.
    auto impute = [&](MatrixXd X) {
        for (Index r = 0; r < X.rows(); ++r)
            for (Index j = 0; j < X.cols(); ++j)
                if (!std::isfinite(X(r, j))) X(r, j) = model.standardizer.median(j);
        return X;
    };
    const MatrixXd background = impute(d.X.select_rows(d.train).X);
    const FeatureMatrix test = d.X.select_rows(d.test);
    const MatrixXd Xt = impute(test.X);
    explain::ModelFn f = [&](const VectorXd& x) { return model.predict(MatrixXd(x.transpose()))[0]; };
    explain::ShapOptions opt;
    opt.n_samples = c.get<std::size_t>("explain.n_samples", opt.n_samples);
    opt.exact_limit = c.get<std::size_t>("explain.exact_limit", opt.exact_limit);
    opt.seed = c.seed;
    std::vector<explain::ShapResult> res;
    for (Index r = 0; r < Xt.rows(); ++r) res.push_back(explain::shap_values(f, Xt.row(r).transpose(), background, opt));

    std::vector<int> bin;
    for (int l : d.labels) bin.push_back(eval::binary_label(l));
    const auto corr = explain::spearman_rank(d.X, bin);

    fs::create_directories(c.out / "explain");
    explain::write_shap_csv(test.ids, d.X.columns, res, c.out / "explain" / fmt::format("shap_sys{}.csv", c.system));
    explain::write_shap_summary_csv(d.X.columns, res, c.out / "explain" / fmt::format("shap_summary_sys{}.csv", c.system));
    explain::write_correlation_csv(corr, c.out / "explain" / fmt::format("spearman_sys{}.csv", c.system));
}

void cmd_plotdata(const RunConfig& c) {
    fs::create_directories(c.out / "plot");
    const fs::path plot = c.out / "plot";
    std::map<std::string, LabelInfo> labels;
    for (const auto& r : load_records(c)) labels[r.id] = {r.label, r.split};
    auto group_of = [&](const std::string& id) -> int {  // -1 outside the test split
        auto it = labels.find(id);
        if (it == labels.end() || it->second.split != Split::test) return -1;
        return it->second.label >= 2 ? 1 : 0;
    };
    static const std::array<const char*, 2> kGroup = {"hc", "ncd"};

    if (c.system != 8) {
        // Topic-evolution curves: per-slice mean and std of topic proportions.
        const fs::path model = c.out / "dtm" / "model.nmt";
        const fs::path tp = c.out / "dtm" / "trajectories.csv";
        need(model, "run `train-dtm` first");
        need(tp, "run `train-dtm` first");
        json mp;
        const auto state = dtm::load_model(model, &mp);
        check_hash(mp, c, model);
        const Index T = static_cast<Index>(state.T()), K = static_cast<Index>(state.K());
        std::map<std::string, MatrixXd> traj;
        for (const auto& row : csv::read(tp).rows) {
            auto& m = traj.try_emplace(row.at(0), MatrixXd::Zero(T, K)).first->second;
            const Index t = std::stoi(row.at(1));
            for (Index k = 0; k < K; ++k) m(t, k) = std::stod(row.at(static_cast<std::size_t>(2 + k)));
        }
        for (int g = 0; g < 2; ++g) {
            std::vector<const MatrixXd*> members;
            for (const auto& [id, m] : traj)
                if (group_of(id) == g) members.push_back(&m);
            MatrixXd mean = MatrixXd::Zero(T, K), sd = MatrixXd::Zero(T, K);
            if (!members.empty()) {
                for (auto* m : members) mean += *m;
                mean /= static_cast<double>(members.size());
                for (auto* m : members) sd += (*m - mean).cwiseAbs2();
                sd = (sd / static_cast<double>(members.size())).cwiseSqrt();
            } else {
                warn(fmt::format("no {} participants in the test split", kGroup[g]));
            }
            write_matrix(mean, plot / fmt::format("topics_{}_mean.csv", kGroup[g]), "t");
            write_matrix(sd, plot / fmt::format("topics_{}_std.csv", kGroup[g]), "t");
        }
        return;
    }

    // Text-image correlation and attention maps, image rows x text columns,
    // the text axis resampled to the image count.
    need(titan_path(c), "run `train-titan --system 8` first");
    titan::TitanConfig tc;
    json mp;
    const auto result = titan::load_checkpoint(titan_path(c), &tc, &mp);
    check_hash(mp, c, titan_path(c));
    const EmbeddedCorpus ec = load_embeddings(c, nullptr);
    const Index J = static_cast<Index>(ec.seqs[0].J());
    std::array<std::vector<MatrixXd>, 2> corr, attn;
    for (std::size_t i = 0; i < ec.records.size(); ++i) {
        const int g = group_of(ec.records[i].id);
        if (g < 0) continue;
        const auto& s = ec.seqs[i];
        std::vector<Index> valid;
        for (Index k = 0; k < static_cast<Index>(s.K()); ++k)
            if (s.mask[static_cast<std::size_t>(J + k)]) valid.push_back(k);
        if (valid.empty()) continue;
        const MatrixXd cm = titan::crossmodal_corr(s);                              // J x K
        const MatrixXd am = titan::attention_map(titan::forward(result.params, s, tc)).transpose();  // J x K
        MatrixXd cv(J, static_cast<Index>(valid.size())), av(J, static_cast<Index>(valid.size()));
        for (std::size_t v = 0; v < valid.size(); ++v) {
            cv.col(static_cast<Index>(v)) = cm.col(valid[v]);
            av.col(static_cast<Index>(v)) = am.col(valid[v]);
        }
        corr[static_cast<std::size_t>(g)].push_back(std::move(cv));
        attn[static_cast<std::size_t>(g)].push_back(std::move(av));
    }
    for (auto [name, maps] : {std::pair{"crossmodal", &corr}, std::pair{"attention", &attn}}) {
        const MatrixXd hc = group_mean((*maps)[0], J, static_cast<std::size_t>(J));
        const MatrixXd ncd = group_mean((*maps)[1], J, static_cast<std::size_t>(J));
        write_matrix(hc, plot / fmt::format("{}_hc.csv", name), "image");
        write_matrix(ncd, plot / fmt::format("{}_ncd.csv", name), "image");
        write_matrix(hc - ncd, plot / fmt::format("{}_diff.csv", name), "image");
    }
}

void run(const std::string& command, const RunConfig& cfg) {
    OutputLock lock(cfg.out);
    if (command == "extract") {
        cmd_extract(cfg);
    } else if (command == "train-dtm") {
        cmd_train_dtm(cfg);
    } else if (command == "train-titan") {
        cmd_train_titan(cfg);
    } else if (command == "train-svm") {
        cmd_train_svm(cfg);
    } else if (command == "eval") {
        cmd_eval(cfg);
    } else if (command == "explain") {
        cmd_explain(cfg);
    } else if (command == "plotdata") {
        cmd_plotdata(cfg);
    } else {
        throw Error(Errc::InvalidArgument, "unknown command '" + command + "'");
    }
}

MatrixXd resample_cols(const MatrixXd& m, std::size_t n) {
    if (n == 0 || m.cols() == 0) throw Error(Errc::InvalidArgument, "resample_cols: empty input or target");
    const Index src = m.cols();
    MatrixXd out(m.rows(), static_cast<Index>(n));
    for (Index c = 0; c < out.cols(); ++c) {
        double pos = (static_cast<double>(c) + 0.5) * static_cast<double>(src) / static_cast<double>(n) - 0.5;
        pos = std::clamp(pos, 0.0, static_cast<double>(src - 1));
        const auto lo = static_cast<Index>(std::floor(pos));
        const Index hi = std::min(lo + 1, src - 1);
        const double w = pos - static_cast<double>(lo);
        out.col(c) = (1.0 - w) * m.col(lo) + w * m.col(hi);
    }
    return out;
}

}  // namespace vsn::pipeline
