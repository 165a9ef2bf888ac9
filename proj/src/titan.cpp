#include "vsn/titan.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <random>

#include <fmt/format.h>

#include "vsn/ad.hpp"
#include "vsn/container.hpp"
#include "vsn/error.hpp"

namespace vsn::titan {

using Eigen::Index;

const char* to_string(Task t) noexcept { return t == Task::classify ? "classify" : "regress"; }

Task parse_task(const std::string& s) {
    if (s == "classify") return Task::classify;
    if (s == "regress") return Task::regress;
    throw Error(Errc::InvalidArgument, "task must be classify|regress, got '" + s + "'");
}

void TitanConfig::validate() const {
    if (H == 0 || H_prime == 0) throw Error(Errc::InvalidArgument, "H and H_prime must be positive");
    if (H_prime > H) throw Error(Errc::InvalidArgument, "H_prime must not exceed H");
    if (C < 1) throw Error(Errc::InvalidArgument, "C must be >= 1");
    if (task == Task::classify && C < 2) throw Error(Errc::InvalidArgument, "classification needs C >= 2");
    if (task == Task::regress && C != 1) throw Error(Errc::InvalidArgument, "regression needs C == 1");
    if (!(lr >= 0) || !(weight_decay >= 0)) throw Error(Errc::InvalidArgument, "lr and weight_decay must be >= 0");
    if (batch_size == 0) throw Error(Errc::InvalidArgument, "batch_size must be positive");
    if (!(image_base > 0) || !(text_base > 0)) throw Error(Errc::InvalidArgument, "RoPE bases must be positive");
}

nlohmann::json TitanConfig::to_json() const {
    return {{"H", H},
            {"H_prime", H_prime},
            {"C", C},
            {"task", to_string(task)},
            {"epochs", epochs},
            {"lr", lr},
            {"weight_decay", weight_decay},
            {"batch_size", batch_size},
            {"seed", seed},
            {"use_rope", use_rope},
            {"image_base", image_base},
            {"text_base", text_base},
            {"beta1", beta1},
            {"beta2", beta2},
            {"eps", eps},
            {"keep_last", keep_last}};
}

TitanConfig TitanConfig::from_json(const nlohmann::json& j) {
    TitanConfig c;
    c.H = j.at("H");
    c.H_prime = j.at("H_prime");
    c.C = j.at("C");
    c.task = parse_task(j.at("task"));
    c.epochs = j.at("epochs");
    c.lr = j.at("lr");
    c.weight_decay = j.at("weight_decay");
    c.batch_size = j.at("batch_size");
    c.seed = j.at("seed");
    c.use_rope = j.at("use_rope");
    c.image_base = j.at("image_base");
    c.text_base = j.at("text_base");
    c.beta1 = j.at("beta1");
    c.beta2 = j.at("beta2");
    c.eps = j.at("eps");
    c.keep_last = j.at("keep_last");
    return c;
}

const std::array<std::string, TitanParameters::kCount>& TitanParameters::names() {
    static const std::array<std::string, kCount> n = {"W_down", "b_down", "W_Q",  "W_K", "W_V",
                                                      "W_up",   "b_up",   "W_fc", "b_fc"};
    return n;
}

std::array<MatrixXd*, TitanParameters::kCount> TitanParameters::tensors() {
    return {&W_down, &b_down, &W_Q, &W_K, &W_V, &W_up, &b_up, &W_fc, &b_fc};
}

std::array<const MatrixXd*, TitanParameters::kCount> TitanParameters::tensors() const {
    return {&W_down, &b_down, &W_Q, &W_K, &W_V, &W_up, &b_up, &W_fc, &b_fc};
}

TitanParameters TitanParameters::init(const TitanConfig& cfg, std::uint64_t seed) {
    cfg.validate();
    std::mt19937_64 rng(seed);
    auto uniform = [&](Index rows, Index cols, std::size_t fan_in) {
        const double b = 1.0 / std::sqrt(static_cast<double>(fan_in));
        std::uniform_real_distribution<double> u(-b, b);
        MatrixXd m(rows, cols);
        for (Index r = 0; r < rows; ++r)
            for (Index c = 0; c < cols; ++c) m(r, c) = u(rng);
        return m;
    };
    const Index H = static_cast<Index>(cfg.H), Hp = static_cast<Index>(cfg.H_prime), C = static_cast<Index>(cfg.C);
    TitanParameters p;
    p.W_down = uniform(Hp, H, cfg.H);
    p.b_down = uniform(1, Hp, cfg.H);
    p.W_Q = uniform(Hp, Hp, cfg.H_prime);
    p.W_K = uniform(Hp, Hp, cfg.H_prime);
    p.W_V = uniform(Hp, Hp, cfg.H_prime);
    p.W_up = uniform(H, Hp, cfg.H_prime);
    p.b_up = uniform(1, H, cfg.H_prime);
    p.W_fc = uniform(C, H, cfg.H);
    p.b_fc = uniform(1, C, cfg.H);
    return p;
}

TitanParameters TitanParameters::zeros_like(const TitanParameters& p) {
    TitanParameters z;
    auto dst = z.tensors();
    auto src = p.tensors();
    for (std::size_t i = 0; i < kCount; ++i) *dst[i] = MatrixXd::Zero(src[i]->rows(), src[i]->cols());
    return z;
}

namespace {

double base_of(Modality m, const TitanConfig& cfg) { return m == Modality::image ? cfg.image_base : cfg.text_base; }

// Fills one row of the cos/sin tables. The rotated width is the largest even
// number <= cols; a trailing odd column keeps cos 1, sin 0.
void fill_angles(MatrixXd& cos, MatrixXd& sin, Index row, double pos, double base) {
    const Index n = cos.cols();
    cos.row(row).setOnes();
    sin.row(row).setZero();
    for (Index j = 0; 2 * j + 1 < n; ++j) {
        const double omega = std::pow(base, -2.0 * static_cast<double>(j) / static_cast<double>(n));
        const double a = pos * omega;
        cos(row, 2 * j) = cos(row, 2 * j + 1) = std::cos(a);
        sin(row, 2 * j) = sin(row, 2 * j + 1) = std::sin(a);
    }
}

struct Graph {
    std::array<ad::Var, TitanParameters::kCount> params;
    ad::Var X, D, Q, K, V, Qr, Kr, A, Z, R, pooled, logits, out;
    std::size_t J = 0, Kt = 0;
    std::vector<std::uint8_t> mask;
};

Graph build(ad::Tape& tape, const TitanParameters& p, const EmbeddingSequence& seq, const TitanConfig& cfg,
            bool want_grad) {
    if (seq.H() != cfg.H)
        throw Error(Errc::ShapeMismatch, fmt::format("embedding width {} differs from configured H {}", seq.H(), cfg.H));
    const Index J = seq.image.rows(), Kt = seq.text.rows();
    if (static_cast<Index>(seq.mask.size()) != J + Kt) throw Error(Errc::ShapeMismatch, "mask length differs from J+K");

    Graph g;
    g.J = static_cast<std::size_t>(J);
    g.Kt = static_cast<std::size_t>(Kt);
    g.mask = seq.mask;

    MatrixXd X(J + Kt, static_cast<Index>(cfg.H));
    X.topRows(J) = seq.image.cast<double>();
    X.bottomRows(Kt) = seq.text.cast<double>();
    g.X = tape.constant(std::move(X));

    const auto tensors = p.tensors();
    for (std::size_t i = 0; i < TitanParameters::kCount; ++i)
        g.params[i] = want_grad ? tape.input(*tensors[i]) : tape.constant(*tensors[i]);
    const auto& [W_down, b_down, W_Q, W_K, W_V, W_up, b_up, W_fc, b_fc] = g.params;

    g.D = tape.add_row(tape.matmul_t(g.X, W_down), b_down);
    g.Q = tape.matmul_t(g.D, W_Q);
    g.K = tape.matmul_t(g.D, W_K);
    g.V = tape.matmul_t(g.D, W_V);
    if (cfg.use_rope) {
        const Index Hp = static_cast<Index>(cfg.H_prime);
        MatrixXd cos(J + Kt, Hp), sin(J + Kt, Hp);
        for (Index i = 0; i < J; ++i) fill_angles(cos, sin, i, static_cast<double>(i), cfg.image_base);
        for (Index k = 0; k < Kt; ++k) fill_angles(cos, sin, J + k, static_cast<double>(k), cfg.text_base);
        g.Qr = tape.rotate_pairs(g.Q, cos, sin);
        g.Kr = tape.rotate_pairs(g.K, cos, sin);
    } else {
        g.Qr = g.Q;
        g.Kr = g.K;
    }
    const ad::Var S = tape.scale(tape.matmul_t(g.Qr, g.Kr), 1.0 / std::sqrt(static_cast<double>(cfg.H_prime)));
    g.A = tape.softmax_rows(S, g.mask);
    g.Z = tape.add(tape.matmul(g.A, g.V), g.D);
    g.R = tape.add(tape.add_row(tape.matmul_t(g.Z, W_up), b_up), g.X);
    g.pooled = tape.masked_mean_rows(g.R, g.mask);
    g.logits = tape.add_row(tape.matmul_t(g.pooled, W_fc), b_fc);
    g.out = cfg.task == Task::classify ? tape.softmax_row(g.logits) : g.logits;

    if (!tape.value(g.out).allFinite()) throw Error(Errc::NonFiniteActivation, "non-finite network output");
    return g;
}

}  // namespace

MatrixXd rope_encode(const MatrixXd& x, std::span<const std::size_t> positions, Modality modality,
                     const TitanConfig& cfg) {
    if (x.cols() % 2 != 0) throw Error(Errc::OddDimension, fmt::format("rope_encode needs an even width, got {}", x.cols()));
    if (static_cast<Index>(positions.size()) != x.rows())
        throw Error(Errc::ShapeMismatch, "rope_encode: one position per row required");
    MatrixXd cos(x.rows(), x.cols()), sin(x.rows(), x.cols());
    for (Index i = 0; i < x.rows(); ++i)
        fill_angles(cos, sin, i, static_cast<double>(positions[static_cast<std::size_t>(i)]), base_of(modality, cfg));
    ad::Tape tape;
    return tape.value(tape.rotate_pairs(tape.constant(x), cos, sin));
}

ForwardTrace forward(const TitanParameters& p, const EmbeddingSequence& seq, const TitanConfig& cfg) {
    ad::Tape tape;
    const Graph g = build(tape, p, seq, cfg, false);
    ForwardTrace t;
    t.J = g.J;
    t.K = g.Kt;
    t.mask = g.mask;
    t.X = tape.value(g.X);
    t.D = tape.value(g.D);
    t.Q = tape.value(g.Q);
    t.Kx = tape.value(g.K);
    t.V = tape.value(g.V);
    t.Qr = tape.value(g.Qr);
    t.Kr = tape.value(g.Kr);
    t.A = tape.value(g.A);
    t.Z = tape.value(g.Z);
    t.R = tape.value(g.R);
    t.pooled = tape.value(g.pooled).row(0).transpose();
    t.logits = tape.value(g.logits).row(0).transpose();
    t.y_hat = tape.value(g.out).row(0).transpose();
    return t;
}

double loss_and_gradient(const TitanParameters& p, const EmbeddingSequence& seq, double target,
                         const TitanConfig& cfg, TitanParameters* grad) {
    ad::Tape tape;
    const Graph g = build(tape, p, seq, cfg, grad != nullptr);
    ad::Var loss;
    if (cfg.task == Task::classify) {
        const int cls = static_cast<int>(target);
        if (cls < 0 || static_cast<std::size_t>(cls) >= cfg.C || cls != target)
            throw Error(Errc::InvalidArgument, fmt::format("class target {} outside 0..{}", target, cfg.C - 1));
        loss = tape.softmax_cross_entropy(g.logits, cls);
    } else {
        loss = tape.mse(g.out, MatrixXd::Constant(1, 1, target));
    }
    if (grad) {
        tape.backward(loss);
        auto dst = grad->tensors();
        for (std::size_t i = 0; i < TitanParameters::kCount; ++i) *dst[i] = tape.grad(g.params[i]);
    }
    return tape.value(loss)(0, 0);
}

void adamw_step(TitanParameters& p, const TitanParameters& grad, AdamState& s, const TitanConfig& cfg) {
    if (s.step == 0) {
        s.m = TitanParameters::zeros_like(p);
        s.v = TitanParameters::zeros_like(p);
    }
    ++s.step;
    const double bc1 = 1.0 - std::pow(cfg.beta1, static_cast<double>(s.step));
    const double bc2 = 1.0 - std::pow(cfg.beta2, static_cast<double>(s.step));
    auto P = p.tensors();
    auto G = grad.tensors();
    auto M = s.m.tensors();
    auto V = s.v.tensors();
    for (std::size_t i = 0; i < TitanParameters::kCount; ++i) {
        *M[i] = cfg.beta1 * *M[i] + (1.0 - cfg.beta1) * *G[i];
        *V[i] = cfg.beta2 * *V[i] + (1.0 - cfg.beta2) * G[i]->cwiseAbs2();
        *P[i] *= 1.0 - cfg.lr * cfg.weight_decay;
        const MatrixXd mhat = *M[i] / bc1;
        const MatrixXd vhat = *V[i] / bc2;
        *P[i] -= cfg.lr * mhat.cwiseQuotient((vhat.cwiseSqrt().array() + cfg.eps).matrix());
    }
}

TrainResult train(std::span<const Sample> data, const TitanConfig& cfg,
                  const std::function<nlohmann::json(std::size_t, const TitanParameters&)>& on_epoch) {
    cfg.validate();
    if (data.empty()) throw Error(Errc::InvalidArgument, "training set is empty");
    TrainResult out;
    out.params = TitanParameters::init(cfg, cfg.seed);
    AdamState adam;
    std::mt19937_64 rng(cfg.seed ^ 0xA5A5A5A55A5A5A5Aull);
    std::vector<std::size_t> order(data.size());
    std::iota(order.begin(), order.end(), 0);
    TitanParameters grad = TitanParameters::zeros_like(out.params), acc = grad;

    for (std::size_t epoch = 1; epoch <= cfg.epochs; ++epoch) {
        std::shuffle(order.begin(), order.end(), rng);
        double total = 0.0;
        for (std::size_t start = 0; start < order.size(); start += cfg.batch_size) {
            const std::size_t stop = std::min(order.size(), start + cfg.batch_size);
            for (auto* t : acc.tensors()) t->setZero();
            for (std::size_t i = start; i < stop; ++i) {
                const Sample& s = data[order[i]];
                const double l = loss_and_gradient(out.params, *s.seq, s.target, cfg, &grad);
                if (!std::isfinite(l))
                    throw Error(Errc::Divergence, fmt::format("non-finite loss at epoch {}, sample {}", epoch, order[i]));
                total += l;
                auto A = acc.tensors();
                auto G = grad.tensors();
                for (std::size_t k = 0; k < TitanParameters::kCount; ++k) *A[k] += *G[k];
            }
            const double inv = 1.0 / static_cast<double>(stop - start);
            for (auto* t : acc.tensors()) *t *= inv;
            adamw_step(out.params, acc, adam, cfg);
        }
        EpochRecord rec;
        rec.epoch = epoch;
        rec.train_loss = total / static_cast<double>(data.size());
        if (on_epoch) rec.metrics = on_epoch(epoch, out.params);
        out.log.push_back(std::move(rec));
        if (epoch + cfg.keep_last > cfg.epochs) out.snapshots.push_back(out.params);
    }
    return out;
}

MatrixXd attention_map(const ForwardTrace& trace) {
    const Index J = static_cast<Index>(trace.J), K = static_cast<Index>(trace.K);
    return trace.A.block(J, 0, K, J);
}

MatrixXd crossmodal_corr(const EmbeddingSequence& seq) {
    if (seq.image.cols() != seq.text.cols()) throw Error(Errc::ShapeMismatch, "image and text widths differ");
    const MatrixXd I = seq.image.cast<double>(), T = seq.text.cast<double>();
    MatrixXd out(I.rows(), T.rows());
    for (Index j = 0; j < I.rows(); ++j)
        for (Index k = 0; k < T.rows(); ++k) {
            const double d = I.row(j).norm() * T.row(k).norm();
            out(j, k) = d > 0 ? I.row(j).dot(T.row(k)) / d : 0.0;
        }
    return out;
}

void save_checkpoint(const TrainResult& result, const TitanConfig& cfg, const std::filesystem::path& path,
                     const nlohmann::json& provenance) {
    TensorArchive ar;
    nlohmann::json log = nlohmann::json::array();
    for (const auto& r : result.log)
        log.push_back({{"epoch", r.epoch}, {"train_loss", r.train_loss}, {"metrics", r.metrics}});
    ar.header = {{"kind", "titan"},
                 {"config", cfg.to_json()},
                 {"snapshots", result.snapshots.size()},
                 {"log", log},
                 {"provenance", provenance}};
    auto put = [&](const std::string& prefix, const TitanParameters& p) {
        const auto t = p.tensors();
        for (std::size_t i = 0; i < TitanParameters::kCount; ++i)
            ar.tensors[prefix + TitanParameters::names()[i]] = Tensor::from(*t[i], DType::f32);
    };
    put("final/", result.params);
    for (std::size_t s = 0; s < result.snapshots.size(); ++s) put(fmt::format("snap{}/", s), result.snapshots[s]);
    ar.save(path);
}

TrainResult load_checkpoint(const std::filesystem::path& path, TitanConfig* cfg, nlohmann::json* provenance) {
    const TensorArchive ar = TensorArchive::load(path);
    if (ar.header.value("kind", "") != "titan") throw Error(Errc::ShapeMismatch, path.string() + " is not a TITAN checkpoint");
    if (cfg) *cfg = TitanConfig::from_json(ar.header.at("config"));
    if (provenance) *provenance = ar.header.value("provenance", nlohmann::json::object());
    auto get = [&](const std::string& prefix) {
        TitanParameters p;
        auto t = p.tensors();
        for (std::size_t i = 0; i < TitanParameters::kCount; ++i)
            *t[i] = ar.at(prefix + TitanParameters::names()[i]).matrix();
        return p;
    };
    TrainResult r;
    r.params = get("final/");
    const std::size_t n = ar.header.at("snapshots");
    for (std::size_t s = 0; s < n; ++s) r.snapshots.push_back(get(fmt::format("snap{}/", s)));
    for (const auto& e : ar.header.at("log")) {
        EpochRecord rec;
        rec.epoch = e.at("epoch");
        rec.train_loss = e.at("train_loss");
        rec.metrics = e.at("metrics");
        r.log.push_back(std::move(rec));
    }
    return r;
}

}  // namespace vsn::titan
