#include "vsn/dtm.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <numeric>
#include <random>

#include "vsn/container.hpp"
#include "vsn/error.hpp"

namespace vsn::dtm {

using Eigen::Index;
using Eigen::MatrixXd;
using Eigen::VectorXd;

namespace {
constexpr double kLog2Pi = 1.8378770664093454836;
}

double digamma(double x) {
    double r = 0.0;
    while (x < 10.0) {
        r -= 1.0 / x;
        x += 1.0;
    }
    const double f = 1.0 / (x * x);
    return r + std::log(x) - 0.5 / x -
           f * (1.0 / 12 - f * (1.0 / 120 - f * (1.0 / 252 - f * (1.0 / 240 - f / 132))));
}

void DtmConfig::validate() const {
    if (K < 1) throw Error(Errc::InvalidArgument, "K must be >= 1");
    if (T < 2) throw Error(Errc::InvalidArgument, "T must be >= 2");
    if (!(alpha > 0)) throw Error(Errc::InvalidArgument, "alpha must be > 0");
    if (!(sigma2 > 0)) throw Error(Errc::InvalidArgument, "sigma2 must be > 0");
    if (!(obs_var > 0) || !(init_var > 0)) throw Error(Errc::InvalidArgument, "obs_var and init_var must be > 0");
    if (restarts < 1) throw Error(Errc::InvalidArgument, "restarts must be >= 1");
}

ChainPosterior smooth_chain(const MatrixXd& obs, const VectorXd& precision, double sigma2, double init_var) {
    const Index T = precision.size();
    if (T == 0 || obs.rows() != T) throw Error(Errc::ShapeMismatch, "smooth_chain: observation rows != T");
    const Index C = obs.cols();
    VectorXd P(T), F(T);
    MatrixXd a(T, C), m(T, C);
    for (Index t = 0; t < T; ++t) {
        if (t == 0) {
            P(t) = init_var;
            a.row(t).setZero();
        } else {
            P(t) = F(t - 1) + sigma2;
            a.row(t) = m.row(t - 1);
        }
        const double lam = precision(t);
        if (lam > 0) {
            const double gain = P(t) * lam / (1.0 + P(t) * lam);
            m.row(t) = a.row(t) + gain * (obs.row(t) - a.row(t));
            F(t) = P(t) / (1.0 + P(t) * lam);
        } else {
            m.row(t) = a.row(t);
            F(t) = P(t);
        }
    }

    ChainPosterior out;
    out.mean.resize(T, C);
    out.variance.resize(T);
    out.lag_cov.resize(std::max<Index>(T - 1, 0));
    out.mean.row(T - 1) = m.row(T - 1);
    out.variance(T - 1) = F(T - 1);
    out.log_det = std::log(F(T - 1));
    for (Index t = T - 2; t >= 0; --t) {
        const double J = F(t) / P(t + 1);
        out.mean.row(t) = m.row(t) + J * (out.mean.row(t + 1) - a.row(t + 1));
        out.variance(t) = F(t) + J * J * (out.variance(t + 1) - P(t + 1));
        out.lag_cov(t) = J * out.variance(t + 1);
        // conditional variance of beta_t given beta_t+1 under the posterior
        out.log_det += std::log(F(t) * sigma2 / P(t + 1));
    }
    return out;
}

VectorXd TopicModelState::word_distribution(std::size_t k, std::size_t t) const {
    const VectorXd row = beta.at(k).row(static_cast<Index>(t)).transpose();
    const VectorXd e = (row.array() - row.maxCoeff()).exp();
    return e / e.sum();
}

namespace {

struct SliceDoc {
    std::vector<int> ids;
    std::vector<double> counts;
    double total = 0.0;
};

struct DocState {
    VectorXd gamma;
    MatrixXd phi;  // unique words x K
};

SliceDoc make_slice_doc(const std::vector<std::string>& words, const Vocabulary& vocab) {
    std::map<int, double> c;
    for (const auto& w : words)
        if (int id = vocab.find(w); id >= 0) c[id] += 1.0;
    SliceDoc d;
    for (auto [id, n] : c) {
        d.ids.push_back(id);
        d.counts.push_back(n);
        d.total += n;
    }
    return d;
}

DocState init_doc_state(const SliceDoc& d, std::size_t K, double alpha) {
    DocState s;
    s.gamma = VectorXd::Constant(static_cast<Index>(K), alpha + d.total / static_cast<double>(K));
    s.phi = MatrixXd::Constant(static_cast<Index>(d.ids.size()), static_cast<Index>(K), 1.0 / static_cast<double>(K));
    return s;
}

// E[log beta_{k,t,w}] lower bound, one K x V matrix per slice.
std::vector<MatrixXd> expected_log_beta(const std::vector<MatrixXd>& m, const VectorXd& variance) {
    const Index K = static_cast<Index>(m.size());
    const Index T = m[0].rows(), V = m[0].cols();
    std::vector<MatrixXd> out(static_cast<std::size_t>(T), MatrixXd(K, V));
    for (Index k = 0; k < K; ++k)
        for (Index t = 0; t < T; ++t) {
            const auto row = m[static_cast<std::size_t>(k)].row(t);
            const double mx = row.maxCoeff();
            const double lse = mx + std::log((row.array() - mx).exp().sum()) + 0.5 * variance(t);
            out[static_cast<std::size_t>(t)].row(k) = row.array() - lse;
        }
    return out;
}

void update_document(const SliceDoc& d, DocState& s, const MatrixXd& logb, double alpha, std::size_t max_iters,
                     double tol) {
    const Index K = s.gamma.size();
    const Index N = static_cast<Index>(d.ids.size());
    VectorXd dig(K), l(K), next(K);
    for (std::size_t it = 0; it < max_iters; ++it) {
        for (Index k = 0; k < K; ++k) dig(k) = digamma(s.gamma(k));
        next.setConstant(alpha);
        for (Index n = 0; n < N; ++n) {
            l = dig + logb.col(d.ids[static_cast<std::size_t>(n)]);
            const double mx = l.maxCoeff();
            l = (l.array() - mx).exp();
            l /= l.sum();
            s.phi.row(n) = l.transpose();
            next += d.counts[static_cast<std::size_t>(n)] * l;
        }
        const double change = (next - s.gamma).cwiseAbs().mean();
        s.gamma = next;
        if (change < tol) break;
    }
}

long double document_elbo(const SliceDoc& d, const DocState& s, const MatrixXd& logb, double alpha) {
    const Index K = s.gamma.size();
    const double gsum = s.gamma.sum();
    const double dsum = digamma(gsum);
    VectorXd elog(K);
    for (Index k = 0; k < K; ++k) elog(k) = digamma(s.gamma(k)) - dsum;

    long double e = std::lgamma(alpha * static_cast<double>(K)) - static_cast<double>(K) * std::lgamma(alpha);
    e -= std::lgamma(gsum);
    for (Index k = 0; k < K; ++k) {
        e += (alpha - 1.0) * elog(k);
        e += std::lgamma(s.gamma(k)) - (s.gamma(k) - 1.0) * elog(k);
    }
    for (Index n = 0; n < static_cast<Index>(d.ids.size()); ++n) {
        const double c = d.counts[static_cast<std::size_t>(n)];
        const int w = d.ids[static_cast<std::size_t>(n)];
        for (Index k = 0; k < K; ++k) {
            const double p = s.phi(n, k);
            if (p <= 0) continue;
            e += c * p * (elog(k) + logb(k, w) - std::log(p));
        }
    }
    return e;
}

class Fitter {
public:
    Fitter(const DtmConfig& cfg, std::vector<std::vector<SliceDoc>> docs, std::size_t V)
        : cfg_(cfg), docs_(std::move(docs)), K_(cfg.K), T_(cfg.T), V_(V) {
        const VectorXd prec = VectorXd::Constant(static_cast<Index>(T_), 1.0 / cfg.obs_var);
        chain_ = smooth_chain(MatrixXd::Zero(static_cast<Index>(T_), 1), prec, cfg.sigma2, cfg.init_var);
        const auto& v = chain_.variance;
        // Per-chain part of E log p(beta) + H(q) that does not depend on the means.
        long double c = -0.5 * (kLog2Pi + std::log(cfg.init_var)) - v(0) / (2 * cfg.init_var);
        for (std::size_t t = 1; t < T_; ++t) {
            const Index ti = static_cast<Index>(t);
            c += -0.5 * (kLog2Pi + std::log(cfg.sigma2)) -
                 (v(ti) + v(ti - 1) - 2 * chain_.lag_cov(ti - 1)) / (2 * cfg.sigma2);
        }
        c += 0.5 * (static_cast<double>(T_) * (kLog2Pi + 1.0) + chain_.log_det);
        chain_const_ = c * static_cast<long double>(K_ * V_);
    }

    void initialise(std::uint64_t seed) {
        std::mt19937_64 rng(seed);
        std::uniform_real_distribution<double> unif(0.0, 1.0);
        VectorXd freq = VectorXd::Constant(static_cast<Index>(V_), 1.0);
        std::vector<std::pair<std::size_t, std::size_t>> nonempty;
        for (std::size_t d = 0; d < docs_.size(); ++d)
            for (std::size_t t = 0; t < T_; ++t) {
                const auto& sd = docs_[d][t];
                for (std::size_t n = 0; n < sd.ids.size(); ++n) freq(sd.ids[n]) += sd.counts[n];
                if (sd.total > 0) nonempty.emplace_back(d, t);
            }
        freq /= freq.sum();
        // Each topic starts from the pooled counts of a few random slice
        // documents, blended with the corpus frequency.
        const std::size_t seeds = std::max<std::size_t>(1, std::min<std::size_t>(nonempty.size() / K_, 10));
        std::uniform_int_distribution<std::size_t> pick(0, nonempty.size() - 1);
        m_.assign(K_, MatrixXd(static_cast<Index>(T_), static_cast<Index>(V_)));
        for (std::size_t k = 0; k < K_; ++k) {
            VectorXd c = VectorXd::Zero(static_cast<Index>(V_));
            for (std::size_t s = 0; s < seeds; ++s) {
                const auto [d, t] = nonempty[pick(rng)];
                const auto& sd = docs_[d][t];
                for (std::size_t n = 0; n < sd.ids.size(); ++n) c(sd.ids[n]) += sd.counts[n];
            }
            c /= std::max(c.sum(), 1.0);
            for (Index w = 0; w < static_cast<Index>(V_); ++w) {
                const double p = 0.5 * c(w) + 0.5 * freq(w) * (0.5 + unif(rng));
                m_[k].col(w).setConstant(std::log(p));
            }
        }
        q_.clear();
        q_.resize(docs_.size());
        for (std::size_t d = 0; d < docs_.size(); ++d)
            for (std::size_t t = 0; t < T_; ++t) q_[d].push_back(init_doc_state(docs_[d][t], K_, cfg_.alpha));
    }

    void e_step() {
        const auto logb = expected_log_beta(m_, chain_.variance);
        for (std::size_t d = 0; d < docs_.size(); ++d)
            for (std::size_t t = 0; t < T_; ++t) {
                if (docs_[d][t].total <= 0) continue;
                update_document(docs_[d][t], q_[d][t], logb[t], cfg_.alpha, cfg_.estep_max_iters, cfg_.estep_tol);
            }
    }

    void m_step() {
        for (std::size_t k = 0; k < K_; ++k) {
            MatrixXd n = MatrixXd::Zero(static_cast<Index>(T_), static_cast<Index>(V_));
            for (std::size_t d = 0; d < docs_.size(); ++d)
                for (std::size_t t = 0; t < T_; ++t) {
                    const auto& sd = docs_[d][t];
                    const auto& phi = q_[d][t].phi;
                    for (std::size_t i = 0; i < sd.ids.size(); ++i)
                        n(static_cast<Index>(t), sd.ids[i]) += sd.counts[i] * phi(static_cast<Index>(i), static_cast<Index>(k));
                }
            const VectorXd N = n.rowwise().sum();
            VectorXd lam(static_cast<Index>(T_));
            MatrixXd Y(static_cast<Index>(T_), static_cast<Index>(V_));
            auto& m = m_[k];
            for (std::size_t it = 0; it < cfg_.mstep_iters; ++it) {
                for (Index t = 0; t < static_cast<Index>(T_); ++t) {
                    if (N(t) <= 0) {
                        lam(t) = 0.0;
                        Y.row(t).setZero();
                        continue;
                    }
                    const auto row = m.row(t);
                    VectorXd p = (row.array() - row.maxCoeff()).exp().transpose();
                    p /= p.sum();
                    Y.row(t) = row + (2.0 / N(t)) * (n.row(t) - N(t) * p.transpose());
                    lam(t) = 0.5 * N(t);
                }
                m = smooth_chain(Y, lam, cfg_.sigma2, cfg_.init_var).mean;
            }
        }
    }

    long double elbo() const {
        const auto logb = expected_log_beta(m_, chain_.variance);
        long double e = chain_const_;
        for (std::size_t d = 0; d < docs_.size(); ++d)
            for (std::size_t t = 0; t < T_; ++t)
                if (docs_[d][t].total > 0) e += document_elbo(docs_[d][t], q_[d][t], logb[t], cfg_.alpha);
        for (const auto& m : m_) {
            e -= m.row(0).squaredNorm() / (2 * cfg_.init_var);
            for (Index t = 1; t < m.rows(); ++t) e -= (m.row(t) - m.row(t - 1)).squaredNorm() / (2 * cfg_.sigma2);
        }
        return e;
    }

    DtmConfig cfg_;
    std::vector<std::vector<SliceDoc>> docs_;
    std::size_t K_, T_, V_;
    ChainPosterior chain_;
    long double chain_const_ = 0;
    std::vector<MatrixXd> m_;
    std::vector<std::vector<DocState>> q_;
};

MatrixXd theta_of(const std::vector<DocState>& q, const std::vector<SliceDoc>& docs, std::size_t K) {
    MatrixXd th(static_cast<Index>(q.size()), static_cast<Index>(K));
    for (std::size_t t = 0; t < q.size(); ++t) {
        if (docs[t].total > 0)
            th.row(static_cast<Index>(t)) = (q[t].gamma / q[t].gamma.sum()).transpose();
        else
            th.row(static_cast<Index>(t)).setConstant(1.0 / static_cast<double>(K));
    }
    return th;
}

}  // namespace

TopicModelState fit_dtm(std::span<const SlicedTranscript> corpus, const DtmConfig& cfg) {
    cfg.validate();
    for (const auto& doc : corpus)
        if (doc.T() != cfg.T || doc.words.size() != cfg.T)
            throw Error(Errc::InvalidArgument, "document has " + std::to_string(doc.T()) + " slices, config expects " +
                                                   std::to_string(cfg.T));

    std::map<std::string, std::size_t> counts;
    for (const auto& doc : corpus)
        for (const auto& slice : doc.words)
            for (const auto& w : slice) ++counts[w];
    TopicModelState state;
    state.config = cfg;
    for (const auto& [w, c] : counts)
        if (c >= cfg.vocab_min_count) {
            state.vocab.index.emplace(w, static_cast<int>(state.vocab.words.size()));
            state.vocab.words.push_back(w);
        }
    if (state.vocab.size() == 0) throw Error(Errc::EmptyVocabulary, "no word reaches vocab_min_count");

    std::vector<std::vector<SliceDoc>> docs;
    std::vector<std::size_t> per_slice(cfg.T, 0);
    for (const auto& doc : corpus) {
        auto& row = docs.emplace_back();
        for (std::size_t t = 0; t < cfg.T; ++t) {
            row.push_back(make_slice_doc(doc.words[t], state.vocab));
            if (row.back().total > 0) ++per_slice[t];
        }
    }
    for (std::size_t t = 0; t < cfg.T; ++t)
        if (per_slice[t] < 2)
            throw Error(Errc::InsufficientDocuments,
                        "slice " + std::to_string(t) + " has " + std::to_string(per_slice[t]) + " non-empty documents");

    const std::size_t K = cfg.K, T = cfg.T;
    // Every restart gets a short burn-in; only the one with the highest
    // bound is run to convergence.
    std::vector<Fitter> runs;
    std::vector<std::vector<double>> traces(cfg.restarts);
    std::vector<bool> done(cfg.restarts, false);
    auto step = [&](std::size_t r) {
        Fitter& f = runs[r];
        f.e_step();
        f.m_step();
        const double e = static_cast<double>(f.elbo());
        auto& tr = traces[r];
        if (!tr.empty() && std::fabs((e - tr.back()) / tr.back()) < cfg.elbo_tol) done[r] = true;
        tr.push_back(e);
    };
    const std::size_t burn_in = cfg.restarts > 1 ? std::min(cfg.restart_iters, cfg.max_em_iters) : 0;
    for (std::size_t r = 0; r < cfg.restarts; ++r) {
        runs.emplace_back(cfg, docs, state.vocab.size());
        runs.back().initialise(cfg.seed + 0x9E3779B97F4A7C15ull * r);
        for (std::size_t it = 0; it < burn_in && !done[r]; ++it) step(r);
    }
    std::size_t pick = 0;
    for (std::size_t r = 1; r < cfg.restarts; ++r)
        if (traces[r].back() > traces[pick].back()) pick = r;
    while (!done[pick] && traces[pick].size() < cfg.max_em_iters) step(pick);
    Fitter& best = runs[pick];
    std::vector<double> best_trace = std::move(traces[pick]);
    const bool best_converged = done[pick];
    if (!best_converged)
        warn("NonConvergence: DTM stopped after " + std::to_string(cfg.max_em_iters) + " EM iterations");

    // Corpus-mean proportions over non-empty slice documents.
    std::vector<MatrixXd> thetas;
    MatrixXd mean = MatrixXd::Zero(static_cast<Index>(T), static_cast<Index>(K));
    for (std::size_t d = 0; d < docs.size(); ++d) {
        thetas.push_back(theta_of(best.q_[d], docs[d], K));
        for (std::size_t t = 0; t < T; ++t)
            if (docs[d][t].total > 0) mean.row(static_cast<Index>(t)) += thetas.back().row(static_cast<Index>(t));
    }
    for (std::size_t t = 0; t < T; ++t) mean.row(static_cast<Index>(t)) /= static_cast<double>(per_slice[t]);

    // Canonical order: topics sorted by the slice where their mean proportion peaks.
    std::vector<std::size_t> order(K);
    std::iota(order.begin(), order.end(), 0);
    std::vector<Index> peak(K);
    for (std::size_t k = 0; k < K; ++k) mean.col(static_cast<Index>(k)).maxCoeff(&peak[k]);
    std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return peak[a] < peak[b]; });

    state.beta.resize(K);
    state.train_mean_theta.resize(static_cast<Index>(T), static_cast<Index>(K));
    for (std::size_t i = 0; i < K; ++i) {
        state.beta[i] = best.m_[order[i]];
        state.train_mean_theta.col(static_cast<Index>(i)) = mean.col(static_cast<Index>(order[i]));
    }
    for (auto& th : thetas) {
        MatrixXd p(th.rows(), th.cols());
        for (std::size_t i = 0; i < K; ++i) p.col(static_cast<Index>(i)) = th.col(static_cast<Index>(order[i]));
        state.train_theta.push_back(std::move(p));
    }
    state.variance = best.chain_.variance;
    state.lag_cov = best.chain_.lag_cov;
    state.log_det = best.chain_.log_det;
    state.elbo_trace = std::move(best_trace);
    state.converged = best_converged;
    state.dominant_topic.resize(T);
    for (std::size_t t = 0; t < T; ++t) {
        Index k;
        state.train_mean_theta.row(static_cast<Index>(t)).maxCoeff(&k);
        state.dominant_topic[t] = static_cast<int>(k);
    }
    return state;
}

TopicTrajectory infer_trajectory(const TopicModelState& state, const SlicedTranscript& doc) {
    const std::size_t K = state.K(), T = state.T();
    if (doc.words.size() != T)
        throw Error(Errc::InvalidArgument,
                    "document has " + std::to_string(doc.words.size()) + " slices, model expects " + std::to_string(T));
    const auto logb = expected_log_beta(state.beta, state.variance);
    TopicTrajectory out;
    out.theta.resize(static_cast<Index>(T), static_cast<Index>(K));
    out.fallback.assign(T, false);
    for (std::size_t t = 0; t < T; ++t) {
        const SliceDoc sd = make_slice_doc(doc.words[t], state.vocab);
        if (sd.total <= 0) {
            out.theta.row(static_cast<Index>(t)).setConstant(1.0 / static_cast<double>(K));
            out.fallback[t] = true;
            continue;
        }
        DocState s = init_doc_state(sd, K, state.config.alpha);
        update_document(sd, s, logb[t], state.config.alpha, state.config.estep_max_iters, state.config.estep_tol);
        out.theta.row(static_cast<Index>(t)) = (s.gamma / s.gamma.sum()).transpose();
    }
    return out;
}

std::vector<std::string> top_words(const TopicModelState& state, std::size_t k, std::size_t t, std::size_t n) {
    if (k >= state.K() || t >= state.T()) throw Error(Errc::InvalidArgument, "top_words: topic or slice out of range");
    const auto& row = state.beta[k];
    std::vector<int> idx(state.V());
    std::iota(idx.begin(), idx.end(), 0);
    const Index ti = static_cast<Index>(t);
    // softmax is monotone, so ranking the natural parameters is enough
    std::stable_sort(idx.begin(), idx.end(), [&](int a, int b) { return row(ti, a) > row(ti, b); });
    idx.resize(std::min(n, idx.size()));
    std::vector<std::string> out;
    for (int i : idx) out.push_back(state.vocab.words[static_cast<std::size_t>(i)]);
    return out;
}

std::array<double, DtmStatistics::kCount> DtmStatistics::values() const {
    return {topic_consistency, topic_cycle, topic_variability, topic_temporal_corr, topic_ptp_range, topic_change_rate};
}

const std::array<std::string_view, DtmStatistics::kCount>& DtmStatistics::names() {
    static const std::array<std::string_view, kCount> n = {"topic_consistency",   "topic_cycle",
                                                           "topic_variability",   "topic_temporal_corr",
                                                           "topic_ptp_range",     "topic_change_rate"};
    return n;
}

DtmStatistics trajectory_statistics(const MatrixXd& theta) {
    DtmStatistics s;
    const Index T = theta.rows(), K = theta.cols();
    if (T == 0 || K == 0) return s;
    for (Index k = 0; k < K; ++k) {
        const VectorXd x = theta.col(k);
        const double mu = x.mean();
        s.topic_variability += std::sqrt((x.array() - mu).square().mean());
        s.topic_ptp_range += x.maxCoeff() - x.minCoeff();

        double r = 0.0;
        if (T >= 3) {
            const VectorXd a = x.head(T - 1), b = x.tail(T - 1);
            const VectorXd da = a.array() - a.mean(), db = b.array() - b.mean();
            const double sa = da.norm(), sb = db.norm();
            if (sa > 1e-12 && sb > 1e-12)
                r = std::clamp(da.dot(db) / (sa * sb), -1.0, 1.0);
            else
                s.degenerate = true;
        } else {
            s.degenerate = true;
        }
        s.topic_temporal_corr += r;
    }
    s.topic_variability /= static_cast<double>(K);
    s.topic_ptp_range /= static_cast<double>(K);
    s.topic_temporal_corr /= static_cast<double>(K);
    if (T >= 2) {
        for (Index t = 0; t + 1 < T; ++t) s.topic_change_rate += (theta.row(t + 1) - theta.row(t)).norm();
        s.topic_change_rate /= static_cast<double>(T - 1);
    }
    return s;
}

DtmStatistics dtm_statistics(const TopicModelState& state, const SlicedTranscript& doc, const TopicTrajectory& traj,
                             const std::set<std::string>& cycle_lexicon) {
    const std::size_t T = state.T();
    if (doc.words.size() != T || static_cast<std::size_t>(traj.theta.rows()) != T)
        throw Error(Errc::InvalidArgument, "dtm_statistics: slice count differs from the model");
    DtmStatistics s = trajectory_statistics(traj.theta);

    for (std::size_t t = 0; t < T; ++t) {
        const auto top = top_words(state, static_cast<std::size_t>(state.dominant_topic[t]), t, 10);
        const std::set<std::string> present(doc.words[t].begin(), doc.words[t].end());
        std::size_t hits = 0;
        for (const auto& w : top) hits += present.count(w);
        s.topic_consistency += static_cast<double>(hits) / static_cast<double>(top.size());
    }
    s.topic_consistency /= static_cast<double>(T);

    for (std::size_t t = (T + 1) / 2; t < T && s.topic_cycle == 0.0; ++t)
        for (const auto& w : doc.words[t])
            if (cycle_lexicon.count(w)) {
                s.topic_cycle = 1.0;
                break;
            }
    return s;
}

void save_model(const TopicModelState& state, const std::filesystem::path& path, const nlohmann::json& provenance) {
    TensorArchive ar;
    const auto& c = state.config;
    ar.header = {{"kind", "dtm"},
                 {"config",
                  {{"K", c.K},
                   {"T", c.T},
                   {"alpha", c.alpha},
                   {"sigma2", c.sigma2},
                   {"obs_var", c.obs_var},
                   {"init_var", c.init_var},
                   {"vocab_min_count", c.vocab_min_count},
                   {"max_em_iters", c.max_em_iters},
                   {"elbo_tol", c.elbo_tol},
                   {"estep_max_iters", c.estep_max_iters},
                   {"estep_tol", c.estep_tol},
                   {"mstep_iters", c.mstep_iters},
                   {"restarts", c.restarts},
                   {"restart_iters", c.restart_iters},
                   {"seed", c.seed}}},
                 {"vocab", state.vocab.words},
                 {"dominant_topic", state.dominant_topic},
                 {"elbo_trace", state.elbo_trace},
                 {"converged", state.converged},
                 {"log_det", state.log_det},
                 {"provenance", provenance}};
    Tensor beta;
    beta.dtype = DType::f32;
    beta.shape = {static_cast<std::uint32_t>(state.K()), static_cast<std::uint32_t>(state.T()),
                  static_cast<std::uint32_t>(state.V())};
    for (const auto& m : state.beta)
        for (Index t = 0; t < m.rows(); ++t)
            for (Index w = 0; w < m.cols(); ++w) beta.data.push_back(m(t, w));
    ar.tensors["beta"] = std::move(beta);
    ar.tensors["variance"] = Tensor::from(state.variance, DType::f64);
    ar.tensors["lag_cov"] = Tensor::from(state.lag_cov, DType::f64);
    ar.tensors["train_mean_theta"] = Tensor::from(state.train_mean_theta, DType::f64);
    ar.save(path);
}

TopicModelState load_model(const std::filesystem::path& path, nlohmann::json* provenance) {
    const TensorArchive ar = TensorArchive::load(path);
    if (ar.header.value("kind", "") != "dtm") throw Error(Errc::ShapeMismatch, path.string() + " is not a DTM model");
    TopicModelState s;
    const auto& c = ar.header.at("config");
    auto& cfg = s.config;
    cfg.K = c.at("K");
    cfg.T = c.at("T");
    cfg.alpha = c.at("alpha");
    cfg.sigma2 = c.at("sigma2");
    cfg.obs_var = c.at("obs_var");
    cfg.init_var = c.at("init_var");
    cfg.vocab_min_count = c.at("vocab_min_count");
    cfg.max_em_iters = c.at("max_em_iters");
    cfg.elbo_tol = c.at("elbo_tol");
    cfg.estep_max_iters = c.at("estep_max_iters");
    cfg.estep_tol = c.at("estep_tol");
    cfg.mstep_iters = c.at("mstep_iters");
    cfg.restarts = c.at("restarts");
    cfg.restart_iters = c.at("restart_iters");
    cfg.seed = c.at("seed");
    s.vocab.words = ar.header.at("vocab").get<std::vector<std::string>>();
    for (std::size_t i = 0; i < s.vocab.words.size(); ++i) s.vocab.index.emplace(s.vocab.words[i], static_cast<int>(i));
    s.dominant_topic = ar.header.at("dominant_topic").get<std::vector<int>>();
    s.elbo_trace = ar.header.at("elbo_trace").get<std::vector<double>>();
    s.converged = ar.header.at("converged");
    s.log_det = ar.header.at("log_det");
    if (provenance) *provenance = ar.header.value("provenance", nlohmann::json::object());

    const Tensor& beta = ar.at("beta");
    if (beta.shape.size() != 3 || beta.shape[0] != cfg.K || beta.shape[1] != cfg.T ||
        beta.shape[2] != s.vocab.size())
        throw Error(Errc::ShapeMismatch, "beta tensor shape does not match the header");
    const Index T = beta.shape[1], V = beta.shape[2];
    std::size_t i = 0;
    for (std::size_t k = 0; k < cfg.K; ++k) {
        MatrixXd m(T, V);
        for (Index t = 0; t < T; ++t)
            for (Index w = 0; w < V; ++w) m(t, w) = beta.data[i++];
        s.beta.push_back(std::move(m));
    }
    s.variance = ar.at("variance").vector();
    s.lag_cov = ar.at("lag_cov").vector();
    s.train_mean_theta = ar.at("train_mean_theta").matrix();
    return s;
}

}  // namespace vsn::dtm
