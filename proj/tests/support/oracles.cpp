#include "oracles.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <limits>
#include <numeric>

namespace oracle {

namespace {

bool same_ngram(const Tokens& a, std::size_t i, const Tokens& b, std::size_t j, int n) {
    for (int k = 0; k < n; ++k)
        if (a[i + static_cast<std::size_t>(k)] != b[j + static_cast<std::size_t>(k)]) return false;
    return true;
}

std::size_t occurrences(const Tokens& a, std::size_t i, const Tokens& b, int n) {
    std::size_t c = 0;
    if (b.size() < static_cast<std::size_t>(n)) return 0;
    for (std::size_t j = 0; j + static_cast<std::size_t>(n) <= b.size(); ++j) c += same_ngram(a, i, b, j, n);
    return c;
}

}  // namespace

double bleu(const Tokens& hyp, const Tokens& ref, int n) {
    if (hyp.empty()) return 0.0;
    double logp = 0.0;
    for (int order = 1; order <= n; ++order) {
        if (hyp.size() < static_cast<std::size_t>(order)) return 0.0;
        std::size_t total = 0, clipped = 0;
        for (std::size_t i = 0; i + static_cast<std::size_t>(order) <= hyp.size(); ++i) {
            ++total;
            // count each distinct n-gram once, at its first position
            bool first = true;
            for (std::size_t j = 0; j < i; ++j)
                if (same_ngram(hyp, i, hyp, j, order)) first = false;
            if (!first) continue;
            clipped += std::min(occurrences(hyp, i, hyp, order), occurrences(hyp, i, ref, order));
        }
        if (clipped == 0) return 0.0;
        logp += std::log(static_cast<double>(clipped) / static_cast<double>(total)) / n;
    }
    const double h = static_cast<double>(hyp.size()), r = static_cast<double>(ref.size());
    const double bp = h > r ? 1.0 : std::exp(1.0 - r / h);
    return bp * std::exp(logp);
}

std::size_t lcs_bruteforce(const Tokens& a, const Tokens& b) {
    std::size_t best = 0;
    const std::uint32_t n = static_cast<std::uint32_t>(a.size());
    for (std::uint32_t mask = 0; mask < (1u << n); ++mask) {
        const auto len = static_cast<std::size_t>(__builtin_popcount(mask));
        if (len <= best) continue;
        std::size_t j = 0;
        bool ok = true;
        for (std::uint32_t i = 0; i < n && ok; ++i) {
            if (!(mask >> i & 1u)) continue;
            while (j < b.size() && b[j] != a[i]) ++j;
            if (j == b.size()) ok = false;
            else ++j;
        }
        if (ok) best = len;
    }
    return best;
}

double rouge_l(const Tokens& hyp, const Tokens& ref) {
    const double l = static_cast<double>(lcs_bruteforce(hyp, ref));
    if (l == 0) return 0.0;
    const double p = l / static_cast<double>(hyp.size()), r = l / static_cast<double>(ref.size());
    return 2 * p * r / (p + r);
}

namespace {

void enumerate(const Tokens& hyp, const Tokens& ref, std::size_t i, std::vector<int>& map, std::vector<bool>& used,
               std::pair<std::size_t, std::size_t>& best) {
    if (i == hyp.size()) {
        std::size_t m = 0, chunks = 0;
        int prev_h = -2, prev_r = -2;
        for (std::size_t h = 0; h < map.size(); ++h) {
            if (map[h] < 0) continue;
            ++m;
            if (!(static_cast<int>(h) == prev_h + 1 && map[h] == prev_r + 1)) ++chunks;
            prev_h = static_cast<int>(h);
            prev_r = map[h];
        }
        if (m > best.first || (m == best.first && chunks < best.second)) best = {m, chunks};
        return;
    }
    map[i] = -1;
    enumerate(hyp, ref, i + 1, map, used, best);
    for (std::size_t j = 0; j < ref.size(); ++j) {
        if (used[j] || ref[j] != hyp[i]) continue;
        used[j] = true;
        map[i] = static_cast<int>(j);
        enumerate(hyp, ref, i + 1, map, used, best);
        used[j] = false;
    }
    map[i] = -1;
}

}  // namespace

std::pair<std::size_t, std::size_t> meteor_alignment(const Tokens& hyp, const Tokens& ref) {
    std::vector<int> map(hyp.size(), -1);
    std::vector<bool> used(ref.size(), false);
    std::pair<std::size_t, std::size_t> best{0, 0};
    enumerate(hyp, ref, 0, map, used, best);
    return best;
}

double meteor(const Tokens& hyp, const Tokens& ref, double alpha, double beta, double gamma) {
    const auto [m, ch] = meteor_alignment(hyp, ref);
    if (m == 0) return 0.0;
    const double P = static_cast<double>(m) / static_cast<double>(hyp.size());
    const double R = static_cast<double>(m) / static_cast<double>(ref.size());
    const double f = P * R / (alpha * P + (1 - alpha) * R);
    return f * (1 - gamma * std::pow(static_cast<double>(ch) / static_cast<double>(m), beta));
}

void jacobi_eigen(MatrixXd A, VectorXd& values, MatrixXd& vectors, double tol) {
    const Eigen::Index n = A.rows();
    MatrixXd V = MatrixXd::Identity(n, n);
    for (int sweep = 0; sweep < 100; ++sweep) {
        double off = 0;
        for (Eigen::Index i = 0; i < n; ++i)
            for (Eigen::Index j = i + 1; j < n; ++j) off += A(i, j) * A(i, j);
        if (off < tol * tol) break;
        for (Eigen::Index p = 0; p < n; ++p)
            for (Eigen::Index q = p + 1; q < n; ++q) {
                if (std::abs(A(p, q)) < 1e-300) continue;
                const double theta = (A(q, q) - A(p, p)) / (2 * A(p, q));
                const double t = (theta >= 0 ? 1.0 : -1.0) / (std::abs(theta) + std::sqrt(theta * theta + 1));
                const double c = 1 / std::sqrt(t * t + 1), s = t * c;
                for (Eigen::Index k = 0; k < n; ++k) {
                    const double akp = A(k, p), akq = A(k, q);
                    A(k, p) = c * akp - s * akq;
                    A(k, q) = s * akp + c * akq;
                }
                for (Eigen::Index k = 0; k < n; ++k) {
                    const double apk = A(p, k), aqk = A(q, k);
                    A(p, k) = c * apk - s * aqk;
                    A(q, k) = s * apk + c * aqk;
                }
                for (Eigen::Index k = 0; k < n; ++k) {
                    const double vkp = V(k, p), vkq = V(k, q);
                    V(k, p) = c * vkp - s * vkq;
                    V(k, q) = s * vkp + c * vkq;
                }
            }
    }
    std::vector<Eigen::Index> order(static_cast<std::size_t>(n));
    std::iota(order.begin(), order.end(), 0);
    std::sort(order.begin(), order.end(), [&](auto a, auto b) { return A(a, a) > A(b, b); });
    values.resize(n);
    vectors.resize(n, n);
    for (Eigen::Index i = 0; i < n; ++i) {
        values(i) = A(order[static_cast<std::size_t>(i)], order[static_cast<std::size_t>(i)]);
        vectors.col(i) = V.col(order[static_cast<std::size_t>(i)]);
    }
}

double max_subspace_angle(const MatrixXd& A, const MatrixXd& B) {
    // Orthonormalize both row spaces with Gram-Schmidt, then the smallest
    // singular value of Qa Qb' is the cosine of the largest angle. For equal
    // dimensions, sin(max angle) = || (I - Pb) Qa' ||_2.
    auto gs = [](const MatrixXd& M) {
        MatrixXd Q = M;
        for (Eigen::Index i = 0; i < Q.rows(); ++i) {
            for (Eigen::Index j = 0; j < i; ++j) Q.row(i) -= Q.row(i).dot(Q.row(j)) * Q.row(j);
            Q.row(i) /= Q.row(i).norm();
        }
        return Q;
    };
    const MatrixXd Qa = gs(A), Qb = gs(B);
    const MatrixXd resid = Qa.transpose() - Qb.transpose() * (Qb * Qa.transpose());
    // spectral norm via power iteration on resid' resid
    MatrixXd G = resid.transpose() * resid;
    VectorXd v = VectorXd::Ones(G.cols());
    double lambda = 0;
    for (int it = 0; it < 500; ++it) {
        VectorXd w = G * v;
        const double nw = w.norm();
        if (nw == 0) return 0.0;
        lambda = nw;
        v = w / nw;
    }
    return std::asin(std::min(1.0, std::sqrt(lambda)));
}

QpSolution brute_force_qp(const MatrixXd& Q, const VectorXd& p, const VectorXd& y, double C) {
    const auto n = static_cast<std::size_t>(Q.rows());
    QpSolution best;
    best.objective = std::numeric_limits<double>::infinity();
    std::size_t faces = 1;
    for (std::size_t i = 0; i < n; ++i) faces *= 3;
    for (std::size_t code = 0; code < faces; ++code) {
        std::vector<int> state(n);
        std::size_t c = code;
        for (std::size_t i = 0; i < n; ++i) {
            state[i] = static_cast<int>(c % 3);  // 0 lower, 1 upper, 2 free
            c /= 3;
        }
        VectorXd a = VectorXd::Zero(static_cast<Eigen::Index>(n));
        std::vector<Eigen::Index> F;
        for (std::size_t i = 0; i < n; ++i) {
            if (state[i] == 1) a(static_cast<Eigen::Index>(i)) = C;
            if (state[i] == 2) F.push_back(static_cast<Eigen::Index>(i));
        }
        const auto f = static_cast<Eigen::Index>(F.size());
        if (f == 0) {
            if (std::abs(y.dot(a)) > 1e-12) continue;
        } else {
            // [Q_FF y_F; y_F' 0] [a_F; nu] = [-p_F - Q_FB a_B; -y_B' a_B]
            MatrixXd M = MatrixXd::Zero(f + 1, f + 1);
            VectorXd rhs(f + 1);
            for (Eigen::Index r = 0; r < f; ++r) {
                for (Eigen::Index s = 0; s < f; ++s) M(r, s) = Q(F[r], F[s]);
                M(r, f) = y(F[r]);
                M(f, r) = y(F[r]);
                rhs(r) = -p(F[r]) - Q.row(F[r]).dot(a);
            }
            rhs(f) = -y.dot(a);
            Eigen::FullPivLU<MatrixXd> lu(M);
            if (!lu.isInvertible()) continue;
            const VectorXd sol = lu.solve(rhs);
            bool ok = true;
            for (Eigen::Index r = 0; r < f; ++r) {
                if (sol(r) < -1e-12 || sol(r) > C + 1e-12) ok = false;
                a(F[r]) = sol(r);
            }
            if (!ok) continue;
        }
        const double obj = 0.5 * a.dot(Q * a) + p.dot(a);
        if (obj < best.objective) {
            best.objective = obj;
            best.alpha = a;
        }
    }
    return best;
}

std::vector<int> best_assignment(const MatrixXd& score) {
    std::vector<int> perm(static_cast<std::size_t>(score.rows()));
    std::iota(perm.begin(), perm.end(), 0);
    std::vector<int> best = perm;
    double best_s = -std::numeric_limits<double>::infinity();
    do {
        double s = 0;
        for (std::size_t i = 0; i < perm.size(); ++i) s += score(static_cast<Eigen::Index>(i), perm[i]);
        if (s > best_s) {
            best_s = s;
            best = perm;
        }
    } while (std::next_permutation(perm.begin(), perm.end()));
    return best;
}

double pairwise_auc(const std::vector<double>& scores, const std::vector<int>& labels) {
    double num = 0, den = 0;
    for (std::size_t i = 0; i < scores.size(); ++i)
        for (std::size_t j = 0; j < scores.size(); ++j) {
            if (labels[i] != 1 || labels[j] != 0) continue;
            den += 1;
            if (scores[i] > scores[j]) num += 1;
            else if (scores[i] == scores[j]) num += 0.5;
        }
    return num / den;
}

VectorXd shapley_by_permutations(const std::function<double(std::uint64_t)>& v, std::size_t D) {
    std::vector<std::size_t> order(D);
    std::iota(order.begin(), order.end(), 0);
    VectorXd phi = VectorXd::Zero(static_cast<Eigen::Index>(D));
    double count = 0;
    do {
        std::uint64_t S = 0;
        double prev = v(0);
        for (std::size_t i : order) {
            S |= std::uint64_t{1} << i;
            const double cur = v(S);
            phi(static_cast<Eigen::Index>(i)) += cur - prev;
            prev = cur;
        }
        count += 1;
    } while (std::next_permutation(order.begin(), order.end()));
    return phi / count;
}

double spearman_rho(const std::vector<double>& a, const std::vector<double>& b) {
    auto ranks = [](const std::vector<double>& x) {
        std::vector<double> r(x.size());
        for (std::size_t i = 0; i < x.size(); ++i) {
            double less = 0, equal = 0;
            for (double y : x) {
                less += y < x[i];
                equal += y == x[i];
            }
            r[i] = less + (equal + 1) / 2;
        }
        return r;
    };
    const auto ra = ranks(a), rb = ranks(b);
    const double n = static_cast<double>(a.size());
    const double ma = std::accumulate(ra.begin(), ra.end(), 0.0) / n, mb = std::accumulate(rb.begin(), rb.end(), 0.0) / n;
    double sab = 0, saa = 0, sbb = 0;
    for (std::size_t i = 0; i < ra.size(); ++i) {
        sab += (ra[i] - ma) * (rb[i] - mb);
        saa += (ra[i] - ma) * (ra[i] - ma);
        sbb += (rb[i] - mb) * (rb[i] - mb);
    }
    return sab / std::sqrt(saa * sbb);
}

std::vector<double> acoustic_features(const std::vector<Seg>& segs, int syllables) {
    double voiced = 0;
    for (auto s : segs) voiced += s.e - s.s;
    const double syl_dur = voiced / syllables;
    double n_p = 0, pause = 0;
    for (std::size_t i = 1; i < segs.size(); ++i) {
        const double gap = segs[i].s - segs[i - 1].e;
        if (gap > syl_dur) {
            n_p += 1;
            pause += gap;
        }
    }
    const double art = syllables / voiced;
    const double span = segs.back().e - segs.front().s;
    return {n_p,
            pause,
            n_p > 0 ? pause / n_p : 0.0,
            pause / art,
            n_p / voiced,
            n_p / syllables,
            voiced,
            voiced / static_cast<double>(segs.size()),
            art,
            syllables / span};
}

std::vector<double> linguistic_features(const std::vector<std::pair<std::string, std::string>>& tokens,
                                        const WordLists& lists) {
    std::vector<std::string> w, tag;
    for (const auto& [s, p] : tokens) {
        if (p == "PUNCT") continue;
        std::string lower;
        for (char c : s) lower += static_cast<char>(std::tolower(static_cast<unsigned char>(c)));
        w.push_back(lower);
        tag.push_back(p);
    }
    auto in = [](const std::vector<std::string>& list, const std::string& x) {
        return std::find(list.begin(), list.end(), x) != list.end();
    };
    const double n = static_cast<double>(w.size());
    double stop = 0, filled = 0, lexical = 0, back = 0, rep = 0, adj = 0, adv = 0, noun = 0, pron = 0, verb = 0,
           fun = 0;
    std::vector<std::string> types;
    for (std::size_t i = 0; i < w.size(); ++i) {
        stop += in(lists.stop, w[i]);
        filled += in(lists.filled, w[i]);
        lexical += in(lists.lexical, w[i]);
        back += in(lists.backchannel, w[i]);
        if (i > 0 && w[i] == w[i - 1]) rep += 1;
        adj += in(lists.adj_tags, tag[i]);
        adv += in(lists.adv_tags, tag[i]);
        noun += in(lists.noun_tags, tag[i]);
        pron += in(lists.pron_tags, tag[i]);
        verb += in(lists.verb_tags, tag[i]);
        fun += in(lists.functional_tags, tag[i]);
        if (!in(types, w[i])) types.push_back(w[i]);
    }
    return {n,       stop / n, filled / n, lexical / n, back / n, rep / n, adj / n,
            adv / n, noun / n, pron / n,   verb / n,    fun / n,  static_cast<double>(types.size()) / std::sqrt(2 * n)};
}

}  // namespace oracle
