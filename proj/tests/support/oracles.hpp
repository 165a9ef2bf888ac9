#pragma once

// Independent reference implementations used only by tests. Each one is
// written the slow, obvious way so it shares no code path with the library.

#include <cstdint>
#include <functional>
#include <string>
#include <utility>
#include <vector>

#include <Eigen/Dense>

namespace oracle {

using Eigen::MatrixXd;
using Eigen::VectorXd;
using Tokens = std::vector<std::string>;

// --- text metrics ---------------------------------------------------------

/// Clipped n-gram precision BLEU against one reference, found by scanning
/// every position pair.
double bleu(const Tokens& hyp, const Tokens& ref, int n);
/// Longest common subsequence by enumerating every subsequence of `a`
/// (keep |a| <= 16).
std::size_t lcs_bruteforce(const Tokens& a, const Tokens& b);
double rouge_l(const Tokens& hyp, const Tokens& ref);
/// Every partial matching of equal tokens is enumerated; the best has the
/// most matches, then the fewest chunks.
std::pair<std::size_t, std::size_t> meteor_alignment(const Tokens& hyp, const Tokens& ref);
double meteor(const Tokens& hyp, const Tokens& ref, double alpha = 0.9, double beta = 3.0, double gamma = 0.5);

// --- linear algebra ---------------------------------------------------------

/// Cyclic Jacobi rotations on a symmetric matrix. Eigenvalues descending,
/// eigenvectors as columns.
void jacobi_eigen(MatrixXd A, VectorXd& values, MatrixXd& vectors, double tol = 1e-14);

/// Largest principal angle between the row spaces of A and B.
double max_subspace_angle(const MatrixXd& A, const MatrixXd& B);

/// min 0.5 a'Qa + p'a, y'a = 0, 0 <= a <= C, by enumerating for every
/// variable whether it sits at 0, at C or is free (3^n faces).
struct QpSolution {
    VectorXd alpha;
    double objective = 0.0;
};
QpSolution brute_force_qp(const MatrixXd& Q, const VectorXd& p, const VectorXd& y, double C);

// --- matching, ranking, games ----------------------------------------------

/// Assignment maximizing the summed score, by trying every permutation.
std::vector<int> best_assignment(const MatrixXd& score);

/// P(score_pos > score_neg) + 0.5 P(tie) over all pairs.
double pairwise_auc(const std::vector<double>& scores, const std::vector<int>& labels);

/// Shapley values from the permutation definition over all D! orders.
VectorXd shapley_by_permutations(const std::function<double(std::uint64_t)>& v, std::size_t D);

/// Pearson correlation of the average ranks, ranks computed by counting.
double spearman_rho(const std::vector<double>& a, const std::vector<double>& b);

// --- features ----------------------------------------------------------------

struct Seg {
    double s, e;
};
/// The ten acoustic features straight from their definitions.
std::vector<double> acoustic_features(const std::vector<Seg>& segs, int syllables);

struct WordLists {
    std::vector<std::string> stop, filled, lexical, backchannel, functional_tags;
    std::vector<std::string> adj_tags, adv_tags, noun_tags, pron_tags, verb_tags;
};
/// The thirteen linguistic features by counting over (surface, tag) pairs; tag "PUNCT" marks
/// punctuation. Comparisons are on lowercased surfaces.
std::vector<double> linguistic_features(const std::vector<std::pair<std::string, std::string>>& tokens,
                                        const WordLists& lists);

}  // namespace oracle
