#ifndef LIRA_DIFFRANK_HPP_
#define LIRA_DIFFRANK_HPP_

#include <cstddef>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "lira/numcore.hpp"

namespace lira::rank {

using num::DenseVector;

struct RetrievalLossConfig {
  double tau = 0.1;          // soft-rank temperature
  double tau_k = 0.5;        // top-k mask temperature
  std::size_t k = 10;        // nDCG cutoff
  double delta_safe = 0.2;   // safety margin below the positive score
  double beta_safe = 0.02;   // safe-negative down-weight temperature
  double gamma_hinge = 0.05; // top-1 hinge margin
  double nu = 0.15;          // variance target
  double lambda_h = 0.1;     // hinge weight
  double lambda_r = 0.1;     // mean/variance weight
  std::size_t top_m = 8;     // hardest negatives kept
  bool drop_near_negatives = false;  // aggressive gate variant
  double idcg_epsilon = 1e-10;
};

struct CorrLossConfig {
  double alpha_mix = 0.5;   // Pearson vs soft-Spearman mix
  double tau = 0.1;         // soft-rank temperature
  std::size_t n_min = 4;    // warm-up threshold on history+batch size
  double epsilon = 1e-8;    // Pearson stabilizer
};

// One query with binary-labeled candidates. Exactly one positive label.
// The canonical layout puts the positive at index 0, but any position is
// accepted; positive_index() locates it.
struct CandidateList {
  std::string query_id;
  DenseVector scores;
  std::vector<int> labels;
  std::vector<std::string> languages;

  std::size_t positive_index() const;
  void validate() const;
};

struct LossResult {
  double value = 0.0;
  DenseVector grad_scores;
  std::map<std::string, double> diagnostics;
};

enum class RankDirection { Ascending, Descending };

// Pairwise-sigmoid soft ranks, r_i = 1 + sum_{j != i} sigma(+-(s_j - s_i)/tau).
// Descending: the largest score gets rank closest to 1. The descending rank
// sum is exactly N(N+1)/2 for any input.
DenseVector soft_rank(const DenseVector& scores, double tau,
                      RankDirection dir);

// d r_i / d s_j for the chosen direction, as a dense N x N matrix
// (row i = gradient of rank i). Used internally by the losses; exposed for
// testing.
std::vector<DenseVector> soft_rank_jacobian(const DenseVector& scores,
                                            double tau, RankDirection dir);

// Hard nDCG@k with gains 2^y - 1, discounts 1/log2(1 + rank), descending
// score order, ties broken by candidate index. All-zero labels yield 0 and
// set *no_positives when provided.
double exact_ndcg_at_k(const std::vector<int>& labels,
                       const DenseVector& scores, std::size_t k,
                       bool* no_positives = nullptr);

// Multiplicative safety weights for near negatives:
// theta = s_+ - delta;  w_i = sigma((theta - s_i)/beta) for y_i = 0, else 1.
DenseVector safe_negative_weights(const CandidateList& cand,
                                  const RetrievalLossConfig& cfg);

// 1 - soft nDCG@k with soft ranks, soft top-k mask and safe-negative
// weighting on the discounts; analytic gradient wrt scores.
LossResult soft_ndcg_loss(const CandidateList& cand,
                          const RetrievalLossConfig& cfg);

// max(0, gamma + max_{y=0} s_i - s_+), subgradient on the positive and the
// arg-max negative only.
LossResult hinge_top1(const CandidateList& cand, double gamma);

// (mean s)^2 + |Var(s) - nu| with population variance; sign(0) = 0.
LossResult mean_var_reg(const DenseVector& scores, double nu);

// L_ndcg + lambda_h * L_hinge + lambda_r * L_mv.
LossResult retrieval_loss(const CandidateList& cand,
                          const RetrievalLossConfig& cfg);

double pearson(const std::vector<double>& a, const std::vector<double>& b,
               double epsilon = 1e-8);

// Gradient of pearson(a, b) wrt a.
DenseVector pearson_grad_a(const std::vector<double>& a,
                           const std::vector<double>& b, double epsilon);

// Ranks 1..N with tied groups averaged (standard statistical convention).
DenseVector average_tie_ranks(const std::vector<double>& values);

// Pearson on (ascending soft ranks of pred, average-tie ranks of gold).
double soft_spearman(const DenseVector& pred, const std::vector<double>& gold,
                     double tau, double epsilon = 1e-8);

// Typed outcome of corr_loss: either a loss with gradients on the live batch
// coordinates only, or a warm-up skip.
struct CorrLossOutcome {
  bool skipped = false;
  LossResult result;  // grad_scores has one entry per live batch element
};

// alpha (1 - r) + (1 - alpha)(1 - r_s) on the concatenation of a gradient-
// inert history and the live batch. Gradient entries cover live positions
// only. Signals skip when history + batch < n_min.
CorrLossOutcome corr_loss(const DenseVector& pred_batch,
                          const std::vector<double>& gold_batch,
                          const std::vector<double>& pred_hist,
                          const std::vector<double>& gold_hist,
                          const CorrLossConfig& cfg);

}  // namespace lira::rank

#endif  // LIRA_DIFFRANK_HPP_
