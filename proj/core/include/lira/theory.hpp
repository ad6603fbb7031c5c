#ifndef LIRA_THEORY_HPP_
#define LIRA_THEORY_HPP_

#include <cstdint>
#include <limits>
#include <string>
#include <vector>

#include "lira/numcore.hpp"
#include "lira/provider.hpp"

namespace lira::theory {

using num::DenseVector;
using num::StatSummary;

struct BoundInputs {
  double epsilon1 = 0.0;  // anchoring mismatch
  double epsilon2 = 0.0;  // translation KL
  double c_const = 1.0;   // kernel bound
  double l_loc = 0.0;     // local Lipschitz constant
  double kappa = 1.0;     // multiplicative slack on the C term
};

// epsilon1 + kappa * C * sqrt(2 * epsilon2); monotone in every argument.
double deviation_bound(const BoundInputs& inp);
// l_loc * deviation_bound.
double downstream_bound(const BoundInputs& inp);

// Finite probability vector; entries >= 0 and sum 1 within 1e-12.
struct DiscreteDist {
  std::vector<double> probabilities;
  void validate() const;
};

// KL(p || q) in nats; +inf (with *support_violation) when q_i = 0 < p_i.
double kl_divergence(const DiscreteDist& p, const DiscreteDist& q,
                     bool* support_violation = nullptr);
// 0.5 * sum |p_i - q_i|, in [0, 1].
double total_variation(const DiscreteDist& p, const DiscreteDist& q);

struct PinskerResult {
  double tv = 0.0;
  double sqrt_half_kl = 0.0;
  bool holds = false;
};
PinskerResult pinsker_check(const DiscreteDist& p, const DiscreteDist& q);

// Per-sentence unnormalized mean-pooled embedding norms, summarized.
// Sentences the provider rejects are skipped (count reflects survivors).
StatSummary estimate_c(const data::EmbeddingProvider& provider,
                       const std::vector<std::string>& corpus);

struct LipschitzConfig {
  std::size_t delta = 1;          // token-edit radius
  double q = 0.95;                // reported quantile level
  std::size_t samples_per_sentence = 8;
  std::uint64_t seed = 1;
  bool character_level = false;   // edits and distance at character granularity
};

struct LipschitzReport {
  StatSummary summary;
  double quantile = 0.0;          // the configured q-quantile of the ratios
  std::size_t excluded = 0;       // sentences with no valid perturbation
  std::string neighborhood = "sampled-random-edits";
};

// Random token edits (substitute/insert/delete over the corpus vocabulary)
// within edit distance (0, delta]; ratio = embedding distance / edit
// distance, per-sentence max over sampled neighbors.
LipschitzReport estimate_local_lipschitz(const data::EmbeddingProvider& provider,
                                         const std::vector<std::string>& corpus,
                                         const LipschitzConfig& cfg);

inline constexpr double kInfiniteVariance = std::numeric_limits<double>::infinity();

// Additive Gaussian channels g = s + eta_g, h = s + eta_h per coordinate.
struct GaussianChannelModel {
  double signal_var = 1.0;
  double var_g = 1.0;  // may be +inf
  double var_h = 1.0;  // may be +inf
};

enum class Observed { G, H, Both };

// Exact Gaussian mutual information in nats:
//   single channel: 0.5 ln(1 + s/var)
//   both: 0.5 ln(1 + s/var_g + s/var_h)
double gaussian_mutual_info(const GaussianChannelModel& model, Observed obs,
                            bool bits = false);

// I(s;[g,h]) - I(s;g) >= 0.
double info_gain(const GaussianChannelModel& model, bool bits = false);

struct AuditReport {
  std::size_t trials = 0;
  std::size_t violations = 0;
  double max_margin = -std::numeric_limits<double>::infinity();  // max (lhs - bound)
  double mean_slack = 0.0;  // mean (bound - lhs)
};

// Monte-Carlo audit of the deviation bound on exactly-computed kernel mean
// embeddings over a small semantic alphabet. Violations must be 0.
AuditReport bound_audit(std::size_t trials, std::uint64_t seed,
                        std::size_t max_alphabet = 8,
                        std::size_t max_feature_dim = 16);

// Random-restart local search maximizing (lhs - bound); returns the best
// margin found (never positive).
double bound_adversarial_search(std::size_t restarts, std::size_t steps,
                                std::uint64_t seed);

}  // namespace lira::theory

#endif  // LIRA_THEORY_HPP_
