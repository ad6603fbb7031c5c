#ifndef LIRA_ARCA_HPP_
#define LIRA_ARCA_HPP_

#include <array>
#include <cstdint>
#include <map>
#include <memory>
#include <string>
#include <vector>

#include "lira/diffrank.hpp"
#include "lira/numcore.hpp"
#include "lira/provider.hpp"

namespace lira::arca {

using num::DenseVector;
using rank::LossResult;

// Per-candidate critic judgment, each score in [1, 10].
struct CriticScores {
  double semantic = 1.0;
  double emotional = 1.0;
  double pragmatic = 1.0;
  bool clamped = false;  // set when raw critic output was out of range

  static CriticScores clamp(double s, double e, double p);
};

struct RewardWeights {
  double alpha = 0.4;
  double beta = 0.3;
  double gamma = 0.3;
  double delta = 1.0;
};

using PolicyFeatures = std::array<double, 4>;  // [semantic, emotional, pragmatic, sim]

// Generic affine -> ReLU -> LayerNorm -> affine block with a flat parameter
// vector [W1 (hidden x in), b1, W2 (out x hidden), b2]. Both the Adaptor
// (in -> 512 -> out) and the Actor head (4 -> 16 -> 1) are instances.
class TwoLayerMlp {
 public:
  TwoLayerMlp(std::size_t in_dim, std::size_t hidden_dim, std::size_t out_dim,
              std::uint64_t seed);

  struct Cache {
    DenseVector input, pre1, relu, normed;
    double ln_mean = 0.0, ln_sigma = 0.0;
  };

  DenseVector forward(const DenseVector& input, Cache* cache = nullptr) const;
  // Contracts grad_out with the Jacobians; adds to grad_params, returns
  // the gradient wrt the input.
  DenseVector backward(const Cache& cache, const DenseVector& grad_out,
                       DenseVector& grad_params) const;

  DenseVector& params() { return params_; }
  const DenseVector& params() const { return params_; }
  void set_params(const DenseVector& p);
  std::size_t param_count() const { return params_.size(); }
  std::size_t in_dim() const { return in_; }
  std::size_t out_dim() const { return out_; }

 private:
  std::size_t in_, hidden_, out_;
  std::size_t w1_, b1_, w2_, b2_;  // offsets into params_
  DenseVector params_;
};

struct ArcaConfig {
  double eta = 1.0;            // encoder-alignment weight
  double lambda_anchor = 1.0;  // anchor weight
  RewardWeights reward;
  double actor_lr = 1e-4;
  double encoder_lr = 5e-5;
  double adaptor_lr = 1e-4;
  double grad_clip = 1.0;
  std::size_t feat_prefix_len = 2;
  std::size_t pool_window = 4;
  std::size_t adaptor_hidden = 512;
  std::size_t shared_dim = 32;
  bool anchor_symmetric = false;  // gradient also on the translation path
  bool use_baseline = false;      // constant REINFORCE baseline
  double baseline = 0.0;
};

// Mean squared Euclidean distance between two path batches.
// grad_feature always filled; grad_translation only when symmetric.
struct AnchorResult {
  double value = 0.0;
  std::vector<DenseVector> grad_feature;
  std::vector<DenseVector> grad_translation;
};
AnchorResult anchor_loss(const std::vector<DenseVector>& feature_path,
                         const std::vector<DenseVector>& translation_path,
                         bool symmetric = false);

// Mean of the first s_feat rows.
DenseVector feature_prefix_pool(const std::vector<DenseVector>& hidden,
                                std::size_t s_feat);

// Temporal pool to cfg rows, flatten, then the MLP. Returns output and the
// caches needed by adaptor_backward.
struct AdaptorCache {
  std::size_t seq_len = 0;
  std::size_t token_dim = 0;
  std::size_t pool_len = 0;
  TwoLayerMlp::Cache mlp;
};
DenseVector adaptor_forward(const TwoLayerMlp& mlp,
                            const std::vector<DenseVector>& sequence,
                            std::size_t pool_window, AdaptorCache* cache = nullptr);
// Returns per-input-row gradients; adds parameter grads to grad_params.
std::vector<DenseVector> adaptor_backward(const TwoLayerMlp& mlp,
                                          const AdaptorCache& cache,
                                          const DenseVector& grad_out,
                                          DenseVector& grad_params);

// -cos(u, v) with gradients wrt both arguments.
struct AlignResult {
  double value = 0.0;
  DenseVector grad_u, grad_v;
};
AlignResult encoder_align_loss(const DenseVector& u_tilde,
                               const DenseVector& v_selected);

// R = 0.1 (alpha s + beta e + gamma p) + delta sim.
double composite_reward(const CriticScores& scores, double sim,
                        const RewardWeights& w);

// Softmax over per-candidate MLP logits.
struct PolicyResult {
  DenseVector logits;
  DenseVector probs;
  std::vector<TwoLayerMlp::Cache> caches;
};
PolicyResult actor_policy(const TwoLayerMlp& actor,
                          const std::vector<PolicyFeatures>& features);

// L = -log pi(action) * (R - baseline); gradient wrt the logits
// (reward treated as a constant).
struct ReinforceResult {
  double value = 0.0;
  DenseVector grad_logits;
};
ReinforceResult reinforce_loss(const DenseVector& probs, std::size_t action,
                               double reward, double baseline = 0.0);

// Pluggable translation-critic contract; deterministic given inputs.
class TranslationCritic {
 public:
  virtual ~TranslationCritic() = default;
  virtual std::vector<CriticScores> score(
      const std::string& query_id, const std::string& source,
      const std::vector<std::string>& candidates) const = 0;
};

// Default stub: scores derived affinely from provider cosine between source
// and candidate, cosine in [0,1] mapped onto [1,10] and clamped.
class EmbeddingSimilarityCritic : public TranslationCritic {
 public:
  explicit EmbeddingSimilarityCritic(const data::EmbeddingProvider* provider)
      : provider_(provider) {}
  std::vector<CriticScores> score(
      const std::string& query_id, const std::string& source,
      const std::vector<std::string>& candidates) const override;

 private:
  const data::EmbeddingProvider* provider_;
};

// Precomputed scores from a line-oriented fixture:
//   query_id candidate_index semantic emotional pragmatic
// '#' starts a comment. Missing records and malformed lines are errors.
class FileCritic : public TranslationCritic {
 public:
  explicit FileCritic(const std::string& path);
  std::vector<CriticScores> score(
      const std::string& query_id, const std::string& source,
      const std::vector<std::string>& candidates) const override;

 private:
  std::map<std::pair<std::string, std::size_t>, CriticScores> table_;
};

// L_RL + eta L_enc + lambda L_anchor (scalar combination; gradients are the
// caller's matching weighted sums, clipped before any update).
LossResult arca_total_loss(const LossResult& rl, const LossResult& enc,
                           const LossResult& anchor, const ArcaConfig& cfg);

}  // namespace lira::arca

#endif  // LIRA_ARCA_HPP_
