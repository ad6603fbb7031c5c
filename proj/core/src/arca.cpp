#include "lira/arca.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <sstream>

#include "lira/errors.hpp"

namespace lira::arca {

namespace {
constexpr double kLnEps = 1e-5;

std::uint64_t splitmix64(std::uint64_t& state) {
  state += 0x9e3779b97f4a7c15ull;
  std::uint64_t z = state;
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ull;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebull;
  return z ^ (z >> 31);
}

double unit_double(std::uint64_t bits) {
  return static_cast<double>(bits >> 11) / 4503599627370496.0 - 1.0;
}
}  // namespace

CriticScores CriticScores::clamp(double s, double e, double p) {
  CriticScores out;
  out.clamped = s < 1.0 || s > 10.0 || e < 1.0 || e > 10.0 || p < 1.0 || p > 10.0;
  out.semantic = std::clamp(s, 1.0, 10.0);
  out.emotional = std::clamp(e, 1.0, 10.0);
  out.pragmatic = std::clamp(p, 1.0, 10.0);
  return out;
}

TwoLayerMlp::TwoLayerMlp(std::size_t in_dim, std::size_t hidden_dim,
                         std::size_t out_dim, std::uint64_t seed)
    : in_(in_dim), hidden_(hidden_dim), out_(out_dim) {
  if (in_ == 0 || hidden_ == 0 || out_ == 0) {
    throw ConfigError("TwoLayerMlp: zero dimension");
  }
  w1_ = 0;
  b1_ = hidden_ * in_;
  w2_ = b1_ + hidden_;
  b2_ = w2_ + out_ * hidden_;
  params_.assign(b2_ + out_, 0.0);
  std::uint64_t state = seed ^ 0x2545f4914f6cdd1dull;
  const double s1 = 1.0 / std::sqrt(static_cast<double>(in_));
  for (std::size_t i = w1_; i < b1_; ++i) params_[i] = unit_double(splitmix64(state)) * s1;
  const double s2 = 1.0 / std::sqrt(static_cast<double>(hidden_));
  for (std::size_t i = w2_; i < b2_; ++i) params_[i] = unit_double(splitmix64(state)) * s2;
}

void TwoLayerMlp::set_params(const DenseVector& p) {
  if (p.size() != params_.size()) throw ConfigError("TwoLayerMlp: param size mismatch");
  params_ = p;
}

DenseVector TwoLayerMlp::forward(const DenseVector& input, Cache* cache) const {
  if (input.size() != in_) throw ConfigError("TwoLayerMlp: input dimension mismatch");
  DenseVector pre1(hidden_, 0.0);
  const double* w1 = params_.data() + w1_;
  const double* b1 = params_.data() + b1_;
  for (std::size_t h = 0; h < hidden_; ++h) {
    double acc = b1[h];
    for (std::size_t j = 0; j < in_; ++j) acc += w1[h * in_ + j] * input[j];
    pre1[h] = acc;
  }
  DenseVector relu(hidden_);
  for (std::size_t h = 0; h < hidden_; ++h) relu[h] = std::max(0.0, pre1[h]);

  double mean = 0.0;
  for (double x : relu) mean += x;
  mean /= static_cast<double>(hidden_);
  double var = 0.0;
  for (double x : relu) var += (x - mean) * (x - mean);
  var /= static_cast<double>(hidden_);
  const double sigma = std::sqrt(var + kLnEps);
  DenseVector normed(hidden_);
  for (std::size_t h = 0; h < hidden_; ++h) normed[h] = (relu[h] - mean) / sigma;

  DenseVector out(out_, 0.0);
  const double* w2 = params_.data() + w2_;
  const double* b2 = params_.data() + b2_;
  for (std::size_t o = 0; o < out_; ++o) {
    double acc = b2[o];
    for (std::size_t h = 0; h < hidden_; ++h) acc += w2[o * hidden_ + h] * normed[h];
    out[o] = acc;
  }
  if (cache) {
    cache->input = input;
    cache->pre1 = std::move(pre1);
    cache->relu = std::move(relu);
    cache->normed = std::move(normed);
    cache->ln_mean = mean;
    cache->ln_sigma = sigma;
  }
  return out;
}

DenseVector TwoLayerMlp::backward(const Cache& cache, const DenseVector& grad_out,
                                  DenseVector& grad_params) const {
  if (grad_out.size() != out_ || grad_params.size() != params_.size()) {
    throw ConfigError("TwoLayerMlp: gradient size mismatch");
  }
  const double* w2 = params_.data() + w2_;
  double* gw2 = grad_params.data() + w2_;
  double* gb2 = grad_params.data() + b2_;
  DenseVector gnormed(hidden_, 0.0);
  for (std::size_t o = 0; o < out_; ++o) {
    gb2[o] += grad_out[o];
    for (std::size_t h = 0; h < hidden_; ++h) {
      gw2[o * hidden_ + h] += grad_out[o] * cache.normed[h];
      gnormed[h] += grad_out[o] * w2[o * hidden_ + h];
    }
  }
  // LayerNorm backward: dx = (g - mean(g) - y * mean(g*y)) / sigma
  double gmean = 0.0, gymean = 0.0;
  for (std::size_t h = 0; h < hidden_; ++h) {
    gmean += gnormed[h];
    gymean += gnormed[h] * cache.normed[h];
  }
  gmean /= static_cast<double>(hidden_);
  gymean /= static_cast<double>(hidden_);
  DenseVector grelu(hidden_);
  for (std::size_t h = 0; h < hidden_; ++h) {
    grelu[h] = (gnormed[h] - gmean - cache.normed[h] * gymean) / cache.ln_sigma;
  }
  // ReLU backward
  for (std::size_t h = 0; h < hidden_; ++h) {
    if (cache.pre1[h] <= 0.0) grelu[h] = 0.0;
  }
  const double* w1 = params_.data() + w1_;
  double* gw1 = grad_params.data() + w1_;
  double* gb1 = grad_params.data() + b1_;
  DenseVector ginput(in_, 0.0);
  for (std::size_t h = 0; h < hidden_; ++h) {
    gb1[h] += grelu[h];
    for (std::size_t j = 0; j < in_; ++j) {
      gw1[h * in_ + j] += grelu[h] * cache.input[j];
      ginput[j] += grelu[h] * w1[h * in_ + j];
    }
  }
  return ginput;
}

AnchorResult anchor_loss(const std::vector<DenseVector>& feature_path,
                         const std::vector<DenseVector>& translation_path,
                         bool symmetric) {
  if (feature_path.empty() || feature_path.size() != translation_path.size()) {
    throw ConfigError("anchor_loss: batch size mismatch");
  }
  const double b = static_cast<double>(feature_path.size());
  AnchorResult out;
  out.grad_feature.resize(feature_path.size());
  if (symmetric) out.grad_translation.resize(feature_path.size());
  for (std::size_t i = 0; i < feature_path.size(); ++i) {
    const auto& g = feature_path[i];
    const auto& h = translation_path[i];
    if (g.size() != h.size()) throw ConfigError("anchor_loss: dimension mismatch");
    out.grad_feature[i].assign(g.size(), 0.0);
    if (symmetric) out.grad_translation[i].assign(g.size(), 0.0);
    for (std::size_t j = 0; j < g.size(); ++j) {
      const double d = g[j] - h[j];
      out.value += d * d / b;
      out.grad_feature[i][j] = 2.0 * d / b;
      if (symmetric) out.grad_translation[i][j] = -2.0 * d / b;
    }
  }
  return out;
}

DenseVector feature_prefix_pool(const std::vector<DenseVector>& hidden,
                                std::size_t s_feat) {
  if (s_feat == 0) throw ConfigError("feature_prefix_pool: s_feat must be positive");
  if (hidden.size() < s_feat) {
    throw ConfigError("feature_prefix_pool: sequence shorter than prefix");
  }
  std::vector<int> mask(hidden.size(), 0);
  for (std::size_t i = 0; i < s_feat; ++i) mask[i] = 1;
  return num::mean_pool(hidden, mask);
}

DenseVector adaptor_forward(const TwoLayerMlp& mlp,
                            const std::vector<DenseVector>& sequence,
                            std::size_t pool_window, AdaptorCache* cache) {
  if (sequence.empty()) throw ConfigError("adaptor_forward: empty sequence");
  const auto pooled = num::temporal_pool(sequence, pool_window);
  DenseVector flat;
  flat.reserve(pool_window * pooled[0].size());
  for (const auto& row : pooled) flat.insert(flat.end(), row.begin(), row.end());
  if (cache) {
    cache->seq_len = sequence.size();
    cache->token_dim = pooled[0].size();
    cache->pool_len = pool_window;
    return mlp.forward(flat, &cache->mlp);
  }
  return mlp.forward(flat);
}

std::vector<DenseVector> adaptor_backward(const TwoLayerMlp& mlp,
                                          const AdaptorCache& cache,
                                          const DenseVector& grad_out,
                                          DenseVector& grad_params) {
  const DenseVector gflat = mlp.backward(cache.mlp, grad_out, grad_params);
  const std::size_t n = cache.seq_len;
  const std::size_t d = cache.token_dim;
  const std::size_t out_len = cache.pool_len;
  std::vector<DenseVector> grows(n, DenseVector(d, 0.0));
  for (std::size_t i = 0; i < out_len; ++i) {
    const std::size_t lo = (i * n) / out_len;
    const std::size_t hi = ((i + 1) * n + out_len - 1) / out_len;
    const double inv = 1.0 / static_cast<double>(hi - lo);
    for (std::size_t r = lo; r < hi; ++r) {
      for (std::size_t j = 0; j < d; ++j) {
        grows[r][j] += gflat[i * d + j] * inv;
      }
    }
  }
  return grows;
}

AlignResult encoder_align_loss(const DenseVector& u_tilde,
                               const DenseVector& v_selected) {
  const double nu = num::norm2(u_tilde);
  const double nv = num::norm2(v_selected);
  if (nu == 0.0 || nv == 0.0) throw ConfigError("encoder_align_loss: zero vector");
  const double c = num::dot(u_tilde, v_selected) / (nu * nv);
  AlignResult out;
  out.value = -c;
  out.grad_u.resize(u_tilde.size());
  out.grad_v.resize(v_selected.size());
  for (std::size_t j = 0; j < u_tilde.size(); ++j) {
    out.grad_u[j] = -(v_selected[j] / (nu * nv) - c * u_tilde[j] / (nu * nu));
    out.grad_v[j] = -(u_tilde[j] / (nu * nv) - c * v_selected[j] / (nv * nv));
  }
  return out;
}

double composite_reward(const CriticScores& scores, double sim,
                        const RewardWeights& w) {
  return 0.1 * (w.alpha * scores.semantic + w.beta * scores.emotional +
                w.gamma * scores.pragmatic) +
         w.delta * sim;
}

PolicyResult actor_policy(const TwoLayerMlp& actor,
                          const std::vector<PolicyFeatures>& features) {
  if (features.empty()) throw ConfigError("actor_policy: no candidates");
  PolicyResult out;
  out.logits.reserve(features.size());
  out.caches.resize(features.size());
  for (std::size_t k = 0; k < features.size(); ++k) {
    const DenseVector in(features[k].begin(), features[k].end());
    const DenseVector logit = actor.forward(in, &out.caches[k]);
    if (!std::isfinite(logit[0])) throw NumericError("actor_policy: non-finite logit");
    out.logits.push_back(logit[0]);
  }
  const double mx = *std::max_element(out.logits.begin(), out.logits.end());
  double z = 0.0;
  out.probs.resize(out.logits.size());
  for (std::size_t k = 0; k < out.logits.size(); ++k) {
    out.probs[k] = std::exp(out.logits[k] - mx);
    z += out.probs[k];
  }
  for (double& p : out.probs) p /= z;
  return out;
}

ReinforceResult reinforce_loss(const DenseVector& probs, std::size_t action,
                               double reward, double baseline) {
  if (action >= probs.size()) throw ConfigError("reinforce_loss: action out of range");
  if (probs[action] <= 0.0) throw ConfigError("reinforce_loss: zero-probability action");
  ReinforceResult out;
  const double advantage = reward - baseline;
  out.value = -std::log(probs[action]) * advantage;
  out.grad_logits.resize(probs.size());
  for (std::size_t k = 0; k < probs.size(); ++k) {
    const double indicator = (k == action) ? 1.0 : 0.0;
    out.grad_logits[k] = advantage * (probs[k] - indicator);
  }
  return out;
}

std::vector<CriticScores> EmbeddingSimilarityCritic::score(
    const std::string& /*query_id*/, const std::string& source,
    const std::vector<std::string>& candidates) const {
  if (candidates.empty()) throw ConfigError("critic: no candidates");
  const DenseVector src = provider_->embed(source);
  std::vector<CriticScores> out;
  out.reserve(candidates.size());
  for (const auto& cand : candidates) {
    const double c = num::cosine(src, provider_->embed(cand));
    // affine map [0,1] -> [1,10], clamped
    const double s = 1.0 + 9.0 * c;
    out.push_back(CriticScores::clamp(s, s, s));
  }
  return out;
}

FileCritic::FileCritic(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw DataError("FileCritic: cannot open " + path);
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    const auto hash = line.find('#');
    if (hash != std::string::npos) line.erase(hash);
    std::istringstream iss(line);
    std::string qid;
    if (!(iss >> qid)) continue;  // blank line
    std::size_t idx;
    double s, e, p;
    if (!(iss >> idx >> s >> e >> p)) {
      throw DataError("FileCritic: malformed record at " + path + ":" +
                      std::to_string(lineno));
    }
    std::string extra;
    if (iss >> extra) {
      throw DataError("FileCritic: trailing fields at " + path + ":" +
                      std::to_string(lineno));
    }
    table_[{qid, idx}] = CriticScores::clamp(s, e, p);
  }
}

std::vector<CriticScores> FileCritic::score(
    const std::string& query_id, const std::string& /*source*/,
    const std::vector<std::string>& candidates) const {
  std::vector<CriticScores> out;
  out.reserve(candidates.size());
  for (std::size_t k = 0; k < candidates.size(); ++k) {
    auto it = table_.find({query_id, k});
    if (it == table_.end()) {
      throw DataError("FileCritic: missing scores for query '" + query_id +
                      "' candidate " + std::to_string(k));
    }
    out.push_back(it->second);
  }
  return out;
}

LossResult arca_total_loss(const LossResult& rl, const LossResult& enc,
                           const LossResult& anchor, const ArcaConfig& cfg) {
  LossResult out;
  out.value = rl.value + cfg.eta * enc.value + cfg.lambda_anchor * anchor.value;
  if (!std::isfinite(out.value)) throw NumericError("arca_total_loss: non-finite loss");
  out.diagnostics["rl"] = rl.value;
  out.diagnostics["enc"] = enc.value;
  out.diagnostics["anchor"] = anchor.value;
  return out;
}

}  // namespace lira::arca
