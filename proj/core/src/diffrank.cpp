#include "lira/diffrank.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "lira/errors.hpp"

namespace lira::rank {

namespace {

constexpr double kLn2 = 0.6931471805599453;

double log2_discount(double r) { return kLn2 / std::log1p(r); }

// d/dr of 1/log2(1+r).
double log2_discount_grad(double r) {
  const double l = std::log1p(r);
  return -kLn2 / ((1.0 + r) * l * l);
}

}  // namespace

std::size_t CandidateList::positive_index() const {
  std::size_t idx = labels.size();
  for (std::size_t i = 0; i < labels.size(); ++i) {
    if (labels[i] == 1) {
      if (idx != labels.size()) throw ConfigError("CandidateList: multiple positives");
      idx = i;
    }
  }
  if (idx == labels.size()) throw ConfigError("CandidateList: no positive label");
  return idx;
}

void CandidateList::validate() const {
  if (scores.size() != labels.size()) {
    throw ConfigError("CandidateList: scores/labels size mismatch");
  }
  if (scores.empty()) throw ConfigError("CandidateList: empty");
  num::require_finite(scores, "CandidateList.scores");
  positive_index();
}

DenseVector soft_rank(const DenseVector& scores, double tau,
                      RankDirection dir) {
  if (tau <= 0.0) throw ConfigError("soft_rank: tau must be positive");
  const std::size_t n = scores.size();
  const double sign = (dir == RankDirection::Descending) ? 1.0 : -1.0;
  DenseVector r(n, 1.0);
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = 0; j < n; ++j) {
      if (j == i) continue;
      r[i] += num::sigmoid(sign * (scores[j] - scores[i]) / tau);
    }
  }
  return r;
}

std::vector<DenseVector> soft_rank_jacobian(const DenseVector& scores,
                                            double tau, RankDirection dir) {
  if (tau <= 0.0) throw ConfigError("soft_rank_jacobian: tau must be positive");
  const std::size_t n = scores.size();
  const double sign = (dir == RankDirection::Descending) ? 1.0 : -1.0;
  std::vector<DenseVector> jac(n, DenseVector(n, 0.0));
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = 0; j < n; ++j) {
      if (j == i) continue;
      const double g = num::sigmoid_grad(sign * (scores[j] - scores[i]) / tau) / tau;
      jac[i][j] += sign * g;
      jac[i][i] -= sign * g;
    }
  }
  return jac;
}

double exact_ndcg_at_k(const std::vector<int>& labels,
                       const DenseVector& scores, std::size_t k,
                       bool* no_positives) {
  if (labels.size() != scores.size() || labels.empty()) {
    throw ConfigError("exact_ndcg_at_k: bad inputs");
  }
  if (k == 0) throw ConfigError("exact_ndcg_at_k: k must be positive");
  const std::size_t n = labels.size();
  if (no_positives) *no_positives = false;
  if (std::none_of(labels.begin(), labels.end(), [](int y) { return y != 0; })) {
    if (no_positives) *no_positives = true;
    return 0.0;
  }
  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
    return scores[a] > scores[b];
  });
  double dcg = 0.0;
  for (std::size_t t = 0; t < std::min(k, n); ++t) {
    const double gain = std::exp2(static_cast<double>(labels[order[t]])) - 1.0;
    dcg += gain / std::log2(2.0 + static_cast<double>(t));
  }
  std::vector<int> ideal = labels;
  std::sort(ideal.begin(), ideal.end(), std::greater<int>());
  double idcg = 0.0;
  for (std::size_t t = 0; t < std::min(k, n); ++t) {
    const double gain = std::exp2(static_cast<double>(ideal[t])) - 1.0;
    idcg += gain / std::log2(2.0 + static_cast<double>(t));
  }
  return dcg / idcg;
}

DenseVector safe_negative_weights(const CandidateList& cand,
                                  const RetrievalLossConfig& cfg) {
  cand.validate();
  const std::size_t pos = cand.positive_index();
  const double theta = cand.scores[pos] - cfg.delta_safe;
  DenseVector w(cand.scores.size(), 1.0);
  for (std::size_t i = 0; i < cand.scores.size(); ++i) {
    if (cand.labels[i] == 0) {
      w[i] = num::sigmoid((theta - cand.scores[i]) / cfg.beta_safe);
    }
  }
  return w;
}

LossResult soft_ndcg_loss(const CandidateList& cand,
                          const RetrievalLossConfig& cfg) {
  cand.validate();
  const std::size_t pos = cand.positive_index();
  const std::size_t n = cand.scores.size();
  const double theta = cand.scores[pos] - cfg.delta_safe;

  // Active set: optionally drop near negatives (hard threshold variant).
  std::vector<std::size_t> active;
  active.reserve(n);
  for (std::size_t i = 0; i < n; ++i) {
    if (cfg.drop_near_negatives && cand.labels[i] == 0 &&
        cand.scores[i] >= theta) {
      continue;
    }
    active.push_back(i);
  }
  const std::size_t na = active.size();
  DenseVector s(na);
  std::vector<int> y(na);
  for (std::size_t a = 0; a < na; ++a) {
    s[a] = cand.scores[active[a]];
    y[a] = cand.labels[active[a]];
  }

  const DenseVector r = soft_rank(s, cfg.tau, RankDirection::Descending);
  const auto jac = soft_rank_jacobian(s, cfg.tau, RankDirection::Descending);

  const double kk = static_cast<double>(cfg.k);
  DenseVector disc(na), ddisc(na), mask(na), dmask(na), w(na, 1.0);
  for (std::size_t a = 0; a < na; ++a) {
    disc[a] = log2_discount(r[a]);
    ddisc[a] = log2_discount_grad(r[a]);
    const double z = (kk + 0.5 - r[a]) / cfg.tau_k;
    mask[a] = num::sigmoid(z);
    dmask[a] = -num::sigmoid_grad(z) / cfg.tau_k;
    if (y[a] == 0 && !cfg.drop_near_negatives) {
      w[a] = num::sigmoid((theta - s[a]) / cfg.beta_safe);
    }
  }

  // IDCG: hard-ranked ideal ordering of the true labels, truncated at k.
  std::vector<int> ideal = cand.labels;
  std::sort(ideal.begin(), ideal.end(), std::greater<int>());
  double idcg = 0.0;
  for (std::size_t t = 0; t < std::min(cfg.k, n); ++t) {
    idcg += (std::exp2(static_cast<double>(ideal[t])) - 1.0) /
            std::log2(2.0 + static_cast<double>(t));
  }
  if (idcg <= 0.0) throw ConfigError("soft_ndcg_loss: zero IDCG");
  const double denom = std::max(idcg, cfg.idcg_epsilon);

  DenseVector gains(na);
  double dcg = 0.0;
  for (std::size_t a = 0; a < na; ++a) {
    gains[a] = std::exp2(static_cast<double>(y[a])) - 1.0;
    dcg += gains[a] * w[a] * disc[a] * mask[a];
  }

  LossResult out;
  out.value = 1.0 - dcg / denom;
  out.grad_scores.assign(n, 0.0);

  // d DCG / d s_b through ranks, plus through the safety weights.
  DenseVector grad_active(na, 0.0);
  std::size_t pos_active = na;
  for (std::size_t a = 0; a < na; ++a) {
    if (active[a] == pos) pos_active = a;
  }
  for (std::size_t a = 0; a < na; ++a) {
    if (gains[a] == 0.0) continue;
    const double coeff = gains[a] * w[a] * (ddisc[a] * mask[a] + disc[a] * dmask[a]);
    for (std::size_t b = 0; b < na; ++b) {
      grad_active[b] += coeff * jac[a][b];
    }
    if (y[a] == 0 && !cfg.drop_near_negatives) {
      const double wg = num::sigmoid_grad((theta - s[a]) / cfg.beta_safe) / cfg.beta_safe;
      const double base = gains[a] * disc[a] * mask[a];
      grad_active[a] -= base * wg;
      if (pos_active != na) grad_active[pos_active] += base * wg;
    }
  }
  for (std::size_t a = 0; a < na; ++a) {
    out.grad_scores[active[a]] = -grad_active[a] / denom;
  }
  out.diagnostics["soft_ndcg"] = dcg / denom;
  out.diagnostics["idcg"] = idcg;
  return out;
}

LossResult hinge_top1(const CandidateList& cand, double gamma) {
  cand.validate();
  const std::size_t pos = cand.positive_index();
  LossResult out;
  out.grad_scores.assign(cand.scores.size(), 0.0);
  std::size_t hardest = cand.scores.size();
  for (std::size_t i = 0; i < cand.scores.size(); ++i) {
    if (cand.labels[i] != 0) continue;
    if (hardest == cand.scores.size() || cand.scores[i] > cand.scores[hardest]) {
      hardest = i;
    }
  }
  if (hardest == cand.scores.size()) {
    out.diagnostics["no_negatives"] = 1.0;
    return out;
  }
  const double margin = gamma + cand.scores[hardest] - cand.scores[pos];
  if (margin > 0.0) {
    out.value = margin;
    out.grad_scores[hardest] = 1.0;
    out.grad_scores[pos] = -1.0;
  }
  out.diagnostics["hardest_neg"] = cand.scores[hardest];
  return out;
}

LossResult mean_var_reg(const DenseVector& scores, double nu) {
  if (scores.size() < 2) throw ConfigError("mean_var_reg: need at least 2 scores");
  const double n = static_cast<double>(scores.size());
  double mean = 0.0;
  for (double x : scores) mean += x;
  mean /= n;
  double var = 0.0;
  for (double x : scores) var += (x - mean) * (x - mean);
  var /= n;
  const double dev = var - nu;
  const double sgn = (dev > 0.0) ? 1.0 : (dev < 0.0 ? -1.0 : 0.0);
  LossResult out;
  out.value = mean * mean + std::abs(dev);
  out.grad_scores.resize(scores.size());
  for (std::size_t i = 0; i < scores.size(); ++i) {
    out.grad_scores[i] = 2.0 * mean / n + sgn * 2.0 * (scores[i] - mean) / n;
  }
  out.diagnostics["score_mean"] = mean;
  out.diagnostics["score_var"] = var;
  return out;
}

LossResult retrieval_loss(const CandidateList& cand,
                          const RetrievalLossConfig& cfg) {
  LossResult ndcg = soft_ndcg_loss(cand, cfg);
  LossResult out;
  out.value = ndcg.value;
  out.grad_scores = ndcg.grad_scores;
  out.diagnostics["ndcg"] = ndcg.value;
  if (cfg.lambda_h > 0.0) {
    LossResult h = hinge_top1(cand, cfg.gamma_hinge);
    out.value += cfg.lambda_h * h.value;
    for (std::size_t i = 0; i < out.grad_scores.size(); ++i) {
      out.grad_scores[i] += cfg.lambda_h * h.grad_scores[i];
    }
    out.diagnostics["hinge"] = h.value;
  }
  if (cfg.lambda_r > 0.0 && cand.scores.size() >= 2) {
    LossResult mv = mean_var_reg(cand.scores, cfg.nu);
    out.value += cfg.lambda_r * mv.value;
    for (std::size_t i = 0; i < out.grad_scores.size(); ++i) {
      out.grad_scores[i] += cfg.lambda_r * mv.grad_scores[i];
    }
    out.diagnostics["mv"] = mv.value;
  }
  return out;
}

namespace {

struct PearsonParts {
  double mean_a = 0.0, mean_b = 0.0;
  double cov = 0.0, var_a = 0.0, var_b = 0.0;
  double r = 0.0;
};

PearsonParts pearson_parts(const std::vector<double>& a,
                           const std::vector<double>& b, double epsilon) {
  if (a.size() != b.size()) throw ConfigError("pearson: length mismatch");
  if (a.size() < 2) throw ConfigError("pearson: need at least 2 samples");
  const double n = static_cast<double>(a.size());
  PearsonParts p;
  for (std::size_t i = 0; i < a.size(); ++i) {
    p.mean_a += a[i];
    p.mean_b += b[i];
  }
  p.mean_a /= n;
  p.mean_b /= n;
  for (std::size_t i = 0; i < a.size(); ++i) {
    const double da = a[i] - p.mean_a;
    const double db = b[i] - p.mean_b;
    p.cov += da * db;
    p.var_a += da * da;
    p.var_b += db * db;
  }
  p.cov /= n;
  p.var_a /= n;
  p.var_b /= n;
  p.r = p.cov / (std::sqrt(p.var_a + epsilon) * std::sqrt(p.var_b + epsilon));
  return p;
}

}  // namespace

double pearson(const std::vector<double>& a, const std::vector<double>& b,
               double epsilon) {
  return pearson_parts(a, b, epsilon).r;
}

DenseVector pearson_grad_a(const std::vector<double>& a,
                           const std::vector<double>& b, double epsilon) {
  const PearsonParts p = pearson_parts(a, b, epsilon);
  const double n = static_cast<double>(a.size());
  const double denom = std::sqrt(p.var_a + epsilon) * std::sqrt(p.var_b + epsilon);
  DenseVector g(a.size());
  for (std::size_t i = 0; i < a.size(); ++i) {
    const double da = a[i] - p.mean_a;
    const double db = b[i] - p.mean_b;
    g[i] = db / (n * denom) - p.r * da / (n * (p.var_a + epsilon));
  }
  return g;
}

DenseVector average_tie_ranks(const std::vector<double>& values) {
  if (values.empty()) throw ConfigError("average_tie_ranks: empty input");
  const std::size_t n = values.size();
  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
    return values[a] < values[b];
  });
  DenseVector ranks(n, 0.0);
  std::size_t i = 0;
  while (i < n) {
    std::size_t j = i;
    while (j + 1 < n && values[order[j + 1]] == values[order[i]]) ++j;
    // positions i..j (0-based) share the mean of ranks i+1..j+1
    const double mean_rank = static_cast<double>(i + j) / 2.0 + 1.0;
    for (std::size_t t = i; t <= j; ++t) ranks[order[t]] = mean_rank;
    i = j + 1;
  }
  return ranks;
}

double soft_spearman(const DenseVector& pred, const std::vector<double>& gold,
                     double tau, double epsilon) {
  if (pred.size() != gold.size()) throw ConfigError("soft_spearman: length mismatch");
  const DenseVector pr = soft_rank(pred, tau, RankDirection::Ascending);
  const DenseVector gr = average_tie_ranks(gold);
  return pearson(std::vector<double>(pr.begin(), pr.end()),
                 std::vector<double>(gr.begin(), gr.end()), epsilon);
}

CorrLossOutcome corr_loss(const DenseVector& pred_batch,
                          const std::vector<double>& gold_batch,
                          const std::vector<double>& pred_hist,
                          const std::vector<double>& gold_hist,
                          const CorrLossConfig& cfg) {
  if (pred_batch.size() != gold_batch.size()) {
    throw ConfigError("corr_loss: batch length mismatch");
  }
  if (pred_hist.size() != gold_hist.size()) {
    throw ConfigError("corr_loss: history length mismatch");
  }
  const std::size_t m = pred_hist.size();
  const std::size_t total = m + pred_batch.size();
  CorrLossOutcome out;
  if (total < cfg.n_min) {
    out.skipped = true;
    return out;
  }
  std::vector<double> p(pred_hist);
  p.insert(p.end(), pred_batch.begin(), pred_batch.end());
  std::vector<double> t(gold_hist);
  t.insert(t.end(), gold_batch.begin(), gold_batch.end());

  const PearsonParts pp = pearson_parts(p, t, cfg.epsilon);
  if (pp.var_a == 0.0 || pp.var_b == 0.0) {
    throw ConfigError("corr_loss: constant predictions or golds");
  }
  const double r = pp.r;
  const DenseVector dr_dp = pearson_grad_a(p, t, cfg.epsilon);

  const DenseVector ranks = soft_rank(p, cfg.tau, RankDirection::Ascending);
  const auto rank_jac = soft_rank_jacobian(p, cfg.tau, RankDirection::Ascending);
  const DenseVector gold_ranks = average_tie_ranks(t);
  const std::vector<double> rv(ranks.begin(), ranks.end());
  const std::vector<double> gv(gold_ranks.begin(), gold_ranks.end());
  const double rs = pearson(rv, gv, cfg.epsilon);
  const DenseVector drs_dR = pearson_grad_a(rv, gv, cfg.epsilon);

  out.result.value = cfg.alpha_mix * (1.0 - r) + (1.0 - cfg.alpha_mix) * (1.0 - rs);
  out.result.diagnostics["pearson"] = r;
  out.result.diagnostics["soft_spearman"] = rs;
  out.result.diagnostics["n_effective"] = static_cast<double>(total);

  out.result.grad_scores.assign(pred_batch.size(), 0.0);
  for (std::size_t i = 0; i < pred_batch.size(); ++i) {
    const std::size_t g = m + i;
    double drs_dpg = 0.0;
    for (std::size_t j = 0; j < total; ++j) {
      drs_dpg += drs_dR[j] * rank_jac[j][g];
    }
    out.result.grad_scores[i] =
        -cfg.alpha_mix * dr_dp[g] - (1.0 - cfg.alpha_mix) * drs_dpg;
  }
  return out;
}

}  // namespace lira::rank
