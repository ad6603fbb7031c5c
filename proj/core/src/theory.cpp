#include "lira/theory.hpp"

#include <algorithm>
#include <cmath>
#include <set>

#include "lira/data.hpp"
#include "lira/errors.hpp"

namespace lira::theory {

namespace {

struct Rng {
  std::uint64_t state;
  explicit Rng(std::uint64_t seed) : state(seed ^ 0x9e3779b97f4a7c15ull) {}
  std::uint64_t next() {
    state += 0x9e3779b97f4a7c15ull;
    std::uint64_t z = state;
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ull;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebull;
    return z ^ (z >> 31);
  }
  double uniform() { return static_cast<double>(next() >> 11) / 9007199254740992.0; }
  std::size_t below(std::size_t n) { return static_cast<std::size_t>(next() % n); }
};

}  // namespace

double deviation_bound(const BoundInputs& inp) {
  if (inp.epsilon1 < 0.0 || inp.epsilon2 < 0.0 || inp.c_const < 0.0 ||
      inp.kappa <= 0.0) {
    throw ConfigError("deviation_bound: negative inputs");
  }
  return inp.epsilon1 + inp.kappa * inp.c_const * std::sqrt(2.0 * inp.epsilon2);
}

double downstream_bound(const BoundInputs& inp) {
  if (inp.l_loc < 0.0) throw ConfigError("downstream_bound: negative Lipschitz constant");
  return inp.l_loc * deviation_bound(inp);
}

void DiscreteDist::validate() const {
  if (probabilities.empty()) throw DataError("distribution: empty support");
  double sum = 0.0;
  for (double p : probabilities) {
    if (!std::isfinite(p) || p < 0.0) {
      throw DataError("distribution: entries must be finite and non-negative");
    }
    sum += p;
  }
  if (std::fabs(sum - 1.0) > 1e-12) {
    throw DataError("distribution: probabilities must sum to 1");
  }
}

double kl_divergence(const DiscreteDist& p, const DiscreteDist& q,
                     bool* support_violation) {
  p.validate();
  q.validate();
  if (p.probabilities.size() != q.probabilities.size()) {
    throw DataError("kl_divergence: support size mismatch");
  }
  if (support_violation) *support_violation = false;
  double kl = 0.0;
  for (std::size_t i = 0; i < p.probabilities.size(); ++i) {
    const double pi = p.probabilities[i];
    if (pi == 0.0) continue;
    const double qi = q.probabilities[i];
    if (qi == 0.0) {
      if (support_violation) *support_violation = true;
      return std::numeric_limits<double>::infinity();
    }
    kl += pi * std::log(pi / qi);
  }
  return std::max(kl, 0.0);
}

double total_variation(const DiscreteDist& p, const DiscreteDist& q) {
  p.validate();
  q.validate();
  if (p.probabilities.size() != q.probabilities.size()) {
    throw DataError("total_variation: support size mismatch");
  }
  double sum = 0.0;
  for (std::size_t i = 0; i < p.probabilities.size(); ++i) {
    sum += std::fabs(p.probabilities[i] - q.probabilities[i]);
  }
  return 0.5 * sum;
}

PinskerResult pinsker_check(const DiscreteDist& p, const DiscreteDist& q) {
  PinskerResult out;
  out.tv = total_variation(p, q);
  const double kl = kl_divergence(p, q);
  out.sqrt_half_kl = std::isinf(kl) ? kl : std::sqrt(kl / 2.0);
  out.holds = out.tv <= out.sqrt_half_kl + 1e-12;
  return out;
}

StatSummary estimate_c(const data::EmbeddingProvider& provider,
                       const std::vector<std::string>& corpus) {
  std::vector<double> norms;
  for (const auto& text : corpus) {
    if (data::tokenize(text).empty()) continue;
    norms.push_back(num::norm2(provider.embed(text)));
  }
  if (norms.empty()) throw DataError("estimate_c: no usable sentences");
  return num::summarize(norms);
}

namespace {

// One random single-token (or single-character) edit in place.
// never_empty: delete is disallowed when only one unit remains.
void apply_edit(std::vector<std::string>& units,
                const std::vector<std::string>& vocab, Rng& rng) {
  std::size_t op = units.empty() ? 1 : rng.below(3);
  if (op == 2 && units.size() <= 1) op = rng.below(2);
  switch (op) {
    case 0: {  // substitute
      units[rng.below(units.size())] = vocab[rng.below(vocab.size())];
      break;
    }
    case 1: {  // insert
      units.insert(units.begin() + static_cast<std::ptrdiff_t>(rng.below(units.size() + 1)),
                   vocab[rng.below(vocab.size())]);
      break;
    }
    default: {  // delete
      units.erase(units.begin() + static_cast<std::ptrdiff_t>(rng.below(units.size())));
      break;
    }
  }
}

std::string join_units(const std::vector<std::string>& units, bool char_level) {
  std::string s;
  for (std::size_t i = 0; i < units.size(); ++i) {
    if (i && !char_level) s += ' ';
    s += units[i];
  }
  return s;
}

}  // namespace

LipschitzReport estimate_local_lipschitz(const data::EmbeddingProvider& provider,
                                         const std::vector<std::string>& corpus,
                                         const LipschitzConfig& cfg) {
  if (cfg.delta == 0) throw ConfigError("estimate_local_lipschitz: delta must be >= 1");
  if (cfg.q <= 0.0 || cfg.q >= 1.0) {
    throw ConfigError("estimate_local_lipschitz: quantile level must be in (0,1)");
  }
  std::set<std::string> vocab_set;
  for (const auto& text : corpus) {
    if (cfg.character_level) {
      for (char ch : text) {
        if (ch != ' ') vocab_set.emplace(1, ch);
      }
    } else {
      for (auto& t : data::tokenize(text)) vocab_set.insert(std::move(t));
    }
  }
  if (vocab_set.empty()) throw DataError("estimate_local_lipschitz: empty corpus");
  const std::vector<std::string> vocab(vocab_set.begin(), vocab_set.end());

  Rng rng(cfg.seed);
  LipschitzReport report;
  std::vector<double> maxima;
  for (const auto& text : corpus) {
    std::vector<std::string> units;
    if (cfg.character_level) {
      for (char ch : text) units.emplace_back(1, ch);
    } else {
      units = data::tokenize(text);
    }
    if (units.empty()) {
      ++report.excluded;
      continue;
    }
    const DenseVector base = provider.embed(text);
    double best = -1.0;
    for (std::size_t s = 0; s < cfg.samples_per_sentence; ++s) {
      const std::size_t edits = 1 + rng.below(cfg.delta);
      for (int attempt = 0; attempt < 4; ++attempt) {
        std::vector<std::string> pert = units;
        for (std::size_t e = 0; e < edits; ++e) apply_edit(pert, vocab, rng);
        const std::size_t dist =
            cfg.character_level
                ? data::char_edit_distance(text, join_units(pert, true))
                : data::token_edit_distance(units, pert);
        if (dist == 0 || dist > cfg.delta || pert.empty()) continue;
        const DenseVector other = provider.embed(join_units(pert, cfg.character_level));
        double sq = 0.0;
        for (std::size_t i = 0; i < base.size(); ++i) {
          const double d = base[i] - other[i];
          sq += d * d;
        }
        best = std::max(best, std::sqrt(sq) / static_cast<double>(dist));
        break;
      }
    }
    if (best < 0.0) {
      ++report.excluded;
    } else {
      maxima.push_back(best);
    }
  }
  if (maxima.empty()) {
    throw DataError("estimate_local_lipschitz: no sentence produced a valid neighbor");
  }
  report.summary = num::summarize(maxima);
  report.quantile = num::quantile(maxima, cfg.q);
  return report;
}

double gaussian_mutual_info(const GaussianChannelModel& model, Observed obs,
                            bool bits) {
  if (!(model.signal_var > 0.0) || !std::isfinite(model.signal_var)) {
    throw ConfigError("gaussian_mutual_info: signal variance must be positive finite");
  }
  if (!(model.var_g > 0.0) || !(model.var_h > 0.0)) {
    throw ConfigError("gaussian_mutual_info: noise variances must be positive");
  }
  auto snr = [&](double var) {
    return std::isinf(var) ? 0.0 : model.signal_var / var;
  };
  double total_snr = 0.0;
  switch (obs) {
    case Observed::G: total_snr = snr(model.var_g); break;
    case Observed::H: total_snr = snr(model.var_h); break;
    case Observed::Both: total_snr = snr(model.var_g) + snr(model.var_h); break;
  }
  const double nats = 0.5 * std::log1p(total_snr);
  return bits ? nats / std::log(2.0) : nats;
}

double info_gain(const GaussianChannelModel& model, bool bits) {
  return std::max(0.0, gaussian_mutual_info(model, Observed::Both, bits) -
                           gaussian_mutual_info(model, Observed::G, bits));
}

namespace {

struct BoundInstance {
  std::vector<double> p, q;            // distributions over the alphabet
  std::vector<DenseVector> phi;        // non-negative feature rows, one per symbol
  DenseVector shift;                   // anchoring perturbation, norm = epsilon1
  double epsilon1 = 0.0;

  // lhs = || mu_p - (mu_q + shift) ||,  bound = eps1 + C sqrt(2 KL(p||q)).
  double margin() const {
    const std::size_t a = p.size(), d = phi[0].size();
    DenseVector diff(d, 0.0);
    for (std::size_t i = 0; i < a; ++i) {
      for (std::size_t j = 0; j < d; ++j) diff[j] += (p[i] - q[i]) * phi[i][j];
    }
    double lhs_sq = 0.0;
    for (std::size_t j = 0; j < d; ++j) {
      const double v = diff[j] - shift[j];
      lhs_sq += v * v;
    }
    double c_sq = 0.0, kl = 0.0;
    for (std::size_t i = 0; i < a; ++i) {
      double row = 0.0;
      for (double x : phi[i]) row += x * x;
      c_sq = std::max(c_sq, row);
      if (p[i] > 0.0) kl += p[i] * std::log(p[i] / q[i]);
    }
    kl = std::max(kl, 0.0);
    const double bound = epsilon1 + std::sqrt(c_sq) * std::sqrt(2.0 * kl);
    return std::sqrt(lhs_sq) - bound;
  }
};

void normalize_dist(std::vector<double>& v) {
  double sum = 0.0;
  for (double x : v) sum += x;
  for (double& x : v) x /= sum;
}

BoundInstance random_instance(Rng& rng, std::size_t max_alphabet,
                              std::size_t max_feature_dim) {
  BoundInstance inst;
  const std::size_t a = 2 + rng.below(max_alphabet - 1);
  const std::size_t d = 1 + rng.below(max_feature_dim);
  inst.p.resize(a);
  inst.q.resize(a);
  for (auto& x : inst.p) x = 1e-3 + rng.uniform();
  for (auto& x : inst.q) x = 1e-3 + rng.uniform();
  if (rng.below(2) == 0) {  // peaked variant stresses the large-KL regime
    for (auto& x : inst.p) x = x * x * x * x;
    for (auto& x : inst.p) x += 1e-6;
  }
  normalize_dist(inst.p);
  normalize_dist(inst.q);
  inst.phi.assign(a, DenseVector(d));
  for (auto& row : inst.phi) {
    for (auto& x : row) x = rng.uniform();
  }
  inst.epsilon1 = 0.5 * rng.uniform();
  inst.shift.resize(d);
  double sq = 0.0;
  for (auto& x : inst.shift) {
    x = rng.uniform() - 0.5;
    sq += x * x;
  }
  const double scale = sq > 0.0 ? inst.epsilon1 / std::sqrt(sq) : 0.0;
  for (auto& x : inst.shift) x *= scale;
  return inst;
}

}  // namespace

AuditReport bound_audit(std::size_t trials, std::uint64_t seed,
                        std::size_t max_alphabet, std::size_t max_feature_dim) {
  if (trials == 0 || max_alphabet < 2 || max_feature_dim < 1) {
    throw ConfigError("bound_audit: bad sizes");
  }
  Rng rng(seed);
  AuditReport report;
  report.trials = trials;
  double slack_sum = 0.0;
  for (std::size_t t = 0; t < trials; ++t) {
    const double margin =
        random_instance(rng, max_alphabet, max_feature_dim).margin();
    if (margin > 1e-12) ++report.violations;
    report.max_margin = std::max(report.max_margin, margin);
    slack_sum += -margin;
  }
  report.mean_slack = slack_sum / static_cast<double>(trials);
  return report;
}

double bound_adversarial_search(std::size_t restarts, std::size_t steps,
                                std::uint64_t seed) {
  if (restarts == 0 || steps == 0) throw ConfigError("bound_adversarial_search: bad sizes");
  Rng rng(seed);
  double best = -std::numeric_limits<double>::infinity();
  for (std::size_t r = 0; r < restarts; ++r) {
    BoundInstance inst = random_instance(rng, 6, 8);
    double cur = inst.margin();
    for (std::size_t s = 0; s < steps; ++s) {
      BoundInstance trial = inst;
      const double step = 0.05 * (rng.uniform() * 2.0 - 1.0);
      switch (rng.below(3)) {
        case 0: {
          auto& v = rng.below(2) == 0 ? trial.p : trial.q;
          std::size_t i = rng.below(v.size());
          v[i] = std::max(1e-6, v[i] + step);
          normalize_dist(v);
          break;
        }
        case 1: {
          auto& row = trial.phi[rng.below(trial.phi.size())];
          std::size_t j = rng.below(row.size());
          row[j] = std::clamp(row[j] + step, 0.0, 1.0);
          break;
        }
        default: {
          std::size_t j = rng.below(trial.shift.size());
          trial.shift[j] += step;
          double sq = 0.0;
          for (double x : trial.shift) sq += x * x;
          const double nrm = std::sqrt(sq);
          if (nrm > trial.epsilon1 && nrm > 0.0) {
            for (double& x : trial.shift) x *= trial.epsilon1 / nrm;
          }
          break;
        }
      }
      const double m = trial.margin();
      if (m > cur) {
        cur = m;
        inst = trial;
      }
    }
    best = std::max(best, cur);
  }
  return best;
}

}  // namespace lira::theory
