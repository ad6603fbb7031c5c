#include "lira/numcore.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include "lira/errors.hpp"

namespace lira::num {

void require_finite(const DenseVector& v, const char* what) {
  for (double x : v) {
    if (!std::isfinite(x)) {
      throw NumericError(std::string("non-finite value in ") + what);
    }
  }
}

double dot(const DenseVector& a, const DenseVector& b) {
  if (a.size() != b.size()) {
    throw ConfigError("dot: dimension mismatch");
  }
  double s = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) s += a[i] * b[i];
  return s;
}

double norm2(const DenseVector& v) { return std::sqrt(dot(v, v)); }

DenseVector l2_normalize(const DenseVector& v) {
  if (v.empty()) throw ConfigError("l2_normalize: empty vector");
  const double n = norm2(v);
  if (n == 0.0) throw ConfigError("l2_normalize: zero-norm input");
  if (!std::isfinite(n)) throw NumericError("l2_normalize: non-finite norm");
  DenseVector out(v.size());
  for (std::size_t i = 0; i < v.size(); ++i) out[i] = v[i] / n;
  return out;
}

double cosine(const DenseVector& a, const DenseVector& b) {
  if (a.size() != b.size()) throw ConfigError("cosine: dimension mismatch");
  const double na = norm2(a), nb = norm2(b);
  if (na == 0.0 || nb == 0.0) throw ConfigError("cosine: zero vector");
  double c = dot(a, b) / (na * nb);
  return std::clamp(c, -1.0, 1.0);
}

DenseVector mean_pool(const std::vector<DenseVector>& rows,
                      const std::vector<int>& mask) {
  if (rows.empty() || rows.size() != mask.size()) {
    throw ConfigError("mean_pool: rows/mask size mismatch");
  }
  const std::size_t d = rows[0].size();
  DenseVector out(d, 0.0);
  std::size_t active = 0;
  for (std::size_t i = 0; i < rows.size(); ++i) {
    if (rows[i].size() != d) throw ConfigError("mean_pool: ragged rows");
    if (mask[i] == 0) continue;
    ++active;
    for (std::size_t j = 0; j < d; ++j) out[j] += rows[i][j];
  }
  if (active == 0) throw ConfigError("mean_pool: all-zero mask");
  for (double& x : out) x /= static_cast<double>(active);
  return out;
}

std::vector<DenseVector> temporal_pool(const std::vector<DenseVector>& rows,
                                       std::size_t out_len) {
  if (rows.empty()) throw ConfigError("temporal_pool: empty input");
  if (out_len == 0) throw ConfigError("temporal_pool: zero output length");
  const std::size_t n = rows.size();
  const std::size_t d = rows[0].size();
  std::vector<DenseVector> out(out_len, DenseVector(d, 0.0));
  for (std::size_t i = 0; i < out_len; ++i) {
    // Near-equal contiguous bins, matching adaptive average pooling.
    const std::size_t lo = (i * n) / out_len;
    const std::size_t hi = ((i + 1) * n + out_len - 1) / out_len;
    for (std::size_t r = lo; r < hi; ++r) {
      if (rows[r].size() != d) throw ConfigError("temporal_pool: ragged rows");
      for (std::size_t j = 0; j < d; ++j) out[i][j] += rows[r][j];
    }
    const double cnt = static_cast<double>(hi - lo);
    for (std::size_t j = 0; j < d; ++j) out[i][j] /= cnt;
  }
  return out;
}

double quantile(std::vector<double> samples, double q) {
  if (samples.empty()) throw ConfigError("quantile: empty samples");
  if (!(q > 0.0 && q < 1.0)) throw ConfigError("quantile: q outside (0,1)");
  std::sort(samples.begin(), samples.end());
  const std::size_t n = samples.size();
  if (n == 1) return samples[0];
  const double pos = q * static_cast<double>(n - 1);
  const std::size_t lo = static_cast<std::size_t>(pos);
  const double frac = pos - static_cast<double>(lo);
  if (lo + 1 >= n) return samples[n - 1];
  return samples[lo] + frac * (samples[lo + 1] - samples[lo]);
}

StatSummary summarize(const std::vector<double>& samples) {
  StatSummary s;
  s.count = samples.size();
  if (samples.empty()) return s;
  s.max = *std::max_element(samples.begin(), samples.end());
  s.min = *std::min_element(samples.begin(), samples.end());
  double sum = 0.0;
  for (double x : samples) sum += x;
  s.mean = sum / static_cast<double>(samples.size());
  double ss = 0.0;
  for (double x : samples) ss += (x - s.mean) * (x - s.mean);
  s.std_dev = std::sqrt(ss / static_cast<double>(samples.size()));
  s.median = quantile(samples, 0.5);
  s.p90 = quantile(samples, 0.90);
  s.p95 = quantile(samples, 0.95);
  s.p99 = quantile(samples, 0.99);
  return s;
}

GradCheckReport grad_check(const std::function<double(const DenseVector&)>& f,
                           const DenseVector& x,
                           const DenseVector& analytic_grad,
                           double step) {
  if (step <= 0.0) throw ConfigError("grad_check: step must be positive");
  if (x.size() != analytic_grad.size()) {
    throw ConfigError("grad_check: gradient dimension mismatch");
  }
  GradCheckReport rep;
  DenseVector probe = x;
  for (std::size_t i = 0; i < x.size(); ++i) {
    probe[i] = x[i] + step;
    const double fp = f(probe);
    probe[i] = x[i] - step;
    const double fm = f(probe);
    probe[i] = x[i];
    if (!std::isfinite(fp) || !std::isfinite(fm)) {
      throw NumericError("grad_check: non-finite objective at probe point");
    }
    const double numeric = (fp - fm) / (2.0 * step);
    const double abs_err = std::abs(numeric - analytic_grad[i]);
    const double scale =
        std::max({std::abs(numeric), std::abs(analytic_grad[i]), 1e-4});
    const double rel_err = abs_err / scale;
    if (abs_err > rep.max_abs_err) rep.max_abs_err = abs_err;
    if (rel_err > rep.max_rel_err) {
      rep.max_rel_err = rel_err;
      rep.worst_index = i;
    }
  }
  return rep;
}

double sigmoid(double x) {
  if (x >= 0.0) {
    return 1.0 / (1.0 + std::exp(-x));
  }
  const double e = std::exp(x);
  return e / (1.0 + e);
}

double sigmoid_grad(double x) {
  const double s = sigmoid(x);
  return s * (1.0 - s);
}

}  // namespace lira::num
