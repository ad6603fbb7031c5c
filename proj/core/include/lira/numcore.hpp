#ifndef LIRA_NUMCORE_HPP_
#define LIRA_NUMCORE_HPP_

#include <cstddef>
#include <functional>
#include <vector>

namespace lira::num {

using DenseVector = std::vector<double>;

// Quantile summary of a sample of non-negative reals.
// Invariant: median <= p90 <= p95 <= p99 <= max whenever count >= 1.
struct StatSummary {
  double max = 0.0;
  double min = 0.0;
  double mean = 0.0;
  double std_dev = 0.0;
  double median = 0.0;
  double p90 = 0.0;
  double p95 = 0.0;
  double p99 = 0.0;
  std::size_t count = 0;
};

struct GradCheckReport {
  double max_abs_err = 0.0;
  double max_rel_err = 0.0;
  std::size_t worst_index = 0;
};

// Throws NumericError if any entry is NaN/Inf.
void require_finite(const DenseVector& v, const char* what);

double dot(const DenseVector& a, const DenseVector& b);
double norm2(const DenseVector& v);

// v / ||v||2. Zero-norm input is an error, never a silent NaN.
DenseVector l2_normalize(const DenseVector& v);

// Bounded in [-1, 1]; scale invariant for positive scalings.
double cosine(const DenseVector& a, const DenseVector& b);

// Masked arithmetic mean of rows; no normalization applied.
DenseVector mean_pool(const std::vector<DenseVector>& rows,
                      const std::vector<int>& mask);

// Adaptive average pooling of a row sequence to exactly `out_len` rows.
// Identity when the input already has `out_len` rows.
std::vector<DenseVector> temporal_pool(const std::vector<DenseVector>& rows,
                                       std::size_t out_len);

// Empirical q-quantile, linear interpolation between order statistics.
double quantile(std::vector<double> samples, double q);

// std_dev is the population standard deviation.
StatSummary summarize(const std::vector<double>& samples);

// Central finite differences (f(x+e_i h) - f(x-e_i h)) / 2h against an
// analytic gradient. Relative error scale floor is 1e-4 so near-zero
// coordinates are judged on absolute error.
GradCheckReport grad_check(const std::function<double(const DenseVector&)>& f,
                           const DenseVector& x,
                           const DenseVector& analytic_grad,
                           double step = 1e-5);

// Numerically stable logistic sigmoid.
double sigmoid(double x);
// d/dx sigmoid(x) = s(1-s), computed stably.
double sigmoid_grad(double x);

}  // namespace lira::num

#endif  // LIRA_NUMCORE_HPP_
