#include "lira/optim.hpp"

#include <cmath>

#include "lira/errors.hpp"

namespace lira::optim {

bool clip_global_norm(DenseVector& grad, double max_norm) {
  if (max_norm <= 0.0) throw ConfigError("clip_global_norm: max_norm must be positive");
  double sq = 0.0;
  for (double g : grad) sq += g * g;
  const double norm = std::sqrt(sq);
  if (norm <= max_norm || norm == 0.0) return false;
  const double scale = max_norm / norm;
  for (double& g : grad) g *= scale;
  return true;
}

Adam::Adam(std::size_t dim, double lr, double beta1, double beta2, double eps)
    : lr_(lr), beta1_(beta1), beta2_(beta2), eps_(eps),
      m_(dim, 0.0), v_(dim, 0.0) {}

void Adam::step(DenseVector& params, const DenseVector& grad) {
  if (params.size() != m_.size() || grad.size() != m_.size()) {
    throw ConfigError("Adam: dimension mismatch");
  }
  ++t_;
  const double bc1 = 1.0 - std::pow(beta1_, static_cast<double>(t_));
  const double bc2 = 1.0 - std::pow(beta2_, static_cast<double>(t_));
  for (std::size_t i = 0; i < params.size(); ++i) {
    m_[i] = beta1_ * m_[i] + (1.0 - beta1_) * grad[i];
    v_[i] = beta2_ * v_[i] + (1.0 - beta2_) * grad[i] * grad[i];
    const double mhat = m_[i] / bc1;
    const double vhat = v_[i] / bc2;
    params[i] -= lr_ * mhat / (std::sqrt(vhat) + eps_);
  }
}

void Adam::reset() {
  t_ = 0;
  std::fill(m_.begin(), m_.end(), 0.0);
  std::fill(v_.begin(), v_.end(), 0.0);
}

Ema::Ema(std::size_t dim, double decay) : decay_(decay), shadow_(dim, 0.0) {}

void Ema::update(const DenseVector& params) {
  if (params.size() != shadow_.size()) throw ConfigError("Ema: dimension mismatch");
  if (!initialized_) {
    shadow_ = params;
    initialized_ = true;
    return;
  }
  for (std::size_t i = 0; i < params.size(); ++i) {
    shadow_[i] = decay_ * shadow_[i] + (1.0 - decay_) * params[i];
  }
}

}  // namespace lira::optim
