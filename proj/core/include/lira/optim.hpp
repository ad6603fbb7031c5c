#ifndef LIRA_OPTIM_HPP_
#define LIRA_OPTIM_HPP_

#include <cstddef>

#include "lira/numcore.hpp"

namespace lira::optim {

using num::DenseVector;

// Scales grad in place so its global L2 norm is at most max_norm.
// Returns true when clipping fired.
bool clip_global_norm(DenseVector& grad, double max_norm);

// Adam over a flat parameter vector. Default moments (0.9, 0.999), eps 1e-8.
class Adam {
 public:
  Adam(std::size_t dim, double lr, double beta1 = 0.9, double beta2 = 0.999,
       double eps = 1e-8);

  void step(DenseVector& params, const DenseVector& grad);
  void reset();

  double lr() const { return lr_; }
  void set_lr(double lr) { lr_ = lr; }

 private:
  double lr_, beta1_, beta2_, eps_;
  std::size_t t_ = 0;
  DenseVector m_, v_;
};

// Exponential moving average of a parameter vector, for evaluation.
class Ema {
 public:
  Ema(std::size_t dim, double decay = 0.99);
  void update(const DenseVector& params);
  const DenseVector& value() const { return shadow_; }
  bool initialized() const { return initialized_; }

 private:
  double decay_;
  bool initialized_ = false;
  DenseVector shadow_;
};

}  // namespace lira::optim

#endif  // LIRA_OPTIM_HPP_
