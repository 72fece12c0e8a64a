#pragma once

#include <unordered_map>
#include <vector>

#include "skelact/layers.hpp"
#include "skelact/tensor.hpp"

namespace skelact {

/// SGD with Nesterov momentum and decoupled-from-nothing L2 weight decay
/// (decay is added to the gradient before the momentum update):
///   g <- g + wd * p
///   v <- mu * v - lr * g
///   p <- p + mu * v - lr * g
class SgdNesterov {
 public:
  SgdNesterov(double learning_rate, double momentum, double weight_decay);

  void set_learning_rate(double lr) { learning_rate_ = lr; }
  double learning_rate() const { return learning_rate_; }

  /// Applies one update to every listed parameter, keyed by name for the
  /// velocity buffers. Gradients are left untouched (caller zeroes them).
  void step(const std::vector<ParamRef>& params);

 private:
  double learning_rate_, momentum_, weight_decay_;
  std::unordered_map<std::string, Tensor> velocity_;
};

/// Step learning-rate schedule: lr = base / factor^(number of drop epochs <= epoch),
/// with epochs counted from zero.
double scheduled_learning_rate(double base_lr, const std::vector<int>& drop_epochs, double factor,
                               int epoch);

}  // namespace skelact
