#include "skelact/optimizer.hpp"

#include <stdexcept>

namespace skelact {

SgdNesterov::SgdNesterov(double learning_rate, double momentum, double weight_decay)
    : learning_rate_(learning_rate), momentum_(momentum), weight_decay_(weight_decay) {
  if (learning_rate < 0.0) throw std::invalid_argument("SgdNesterov: negative learning rate");
  if (momentum < 0.0 || momentum >= 1.0) {
    throw std::invalid_argument("SgdNesterov: momentum must lie in [0, 1)");
  }
  if (weight_decay < 0.0) throw std::invalid_argument("SgdNesterov: negative weight decay");
}

void SgdNesterov::step(const std::vector<ParamRef>& params) {
  for (const auto& p : params) {
    auto it = velocity_.find(p.name);
    if (it == velocity_.end()) {
      it = velocity_.emplace(p.name, Tensor::zeros(p.value->shape())).first;
    } else if (it->second.shape() != p.value->shape()) {
      throw std::invalid_argument("SgdNesterov: parameter '" + p.name +
                                  "' changed shape between steps");
    }
    double* value = p.value->data().data();
    const double* grad = p.grad->data().data();
    double* vel = it->second.data().data();
    const std::size_t n = p.value->size();
    for (std::size_t i = 0; i < n; ++i) {
      const double g = grad[i] + weight_decay_ * value[i];
      const double v = momentum_ * vel[i] - learning_rate_ * g;
      vel[i] = v;
      value[i] += momentum_ * v - learning_rate_ * g;
    }
  }
}

double scheduled_learning_rate(double base_lr, const std::vector<int>& drop_epochs, double factor,
                               int epoch) {
  if (factor <= 0.0) throw std::invalid_argument("scheduled_learning_rate: factor must be > 0");
  double lr = base_lr;
  for (int d : drop_epochs) {
    if (epoch >= d) lr /= factor;
  }
  return lr;
}

}  // namespace skelact
