#include "skelact/gradcheck.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>
#include <stdexcept>

namespace skelact {

double GradCheckReport::max_error() const {
  double worst = 0.0;
  for (const auto& e : entries) worst = std::max(worst, e.max_error);
  return worst;
}

std::string GradCheckReport::to_string() const {
  std::ostringstream os;
  for (const auto& e : entries) {
    os << "  " << e.name << ": max_error=" << e.max_error << " (" << e.checked << " entries)\n";
  }
  return os.str();
}

double grad_error(double analytic, double numeric) {
  const double scale = std::max({1.0, std::fabs(analytic), std::fabs(numeric)});
  return std::fabs(analytic - numeric) / scale;
}

namespace {

GradCheckEntry check_tensor(const std::string& name, Tensor& value, const Tensor& analytic_grad,
                            const std::function<double()>& objective, double eps,
                            std::int64_t max_entries) {
  if (value.shape() != analytic_grad.shape()) {
    throw std::invalid_argument("grad check: '" + name + "' value/grad shapes differ");
  }
  GradCheckEntry entry{name, 0.0, 0};
  const std::int64_t n = static_cast<std::int64_t>(value.size());
  // Deterministic stratified stride when a cap is requested.
  std::int64_t stride = 1;
  if (max_entries > 0 && n > max_entries) stride = (n + max_entries - 1) / max_entries;
  for (std::int64_t i = 0; i < n; i += stride) {
    double& slot = value.data()[static_cast<std::size_t>(i)];
    const double saved = slot;
    slot = saved + eps;
    const double up = objective();
    slot = saved - eps;
    const double down = objective();
    slot = saved;
    const double numeric = (up - down) / (2.0 * eps);
    const double analytic = analytic_grad.data()[static_cast<std::size_t>(i)];
    entry.max_error = std::max(entry.max_error, grad_error(analytic, numeric));
    ++entry.checked;
  }
  return entry;
}

}  // namespace

GradCheckReport grad_check_core(const std::vector<ParamRef>& params, Tensor* input,
                                const Tensor* analytic_input_grad,
                                const std::function<double()>& objective, double eps,
                                std::int64_t max_entries_per_tensor) {
  if (eps <= 0.0) throw std::invalid_argument("grad_check_core: eps must be positive");
  GradCheckReport report;
  for (const auto& p : params) {
    report.entries.push_back(
        check_tensor(p.name, *p.value, *p.grad, objective, eps, max_entries_per_tensor));
  }
  if (input != nullptr) {
    if (analytic_input_grad == nullptr) {
      throw std::invalid_argument("grad_check_core: input given without analytic input grad");
    }
    report.entries.push_back(check_tensor("input", *input, *analytic_input_grad, objective, eps,
                                          max_entries_per_tensor));
  }
  return report;
}

GradCheckReport grad_check_layer(Layer& layer, const Tensor& input, double eps,
                                 std::int64_t max_entries_per_tensor) {
  layer.set_mode(Mode::kTrain);
  layer.set_stat_tracking(false);
  layer.zero_grad();
  Tensor x = input;
  Tensor out = layer.forward(x);
  Tensor ones = Tensor::full(out.shape(), 1.0);
  Tensor input_grad = layer.backward(ones);
  auto objective = [&layer, &x]() {
    Tensor y = layer.forward(x);
    double acc = 0.0;
    for (double v : y.data()) acc += v;
    return acc;
  };
  GradCheckReport report = grad_check_core(layer.params(), &x, &input_grad, objective, eps,
                                           max_entries_per_tensor);
  layer.set_stat_tracking(true);
  layer.zero_grad();
  return report;
}

}  // namespace skelact
