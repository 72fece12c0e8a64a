#pragma once

#include <cstdint>
#include <functional>
#include <string>
#include <vector>

#include "skelact/layers.hpp"
#include "skelact/tensor.hpp"

namespace skelact {

struct GradCheckEntry {
  std::string name;
  double max_error = 0.0;       // worst entry-wise error (see metric below)
  std::int64_t checked = 0;     // number of entries probed
};

struct GradCheckReport {
  std::vector<GradCheckEntry> entries;  // one per parameter, plus one for the input
  double max_error() const;
  bool passed(double tolerance) const { return max_error() <= tolerance; }
  std::string to_string() const;
};

/// Entry-wise comparison metric between analytic (a) and numeric (n) values:
/// |a - n| / max(1, |a|, |n|), i.e. absolute error near zero, relative above 1.
double grad_error(double analytic, double numeric);

/// Core checker: every parameter entry (and every input entry when input /
/// analytic_input_grad are non-null) is perturbed by +/- eps, the scalar
/// objective re-evaluated, and the central difference compared against the
/// analytic gradient already stored in the ParamRefs / analytic_input_grad.
/// `max_entries_per_tensor` <= 0 checks everything; a positive value probes a
/// deterministic stratified subset of large tensors.
GradCheckReport grad_check_core(const std::vector<ParamRef>& params, Tensor* input,
                                const Tensor* analytic_input_grad,
                                const std::function<double()>& objective, double eps = 1e-5,
                                std::int64_t max_entries_per_tensor = 0);

/// Convenience wrapper for a single layer: objective is the sum of the
/// forward output; analytic gradients come from backward(ones).
/// Runs in train mode with running-stat tracking disabled.
GradCheckReport grad_check_layer(Layer& layer, const Tensor& input, double eps = 1e-5,
                                 std::int64_t max_entries_per_tensor = 0);

}  // namespace skelact
