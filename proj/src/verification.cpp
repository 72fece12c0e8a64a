#include "skelact/verification.hpp"

#include <cmath>
#include <cstdio>
#include <sstream>

#include "skelact/backbone.hpp"
#include "skelact/heads.hpp"

namespace skelact {

namespace {

Tensor random_tensor(const std::vector<int>& shape, RandomStream& rng) {
  Tensor t = Tensor::zeros(shape);
  for (double& v : t.data()) v = rng.normal();
  return t;
}

// Keeps every entry away from the ReLU kink so central differences are valid.
Tensor kink_free_tensor(const std::vector<int>& shape, RandomStream& rng) {
  Tensor t = random_tensor(shape, rng);
  for (double& v : t.data()) v += (v >= 0.0 ? 0.3 : -0.3);
  return t;
}

SuiteCheck layer_check(const std::string& name, Layer& layer, const Tensor& input,
                       double tolerance) {
  SuiteCheck check;
  check.name = name;
  check.report = grad_check_layer(layer, input);
  check.passed = check.report.passed(tolerance);
  return check;
}

// Negative control: the analytic weight gradient is falsified before the
// finite-difference comparison, so this check must report a large error.
SuiteCheck corrupted_dense_check(RandomStream& rng, double tolerance) {
  Dense dense(4, 3, rng);
  Tensor input = random_tensor({5, 4}, rng);
  dense.zero_grad();
  Tensor out = dense.forward(input);
  dense.backward(Tensor::full(out.shape(), 1.0));
  std::vector<ParamRef> params = dense.params();
  (*params.front().grad)[0] += 1.0;
  auto objective = [&dense, &input]() {
    Tensor y = dense.forward(input);
    double acc = 0.0;
    for (double v : y.data()) acc += v;
    return acc;
  };
  SuiteCheck check;
  check.name = "dense";
  check.report = grad_check_core(params, nullptr, nullptr, objective);
  check.passed = check.report.passed(tolerance);
  return check;
}

SuiteCheck full_model_check(const ModelConfig& config, double tolerance, RandomStream& rng) {
  TopologyPtr topo = chain_topology(5);
  Model model(topo, config, 97);
  model.set_stat_tracking(false);
  Tensor input = random_tensor({2, config.input_channels, 8, 5}, rng);
  std::vector<int> labels = {0, config.class_count - 1};

  ModelForward probe = model.forward(input, &labels, BranchMode::kBoth);
  const std::vector<std::vector<int>> forced = probe.dfl.selected;
  model.zero_grad();
  ModelForward fwd = model.forward(input, &labels, BranchMode::kBoth, &forced);
  Tensor input_grad = model.backward(fwd);

  std::vector<ParamRef> params = model.params(BranchMode::kBoth);
  auto objective = [&model, &input, &labels, &forced]() {
    return model.forward(input, &labels, BranchMode::kBoth, &forced).loss_total;
  };
  SuiteCheck check;
  check.name = "full_model";
  check.report = grad_check_core(params, &input, &input_grad, objective, 1e-5, 4);
  check.passed = check.report.passed(tolerance);
  return check;
}

}  // namespace

std::vector<SuiteCheck> run_gradient_suite(const ModelConfig& config, double tolerance,
                                           bool corrupt_backward) {
  config.validate();
  RandomStream rng(12345);
  GraphPtr graph = std::make_shared<const SkeletonGraph>(build_graph(chain_topology(5)));
  std::vector<SuiteCheck> checks;

  if (corrupt_backward) {
    checks.push_back(corrupted_dense_check(rng, tolerance));
  } else {
    Dense dense(4, 3, rng);
    checks.push_back(layer_check("dense", dense, random_tensor({5, 4}, rng), tolerance));
  }
  {
    ReLU relu;
    checks.push_back(layer_check("relu", relu, kink_free_tensor({3, 7}, rng), tolerance));
  }
  {
    BatchNorm bn(3);
    checks.push_back(layer_check("batch_norm", bn, random_tensor({2, 3, 4, 5}, rng), tolerance));
  }
  {
    TemporalConv conv(3, 4, 3, 2, rng);
    checks.push_back(
        layer_check("temporal_conv", conv, random_tensor({2, 3, 6, 4}, rng), tolerance));
  }
  {
    GraphConvLayer gcn(graph, 3, 4, rng);
    checks.push_back(layer_check("graph_conv", gcn, random_tensor({2, 3, 4, 5}, rng), tolerance));
  }
  {
    StgcnBlockConfig bc;
    bc.in_channels = 3;
    bc.out_channels = 3;
    bc.temporal_kernel = 3;
    StgcnBlock block(graph, bc, rng);
    checks.push_back(layer_check("stgcn_block", block, random_tensor({2, 3, 6, 5}, rng), tolerance));
  }
  {
    StgcnBlockConfig bc;
    bc.in_channels = 3;
    bc.out_channels = 4;
    bc.temporal_kernel = 3;
    bc.temporal_stride = 2;
    StgcnBlock block(graph, bc, rng);
    checks.push_back(
        layer_check("stgcn_block_strided", block, random_tensor({2, 3, 6, 5}, rng), tolerance));
  }
  {
    EsaBlock esa(3, 3, rng);
    checks.push_back(
        layer_check("spatial_attention", esa, random_tensor({2, 3, 4, 5}, rng), tolerance));
  }
  {
    SegmentAveragePool pool(3);
    checks.push_back(
        layer_check("segment_pool", pool, random_tensor({2, 3, 7, 5}, rng), tolerance));
  }
  {
    GlobalBranch head(4, 3, rng);
    checks.push_back(
        layer_check("global_branch", head, random_tensor({2, 4, 3, 5}, rng), tolerance));
  }
  checks.push_back(full_model_check(config, tolerance, rng));
  return checks;
}

bool gradient_suite_passed(const std::vector<SuiteCheck>& checks) {
  for (const SuiteCheck& check : checks) {
    if (!check.passed) return false;
  }
  return true;
}

std::string gradient_suite_table(const std::vector<SuiteCheck>& checks, double tolerance) {
  std::ostringstream out;
  char line[160];
  std::snprintf(line, sizeof(line), "%-20s %-36s %8s %12s  %s\n", "check", "tensor", "entries",
                "max_error", "status");
  out << line;
  for (const SuiteCheck& check : checks) {
    for (const GradCheckEntry& entry : check.report.entries) {
      std::snprintf(line, sizeof(line), "%-20s %-36s %8lld %12.3e  %s\n", check.name.c_str(),
                    entry.name.c_str(), static_cast<long long>(entry.checked), entry.max_error,
                    entry.max_error <= tolerance ? "ok" : "FAIL");
      out << line;
    }
  }
  return out.str();
}

}  // namespace skelact
