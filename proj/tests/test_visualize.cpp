#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <unistd.h>

#include <filesystem>
#include <fstream>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include "doctest.h"
#include "skelact/synthetic.hpp"
#include "skelact/verification.hpp"
#include "skelact/visualize.hpp"

using namespace skelact;

namespace fs = std::filesystem;

namespace {

struct TempDir {
  fs::path path;
  TempDir() {
    path = fs::temp_directory_path() /
           ("skelact_vis_" + std::to_string(RandomStream(::getpid()).next_u64() % 1000000));
    fs::create_directories(path);
  }
  ~TempDir() { fs::remove_all(path); }
};

ModelConfig vis_config() {
  ModelConfig cfg;
  cfg.channels = {4, 6};
  cfg.strides = {1, 2};
  cfg.temporal_kernel = 3;
  cfg.class_count = 4;
  cfg.segment_count = 3;
  cfg.selected_count = 2;
  return cfg;
}

SkeletonClip sample_clip(std::uint64_t seed) {
  SyntheticSpec spec;
  spec.class_count = 2;
  spec.clips_per_class = 1;
  spec.seed = seed;
  spec.frames = 24;
  return generate_synthetic_dataset(spec).clips.front();
}

std::string read_bytes(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  REQUIRE(in.good());
  return std::string(std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>());
}

}  // namespace

TEST_CASE("zero-weight model produces all-zero heat") {
  Model model(ntu25_topology(), vis_config(), 1);
  for (const ParamRef& p : model.params()) p.value->fill(0.0);

  SaliencyResult result = compute_saliency(model, sample_clip(3), true, 12);
  REQUIRE(static_cast<int>(result.selected.size()) == 2);
  CHECK(std::is_sorted(result.selected.begin(), result.selected.end()));
  for (double v : result.heat_curves.data()) CHECK(v == 0.0);
  for (double v : result.joint_heat.data()) CHECK(v == 0.0);
  for (double v : result.frame_joint.data()) CHECK(v == 0.0);
  for (const auto& range : result.input_ranges) {
    CHECK(range[0] >= 0);
    CHECK(range[0] <= range[1]);
    CHECK(range[1] <= 11);
  }
}

TEST_CASE("heat is nonnegative and aggregates consistently") {
  Model model(ntu25_topology(), vis_config(), 5);
  SaliencyResult result = compute_saliency(model, sample_clip(4), true, 12);

  const int frames = result.heat_curves.dim(1);
  const int joints = result.joint_heat.dim(1);
  REQUIRE(frames == 12);
  REQUIRE(joints == 25);
  for (double v : result.heat_curves.data()) CHECK(v >= 0.0);
  for (double v : result.joint_heat.data()) CHECK(v >= 0.0);
  for (double v : result.frame_joint.data()) CHECK(v >= 0.0);

  // The curve is the joint-mean of the frame-by-joint map.
  for (int m = 0; m < result.heat_curves.dim(0); ++m) {
    for (int t = 0; t < frames; ++t) {
      double mean = 0.0;
      for (int v = 0; v < joints; ++v) mean += result.frame_joint(m, t, v);
      mean /= joints;
      CHECK(result.heat_curves(m, t) == doctest::Approx(mean).epsilon(1e-12));
    }
  }

  // The joint heat is the frame-mean of the same map over the receptive field.
  for (int m = 0; m < result.joint_heat.dim(0); ++m) {
    const auto [lo, hi] = std::pair(result.input_ranges[m][0], result.input_ranges[m][1]);
    for (int v = 0; v < joints; ++v) {
      double mean = 0.0;
      for (int t = lo; t <= hi; ++t) mean += result.frame_joint(m, t, v);
      mean /= hi - lo + 1;
      CHECK(result.joint_heat(m, v) == doctest::Approx(mean).epsilon(1e-12));
    }
  }
}

TEST_CASE("gradients stay inside the analytic receptive field") {
  Model model(ntu25_topology(), vis_config(), 7);
  SaliencyResult result = compute_saliency(model, sample_clip(6), false, 16);

  for (int m = 0; m < result.heat_curves.dim(0); ++m) {
    const int lo = result.input_ranges[m][0];
    const int hi = result.input_ranges[m][1];
    double inside_mass = 0.0;
    for (int t = 0; t < 16; ++t) {
      if (t < lo || t > hi) {
        CHECK(result.heat_curves(m, t) == 0.0);
      } else {
        inside_mass += result.heat_curves(m, t);
      }
    }
    CHECK(inside_mass > 0.0);

    // So the curve's maximum falls inside the receptive field.
    int peak = 0;
    for (int t = 1; t < 16; ++t) {
      if (result.heat_curves(m, t) > result.heat_curves(m, peak)) peak = t;
    }
    CHECK(peak >= lo);
    CHECK(peak <= hi);
  }
}

TEST_CASE("clip with the wrong joint count is rejected") {
  Model model(chain_topology(5), vis_config(), 2);
  CHECK_THROWS_AS(compute_saliency(model, sample_clip(3), true, 12), std::invalid_argument);
}

TEST_CASE("saliency CSV files carry one column per selected segment") {
  TempDir tmp;
  Model model(ntu25_topology(), vis_config(), 9);
  SaliencyResult result = compute_saliency(model, sample_clip(8), true, 12);

  const std::string curves = (tmp.path / "curves.csv").string();
  write_heat_curves_csv(curves, result);
  std::ifstream in(curves);
  std::string header;
  std::getline(in, header);
  CHECK(header == "frame,segment_" + std::to_string(result.selected[0]) + ",segment_" +
                      std::to_string(result.selected[1]));
  int rows = 0;
  std::string line;
  while (std::getline(in, line)) ++rows;
  CHECK(rows == 12);

  const std::string joints = (tmp.path / "joints.csv").string();
  write_joint_heat_csv(joints, result);
  std::ifstream jin(joints);
  std::getline(jin, header);
  CHECK(header.rfind("joint,segment_", 0) == 0);
  rows = 0;
  while (std::getline(jin, line)) ++rows;
  CHECK(rows == 25);
}

TEST_CASE("pgm writer emits normalized 8-bit P5") {
  TempDir tmp;
  Tensor image = Tensor::zeros({2, 3});
  image(0, 0) = 0.0;
  image(0, 1) = 0.5;
  image(0, 2) = 1.0;
  image(1, 0) = 0.25;
  image(1, 1) = 0.75;
  image(1, 2) = 1.0;
  const std::string path = (tmp.path / "map.pgm").string();
  write_pgm(path, image);
  const std::string bytes = read_bytes(path);
  const std::string expected = std::string("P5\n3 2\n255\n") +
                               '\x00' + '\x80' + '\xff' + '\x40' + '\xbf' + '\xff';
  CHECK(bytes == expected);

  Tensor flat = Tensor::zeros({2, 2});
  const std::string zero_path = (tmp.path / "zero.pgm").string();
  write_pgm(zero_path, flat);
  const std::string zero_bytes = read_bytes(zero_path);
  CHECK(zero_bytes.substr(zero_bytes.size() - 4) == std::string("\x00\x00\x00\x00", 4));

  Tensor negative = Tensor::full({1, 1}, -1.0);
  CHECK_THROWS_AS(write_pgm(path, negative), std::invalid_argument);
  CHECK_THROWS_AS(write_pgm(path, Tensor::zeros({1, 1, 1})), std::invalid_argument);
}

TEST_CASE("gradient suite passes on a stock config and fails when corrupted") {
  ModelConfig cfg = vis_config();
  std::vector<SuiteCheck> checks = run_gradient_suite(cfg, 1e-4, false);
  CHECK(gradient_suite_passed(checks));

  std::set<std::string> names;
  for (const SuiteCheck& check : checks) names.insert(check.name);
  for (const char* expected :
       {"dense", "relu", "batch_norm", "temporal_conv", "graph_conv", "stgcn_block",
        "stgcn_block_strided", "spatial_attention", "segment_pool", "global_branch",
        "full_model"}) {
    CHECK(names.count(expected) == 1);
  }

  // Within the full-model check, every parameter tensor appears exactly once.
  const SuiteCheck& full = checks.back();
  REQUIRE(full.name == "full_model");
  std::set<std::string> tensor_names;
  for (const GradCheckEntry& entry : full.report.entries) {
    CHECK(tensor_names.insert(entry.name).second);
  }
  Model reference(chain_topology(5), cfg, 0);
  CHECK(full.report.entries.size() == reference.params().size() + 1);  // plus the input

  const std::string table = gradient_suite_table(checks, 1e-4);
  CHECK(table.find("full_model") != std::string::npos);
  CHECK(table.find("FAIL") == std::string::npos);

  std::vector<SuiteCheck> corrupted = run_gradient_suite(cfg, 1e-4, true);
  CHECK(!gradient_suite_passed(corrupted));
  CHECK(!corrupted.front().passed);
  CHECK(gradient_suite_table(corrupted, 1e-4).find("FAIL") != std::string::npos);
}
