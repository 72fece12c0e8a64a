#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <unistd.h>

#include <filesystem>
#include <fstream>
#include <set>
#include <string>
#include <vector>

#include "doctest.h"
#include "skelact/gradcheck.hpp"
#include "skelact/model.hpp"

using namespace skelact;

namespace fs = std::filesystem;

namespace {

struct TempDir {
  fs::path path;
  TempDir() {
    path = fs::temp_directory_path() /
           ("skelact_model_" + std::to_string(RandomStream(::getpid()).next_u64() % 1000000));
    fs::create_directories(path);
  }
  ~TempDir() { fs::remove_all(path); }
};

ModelConfig tiny_config() {
  ModelConfig cfg;
  cfg.channels = {3, 5};
  cfg.strides = {1, 2};
  cfg.temporal_kernel = 3;
  cfg.input_channels = 3;
  cfg.class_count = 3;
  cfg.segment_count = 3;
  cfg.selected_count = 2;
  cfg.esa_enabled = true;
  cfg.esa_kernel = 3;
  return cfg;
}

Tensor random_input(int batch, int frames, int joints, std::uint64_t seed) {
  Tensor x = Tensor::zeros({batch, 3, frames, joints});
  RandomStream rng(seed);
  for (double& v : x.data()) v = rng.normal();
  return x;
}

std::string read_bytes(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  REQUIRE(in.good());
  return std::string(std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>());
}

}  // namespace

TEST_CASE("branch mode names round-trip") {
  for (BranchMode mode : {BranchMode::kGlobal, BranchMode::kDfl, BranchMode::kBoth}) {
    CHECK(branch_mode_from_name(branch_mode_name(mode)) == mode);
  }
  CHECK(branch_mode_name(BranchMode::kBoth) == "both");
  CHECK_THROWS_AS(branch_mode_from_name("fused"), std::invalid_argument);
}

TEST_CASE("model config validation") {
  CHECK_NOTHROW(ModelConfig{}.validate());
  CHECK_NOTHROW(tiny_config().validate());

  ModelConfig cfg = tiny_config();
  cfg.channels.clear();
  cfg.strides.clear();
  CHECK_THROWS_AS(cfg.validate(), std::invalid_argument);

  cfg = tiny_config();
  cfg.strides = {1};
  CHECK_THROWS_AS(cfg.validate(), std::invalid_argument);

  cfg = tiny_config();
  cfg.temporal_kernel = 4;
  CHECK_THROWS_AS(cfg.validate(), std::invalid_argument);

  cfg = tiny_config();
  cfg.esa_kernel = 2;
  CHECK_THROWS_AS(cfg.validate(), std::invalid_argument);

  cfg = tiny_config();
  cfg.class_count = 1;
  CHECK_THROWS_AS(cfg.validate(), std::invalid_argument);

  cfg = tiny_config();
  cfg.selected_count = cfg.segment_count + 1;
  CHECK_THROWS_AS(cfg.validate(), std::invalid_argument);

  cfg = tiny_config();
  cfg.loss_weights.slot = -0.1;
  CHECK_THROWS_AS(cfg.validate(), std::invalid_argument);

  cfg = tiny_config();
  cfg.strides[0] = 0;
  CHECK_THROWS_AS(cfg.validate(), std::invalid_argument);
}

TEST_CASE("backbone config chains the channel widths") {
  ModelConfig cfg = tiny_config();
  BackboneConfig bc = cfg.backbone_config();
  REQUIRE(bc.blocks.size() == 2);
  CHECK(bc.blocks[0].in_channels == 3);
  CHECK(bc.blocks[0].out_channels == 3);
  CHECK(bc.blocks[1].in_channels == 3);
  CHECK(bc.blocks[1].out_channels == 5);
  CHECK(bc.blocks[0].temporal_stride == 1);
  CHECK(bc.blocks[1].temporal_stride == 2);
  CHECK(bc.blocks[0].temporal_kernel == 3);
  CHECK(bc.esa_enabled);
  CHECK(bc.esa_kernel == 3);
}

TEST_CASE("model construction is seed-deterministic") {
  TopologyPtr topo = chain_topology(5);
  Model a(topo, tiny_config(), 11);
  Model b(topo, tiny_config(), 11);
  Model c(topo, tiny_config(), 12);

  std::vector<ParamRef> pa = a.params();
  std::vector<ParamRef> pb = b.params();
  std::vector<ParamRef> pc = c.params();
  REQUIRE(pa.size() == pb.size());
  REQUIRE(pa.size() == pc.size());
  bool any_diff = false;
  for (std::size_t i = 0; i < pa.size(); ++i) {
    CHECK(pa[i].name == pb[i].name);
    CHECK(pa[i].value->data() == pb[i].value->data());
    if (pa[i].value->data() != pc[i].value->data()) any_diff = true;
  }
  CHECK(any_diff);
}

TEST_CASE("model constructor rejects bad inputs") {
  CHECK_THROWS_AS(Model(nullptr, tiny_config(), 0), std::invalid_argument);
  ModelConfig bad = tiny_config();
  bad.class_count = 0;
  CHECK_THROWS_AS(Model(chain_topology(5), bad, 0), std::invalid_argument);
}

TEST_CASE("parameter lists follow the branch subset") {
  Model model(chain_topology(5), tiny_config(), 3);

  std::vector<ParamRef> both = model.params(BranchMode::kBoth);
  std::vector<ParamRef> global_only = model.params(BranchMode::kGlobal);
  std::vector<ParamRef> dfl_only = model.params(BranchMode::kDfl);

  std::set<std::string> names;
  bool has_backbone = false, has_global = false, has_dfl = false;
  for (const ParamRef& p : both) {
    names.insert(p.name);
    has_backbone |= p.name.rfind("backbone.", 0) == 0;
    has_global |= p.name.rfind("global.", 0) == 0;
    has_dfl |= p.name.rfind("dfl.", 0) == 0;
  }
  CHECK(names.size() == both.size());
  CHECK(has_backbone);
  CHECK(has_global);
  CHECK(has_dfl);

  for (const ParamRef& p : global_only) CHECK(p.name.rfind("dfl.", 0) != 0);
  for (const ParamRef& p : dfl_only) CHECK(p.name.rfind("global.", 0) != 0);
  CHECK(global_only.size() < both.size());
  CHECK(dfl_only.size() < both.size());
  CHECK(global_only.size() + dfl_only.size() == both.size() + [&] {
    std::size_t backbone = 0;
    for (const ParamRef& p : both) backbone += p.name.rfind("backbone.", 0) == 0;
    return backbone;
  }());

  std::vector<StatRef> stats = model.stats();
  CHECK(!stats.empty());
  for (const StatRef& s : stats) CHECK(s.name.rfind("backbone.", 0) == 0);
}

TEST_CASE("forward populates only the requested branch") {
  Model model(chain_topology(5), tiny_config(), 5);
  Tensor input = random_input(2, 8, 5, 77);
  std::vector<int> labels = {0, 2};

  ModelForward g = model.forward(input, &labels, BranchMode::kGlobal);
  CHECK(g.global_logits.ndim() == 2);
  CHECK(g.dfl.aggregate.size() == 0);
  CHECK(g.loss_global > 0.0);
  CHECK(g.loss_segment == 0.0);
  CHECK(g.loss_total == doctest::Approx(g.loss_global).epsilon(1e-15));

  ModelForward d = model.forward(input, &labels, BranchMode::kDfl);
  CHECK(d.global_logits.size() == 0);
  CHECK(d.dfl.aggregate.ndim() == 2);
  CHECK(d.loss_global == 0.0);
  CHECK(d.loss_total ==
        doctest::Approx(d.loss_segment + d.loss_slot + d.loss_aggregate).epsilon(1e-12));

  ModelForward b = model.forward(input, &labels, BranchMode::kBoth);
  CHECK(b.global_logits.ndim() == 2);
  CHECK(b.dfl.aggregate.ndim() == 2);
  CHECK(b.loss_total == doctest::Approx(b.loss_global + b.loss_segment + b.loss_slot +
                                        b.loss_aggregate)
                            .epsilon(1e-12));

  ModelForward plain = model.forward(input, nullptr, BranchMode::kBoth);
  CHECK(!plain.has_losses);
  CHECK(plain.loss_total == 0.0);
  CHECK_THROWS_AS(model.backward(plain), std::logic_error);
}

TEST_CASE("forward validates labels") {
  Model model(chain_topology(5), tiny_config(), 5);
  Tensor input = random_input(2, 8, 5, 78);
  std::vector<int> short_labels = {1};
  CHECK_THROWS_AS(model.forward(input, &short_labels, BranchMode::kBoth), std::invalid_argument);
  std::vector<int> bad_labels = {0, 3};
  CHECK_THROWS_AS(model.forward(input, &bad_labels, BranchMode::kBoth), std::invalid_argument);
}

TEST_CASE("loss weights scale the total and the gradients") {
  ModelConfig cfg = tiny_config();
  cfg.loss_weights = {2.0, 0.5, 1.5, 0.25};
  Model model(chain_topology(5), cfg, 9);
  Tensor input = random_input(2, 8, 5, 79);
  std::vector<int> labels = {1, 2};

  ModelForward fwd = model.forward(input, &labels, BranchMode::kBoth);
  CHECK(fwd.loss_total == doctest::Approx(2.0 * fwd.loss_global + 0.5 * fwd.loss_segment +
                                          1.5 * fwd.loss_slot + 0.25 * fwd.loss_aggregate)
                              .epsilon(1e-12));

  // Zero global weight: the combined backward matches a pure
  // discriminative-branch backward bit for bit (the global path adds zeros).
  ModelConfig no_global = tiny_config();
  no_global.loss_weights = {0.0, 1.0, 1.0, 1.0};
  Model m1(chain_topology(5), no_global, 13);
  Model m2(chain_topology(5), tiny_config(), 13);

  ModelForward f1 = m1.forward(input, &labels, BranchMode::kBoth);
  m1.zero_grad();
  Tensor g1 = m1.backward(f1);

  ModelForward f2 = m2.forward(input, &labels, BranchMode::kDfl);
  m2.zero_grad();
  Tensor g2 = m2.backward(f2);

  CHECK(g1.data() == g2.data());
}

TEST_CASE("full model gradient check with frozen selection") {
  Model model(chain_topology(5), tiny_config(), 21);
  model.set_stat_tracking(false);
  Tensor input = random_input(2, 8, 5, 80);
  std::vector<int> labels = {0, 1};

  ModelForward probe = model.forward(input, &labels, BranchMode::kBoth);
  const std::vector<std::vector<int>> forced = probe.dfl.selected;

  model.zero_grad();
  ModelForward fwd = model.forward(input, &labels, BranchMode::kBoth, &forced);
  Tensor input_grad = model.backward(fwd);

  std::vector<ParamRef> params = model.params(BranchMode::kBoth);
  auto objective = [&]() {
    ModelForward f = model.forward(input, &labels, BranchMode::kBoth, &forced);
    return f.loss_total;
  };
  GradCheckReport report = grad_check_core(params, &input, &input_grad, objective, 1e-5, 6);
  INFO(report.to_string());
  CHECK(report.passed(1e-4));
}

TEST_CASE("global-only gradient check") {
  Model model(chain_topology(5), tiny_config(), 22);
  model.set_stat_tracking(false);
  Tensor input = random_input(2, 8, 5, 81);
  std::vector<int> labels = {2, 0};

  model.zero_grad();
  ModelForward fwd = model.forward(input, &labels, BranchMode::kGlobal);
  Tensor input_grad = model.backward(fwd);

  std::vector<ParamRef> params = model.params(BranchMode::kGlobal);
  auto objective = [&]() {
    return model.forward(input, &labels, BranchMode::kGlobal).loss_total;
  };
  GradCheckReport report = grad_check_core(params, &input, &input_grad, objective, 1e-5, 6);
  INFO(report.to_string());
  CHECK(report.passed(1e-4));
}

TEST_CASE("segment feature input gradient matches numeric differentiation") {
  Model model(chain_topology(5), tiny_config(), 31);
  model.set_stat_tracking(false);
  Tensor input = random_input(1, 8, 5, 82);

  model.forward(input, nullptr, BranchMode::kDfl);
  CHECK_THROWS_AS(model.segment_feature_input_gradient(-1), std::invalid_argument);
  CHECK_THROWS_AS(model.segment_feature_input_gradient(3), std::invalid_argument);
  Tensor analytic = model.segment_feature_input_gradient(1);
  REQUIRE(analytic.shape() == input.shape());

  auto objective = [&](const Tensor& x) {
    Tensor copy = x;
    ModelForward f = model.forward(copy, nullptr, BranchMode::kDfl);
    double sum = 0.0;
    for (int c = 0; c < f.dfl.segments.dim(2); ++c) sum += f.dfl.segments(0, 1, c);
    return sum;
  };
  const double eps = 1e-5;
  RandomStream pick(4242);
  for (int trial = 0; trial < 12; ++trial) {
    const int idx = pick.uniform_int(0, static_cast<int>(input.size()) - 1);
    Tensor plus = input, minus = input;
    plus[idx] += eps;
    minus[idx] -= eps;
    const double numeric = (objective(plus) - objective(minus)) / (2.0 * eps);
    CHECK(grad_error(analytic[idx], numeric) < 1e-6);
  }
}

TEST_CASE("checkpoint round-trips parameters, stats, and bytes") {
  TempDir tmp;
  TopologyPtr topo = chain_topology(5);
  Model model(topo, tiny_config(), 44);

  // Touch the batch-norm running stats so they are not at their defaults.
  Tensor input = random_input(2, 8, 5, 90);
  model.set_mode(Mode::kTrain);
  model.forward(input, nullptr, BranchMode::kBoth);
  // And perturb one parameter away from initialization.
  model.params()[0].value->add_(Tensor::full(model.params()[0].value->shape(), 0.125));

  const std::string path = (tmp.path / "model.ckpt").string();
  model.save(path);
  Model loaded = Model::load(path);

  std::vector<ParamRef> pa = model.params();
  std::vector<ParamRef> pb = loaded.params();
  REQUIRE(pa.size() == pb.size());
  for (std::size_t i = 0; i < pa.size(); ++i) {
    CHECK(pa[i].name == pb[i].name);
    CHECK(pa[i].value->data() == pb[i].value->data());
  }
  std::vector<StatRef> sa = model.stats();
  std::vector<StatRef> sb = loaded.stats();
  REQUIRE(sa.size() == sb.size());
  REQUIRE(!sa.empty());
  for (std::size_t i = 0; i < sa.size(); ++i) {
    CHECK(sa[i].name == sb[i].name);
    CHECK(sa[i].value->data() == sb[i].value->data());
  }
  CHECK(loaded.config().channels == model.config().channels);
  CHECK(loaded.config().selected_count == model.config().selected_count);
  CHECK(loaded.topology()->names == topo->names);
  CHECK(loaded.topology()->parent == topo->parent);

  // Saving the loaded model reproduces the file byte for byte.
  const std::string path2 = (tmp.path / "model2.ckpt").string();
  loaded.save(path2);
  CHECK(read_bytes(path) == read_bytes(path2));

  // Loaded model computes the same outputs.
  model.set_mode(Mode::kEval);
  loaded.set_mode(Mode::kEval);
  ModelForward fa = model.forward(input, nullptr, BranchMode::kBoth);
  ModelForward fb = loaded.forward(input, nullptr, BranchMode::kBoth);
  CHECK(fa.global_logits.data() == fb.global_logits.data());
  CHECK(fa.dfl.aggregate.data() == fb.dfl.aggregate.data());
}

TEST_CASE("checkpoint loading rejects damaged files") {
  TempDir tmp;
  const std::string missing = (tmp.path / "nope.ckpt").string();
  CHECK_THROWS_AS(Model::load(missing), std::runtime_error);

  const std::string garbage = (tmp.path / "garbage.ckpt").string();
  {
    std::ofstream out(garbage, std::ios::binary);
    out << "NOTMODEL????????";
  }
  CHECK_THROWS_AS(Model::load(garbage), std::runtime_error);

  Model model(chain_topology(5), tiny_config(), 1);
  const std::string good = (tmp.path / "good.ckpt").string();
  model.save(good);

  const std::string truncated = (tmp.path / "truncated.ckpt").string();
  {
    std::string bytes = read_bytes(good);
    bytes.resize(bytes.size() - 17);
    std::ofstream out(truncated, std::ios::binary);
    out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
  }
  CHECK_THROWS_AS(Model::load(truncated), std::runtime_error);

  const std::string padded = (tmp.path / "padded.ckpt").string();
  {
    std::string bytes = read_bytes(good);
    bytes.push_back('\0');
    std::ofstream out(padded, std::ios::binary);
    out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
  }
  CHECK_THROWS_AS(Model::load(padded), std::runtime_error);
}
