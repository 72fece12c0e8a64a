// End-to-end acceptance suite.  Each criterion prints one line:
//   [PASS] <n> <name> (<seconds>s): <detail>
// The process exits 0 only if every criterion passes.
#include <algorithm>
#include <array>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <functional>
#include <memory>
#include <sstream>
#include <string>
#include <vector>

#include "skelact/clip.hpp"
#include "skelact/graph.hpp"
#include "skelact/heads.hpp"
#include "skelact/model.hpp"
#include "skelact/synthetic.hpp"
#include "skelact/training.hpp"
#include "skelact/verification.hpp"

namespace fs = std::filesystem;
using namespace skelact;
using Clock = std::chrono::steady_clock;

namespace {

double seconds_since(Clock::time_point start) {
  return std::chrono::duration<double>(Clock::now() - start).count();
}

std::string fmt(double v, const char* spec = "%.4g") {
  char buf[64];
  std::snprintf(buf, sizeof(buf), spec, v);
  return buf;
}

ModelConfig bench_model_config() {
  ModelConfig config;
  config.channels = {8, 16, 24};
  config.strides = {2, 2, 2};
  config.temporal_kernel = 9;
  config.class_count = 8;
  config.segment_count = 5;
  config.selected_count = 3;
  return config;
}

TrainConfig bench_train_config(std::uint64_t seed, bool dif, BranchMode branch) {
  TrainConfig config;
  config.epochs = 35;
  config.batch_size = 16;
  config.lr0 = 0.065;
  config.lr_drop_epochs = {21, 29};
  config.resample_frames = 64;
  config.seed = seed;
  config.dif_enabled = dif;
  config.branch_mode = branch;
  return config;
}

const std::vector<std::uint64_t> kSeeds = {0, 1, 2};

struct SharedState {
  fs::path artifacts;
  Dataset train_split, val_split;
  std::vector<std::unique_ptr<Model>> dif_models;  // two-branch + canonicalized input
  std::vector<double> dif_top1, nodif_top1;
  double ablation_seconds = 0.0;
  bool trained = false;
};

// The six training runs behind the direction-invariance ablation.  The
// two-branch models are kept for reuse by later criteria.
void ensure_trained(SharedState& state) {
  if (state.trained) return;
  const auto start = Clock::now();
  for (std::uint64_t seed : kSeeds) {
    auto model = std::make_unique<Model>(state.train_split.clips.front().topology,
                                         bench_model_config(), seed);
    auto records = train(*model, state.train_split, state.val_split,
                         bench_train_config(seed, true, BranchMode::kBoth));
    state.dif_top1.push_back(records.back().val_top1);
    state.dif_models.push_back(std::move(model));

    Model plain(state.train_split.clips.front().topology, bench_model_config(), seed);
    records = train(plain, state.train_split, state.val_split,
                    bench_train_config(seed, false, BranchMode::kBoth));
    state.nodif_top1.push_back(records.back().val_top1);
  }
  state.ablation_seconds = seconds_since(start);
  state.trained = true;
}

double mean(const std::vector<double>& values) {
  double sum = 0.0;
  for (double v : values) sum += v;
  return sum / static_cast<double>(values.size());
}

Dataset noised_copy(const Dataset& data, double sigma, std::uint64_t seed) {
  Dataset out = data;
  for (std::size_t i = 0; i < out.clips.size(); ++i) {
    out.clips[i] = add_gaussian_noise(data.clips[i], sigma,
                                      RandomStream::mix(seed, static_cast<std::uint64_t>(i)));
  }
  return out;
}

EvalResult eval_noised(Model& model, const Dataset& val, BranchMode fusion,
                       const TrainConfig& config, double sigma, std::uint64_t seed) {
  if (sigma == 0.0) return evaluate(model, val, fusion, config);
  const Dataset noised = noised_copy(val, sigma, seed);
  return evaluate(model, noised, fusion, config);
}

// Random proper rigid motion: rotation composed from three axis rotations
// plus a translation.
SkeletonClip random_rigid_motion(const SkeletonClip& clip, RandomStream& rng) {
  const double a = rng.normal() * 2.0, b = rng.normal() * 2.0, c = rng.normal() * 2.0;
  const double ca = std::cos(a), sa = std::sin(a);
  const double cb = std::cos(b), sb = std::sin(b);
  const double cc = std::cos(c), sc = std::sin(c);
  // R = Rz(a) * Ry(b) * Rx(c)
  const double r[3][3] = {
      {ca * cb, ca * sb * sc - sa * cc, ca * sb * cc + sa * sc},
      {sa * cb, sa * sb * sc + ca * cc, sa * sb * cc - ca * sc},
      {-sb, cb * sc, cb * cc},
  };
  const double tx = rng.normal() * 2.0, ty = rng.normal() * 2.0, tz = rng.normal() * 2.0;

  SkeletonClip moved = clip;
  for (int t = 0; t < clip.frames(); ++t) {
    for (int v = 0; v < clip.joints(); ++v) {
      const double x = clip.positions(t, v, 0);
      const double y = clip.positions(t, v, 1);
      const double z = clip.positions(t, v, 2);
      moved.positions(t, v, 0) = r[0][0] * x + r[0][1] * y + r[0][2] * z + tx;
      moved.positions(t, v, 1) = r[1][0] * x + r[1][1] * y + r[1][2] * z + ty;
      moved.positions(t, v, 2) = r[2][0] * x + r[2][1] * y + r[2][2] * z + tz;
    }
  }
  return moved;
}

struct Outcome {
  bool pass = false;
  std::string detail;
};

Outcome check_gradient_suite(SharedState& state) {
  const auto start = Clock::now();
  const double tolerance = 1e-4;
  // Unstrided so the eight-frame probe input still yields five segments; the
  // strided block has its own dedicated check.
  ModelConfig config = bench_model_config();
  config.strides = {1, 1, 1};
  const std::vector<SuiteCheck> checks = run_gradient_suite(config, tolerance, false);
  {
    std::ofstream out(state.artifacts / "gradient_suite.txt");
    out << gradient_suite_table(checks, tolerance);
  }
  const std::vector<std::string> expected = {
      "dense", "relu", "batch_norm", "temporal_conv", "graph_conv", "stgcn_block",
      "stgcn_block_strided", "spatial_attention", "segment_pool", "global_branch", "full_model"};
  for (const std::string& name : expected) {
    const bool found = std::any_of(checks.begin(), checks.end(),
                                   [&](const SuiteCheck& c) { return c.name == name; });
    if (!found) return {false, "missing check '" + name + "'"};
  }
  double worst = 0.0;
  for (const SuiteCheck& check : checks) worst = std::max(worst, check.report.max_error());
  const double elapsed = seconds_since(start);
  const bool pass = gradient_suite_passed(checks) && elapsed < 120.0;
  return {pass, std::to_string(checks.size()) + " checks, max rel error " + fmt(worst) +
                    " (tol 1e-4), " + fmt(elapsed, "%.1f") + "s < 120s"};
}

Outcome check_graph_conv_oracle(SharedState&) {
  RandomStream rng(777);
  double worst = 0.0;
  for (int instance = 0; instance < 100; ++instance) {
    const int joints = rng.uniform_int(3, 10);
    auto topo = std::make_shared<SkeletonTopology>();
    topo->joint_count = joints;
    topo->parent.assign(static_cast<std::size_t>(joints), -1);
    topo->names.resize(static_cast<std::size_t>(joints));
    for (int v = 0; v < joints; ++v) topo->names[static_cast<std::size_t>(v)] = "j" + std::to_string(v);
    for (int v = 1; v < joints; ++v) topo->parent[static_cast<std::size_t>(v)] = rng.uniform_int(0, v - 1);
    topo->center_joint = rng.uniform_int(0, joints - 1);
    topo->validate_tree();
    const SkeletonGraph graph = build_graph(topo);

    const int c_in = rng.uniform_int(1, 4), c_out = rng.uniform_int(1, 4);
    Tensor f_in = Tensor::zeros({c_in, joints});
    for (double& v : f_in.data()) v = rng.normal();
    std::array<Tensor, 3> weights = {Tensor::zeros({c_in, c_out}), Tensor::zeros({c_in, c_out}),
                                     Tensor::zeros({c_in, c_out})};
    for (auto& w : weights) {
      for (double& v : w.data()) v = rng.normal();
    }

    const Tensor fast = graph_conv_apply(graph, f_in, weights);

    // Literal per-vertex form: every output vertex gathers each partition's
    // normalized neighbors one scalar at a time.
    for (int co = 0; co < c_out; ++co) {
      for (int v = 0; v < joints; ++v) {
        double acc = 0.0;
        for (int k = 0; k < 3; ++k) {
          for (int u = 0; u < joints; ++u) {
            const double a = graph.normalized[static_cast<std::size_t>(k)](v, u);
            if (a == 0.0) continue;
            double projected = 0.0;
            for (int ci = 0; ci < c_in; ++ci) {
              projected += weights[static_cast<std::size_t>(k)](ci, co) * f_in(ci, u);
            }
            acc += a * projected;
          }
        }
        worst = std::max(worst, std::abs(acc - fast(co, v)));
      }
    }
  }
  return {worst <= 1e-12, "100 random instances, max |matrix - loop| = " + fmt(worst)};
}

Outcome check_dif_invariance(SharedState& state) {
  // Part 1: logits are unchanged by rigid motions of the raw input.
  Model model(ntu25_topology(), bench_model_config(), 123);
  model.set_mode(Mode::kEval);
  RandomStream rng(555);
  const std::vector<SkeletonClip>& pool = state.val_split.clips;
  double worst = 0.0;
  for (int i = 0; i < 100; ++i) {
    const SkeletonClip& clip = pool[static_cast<std::size_t>(i) % pool.size()];
    const SkeletonClip moved = random_rigid_motion(clip, rng);
    const SkeletonClip a = preprocess_clip(clip, true, 64);
    const SkeletonClip b = preprocess_clip(moved, true, 64);
    const Tensor xa = clips_to_batch({&a}), xb = clips_to_batch({&b});
    ModelForward fa = model.forward(xa, nullptr, BranchMode::kBoth);
    ModelForward fb = model.forward(xb, nullptr, BranchMode::kBoth);
    for (int c = 0; c < fa.global_logits.dim(1); ++c) {
      worst = std::max(worst, std::abs(fa.global_logits(0, c) - fb.global_logits(0, c)));
      worst = std::max(worst, std::abs(fa.dfl.aggregate(0, c) - fb.dfl.aggregate(0, c)));
    }
  }
  if (worst >= 1e-9) {
    return {false, "max logit difference under rigid motion = " + fmt(worst)};
  }

  // Part 2: a trained model scores a rigidly moved validation set identically.
  ensure_trained(state);
  const TrainConfig config = bench_train_config(0, true, BranchMode::kBoth);
  Dataset moved_val = state.val_split;
  for (SkeletonClip& clip : moved_val.clips) clip = random_rigid_motion(clip, rng);
  const EvalResult base = evaluate(*state.dif_models.front(), state.val_split,
                                   BranchMode::kBoth, config);
  const EvalResult moved = evaluate(*state.dif_models.front(), moved_val,
                                    BranchMode::kBoth, config);
  const bool equal = base.top1 == moved.top1 && base.top5 == moved.top5;
  return {equal, "max logit difference " + fmt(worst) + " < 1e-9; moved-set accuracy " +
                     fmt(moved.top1, "%.17g") + " == " + fmt(base.top1, "%.17g")};
}

Outcome check_dif_ablation(SharedState& state) {
  ensure_trained(state);
  const double with = mean(state.dif_top1), without = mean(state.nodif_top1);
  {
    std::ofstream out(state.artifacts / "dif_ablation.csv");
    out << "seed,with_canonicalization,without\n";
    for (std::size_t i = 0; i < kSeeds.size(); ++i) {
      out << kSeeds[i] << ',' << fmt(state.dif_top1[i], "%.17g") << ','
          << fmt(state.nodif_top1[i], "%.17g") << '\n';
    }
  }
  const bool pass = (with - without) >= 0.05 && state.ablation_seconds < 900.0;
  return {pass, "mean top-1 " + fmt(with) + " vs " + fmt(without) + " (gap " +
                    fmt(100.0 * (with - without), "%.1f") + " pts >= 5), 6 runs in " +
                    fmt(state.ablation_seconds, "%.0f") + "s < 900s"};
}

Outcome check_fusion(SharedState& state) {
  // The benchmark for this trend carries sigma=0.02 observation noise on its
  // inputs: every arm trains and evaluates on the same noise-injected splits.
  const double sigma = 0.02;
  std::vector<double> fused, global_alone, dfl_alone;
  for (std::size_t i = 0; i < kSeeds.size(); ++i) {
    const std::uint64_t seed = kSeeds[i];
    const Dataset noisy_train =
        noised_copy(state.train_split, sigma, RandomStream::mix(seed, 17));
    const Dataset noisy_val = noised_copy(state.val_split, sigma, seed);
    const auto run_arm = [&](BranchMode branch) {
      Model model(noisy_train.clips.front().topology, bench_model_config(), seed);
      const TrainConfig config = bench_train_config(seed, true, branch);
      train(model, noisy_train, Dataset{}, config);
      return evaluate(model, noisy_val, branch, config).top1;
    };
    fused.push_back(run_arm(BranchMode::kBoth));
    global_alone.push_back(run_arm(BranchMode::kGlobal));
    dfl_alone.push_back(run_arm(BranchMode::kDfl));
  }
  {
    std::ofstream out(state.artifacts / "fusion.csv");
    out << "seed,global_alone,dfl_alone,fused\n";
    for (std::size_t i = 0; i < kSeeds.size(); ++i) {
      out << kSeeds[i] << ',' << fmt(global_alone[i], "%.17g") << ',' << fmt(dfl_alone[i], "%.17g")
          << ',' << fmt(fused[i], "%.17g") << '\n';
    }
  }
  const double best_single = std::max(mean(global_alone), mean(dfl_alone));
  const bool pass = mean(fused) >= best_single - 0.01;
  return {pass, "sigma 0.02 mean top-1: fused " + fmt(mean(fused)) + ", global-alone " +
                    fmt(mean(global_alone)) + ", dfl-alone " + fmt(mean(dfl_alone)) +
                    " (fused >= best single - 1 pt)"};
}

Outcome check_selection_oracle(SharedState&) {
  RandomStream rng(888);
  for (int instance = 0; instance < 1000; ++instance) {
    const int n = rng.uniform_int(1, 8);
    const int d = rng.uniform_int(1, n);
    Tensor scores = Tensor::zeros({1, n});
    const bool quantized = instance % 2 == 0;
    for (int i = 0; i < n; ++i) {
      // Quarter-integer scores make ties common and subset sums exact.
      scores(0, i) = quantized ? rng.uniform_int(-8, 8) / 4.0 : rng.normal();
    }

    const std::vector<int> picked = select_top_segments(scores, d).front();

    std::vector<int> best;
    double best_sum = 0.0;
    std::vector<int> subset(static_cast<std::size_t>(d));
    std::function<void(int, int)> enumerate = [&](int next, int chosen) {
      if (chosen == d) {
        double sum = 0.0;
        for (int idx : subset) sum += scores(0, idx);
        if (best.empty() || sum > best_sum || (sum == best_sum && subset < best)) {
          best = subset;
          best_sum = sum;
        }
        return;
      }
      if (n - next < d - chosen) return;
      for (int i = next; i < n; ++i) {
        subset[static_cast<std::size_t>(chosen)] = i;
        enumerate(i + 1, chosen + 1);
      }
    };
    enumerate(0, 0);

    if (picked != best) {
      std::ostringstream msg;
      msg << "instance " << instance << " (n=" << n << ", d=" << d << "): selection {";
      for (int idx : picked) msg << ' ' << idx;
      msg << " } != exhaustive {";
      for (int idx : best) msg << ' ' << idx;
      msg << " }";
      return {false, msg.str()};
    }
  }
  return {true, "1000 random score vectors (n <= 8, ties included) match exhaustive enumeration"};
}

Outcome check_noise_robustness(SharedState& state) {
  ensure_trained(state);
  bool pass = true;
  std::string detail;
  for (BranchMode mode : {BranchMode::kGlobal, BranchMode::kDfl}) {
    std::vector<ExperimentPoint> points;
    std::vector<double> clean, noisy;
    for (std::size_t i = 0; i < kSeeds.size(); ++i) {
      const TrainConfig eval_config = bench_train_config(kSeeds[i], true, BranchMode::kBoth);
      for (double sigma : {0.0, 0.1}) {
        const double top1 = eval_noised(*state.dif_models[i], state.val_split, mode, eval_config,
                                        sigma, kSeeds[i])
                                .top1;
        (sigma == 0.0 ? clean : noisy).push_back(top1);
        points.push_back({sigma, kSeeds[i], top1});
      }
    }
    std::stable_sort(points.begin(), points.end(),
                     [](const ExperimentPoint& a, const ExperimentPoint& b) {
                       return a.x != b.x ? a.x < b.x : a.seed < b.seed;
                     });
    const std::string file = mode == BranchMode::kGlobal ? "noise_global.csv" : "noise_dfl.csv";
    write_experiment_csv((state.artifacts / file).string(), "sigma", points);
    if (!detail.empty()) detail += "; ";
    detail += std::string(branch_mode_name(mode)) + " " + fmt(mean(clean)) + " -> " +
              fmt(mean(noisy));
    pass = pass && mean(noisy) <= mean(clean);
  }
  return {pass, "3-seed mean top-1 at sigma 0 -> 0.1: " + detail + "; CSVs written"};
}

Outcome check_overfit(SharedState& state) {
  const auto start = Clock::now();
  const Dataset subset = subsample_stratified(state.train_split, 32.0 / 256.0, 0);
  if (static_cast<int>(subset.clips.size()) != 32) {
    return {false, "subset has " + std::to_string(subset.clips.size()) + " clips, wanted 32"};
  }
  TrainConfig config = bench_train_config(0, true, BranchMode::kBoth);
  config.epochs = 200;
  config.lr0 = 0.05;
  config.lr_drop_epochs = {};
  Model model(subset.clips.front().topology, bench_model_config(), 0);
  const std::vector<MetricsRecord> records = train(model, subset, Dataset{}, config);
  int reached = -1;
  for (const MetricsRecord& record : records) {
    if (record.train_top1 == 1.0) {
      reached = record.epoch;
      break;
    }
  }
  const double elapsed = seconds_since(start);
  const bool pass = reached >= 0 && elapsed < 180.0;
  return {pass, reached >= 0
                    ? "100% train top-1 at epoch " + std::to_string(reached) + " (<= 200), " +
                          fmt(elapsed, "%.0f") + "s < 180s"
                    : "never reached 100% train top-1 in 200 epochs"};
}

Outcome check_loss_identity(SharedState& state) {
  Model model(ntu25_topology(), bench_model_config(), 0);
  for (ParamRef& param : model.params(BranchMode::kBoth)) param.value->fill(0.0);
  RandomStream rng(999);
  Tensor input = Tensor::zeros({4, 3, 64, 25});
  for (double& v : input.data()) v = rng.normal();
  const std::vector<int> labels = {0, 3, 5, 7};
  const ModelForward record = model.forward(input, &labels, BranchMode::kBoth);
  const double expected = 4.0 * std::log(static_cast<double>(model.config().class_count));
  const double diff = std::abs(record.loss_total - expected);
  (void)state;
  return {diff <= 1e-12, "all-zero model loss " + fmt(record.loss_total, "%.17g") + " vs 4*ln(8) " +
                             fmt(expected, "%.17g") + ", |diff| = " + fmt(diff)};
}

Outcome check_determinism(SharedState& state) {
  ModelConfig model_config;
  model_config.channels = {4, 8};
  model_config.strides = {1, 2};
  model_config.temporal_kernel = 5;
  model_config.class_count = 8;
  model_config.segment_count = 4;
  model_config.selected_count = 2;
  TrainConfig train_config = bench_train_config(0, true, BranchMode::kBoth);
  train_config.epochs = 3;
  train_config.resample_frames = 20;
  train_config.lr_drop_epochs = {};
  const Dataset small = subsample_stratified(state.train_split, 0.25, 0);

  std::array<std::string, 2> csvs;
  for (int run = 0; run < 2; ++run) {
    Model model(small.clips.front().topology, model_config, 0);
    const auto records = train(model, small, state.val_split, train_config);
    const std::string path =
        (state.artifacts / ("determinism_" + std::string(run == 0 ? "a" : "b") + ".csv")).string();
    write_metrics_csv(path, records);
    std::ifstream in(path, std::ios::binary);
    std::ostringstream buffer;
    buffer << in.rdbuf();
    csvs[static_cast<std::size_t>(run)] = buffer.str();
  }

  // The final column is wall-clock seconds; every other byte must agree.
  auto mask_seconds = [](const std::string& text) {
    std::istringstream in(text);
    std::ostringstream out;
    std::string line;
    while (std::getline(in, line)) {
      const std::size_t cut = line.rfind(',');
      out << line.substr(0, cut) << '\n';
    }
    return out.str();
  };
  const std::string a = mask_seconds(csvs[0]), b = mask_seconds(csvs[1]);
  return {!a.empty() && a == b,
          "two identical-seed runs produced identical metrics (wall-clock column excluded)"};
}

}  // namespace

int main(int argc, char** argv) {
  SharedState state;
  state.artifacts = argc > 1 ? fs::path(argv[1]) : fs::path("acceptance_artifacts");
  fs::create_directories(state.artifacts);

  SyntheticSpec spec;  // 8 classes x 40 clips, direction-randomized
  Dataset all = generate_synthetic_dataset(spec);
  std::tie(state.train_split, state.val_split) = split_dataset(all, 0.2, 0);

  struct Criterion {
    int id;
    std::string name;
    std::function<Outcome(SharedState&)> run;
  };
  const std::vector<Criterion> criteria = {
      {1, "gradient-suite", check_gradient_suite},
      {2, "graph-conv-oracle", check_graph_conv_oracle},
      {3, "direction-invariance", check_dif_invariance},
      {4, "canonicalization-ablation", check_dif_ablation},
      {5, "fusion-ablation", check_fusion},
      {6, "selection-oracle", check_selection_oracle},
      {7, "noise-robustness", check_noise_robustness},
      {8, "overfit-sanity", check_overfit},
      {9, "loss-identity", check_loss_identity},
      {10, "determinism", check_determinism},
  };

  bool all_pass = true;
  for (const Criterion& criterion : criteria) {
    const auto start = Clock::now();
    Outcome outcome;
    try {
      outcome = criterion.run(state);
    } catch (const std::exception& e) {
      outcome = {false, std::string("exception: ") + e.what()};
    }
    all_pass = all_pass && outcome.pass;
    std::printf("[%s] %d %s (%.1fs): %s\n", outcome.pass ? "PASS" : "FAIL", criterion.id,
                criterion.name.c_str(), seconds_since(start), outcome.detail.c_str());
    std::fflush(stdout);
  }
  return all_pass ? 0 : 1;
}
