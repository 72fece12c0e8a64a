#include "skelact/heads.hpp"

#include <algorithm>
#include <numeric>
#include <stdexcept>
#include <string>

namespace skelact {

std::string saliency_mode_name(SaliencyMode mode) {
  return mode == SaliencyMode::kSoftmax ? "softmax" : "logit";
}

SaliencyMode saliency_mode_from_name(const std::string& name) {
  if (name == "softmax") return SaliencyMode::kSoftmax;
  if (name == "logit") return SaliencyMode::kLogit;
  throw std::invalid_argument("unknown saliency mode '" + name + "' (softmax|logit)");
}

GlobalBranch::GlobalBranch(int channels, int classes, RandomStream& rng)
    : fc_(channels, classes, rng) {}

Tensor GlobalBranch::forward(const Tensor& f_out) { return fc_.forward(pool_.forward(f_out)); }

Tensor GlobalBranch::backward(const Tensor& logit_grad) {
  return pool_.backward(fc_.backward(logit_grad));
}

void GlobalBranch::collect_params(const std::string& prefix, std::vector<ParamRef>& out) {
  fc_.collect_params(prefix + "fc.", out);
}

DflBranch::DflBranch(int channels, int classes, int n_segments, int n_selected,
                     SaliencyMode mode, RandomStream& rng)
    : channels_(channels),
      classes_(classes),
      n_segments_(n_segments),
      n_selected_(n_selected),
      mode_(mode),
      pool_(n_segments),
      shared_h_(channels, classes, rng) {
  if (channels <= 0 || classes <= 0) {
    throw std::invalid_argument("dfl branch: channels and classes must be positive");
  }
  if (n_selected < 1 || n_selected > n_segments) {
    throw std::invalid_argument("dfl branch: need 1 <= selected count <= segment count, got " +
                                std::to_string(n_selected) + " of " +
                                std::to_string(n_segments));
  }
  for (int m = 0; m < n_selected; ++m) {
    slots_.push_back(std::make_unique<Dense>(channels, classes, rng));
  }
}

DflResult DflBranch::forward(const Tensor& f_out,
                             const std::vector<std::vector<int>>* forced_selection) {
  DflResult result;
  result.segments = pool_.forward(f_out);
  const int b = result.segments.dim(0);
  const int n = n_segments_, c = classes_, d = n_selected_, ch = channels_;

  Tensor flat = Tensor::zeros({b * n, ch});
  flat.data() = result.segments.data();
  Tensor flat_logits = shared_h_.forward(flat);
  result.segment_logits = Tensor::zeros({b, n, c});
  result.segment_logits.data() = flat_logits.data();

  result.saliency = saliency_scores(result.segment_logits, mode_);
  if (forced_selection) {
    if (static_cast<int>(forced_selection->size()) != b) {
      throw std::invalid_argument("dfl branch: forced selection needs one entry per sample");
    }
    for (const std::vector<int>& sel : *forced_selection) {
      if (static_cast<int>(sel.size()) != d) {
        throw std::invalid_argument("dfl branch: forced selection entries must have size " +
                                    std::to_string(d));
      }
      for (std::size_t i = 0; i < sel.size(); ++i) {
        if (sel[i] < 0 || sel[i] >= n || (i > 0 && sel[i] <= sel[i - 1])) {
          throw std::invalid_argument(
              "dfl branch: forced selection must be strictly ascending within range");
        }
      }
    }
    result.selected = *forced_selection;
  } else {
    result.selected = select_top_segments(result.saliency, d);
  }

  result.slot_logits = Tensor::zeros({b, d, c});
  result.aggregate = Tensor::zeros({b, c});
  for (int m = 0; m < d; ++m) {
    Tensor gathered = Tensor::zeros({b, ch});
    for (int bi = 0; bi < b; ++bi) {
      const int seg = result.selected[static_cast<std::size_t>(bi)][static_cast<std::size_t>(m)];
      for (int k = 0; k < ch; ++k) gathered(bi, k) = result.segments(bi, seg, k);
    }
    Tensor out = slots_[static_cast<std::size_t>(m)]->forward(gathered);
    for (int bi = 0; bi < b; ++bi) {
      for (int j = 0; j < c; ++j) {
        result.slot_logits(bi, m, j) = out(bi, j);
        result.aggregate(bi, j) += out(bi, j);
      }
    }
  }

  cached_selected_ = result.selected;
  cached_map_shape_ = result.segments.shape();
  cached_batch_ = b;
  has_cache_ = true;
  return result;
}

Tensor DflBranch::backward(const Tensor& segment_logit_grad, const Tensor& slot_logit_grad,
                           const Tensor& aggregate_grad) {
  if (!has_cache_) throw std::logic_error("dfl branch: backward called before forward");
  const int b = cached_batch_, n = n_segments_, c = classes_, d = n_selected_, ch = channels_;
  if (segment_logit_grad.shape() != std::vector<int>{b, n, c} ||
      slot_logit_grad.shape() != std::vector<int>{b, d, c} ||
      aggregate_grad.shape() != std::vector<int>{b, c}) {
    throw std::invalid_argument("dfl branch: gradient shapes do not match the forward pass");
  }

  Tensor map_grad = Tensor::zeros(cached_map_shape_);
  for (int m = 0; m < d; ++m) {
    Tensor rows = Tensor::zeros({b, c});
    for (int bi = 0; bi < b; ++bi) {
      for (int j = 0; j < c; ++j) {
        rows(bi, j) = slot_logit_grad(bi, m, j) + aggregate_grad(bi, j);
      }
    }
    Tensor gathered_grad = slots_[static_cast<std::size_t>(m)]->backward(rows);
    for (int bi = 0; bi < b; ++bi) {
      const int seg = cached_selected_[static_cast<std::size_t>(bi)][static_cast<std::size_t>(m)];
      for (int k = 0; k < ch; ++k) map_grad(bi, seg, k) += gathered_grad(bi, k);
    }
  }

  Tensor flat_grad = Tensor::zeros({b * n, c});
  flat_grad.data() = segment_logit_grad.data();
  Tensor shared_grad = shared_h_.backward(flat_grad);
  for (int i = 0; i < map_grad.size(); ++i) map_grad[i] += shared_grad[i];

  return pool_.backward(map_grad);
}

Tensor DflBranch::segment_pool_backward(const Tensor& map_grad) {
  if (!has_cache_) throw std::logic_error("dfl branch: backward called before forward");
  return pool_.backward(map_grad);
}

void DflBranch::collect_params(const std::string& prefix, std::vector<ParamRef>& out) {
  shared_h_.collect_params(prefix + "h.", out);
  for (std::size_t m = 0; m < slots_.size(); ++m) {
    slots_[m]->collect_params(prefix + "g" + std::to_string(m) + ".", out);
  }
}

std::vector<ParamRef> DflBranch::params() {
  std::vector<ParamRef> out;
  collect_params("", out);
  return out;
}

void DflBranch::zero_grad() {
  for (const ParamRef& p : params()) p.grad->fill(0.0);
}

Tensor saliency_scores(const Tensor& segment_logits, SaliencyMode mode) {
  if (segment_logits.ndim() != 3) {
    throw std::invalid_argument("saliency: expected B×N×c logits, got " +
                                segment_logits.shape_str());
  }
  const int b = segment_logits.dim(0), n = segment_logits.dim(1), c = segment_logits.dim(2);
  const Tensor source =
      mode == SaliencyMode::kSoftmax ? softmax(segment_logits, 2) : segment_logits;
  Tensor scores = Tensor::zeros({b, n});
  for (int bi = 0; bi < b; ++bi) {
    for (int ni = 0; ni < n; ++ni) {
      double best = source(bi, ni, 0);
      for (int j = 1; j < c; ++j) best = std::max(best, source(bi, ni, j));
      scores(bi, ni) = best;
    }
  }
  return scores;
}

std::vector<std::vector<int>> select_top_segments(const Tensor& scores, int n_selected) {
  if (scores.ndim() != 2) {
    throw std::invalid_argument("selection: expected B×N scores, got " + scores.shape_str());
  }
  const int b = scores.dim(0), n = scores.dim(1);
  if (n_selected < 1 || n_selected > n) {
    throw std::invalid_argument("selection: need 1 <= selected count <= segment count");
  }
  std::vector<std::vector<int>> selected;
  selected.reserve(static_cast<std::size_t>(b));
  for (int bi = 0; bi < b; ++bi) {
    std::vector<int> order(static_cast<std::size_t>(n));
    std::iota(order.begin(), order.end(), 0);
    std::sort(order.begin(), order.end(), [&](int lhs, int rhs) {
      if (scores(bi, lhs) != scores(bi, rhs)) return scores(bi, lhs) > scores(bi, rhs);
      return lhs < rhs;  // ties prefer the earlier segment
    });
    order.resize(static_cast<std::size_t>(n_selected));
    std::sort(order.begin(), order.end());
    selected.push_back(std::move(order));
  }
  return selected;
}

DflLosses dfl_losses(const DflResult& result, const std::vector<int>& labels) {
  const int b = result.segment_logits.dim(0);
  const int n = result.segment_logits.dim(1);
  const int c = result.segment_logits.dim(2);
  const int d = result.slot_logits.dim(1);
  if (static_cast<int>(labels.size()) != b) {
    throw std::invalid_argument("dfl losses: need one label per sample");
  }

  DflLosses losses;
  losses.segment_logit_grad = Tensor::zeros({b, n, c});
  losses.slot_logit_grad = Tensor::zeros({b, d, c});

  for (int i = 0; i < n; ++i) {
    Tensor slice = Tensor::zeros({b, c});
    for (int bi = 0; bi < b; ++bi) {
      for (int j = 0; j < c; ++j) slice(bi, j) = result.segment_logits(bi, i, j);
    }
    CrossEntropyResult ce = cross_entropy(slice, labels);
    losses.segment_loss += ce.loss / n;
    for (int bi = 0; bi < b; ++bi) {
      for (int j = 0; j < c; ++j) {
        losses.segment_logit_grad(bi, i, j) = ce.dlogits(bi, j) / n;
      }
    }
  }

  for (int m = 0; m < d; ++m) {
    Tensor slice = Tensor::zeros({b, c});
    for (int bi = 0; bi < b; ++bi) {
      for (int j = 0; j < c; ++j) slice(bi, j) = result.slot_logits(bi, m, j);
    }
    CrossEntropyResult ce = cross_entropy(slice, labels);
    losses.slot_loss += ce.loss / d;
    for (int bi = 0; bi < b; ++bi) {
      for (int j = 0; j < c; ++j) {
        losses.slot_logit_grad(bi, m, j) = ce.dlogits(bi, j) / d;
      }
    }
  }

  CrossEntropyResult ce = cross_entropy(result.aggregate, labels);
  losses.aggregate_loss = ce.loss;
  losses.aggregate_grad = ce.dlogits;
  return losses;
}

Tensor fuse_inference(const Tensor& global_logits, const Tensor& aggregate_logits) {
  if (global_logits.ndim() != 2 || global_logits.shape() != aggregate_logits.shape()) {
    throw std::invalid_argument("fusion: logits must share a B×c shape, got " +
                                global_logits.shape_str() + " and " +
                                aggregate_logits.shape_str());
  }
  Tensor pg = softmax(global_logits, 1);
  Tensor pa = softmax(aggregate_logits, 1);
  Tensor out = Tensor::zeros(pg.shape());
  for (int i = 0; i < out.size(); ++i) out[i] = 0.5 * (pg[i] + pa[i]);
  return out;
}

}  // namespace skelact
