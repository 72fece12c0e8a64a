#include "skelact/backbone.hpp"

#include <cmath>
#include <stdexcept>
#include <string>

namespace skelact {

namespace {

void check_feature_map(const Tensor& t, int channels, int joints, const char* layer) {
  if (t.ndim() != 4) {
    throw std::invalid_argument(std::string(layer) + ": expected B×C×T×V input, got " +
                                t.shape_str());
  }
  if (t.dim(1) != channels) {
    throw std::invalid_argument(std::string(layer) + ": expected " + std::to_string(channels) +
                                " channels, got " + std::to_string(t.dim(1)));
  }
  if (joints > 0 && t.dim(3) != joints) {
    throw std::invalid_argument(std::string(layer) + ": expected " + std::to_string(joints) +
                                " joints, got " + std::to_string(t.dim(3)));
  }
}

}  // namespace

GraphConvLayer::GraphConvLayer(GraphPtr graph, int in_channels, int out_channels,
                               RandomStream& rng)
    : graph_(std::move(graph)), in_channels_(in_channels), out_channels_(out_channels) {
  if (!graph_) throw std::invalid_argument("graph conv: null graph");
  if (in_channels <= 0 || out_channels <= 0) {
    throw std::invalid_argument("graph conv: channel counts must be positive");
  }
  for (int k = 0; k < 3; ++k) {
    weight_[static_cast<std::size_t>(k)] =
        glorot_uniform({in_channels, out_channels}, in_channels, out_channels, rng);
    dweight_[static_cast<std::size_t>(k)] = Tensor::zeros({in_channels, out_channels});
  }
  bias_ = Tensor::zeros({out_channels});
  dbias_ = Tensor::zeros({out_channels});
}

Tensor GraphConvLayer::forward(const Tensor& input) {
  check_feature_map(input, in_channels_, graph_->joint_count, "graph conv");
  debug_check_finite(input, "graph conv input");
  const int b = input.dim(0), t = input.dim(2), v = input.dim(3);
  const int ci = in_channels_, co = out_channels_;
  const int tv = t * v;
  Tensor out = Tensor::zeros({b, co, t, v});
  Tensor mixed = Tensor::zeros({co, t, v});
  const double* in_base = input.data().data();
  double* out_base = out.data().data();
  for (int bi = 0; bi < b; ++bi) {
    const double* x = in_base + static_cast<std::size_t>(bi) * ci * tv;
    double* y = out_base + static_cast<std::size_t>(bi) * co * tv;
    for (int k = 0; k < 3; ++k) {
      // Channel mix for every frame at once, then joint mix row by row.
      detail::mm_tn(weight_[static_cast<std::size_t>(k)].data().data(), x,
                    mixed.data().data(), co, ci, tv, false);
      detail::mm_nt(mixed.data().data(),
                    graph_->normalized[static_cast<std::size_t>(k)].data().data(), y,
                    co * t, v, v, k > 0);
    }
    for (int c = 0; c < co; ++c) {
      const double add = bias_[c];
      double* row = y + static_cast<std::size_t>(c) * tv;
      for (int i = 0; i < tv; ++i) row[i] += add;
    }
  }
  cached_input_ = input;
  has_cache_ = true;
  return out;
}

Tensor GraphConvLayer::backward(const Tensor& output_grad) {
  require_cache(has_cache_, "graph conv");
  check_feature_map(output_grad, out_channels_, graph_->joint_count, "graph conv grad");
  const int b = cached_input_.dim(0), t = cached_input_.dim(2), v = cached_input_.dim(3);
  if (output_grad.dim(0) != b || output_grad.dim(2) != t) {
    throw std::invalid_argument("graph conv: output grad shape " + output_grad.shape_str() +
                                " does not match cached input " + cached_input_.shape_str());
  }
  const int ci = in_channels_, co = out_channels_;
  const int tv = t * v;
  Tensor input_grad = Tensor::zeros({b, ci, t, v});
  Tensor dmixed = Tensor::zeros({co, t, v});
  const double* in_base = cached_input_.data().data();
  const double* go_base = output_grad.data().data();
  double* gi_base = input_grad.data().data();
  for (int bi = 0; bi < b; ++bi) {
    const double* x = in_base + static_cast<std::size_t>(bi) * ci * tv;
    const double* gy = go_base + static_cast<std::size_t>(bi) * co * tv;
    double* gx = gi_base + static_cast<std::size_t>(bi) * ci * tv;
    for (int k = 0; k < 3; ++k) {
      detail::mm_nn(gy, graph_->normalized[static_cast<std::size_t>(k)].data().data(),
                    dmixed.data().data(), co * t, v, v, false);
      detail::mm_nn(weight_[static_cast<std::size_t>(k)].data().data(), dmixed.data().data(),
                    gx, ci, co, tv, k > 0);
      detail::mm_nt(x, dmixed.data().data(),
                    dweight_[static_cast<std::size_t>(k)].data().data(), ci, tv, co, true);
    }
    for (int c = 0; c < co; ++c) {
      const double* row = gy + static_cast<std::size_t>(c) * tv;
      double sum = 0.0;
      for (int i = 0; i < tv; ++i) sum += row[i];
      dbias_[c] += sum;
    }
  }
  return input_grad;
}

void GraphConvLayer::collect_params(const std::string& prefix, std::vector<ParamRef>& out) {
  for (int k = 0; k < 3; ++k) {
    out.push_back({prefix + "w" + std::to_string(k), &weight_[static_cast<std::size_t>(k)],
                   &dweight_[static_cast<std::size_t>(k)]});
  }
  out.push_back({prefix + "b", &bias_, &dbias_});
}

StgcnBlock::StgcnBlock(GraphPtr graph, const StgcnBlockConfig& config, RandomStream& rng)
    : config_(config),
      gcn_(graph, config.in_channels, config.out_channels, rng),
      tconv_(config.out_channels, config.out_channels, config.temporal_kernel,
             config.temporal_stride, rng) {
  if (config.temporal_stride < 1) throw std::invalid_argument("stgcn block: stride must be >= 1");
  if (config.batch_norm) {
    bn1_ = std::make_unique<BatchNorm>(config.out_channels);
    bn2_ = std::make_unique<BatchNorm>(config.out_channels);
  }
  if (config.residual) {
    identity_residual_ =
        config.in_channels == config.out_channels && config.temporal_stride == 1;
    if (!identity_residual_) {
      res_proj_ = std::make_unique<TemporalConv>(config.in_channels, config.out_channels, 1,
                                                 config.temporal_stride, rng);
    }
  }
}

Tensor StgcnBlock::forward(const Tensor& input) {
  check_feature_map(input, config_.in_channels, 0, "stgcn block");
  Tensor y = gcn_.forward(input);
  if (bn1_) y = bn1_->forward(y);
  y = relu1_.forward(y);
  y = tconv_.forward(y);
  if (bn2_) y = bn2_->forward(y);
  if (config_.residual) {
    const Tensor res = identity_residual_ ? input : res_proj_->forward(input);
    y.add_(res);
  }
  has_cache_ = true;
  return relu2_.forward(y);
}

Tensor StgcnBlock::backward(const Tensor& output_grad) {
  require_cache(has_cache_, "stgcn block");
  Tensor d = relu2_.backward(output_grad);
  Tensor d_res;
  if (config_.residual) d_res = identity_residual_ ? d : res_proj_->backward(d);
  if (bn2_) d = bn2_->backward(d);
  d = tconv_.backward(d);
  d = relu1_.backward(d);
  if (bn1_) d = bn1_->backward(d);
  Tensor input_grad = gcn_.backward(d);
  if (config_.residual) input_grad.add_(d_res);
  return input_grad;
}

void StgcnBlock::collect_params(const std::string& prefix, std::vector<ParamRef>& out) {
  gcn_.collect_params(prefix + "gcn.", out);
  if (bn1_) bn1_->collect_params(prefix + "bn1.", out);
  tconv_.collect_params(prefix + "tconv.", out);
  if (bn2_) bn2_->collect_params(prefix + "bn2.", out);
  if (res_proj_) res_proj_->collect_params(prefix + "res.", out);
}

void StgcnBlock::collect_stats(const std::string& prefix, std::vector<StatRef>& out) {
  if (bn1_) bn1_->collect_stats(prefix + "bn1.", out);
  if (bn2_) bn2_->collect_stats(prefix + "bn2.", out);
}

void StgcnBlock::set_mode(Mode mode) {
  Layer::set_mode(mode);
  gcn_.set_mode(mode);
  tconv_.set_mode(mode);
  relu1_.set_mode(mode);
  relu2_.set_mode(mode);
  if (bn1_) bn1_->set_mode(mode);
  if (bn2_) bn2_->set_mode(mode);
  if (res_proj_) res_proj_->set_mode(mode);
}

void StgcnBlock::set_stat_tracking(bool on) {
  if (bn1_) bn1_->set_stat_tracking(on);
  if (bn2_) bn2_->set_stat_tracking(on);
}

EsaBlock::EsaBlock(int channels, int spatial_kernel, RandomStream& rng)
    : channels_(channels), kernel_(spatial_kernel), pad_((spatial_kernel - 1) / 2) {
  if (channels <= 0) throw std::invalid_argument("esa block: channels must be positive");
  if (spatial_kernel < 1 || spatial_kernel % 2 == 0) {
    throw std::invalid_argument("esa block: spatial kernel must be odd and positive");
  }
  const int fan = channels * spatial_kernel;
  weight_ = glorot_uniform({channels, channels, spatial_kernel}, fan, fan, rng);
  bias_ = Tensor::zeros({channels});
  dweight_ = Tensor::zeros({channels, channels, spatial_kernel});
  dbias_ = Tensor::zeros({channels});
}

Tensor EsaBlock::forward(const Tensor& input) {
  check_feature_map(input, channels_, 0, "esa block");
  debug_check_finite(input, "esa block input");
  const int b = input.dim(0), c = channels_, t = input.dim(2), v = input.dim(3);
  Tensor mean = Tensor::zeros({b, c, v});
  for (int bi = 0; bi < b; ++bi) {
    for (int ci = 0; ci < c; ++ci) {
      for (int ti = 0; ti < t; ++ti) {
        for (int vi = 0; vi < v; ++vi) mean(bi, ci, vi) += input(bi, ci, ti, vi);
      }
    }
  }
  mean.scale_(1.0 / t);

  Tensor mask = Tensor::zeros({b, c, v});
  for (int bi = 0; bi < b; ++bi) {
    for (int co = 0; co < c; ++co) {
      for (int vi = 0; vi < v; ++vi) {
        double acc = bias_[co];
        for (int ci = 0; ci < c; ++ci) {
          for (int k = 0; k < kernel_; ++k) {
            const int src = vi + k - pad_;
            if (src < 0 || src >= v) continue;
            acc += weight_(co, ci, k) * mean(bi, ci, src);
          }
        }
        mask(bi, co, vi) = 1.0 / (1.0 + std::exp(-acc));
      }
    }
  }

  Tensor out = Tensor::zeros({b, c, t, v});
  for (int bi = 0; bi < b; ++bi) {
    for (int ci = 0; ci < c; ++ci) {
      for (int ti = 0; ti < t; ++ti) {
        for (int vi = 0; vi < v; ++vi) {
          out(bi, ci, ti, vi) = input(bi, ci, ti, vi) * (1.0 + mask(bi, ci, vi));
        }
      }
    }
  }
  cached_input_ = input;
  cached_mean_ = mean;
  cached_mask_ = mask;
  has_cache_ = true;
  return out;
}

Tensor EsaBlock::backward(const Tensor& output_grad) {
  require_cache(has_cache_, "esa block");
  const int b = cached_input_.dim(0), c = channels_;
  const int t = cached_input_.dim(2), v = cached_input_.dim(3);
  if (output_grad.shape() != cached_input_.shape()) {
    throw std::invalid_argument("esa block: output grad shape " + output_grad.shape_str() +
                                " does not match input " + cached_input_.shape_str());
  }

  Tensor input_grad = Tensor::zeros({b, c, t, v});
  Tensor dmask = Tensor::zeros({b, c, v});
  for (int bi = 0; bi < b; ++bi) {
    for (int ci = 0; ci < c; ++ci) {
      for (int ti = 0; ti < t; ++ti) {
        for (int vi = 0; vi < v; ++vi) {
          const double g = output_grad(bi, ci, ti, vi);
          input_grad(bi, ci, ti, vi) = g * (1.0 + cached_mask_(bi, ci, vi));
          dmask(bi, ci, vi) += g * cached_input_(bi, ci, ti, vi);
        }
      }
    }
  }

  // Through the sigmoid into the convolution.
  Tensor dpre = Tensor::zeros({b, c, v});
  for (int i = 0; i < dpre.size(); ++i) {
    const double m = cached_mask_[i];
    dpre[i] = dmask[i] * m * (1.0 - m);
  }

  Tensor dmean = Tensor::zeros({b, c, v});
  for (int bi = 0; bi < b; ++bi) {
    for (int co = 0; co < c; ++co) {
      for (int vi = 0; vi < v; ++vi) {
        const double g = dpre(bi, co, vi);
        dbias_[co] += g;
        for (int ci = 0; ci < c; ++ci) {
          for (int k = 0; k < kernel_; ++k) {
            const int src = vi + k - pad_;
            if (src < 0 || src >= v) continue;
            dweight_(co, ci, k) += g * cached_mean_(bi, ci, src);
            dmean(bi, ci, src) += g * weight_(co, ci, k);
          }
        }
      }
    }
  }

  const double inv_t = 1.0 / t;
  for (int bi = 0; bi < b; ++bi) {
    for (int ci = 0; ci < c; ++ci) {
      for (int ti = 0; ti < t; ++ti) {
        for (int vi = 0; vi < v; ++vi) {
          input_grad(bi, ci, ti, vi) += dmean(bi, ci, vi) * inv_t;
        }
      }
    }
  }
  return input_grad;
}

void EsaBlock::collect_params(const std::string& prefix, std::vector<ParamRef>& out) {
  out.push_back({prefix + "w", &weight_, &dweight_});
  out.push_back({prefix + "b", &bias_, &dbias_});
}

Backbone::Backbone(GraphPtr graph, const BackboneConfig& config, RandomStream& rng)
    : config_(config), graph_(std::move(graph)) {
  if (config.blocks.empty()) throw std::invalid_argument("backbone: needs at least one block");
  for (std::size_t i = 0; i < config.blocks.size(); ++i) {
    if (i > 0 && config.blocks[i].in_channels != config.blocks[i - 1].out_channels) {
      throw std::invalid_argument(
          "backbone: block " + std::to_string(i) + " expects " +
          std::to_string(config.blocks[i].in_channels) + " channels but block " +
          std::to_string(i - 1) + " produces " +
          std::to_string(config.blocks[i - 1].out_channels));
    }
    blocks_.push_back(std::make_unique<StgcnBlock>(graph_, config.blocks[i], rng));
    if (config.esa_enabled) {
      esa_.push_back(
          std::make_unique<EsaBlock>(config.blocks[i].out_channels, config.esa_kernel, rng));
    }
  }
}

Tensor Backbone::forward(const Tensor& input) {
  block_outputs_.clear();
  Tensor x = input;
  for (std::size_t i = 0; i < blocks_.size(); ++i) {
    x = blocks_[i]->forward(x);
    if (config_.esa_enabled) x = esa_[i]->forward(x);
    block_outputs_.push_back(x);
  }
  return x;
}

Tensor Backbone::backward(const Tensor& output_grad) {
  Tensor g = output_grad;
  for (std::size_t i = blocks_.size(); i-- > 0;) {
    if (config_.esa_enabled) g = esa_[i]->backward(g);
    g = blocks_[i]->backward(g);
  }
  return g;
}

void Backbone::collect_params(const std::string& prefix, std::vector<ParamRef>& out) {
  for (std::size_t i = 0; i < blocks_.size(); ++i) {
    blocks_[i]->collect_params(prefix + "block" + std::to_string(i) + ".", out);
    if (config_.esa_enabled) {
      esa_[i]->collect_params(prefix + "esa" + std::to_string(i) + ".", out);
    }
  }
}

void Backbone::collect_stats(const std::string& prefix, std::vector<StatRef>& out) {
  for (std::size_t i = 0; i < blocks_.size(); ++i) {
    blocks_[i]->collect_stats(prefix + "block" + std::to_string(i) + ".", out);
  }
}

void Backbone::set_mode(Mode mode) {
  Layer::set_mode(mode);
  for (auto& block : blocks_) block->set_mode(mode);
  for (auto& esa : esa_) esa->set_mode(mode);
}

void Backbone::set_stat_tracking(bool on) {
  for (auto& block : blocks_) block->set_stat_tracking(on);
}

int Backbone::output_frames(int input_frames) const {
  int t = input_frames;
  for (const auto& block : blocks_) t = block->out_frames(t);
  return t;
}

std::pair<int, int> Backbone::input_frame_range(int out_lo, int out_hi) const {
  int lo = out_lo, hi = out_hi;
  for (std::size_t i = blocks_.size(); i-- > 0;) {
    const StgcnBlockConfig& cfg = config_.blocks[i];
    const int pad = (cfg.temporal_kernel - 1) / 2;
    lo = lo * cfg.temporal_stride - pad;
    hi = hi * cfg.temporal_stride - pad + cfg.temporal_kernel - 1;
  }
  return {lo, hi};
}

}  // namespace skelact
