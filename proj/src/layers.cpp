#include "skelact/layers.hpp"

#include <cmath>
#include <stdexcept>

namespace skelact {

namespace {

void check_ndim(const Tensor& t, int ndim, const char* layer) {
  if (t.ndim() != ndim) {
    throw std::invalid_argument(std::string(layer) + ": expected " + std::to_string(ndim) +
                                "-d input, got shape " + t.shape_str());
  }
}

}  // namespace

Tensor glorot_uniform(const std::vector<int>& shape, int fan_in, int fan_out, RandomStream& rng) {
  Tensor t = Tensor::zeros(shape);
  const double limit = std::sqrt(6.0 / (fan_in + fan_out));
  for (auto& v : t.data()) v = rng.uniform(-limit, limit);
  return t;
}

std::vector<ParamRef> Layer::params() {
  std::vector<ParamRef> out;
  collect_params("", out);
  return out;
}

void Layer::zero_grad() {
  for (auto& p : params()) p.grad->fill(0.0);
}

void Layer::require_cache(bool have, const char* layer) const {
  if (!have) {
    throw std::logic_error(std::string(layer) + ": backward called before forward");
  }
}

// ---------------------------------------------------------------------------
// Dense

Dense::Dense(int in_features, int out_features, RandomStream& rng)
    : in_features_(in_features),
      out_features_(out_features),
      weight_(glorot_uniform({in_features, out_features}, in_features, out_features, rng)),
      bias_(Tensor::zeros({out_features})),
      dweight_(Tensor::zeros({in_features, out_features})),
      dbias_(Tensor::zeros({out_features})) {
  if (in_features <= 0 || out_features <= 0) {
    throw std::invalid_argument("Dense: feature counts must be positive");
  }
}

Tensor Dense::forward(const Tensor& input) {
  check_ndim(input, 2, "Dense");
  if (input.shape()[1] != in_features_) {
    throw std::invalid_argument("Dense: input has " + std::to_string(input.shape()[1]) +
                                " features, layer expects " + std::to_string(in_features_));
  }
  debug_check_finite(input, "Dense input");
  cached_input_ = input;
  has_cache_ = true;
  const int b = input.shape()[0];
  Tensor out = Tensor::zeros({b, out_features_});
  detail::mm_nn(input.data().data(), weight_.data().data(), out.data().data(), b, in_features_,
                out_features_, false);
  for (int i = 0; i < b; ++i) {
    double* row = out.data().data() + static_cast<std::size_t>(i) * out_features_;
    for (int j = 0; j < out_features_; ++j) row[j] += bias_.data()[j];
  }
  return out;
}

Tensor Dense::backward(const Tensor& output_grad) {
  require_cache(has_cache_, "Dense");
  const int b = cached_input_.shape()[0];
  if (output_grad.shape() != std::vector<int>{b, out_features_}) {
    throw std::invalid_argument("Dense: output grad shape " + output_grad.shape_str() +
                                " does not match forward output");
  }
  // dW += x^T dy, db += column sums of dy, dx = dy W^T.
  detail::mm_tn(cached_input_.data().data(), output_grad.data().data(), dweight_.data().data(),
                in_features_, b, out_features_, true);
  for (int i = 0; i < b; ++i) {
    const double* row = output_grad.data().data() + static_cast<std::size_t>(i) * out_features_;
    for (int j = 0; j < out_features_; ++j) dbias_.data()[j] += row[j];
  }
  Tensor dx = Tensor::zeros({b, in_features_});
  detail::mm_nt(output_grad.data().data(), weight_.data().data(), dx.data().data(), b,
                out_features_, in_features_, false);
  return dx;
}

void Dense::collect_params(const std::string& prefix, std::vector<ParamRef>& out) {
  out.push_back({prefix + "w", &weight_, &dweight_});
  out.push_back({prefix + "b", &bias_, &dbias_});
}

// ---------------------------------------------------------------------------
// ReLU

Tensor ReLU::forward(const Tensor& input) {
  debug_check_finite(input, "ReLU input");
  cached_input_ = input;
  has_cache_ = true;
  Tensor out = input;
  for (auto& v : out.data()) v = v > 0.0 ? v : 0.0;
  return out;
}

Tensor ReLU::backward(const Tensor& output_grad) {
  require_cache(has_cache_, "ReLU");
  if (output_grad.shape() != cached_input_.shape()) {
    throw std::invalid_argument("ReLU: output grad shape " + output_grad.shape_str() +
                                " does not match forward input " + cached_input_.shape_str());
  }
  Tensor dx = output_grad;
  const auto& x = cached_input_.data();
  for (std::size_t i = 0; i < dx.size(); ++i) {
    if (x[i] <= 0.0) dx.data()[i] = 0.0;
  }
  return dx;
}

// ---------------------------------------------------------------------------
// BatchNorm

BatchNorm::BatchNorm(int channels, double momentum, double epsilon)
    : channels_(channels),
      momentum_(momentum),
      epsilon_(epsilon),
      gamma_(Tensor::full({channels}, 1.0)),
      beta_(Tensor::zeros({channels})),
      dgamma_(Tensor::zeros({channels})),
      dbeta_(Tensor::zeros({channels})),
      running_mean_(Tensor::zeros({channels})),
      running_var_(Tensor::full({channels}, 1.0)) {
  if (channels <= 0) throw std::invalid_argument("BatchNorm: channels must be positive");
  if (momentum < 0.0 || momentum >= 1.0) {
    throw std::invalid_argument("BatchNorm: momentum must lie in [0, 1)");
  }
}

Tensor BatchNorm::forward(const Tensor& input) {
  if (input.ndim() < 2) {
    throw std::invalid_argument("BatchNorm: input must have at least 2 axes, got " +
                                input.shape_str());
  }
  if (input.shape()[1] != channels_) {
    throw std::invalid_argument("BatchNorm: input has " + std::to_string(input.shape()[1]) +
                                " channels, layer expects " + std::to_string(channels_));
  }
  debug_check_finite(input, "BatchNorm input");
  const int batch = input.shape()[0];
  int inner = 1;
  for (int d = 2; d < input.ndim(); ++d) inner *= input.shape()[d];
  const std::int64_t m = static_cast<std::int64_t>(batch) * inner;
  const double* x = input.data().data();

  Tensor out = Tensor::zeros(input.shape());
  cached_xhat_ = Tensor::zeros(input.shape());
  cached_inv_std_.assign(channels_, 0.0);
  cached_train_ = (mode_ == Mode::kTrain);
  has_cache_ = true;

  auto slice = [&](const double* base, int b, int c) {
    return base + (static_cast<std::size_t>(b) * channels_ + c) * inner;
  };

  if (cached_train_) {
    for (int c = 0; c < channels_; ++c) {
      double sum = 0.0, sq = 0.0;
      for (int b = 0; b < batch; ++b) {
        const double* row = slice(x, b, c);
        for (int i = 0; i < inner; ++i) {
          sum += row[i];
          sq += row[i] * row[i];
        }
      }
      const double mean = sum / static_cast<double>(m);
      double var = sq / static_cast<double>(m) - mean * mean;
      if (var < 0.0) var = 0.0;  // guard against round-off
      const double inv_std = 1.0 / std::sqrt(var + epsilon_);
      cached_inv_std_[c] = inv_std;
      const double g = gamma_.data()[c], bt = beta_.data()[c];
      for (int b = 0; b < batch; ++b) {
        const double* row = slice(x, b, c);
        double* xh = cached_xhat_.data().data() +
                     (static_cast<std::size_t>(b) * channels_ + c) * inner;
        double* y = out.data().data() + (static_cast<std::size_t>(b) * channels_ + c) * inner;
        for (int i = 0; i < inner; ++i) {
          xh[i] = (row[i] - mean) * inv_std;
          y[i] = g * xh[i] + bt;
        }
      }
      if (track_stats_) {
        const double unbiased =
            m > 1 ? var * static_cast<double>(m) / static_cast<double>(m - 1) : var;
        running_mean_.data()[c] = momentum_ * running_mean_.data()[c] + (1.0 - momentum_) * mean;
        running_var_.data()[c] = momentum_ * running_var_.data()[c] + (1.0 - momentum_) * unbiased;
      }
    }
  } else {
    for (int c = 0; c < channels_; ++c) {
      const double mean = running_mean_.data()[c];
      const double inv_std = 1.0 / std::sqrt(running_var_.data()[c] + epsilon_);
      cached_inv_std_[c] = inv_std;
      const double g = gamma_.data()[c], bt = beta_.data()[c];
      for (int b = 0; b < batch; ++b) {
        const double* row = slice(x, b, c);
        double* xh = cached_xhat_.data().data() +
                     (static_cast<std::size_t>(b) * channels_ + c) * inner;
        double* y = out.data().data() + (static_cast<std::size_t>(b) * channels_ + c) * inner;
        for (int i = 0; i < inner; ++i) {
          xh[i] = (row[i] - mean) * inv_std;
          y[i] = g * xh[i] + bt;
        }
      }
    }
  }
  return out;
}

Tensor BatchNorm::backward(const Tensor& output_grad) {
  require_cache(has_cache_, "BatchNorm");
  if (output_grad.shape() != cached_xhat_.shape()) {
    throw std::invalid_argument("BatchNorm: output grad shape " + output_grad.shape_str() +
                                " does not match forward output");
  }
  const int batch = output_grad.shape()[0];
  int inner = 1;
  for (int d = 2; d < output_grad.ndim(); ++d) inner *= output_grad.shape()[d];
  const std::int64_t m = static_cast<std::int64_t>(batch) * inner;
  Tensor dx = Tensor::zeros(output_grad.shape());

  for (int c = 0; c < channels_; ++c) {
    double sum_dy = 0.0, sum_dy_xhat = 0.0;
    for (int b = 0; b < batch; ++b) {
      const std::size_t off = (static_cast<std::size_t>(b) * channels_ + c) * inner;
      const double* dy = output_grad.data().data() + off;
      const double* xh = cached_xhat_.data().data() + off;
      for (int i = 0; i < inner; ++i) {
        sum_dy += dy[i];
        sum_dy_xhat += dy[i] * xh[i];
      }
    }
    dgamma_.data()[c] += sum_dy_xhat;
    dbeta_.data()[c] += sum_dy;
    const double g = gamma_.data()[c];
    const double inv_std = cached_inv_std_[c];
    if (cached_train_) {
      const double mean_dy = sum_dy / static_cast<double>(m);
      const double mean_dy_xhat = sum_dy_xhat / static_cast<double>(m);
      for (int b = 0; b < batch; ++b) {
        const std::size_t off = (static_cast<std::size_t>(b) * channels_ + c) * inner;
        const double* dy = output_grad.data().data() + off;
        const double* xh = cached_xhat_.data().data() + off;
        double* dxp = dx.data().data() + off;
        for (int i = 0; i < inner; ++i) {
          dxp[i] = g * inv_std * (dy[i] - mean_dy - xh[i] * mean_dy_xhat);
        }
      }
    } else {
      for (int b = 0; b < batch; ++b) {
        const std::size_t off = (static_cast<std::size_t>(b) * channels_ + c) * inner;
        const double* dy = output_grad.data().data() + off;
        double* dxp = dx.data().data() + off;
        for (int i = 0; i < inner; ++i) dxp[i] = g * inv_std * dy[i];
      }
    }
  }
  return dx;
}

void BatchNorm::collect_params(const std::string& prefix, std::vector<ParamRef>& out) {
  out.push_back({prefix + "gamma", &gamma_, &dgamma_});
  out.push_back({prefix + "beta", &beta_, &dbeta_});
}

void BatchNorm::collect_stats(const std::string& prefix, std::vector<StatRef>& out) {
  out.push_back({prefix + "running_mean", &running_mean_});
  out.push_back({prefix + "running_var", &running_var_});
}

// ---------------------------------------------------------------------------
// TemporalConv

TemporalConv::TemporalConv(int in_channels, int out_channels, int kernel, int stride,
                           RandomStream& rng)
    : in_channels_(in_channels),
      out_channels_(out_channels),
      kernel_(kernel),
      stride_(stride),
      pad_((kernel - 1) / 2),
      weight_(Tensor::zeros({out_channels, in_channels, kernel})),
      bias_(Tensor::zeros({out_channels})),
      dweight_(Tensor::zeros({out_channels, in_channels, kernel})),
      dbias_(Tensor::zeros({out_channels})) {
  if (in_channels <= 0 || out_channels <= 0) {
    throw std::invalid_argument("TemporalConv: channel counts must be positive");
  }
  if (kernel <= 0 || kernel % 2 == 0) {
    throw std::invalid_argument("TemporalConv: kernel must be a positive odd number, got " +
                                std::to_string(kernel));
  }
  if (stride <= 0) throw std::invalid_argument("TemporalConv: stride must be positive");
  const int fan = in_channels * kernel;
  weight_ = glorot_uniform({out_channels, in_channels, kernel}, fan, out_channels * kernel, rng);
}

Tensor TemporalConv::forward(const Tensor& input) {
  check_ndim(input, 4, "TemporalConv");
  if (input.shape()[1] != in_channels_) {
    throw std::invalid_argument("TemporalConv: input has " + std::to_string(input.shape()[1]) +
                                " channels, layer expects " + std::to_string(in_channels_));
  }
  debug_check_finite(input, "TemporalConv input");
  cached_input_ = input;
  has_cache_ = true;
  const int batch = input.shape()[0], t_in = input.shape()[2], v = input.shape()[3];
  const int t_out = out_frames(t_in);
  Tensor out = Tensor::zeros({batch, out_channels_, t_out, v});

  for (int b = 0; b < batch; ++b) {
    for (int o = 0; o < out_channels_; ++o) {
      double* obase =
          out.data().data() + ((static_cast<std::size_t>(b) * out_channels_ + o)) * t_out * v;
      const double bo = bias_.data()[o];
      for (int i = 0; i < t_out * v; ++i) obase[i] = bo;
      for (int c = 0; c < in_channels_; ++c) {
        const double* ibase = cached_input_.data().data() +
                              ((static_cast<std::size_t>(b) * in_channels_ + c)) * t_in * v;
        for (int k = 0; k < kernel_; ++k) {
          const double w = weight_(o, c, k);
          // valid output frames: 0 <= t*stride + k - pad < t_in
          for (int t = 0; t < t_out; ++t) {
            const int ti = t * stride_ + k - pad_;
            if (ti < 0 || ti >= t_in) continue;
            double* orow = obase + static_cast<std::size_t>(t) * v;
            const double* irow = ibase + static_cast<std::size_t>(ti) * v;
            for (int j = 0; j < v; ++j) orow[j] += w * irow[j];
          }
        }
      }
    }
  }
  return out;
}

Tensor TemporalConv::backward(const Tensor& output_grad) {
  require_cache(has_cache_, "TemporalConv");
  const int batch = cached_input_.shape()[0], t_in = cached_input_.shape()[2],
            v = cached_input_.shape()[3];
  const int t_out = out_frames(t_in);
  if (output_grad.shape() != std::vector<int>{batch, out_channels_, t_out, v}) {
    throw std::invalid_argument("TemporalConv: output grad shape " + output_grad.shape_str() +
                                " does not match forward output");
  }
  Tensor dx = Tensor::zeros(cached_input_.shape());

  for (int b = 0; b < batch; ++b) {
    for (int o = 0; o < out_channels_; ++o) {
      const double* gbase = output_grad.data().data() +
                            ((static_cast<std::size_t>(b) * out_channels_ + o)) * t_out * v;
      double acc = 0.0;
      for (int i = 0; i < t_out * v; ++i) acc += gbase[i];
      dbias_.data()[o] += acc;
      for (int c = 0; c < in_channels_; ++c) {
        const double* ibase = cached_input_.data().data() +
                              ((static_cast<std::size_t>(b) * in_channels_ + c)) * t_in * v;
        double* dibase =
            dx.data().data() + ((static_cast<std::size_t>(b) * in_channels_ + c)) * t_in * v;
        for (int k = 0; k < kernel_; ++k) {
          const double w = weight_(o, c, k);
          double dw = 0.0;
          for (int t = 0; t < t_out; ++t) {
            const int ti = t * stride_ + k - pad_;
            if (ti < 0 || ti >= t_in) continue;
            const double* grow = gbase + static_cast<std::size_t>(t) * v;
            const double* irow = ibase + static_cast<std::size_t>(ti) * v;
            double* dirow = dibase + static_cast<std::size_t>(ti) * v;
            for (int j = 0; j < v; ++j) {
              dw += grow[j] * irow[j];
              dirow[j] += w * grow[j];
            }
          }
          dweight_(o, c, k) += dw;
        }
      }
    }
  }
  return dx;
}

void TemporalConv::collect_params(const std::string& prefix, std::vector<ParamRef>& out) {
  out.push_back({prefix + "w", &weight_, &dweight_});
  out.push_back({prefix + "b", &bias_, &dbias_});
}

// ---------------------------------------------------------------------------
// Pooling

Tensor GlobalAveragePool::forward(const Tensor& input) {
  check_ndim(input, 4, "GlobalAveragePool");
  debug_check_finite(input, "GlobalAveragePool input");
  cached_shape_ = input.shape();
  has_cache_ = true;
  const int batch = input.shape()[0], c = input.shape()[1];
  const int inner = input.shape()[2] * input.shape()[3];
  Tensor out = Tensor::zeros({batch, c});
  for (int b = 0; b < batch; ++b) {
    for (int ch = 0; ch < c; ++ch) {
      const double* row =
          input.data().data() + (static_cast<std::size_t>(b) * c + ch) * inner;
      double acc = 0.0;
      for (int i = 0; i < inner; ++i) acc += row[i];
      out(b, ch) = acc / inner;
    }
  }
  return out;
}

Tensor GlobalAveragePool::backward(const Tensor& output_grad) {
  require_cache(has_cache_, "GlobalAveragePool");
  const int batch = cached_shape_[0], c = cached_shape_[1];
  if (output_grad.shape() != std::vector<int>{batch, c}) {
    throw std::invalid_argument("GlobalAveragePool: output grad shape " +
                                output_grad.shape_str() + " does not match forward output");
  }
  const int inner = cached_shape_[2] * cached_shape_[3];
  Tensor dx = Tensor::zeros(cached_shape_);
  for (int b = 0; b < batch; ++b) {
    for (int ch = 0; ch < c; ++ch) {
      const double g = output_grad(b, ch) / inner;
      double* row = dx.data().data() + (static_cast<std::size_t>(b) * c + ch) * inner;
      for (int i = 0; i < inner; ++i) row[i] = g;
    }
  }
  return dx;
}

void segment_bounds(int frames, int n_segments, std::vector<int>& begins,
                    std::vector<int>& lengths) {
  if (n_segments <= 0) throw std::invalid_argument("segment_bounds: n_segments must be positive");
  if (frames < n_segments) {
    throw std::invalid_argument("segment_bounds: cannot split " + std::to_string(frames) +
                                " frames into " + std::to_string(n_segments) + " segments");
  }
  const int base = frames / n_segments;
  const int extra = frames % n_segments;
  begins.assign(n_segments, 0);
  lengths.assign(n_segments, 0);
  int pos = 0;
  for (int i = 0; i < n_segments; ++i) {
    begins[i] = pos;
    lengths[i] = base + (i < extra ? 1 : 0);
    pos += lengths[i];
  }
}

SegmentAveragePool::SegmentAveragePool(int n_segments) : n_segments_(n_segments) {
  if (n_segments <= 0) {
    throw std::invalid_argument("SegmentAveragePool: n_segments must be positive");
  }
}

Tensor SegmentAveragePool::forward(const Tensor& input) {
  check_ndim(input, 4, "SegmentAveragePool");
  debug_check_finite(input, "SegmentAveragePool input");
  const int batch = input.shape()[0], c = input.shape()[1], t = input.shape()[2],
            v = input.shape()[3];
  segment_bounds(t, n_segments_, begins_, lengths_);
  cached_shape_ = input.shape();
  has_cache_ = true;
  Tensor out = Tensor::zeros({batch, n_segments_, c});
  for (int b = 0; b < batch; ++b) {
    for (int ch = 0; ch < c; ++ch) {
      const double* base =
          input.data().data() + (static_cast<std::size_t>(b) * c + ch) * t * v;
      for (int s = 0; s < n_segments_; ++s) {
        double acc = 0.0;
        for (int f = begins_[s]; f < begins_[s] + lengths_[s]; ++f) {
          const double* row = base + static_cast<std::size_t>(f) * v;
          for (int j = 0; j < v; ++j) acc += row[j];
        }
        out(b, s, ch) = acc / (static_cast<double>(lengths_[s]) * v);
      }
    }
  }
  return out;
}

Tensor SegmentAveragePool::backward(const Tensor& output_grad) {
  require_cache(has_cache_, "SegmentAveragePool");
  const int batch = cached_shape_[0], c = cached_shape_[1], t = cached_shape_[2],
            v = cached_shape_[3];
  if (output_grad.shape() != std::vector<int>{batch, n_segments_, c}) {
    throw std::invalid_argument("SegmentAveragePool: output grad shape " +
                                output_grad.shape_str() + " does not match forward output");
  }
  Tensor dx = Tensor::zeros(cached_shape_);
  for (int b = 0; b < batch; ++b) {
    for (int ch = 0; ch < c; ++ch) {
      double* base = dx.data().data() + (static_cast<std::size_t>(b) * c + ch) * t * v;
      for (int s = 0; s < n_segments_; ++s) {
        const double g = output_grad(b, s, ch) / (static_cast<double>(lengths_[s]) * v);
        for (int f = begins_[s]; f < begins_[s] + lengths_[s]; ++f) {
          double* row = base + static_cast<std::size_t>(f) * v;
          for (int j = 0; j < v; ++j) row[j] += g;
        }
      }
    }
  }
  return dx;
}

}  // namespace skelact
