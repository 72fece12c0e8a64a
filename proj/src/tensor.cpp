#include "skelact/tensor.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <numeric>
#include <sstream>
#include <stdexcept>

namespace skelact {

namespace {

std::int64_t shape_product(const std::vector<int>& shape) {
  std::int64_t n = 1;
  for (int d : shape) {
    if (d <= 0) {
      throw std::invalid_argument("tensor dimensions must be positive, got " + shape_to_string(shape));
    }
    n *= d;
  }
  return n;
}

#ifdef NDEBUG
std::atomic<bool> g_finite_checks{false};
#else
std::atomic<bool> g_finite_checks{true};
#endif

}  // namespace

Tensor::Tensor(std::vector<int> shape) : shape_(std::move(shape)) {
  data_.assign(static_cast<std::size_t>(shape_product(shape_)), 0.0);
}

Tensor::Tensor(std::vector<int> shape, std::vector<double> data)
    : shape_(std::move(shape)), data_(std::move(data)) {
  if (shape_product(shape_) != static_cast<std::int64_t>(data_.size())) {
    throw std::invalid_argument("tensor data length " + std::to_string(data_.size()) +
                                " does not match shape " + shape_to_string(shape_));
  }
}

Tensor Tensor::full(std::vector<int> shape, double value) {
  Tensor t(std::move(shape));
  t.fill(value);
  return t;
}

void Tensor::fill(double value) { std::fill(data_.begin(), data_.end(), value); }

void Tensor::add_(const Tensor& other) {
  if (!same_shape(other)) {
    throw std::invalid_argument("add_: shape " + shape_str() + " vs " + other.shape_str());
  }
  const double* src = other.data().data();
  double* dst = data_.data();
  for (std::int64_t i = 0; i < size(); ++i) dst[i] += src[i];
}

void Tensor::scale_(double factor) {
  for (double& v : data_) v *= factor;
}

std::string Tensor::shape_str() const { return shape_to_string(shape_); }

std::string shape_to_string(const std::vector<int>& shape) {
  std::ostringstream os;
  os << "[";
  for (std::size_t i = 0; i < shape.size(); ++i) {
    if (i) os << "x";
    os << shape[i];
  }
  os << "]";
  return os.str();
}

void set_finite_checks(bool enabled) { g_finite_checks.store(enabled); }
bool finite_checks_enabled() { return g_finite_checks.load(); }

void require_finite(const Tensor& t, const char* where) {
  const double* p = t.data().data();
  for (std::int64_t i = 0; i < t.size(); ++i) {
    if (!std::isfinite(p[i])) {
      throw std::runtime_error(std::string(where) + ": non-finite value at flat index " +
                               std::to_string(i));
    }
  }
}

void debug_check_finite(const Tensor& t, const char* where) {
  if (finite_checks_enabled()) require_finite(t, where);
}

// ---- kernels ----

namespace detail {

void mm_nn(const double* a, const double* b, double* c, int m, int k, int n, bool accumulate) {
  if (!accumulate) std::fill(c, c + static_cast<std::size_t>(m) * n, 0.0);
  for (int i = 0; i < m; ++i) {
    const double* arow = a + static_cast<std::size_t>(i) * k;
    double* crow = c + static_cast<std::size_t>(i) * n;
    for (int l = 0; l < k; ++l) {
      const double av = arow[l];
      if (av == 0.0) continue;
      const double* brow = b + static_cast<std::size_t>(l) * n;
      for (int j = 0; j < n; ++j) crow[j] += av * brow[j];
    }
  }
}

void mm_tn(const double* a, const double* b, double* c, int m, int k, int n, bool accumulate) {
  // a is k x m, result m x n
  if (!accumulate) std::fill(c, c + static_cast<std::size_t>(m) * n, 0.0);
  for (int l = 0; l < k; ++l) {
    const double* arow = a + static_cast<std::size_t>(l) * m;
    const double* brow = b + static_cast<std::size_t>(l) * n;
    for (int i = 0; i < m; ++i) {
      const double av = arow[i];
      if (av == 0.0) continue;
      double* crow = c + static_cast<std::size_t>(i) * n;
      for (int j = 0; j < n; ++j) crow[j] += av * brow[j];
    }
  }
}

void mm_nt(const double* a, const double* b, double* c, int m, int k, int n, bool accumulate) {
  // b is n x k, result m x n
  for (int i = 0; i < m; ++i) {
    const double* arow = a + static_cast<std::size_t>(i) * k;
    double* crow = c + static_cast<std::size_t>(i) * n;
    for (int j = 0; j < n; ++j) {
      const double* brow = b + static_cast<std::size_t>(j) * k;
      double acc = 0.0;
      for (int l = 0; l < k; ++l) acc += arow[l] * brow[l];
      if (accumulate) {
        crow[j] += acc;
      } else {
        crow[j] = acc;
      }
    }
  }
}

}  // namespace detail

Tensor matmul(const Tensor& a, const Tensor& b) {
  if (a.ndim() != 2 || b.ndim() != 2 || a.dim(1) != b.dim(0)) {
    throw std::invalid_argument("matmul: incompatible shapes " + a.shape_str() + " and " +
                                b.shape_str());
  }
  Tensor out({a.dim(0), b.dim(1)});
  detail::mm_nn(a.data().data(), b.data().data(), out.data().data(), a.dim(0), a.dim(1), b.dim(1),
                false);
  debug_check_finite(out, "matmul");
  return out;
}

Tensor softmax(const Tensor& x, int axis) {
  if (x.ndim() == 0) throw std::invalid_argument("softmax: empty tensor");
  if (axis < 0) axis += x.ndim();
  if (axis < 0 || axis >= x.ndim()) {
    throw std::invalid_argument("softmax: axis out of range for " + x.shape_str());
  }
  const int c = x.dim(axis);
  std::int64_t inner = 1;
  for (int i = axis + 1; i < x.ndim(); ++i) inner *= x.dim(i);
  std::int64_t outer = x.size() / (c * inner);

  Tensor out(x.shape());
  const double* in = x.data().data();
  double* o = out.data().data();
  for (std::int64_t a = 0; a < outer; ++a) {
    for (std::int64_t b = 0; b < inner; ++b) {
      const std::int64_t base = a * c * inner + b;
      double mx = in[base];
      for (int j = 1; j < c; ++j) mx = std::max(mx, in[base + j * inner]);
      double denom = 0.0;
      for (int j = 0; j < c; ++j) {
        const double e = std::exp(in[base + j * inner] - mx);
        o[base + j * inner] = e;
        denom += e;
      }
      for (int j = 0; j < c; ++j) o[base + j * inner] /= denom;
    }
  }
  debug_check_finite(out, "softmax");
  return out;
}

CrossEntropyResult cross_entropy(const Tensor& logits, const std::vector<int>& labels) {
  if (logits.ndim() != 2) {
    throw std::invalid_argument("cross_entropy: logits must be [batch x classes], got " +
                                logits.shape_str());
  }
  const int b = logits.dim(0);
  const int c = logits.dim(1);
  if (static_cast<int>(labels.size()) != b) {
    throw std::invalid_argument("cross_entropy: " + std::to_string(labels.size()) +
                                " labels for batch of " + std::to_string(b));
  }
  for (int i = 0; i < b; ++i) {
    if (labels[i] < 0 || labels[i] >= c) {
      throw std::out_of_range("cross_entropy: label " + std::to_string(labels[i]) +
                              " out of range for " + std::to_string(c) + " classes");
    }
  }

  CrossEntropyResult res;
  res.dlogits = Tensor(logits.shape());
  double loss = 0.0;
  for (int i = 0; i < b; ++i) {
    const double* row = logits.data().data() + static_cast<std::size_t>(i) * c;
    double* drow = res.dlogits.data().data() + static_cast<std::size_t>(i) * c;
    double mx = row[0];
    for (int j = 1; j < c; ++j) mx = std::max(mx, row[j]);
    double denom = 0.0;
    for (int j = 0; j < c; ++j) denom += std::exp(row[j] - mx);
    const double log_denom = std::log(denom);
    loss += -(row[labels[i]] - mx - log_denom);
    for (int j = 0; j < c; ++j) {
      drow[j] = std::exp(row[j] - mx) / denom / b;
    }
    drow[labels[i]] -= 1.0 / b;
  }
  res.loss = loss / b;
  debug_check_finite(res.dlogits, "cross_entropy");
  return res;
}

// ---- RandomStream ----

double RandomStream::uniform(double lo, double hi) {
  const double u = (next_u64() >> 11) * 0x1.0p-53;  // [0, 1)
  return lo + u * (hi - lo);
}

double RandomStream::normal(double mean, double stddev) {
  if (has_cached_normal_) {
    has_cached_normal_ = false;
    return mean + stddev * cached_normal_;
  }
  double u1 = 0.0;
  do {
    u1 = (next_u64() >> 11) * 0x1.0p-53;
  } while (u1 <= 0.0);
  const double u2 = (next_u64() >> 11) * 0x1.0p-53;
  const double r = std::sqrt(-2.0 * std::log(u1));
  const double theta = 2.0 * M_PI * u2;
  cached_normal_ = r * std::sin(theta);
  has_cached_normal_ = true;
  return mean + stddev * r * std::cos(theta);
}

int RandomStream::uniform_int(int lo, int hi) {
  if (hi < lo) throw std::invalid_argument("uniform_int: empty range");
  const std::uint64_t span = static_cast<std::uint64_t>(hi) - static_cast<std::uint64_t>(lo) + 1;
  const std::uint64_t limit = UINT64_MAX - UINT64_MAX % span;
  std::uint64_t v = 0;
  do {
    v = next_u64();
  } while (v >= limit);
  return lo + static_cast<int>(v % span);
}

void RandomStream::shuffle(std::vector<int>& values) {
  for (int i = static_cast<int>(values.size()) - 1; i > 0; --i) {
    std::swap(values[static_cast<std::size_t>(i)],
              values[static_cast<std::size_t>(uniform_int(0, i))]);
  }
}

std::uint64_t RandomStream::mix(std::uint64_t a, std::uint64_t b) {
  // splitmix64 finalizer over the combined words
  std::uint64_t z = a + 0x9e3779b97f4a7c15ULL + b * 0xbf58476d1ce4e5b9ULL;
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
  return z ^ (z >> 31);
}

}  // namespace skelact
