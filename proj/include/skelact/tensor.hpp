#pragma once

#include <cstdint>
#include <random>
#include <string>
#include <vector>

namespace skelact {

/// Dense row-major array of doubles. Shape is held separately from the flat
/// buffer; product(shape) == data.size() always.
class Tensor {
 public:
  Tensor() = default;
  explicit Tensor(std::vector<int> shape);
  Tensor(std::vector<int> shape, std::vector<double> data);

  static Tensor zeros(std::vector<int> shape) { return Tensor(std::move(shape)); }
  static Tensor full(std::vector<int> shape, double value);
  static Tensor scalar(double value) { return Tensor({1}, {value}); }

  const std::vector<int>& shape() const { return shape_; }
  int ndim() const { return static_cast<int>(shape_.size()); }
  int dim(int i) const { return shape_[static_cast<std::size_t>(i)]; }
  std::int64_t size() const { return static_cast<std::int64_t>(data_.size()); }
  bool empty() const { return data_.empty(); }

  std::vector<double>& data() { return data_; }
  const std::vector<double>& data() const { return data_; }
  double& operator[](std::int64_t i) { return data_[static_cast<std::size_t>(i)]; }
  double operator[](std::int64_t i) const { return data_[static_cast<std::size_t>(i)]; }

  double& operator()(int i) { return data_[static_cast<std::size_t>(i)]; }
  double operator()(int i) const { return data_[static_cast<std::size_t>(i)]; }
  double& operator()(int i, int j) { return data_[static_cast<std::size_t>(i) * shape_[1] + j]; }
  double operator()(int i, int j) const { return data_[static_cast<std::size_t>(i) * shape_[1] + j]; }
  double& operator()(int i, int j, int k) {
    return data_[(static_cast<std::size_t>(i) * shape_[1] + j) * shape_[2] + k];
  }
  double operator()(int i, int j, int k) const {
    return data_[(static_cast<std::size_t>(i) * shape_[1] + j) * shape_[2] + k];
  }
  double& operator()(int i, int j, int k, int l) {
    return data_[((static_cast<std::size_t>(i) * shape_[1] + j) * shape_[2] + k) * shape_[3] + l];
  }
  double operator()(int i, int j, int k, int l) const {
    return data_[((static_cast<std::size_t>(i) * shape_[1] + j) * shape_[2] + k) * shape_[3] + l];
  }

  void fill(double value);
  bool same_shape(const Tensor& other) const { return shape_ == other.shape_; }
  std::string shape_str() const;

  /// Elementwise in-place accumulate; shapes must match.
  void add_(const Tensor& other);
  void scale_(double factor);

 private:
  std::vector<int> shape_;
  std::vector<double> data_;
};

std::string shape_to_string(const std::vector<int>& shape);

/// Toggle for the finite-value guard run after numeric ops. On by default in
/// debug builds, off in release; tests flip it explicitly.
void set_finite_checks(bool enabled);
bool finite_checks_enabled();
/// Throws std::runtime_error if t contains NaN/Inf and checks are enabled.
void debug_check_finite(const Tensor& t, const char* where);
/// Unconditional check, used at module entry points on untrusted input.
void require_finite(const Tensor& t, const char* where);

// ---- core ops ----

/// [m x k] * [k x n] -> [m x n]. Throws std::invalid_argument on mismatch.
Tensor matmul(const Tensor& a, const Tensor& b);

/// Softmax along `axis` (negative counts from the back). Max-subtracted.
Tensor softmax(const Tensor& x, int axis = -1);

struct CrossEntropyResult {
  double loss = 0.0;
  Tensor dlogits;  // (softmax - onehot) / batch
};

/// Mean over the batch of -log softmax(logits)[label].
CrossEntropyResult cross_entropy(const Tensor& logits, const std::vector<int>& labels);

// ---- raw kernels (row-major, contiguous) ----
namespace detail {
// c[m x n] (+)= a[m x k] * b[k x n]
void mm_nn(const double* a, const double* b, double* c, int m, int k, int n, bool accumulate);
// c[m x n] (+)= a^T[k x m] * b[k x n]   (a stored k x m)
void mm_tn(const double* a, const double* b, double* c, int m, int k, int n, bool accumulate);
// c[m x n] (+)= a[m x k] * b^T[n x k]   (b stored n x k)
void mm_nt(const double* a, const double* b, double* c, int m, int k, int n, bool accumulate);
}  // namespace detail

/// Deterministic random stream (mt19937_64 core, explicit Box-Muller).
/// The draw sequence is part of the reproducibility contract, so no
/// implementation-defined distributions are used.
class RandomStream {
 public:
  explicit RandomStream(std::uint64_t seed) : engine_(seed) {}

  std::uint64_t next_u64() { return engine_(); }
  /// Uniform in [lo, hi).
  double uniform(double lo = 0.0, double hi = 1.0);
  /// Standard normal scaled to (mean, stddev).
  double normal(double mean = 0.0, double stddev = 1.0);
  /// Uniform integer in [lo, hi] inclusive, unbiased.
  int uniform_int(int lo, int hi);
  /// In-place Fisher-Yates shuffle.
  void shuffle(std::vector<int>& values);

  /// Stable combine for deriving per-item seeds from a master seed.
  static std::uint64_t mix(std::uint64_t a, std::uint64_t b);

 private:
  std::mt19937_64 engine_;
  bool has_cached_normal_ = false;
  double cached_normal_ = 0.0;
};

}  // namespace skelact
