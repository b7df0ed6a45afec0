#pragma once

#include <Eigen/Core>

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <initializer_list>
#include <numeric>
#include <sstream>
#include <string>
#include <utility>
#include <vector>

#include "adact/errors.hpp"

namespace adact {

using Index = std::ptrdiff_t;
using Shape = std::vector<Index>;

inline Index shape_product(const Shape& shape) {
  return std::accumulate(shape.begin(), shape.end(), Index{1}, std::multiplies<>{});
}

inline std::string shape_string(const Shape& shape) {
  std::ostringstream os;
  os << '[';
  for (std::size_t i = 0; i < shape.size(); ++i) os << (i ? "x" : "") << shape[i];
  os << ']';
  return os.str();
}

/// Dense row-major n-dimensional array.
///
/// Storage is an Eigen column vector holding the flattened elements, so
/// elementwise work can use Eigen array expressions directly. A default
/// constructed tensor is "empty" (rank 0, no elements) and is used as the
/// absent value for caches.
template <typename Scalar_>
class Tensor {
 public:
  using Scalar = Scalar_;
  using Vector = Eigen::Matrix<Scalar, Eigen::Dynamic, 1>;
  using RowMatrix = Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
  using MatrixMap = Eigen::Map<RowMatrix>;
  using ConstMatrixMap = Eigen::Map<const RowMatrix>;

  Tensor() = default;

  explicit Tensor(Shape shape) : shape_(std::move(shape)) {
    check_extents();
    values_ = Vector::Zero(shape_product(shape_));
  }

  Tensor(Shape shape, Vector values) : shape_(std::move(shape)), values_(std::move(values)) {
    check_extents();
    if (shape_product(shape_) != values_.size())
      throw DimensionError("tensor: shape " + shape_string(shape_) + " does not hold " +
                           std::to_string(values_.size()) + " elements");
    require_finite("tensor construction");
  }

  Tensor(Shape shape, std::initializer_list<Scalar> values)
      : Tensor(std::move(shape), Eigen::Map<const Vector>(values.begin(), static_cast<Index>(values.size()))) {}

  static Tensor constant(Shape shape, Scalar value) {
    Tensor t(std::move(shape));
    t.values_.setConstant(value);
    t.require_finite("tensor constant");
    return t;
  }

  static Tensor identity(Index n) {
    Tensor t({n, n});
    for (Index i = 0; i < n; ++i) t.values_[i * n + i] = Scalar(1);
    return t;
  }

  const Shape& shape() const { return shape_; }
  Index rank() const { return static_cast<Index>(shape_.size()); }
  Index dim(Index axis) const { return shape_.at(static_cast<std::size_t>(axis)); }
  Index size() const { return values_.size(); }
  bool empty() const { return shape_.empty(); }

  const Vector& values() const { return values_; }
  Vector& values() { return values_; }
  const Scalar* data() const { return values_.data(); }
  Scalar* data() { return values_.data(); }

  Scalar operator[](Index i) const { return values_[i]; }
  Scalar& operator[](Index i) { return values_[i]; }

  Scalar operator()(Index r, Index c) const { return values_[r * shape_[1] + c]; }
  Scalar& operator()(Index r, Index c) { return values_[r * shape_[1] + c]; }

  /// Row-major matrix view of a rank-2 tensor.
  MatrixMap matrix() {
    require_rank(2, "matrix view");
    return MatrixMap(values_.data(), shape_[0], shape_[1]);
  }
  ConstMatrixMap matrix() const {
    require_rank(2, "matrix view");
    return ConstMatrixMap(values_.data(), shape_[0], shape_[1]);
  }

  bool all_finite() const { return values_.array().isFinite().all(); }

  void require_finite(const std::string& where) const {
    if (!all_finite()) throw NumericError(where + ": non-finite value");
  }

  void require_rank(Index r, const std::string& where) const {
    if (rank() != r)
      throw DimensionError(where + ": expected rank " + std::to_string(r) + ", got shape " +
                           shape_string(shape_));
  }

  friend bool operator==(const Tensor& a, const Tensor& b) {
    return a.shape_ == b.shape_ && a.values_ == b.values_;
  }

 private:
  void check_extents() const {
    for (Index e : shape_)
      if (e < 0) throw DimensionError("tensor: negative extent in " + shape_string(shape_));
  }

  Shape shape_;
  Vector values_;
};

using TensorXd = Tensor<double>;
using TensorXf = Tensor<float>;

/// xoshiro256** seeded through splitmix64.
///
/// The generator and every derived distribution below are implemented here
/// rather than taken from <random>, whose distributions are not specified
/// bit-for-bit across standard library implementations.
class Rng {
 public:
  explicit Rng(std::uint64_t seed) : seed_(seed) {
    std::uint64_t x = seed;
    for (auto& s : state_) s = splitmix64(x);
  }

  std::uint64_t seed() const { return seed_; }

  std::uint64_t next_u64() {
    const std::uint64_t result = rotl(state_[1] * 5, 7) * 9;
    const std::uint64_t t = state_[1] << 17;
    state_[2] ^= state_[0];
    state_[3] ^= state_[1];
    state_[1] ^= state_[2];
    state_[0] ^= state_[3];
    state_[2] ^= t;
    state_[3] = rotl(state_[3], 45);
    return result;
  }

  /// Uniform double in [0, 1) with 53 random bits.
  double uniform() { return static_cast<double>(next_u64() >> 11) * 0x1.0p-53; }

  /// Uniform integer in [0, n) by rejection (unbiased).
  std::uint64_t below(std::uint64_t n) {
    if (n == 0) throw ArgumentError("rng: below(0)");
    const std::uint64_t threshold = (std::uint64_t(0) - n) % n;
    for (;;) {
      const std::uint64_t x = next_u64();
      if (x >= threshold) return x % n;
    }
  }

  /// Standard normal draw via Box-Muller (one value per call, no caching).
  double normal() {
    double u1 = uniform();
    while (u1 <= 0.0) u1 = uniform();
    const double u2 = uniform();
    return std::sqrt(-2.0 * std::log(u1)) * std::cos(2.0 * 3.14159265358979323846 * u2);
  }

  /// Fisher-Yates permutation of [0, n).
  std::vector<Index> permutation(Index n) {
    std::vector<Index> p(static_cast<std::size_t>(n));
    std::iota(p.begin(), p.end(), Index{0});
    for (Index i = n - 1; i > 0; --i) {
      const auto j = static_cast<Index>(below(static_cast<std::uint64_t>(i) + 1));
      std::swap(p[static_cast<std::size_t>(i)], p[static_cast<std::size_t>(j)]);
    }
    return p;
  }

 private:
  static std::uint64_t rotl(std::uint64_t x, int k) { return (x << k) | (x >> (64 - k)); }
  static std::uint64_t splitmix64(std::uint64_t& x) {
    std::uint64_t z = (x += 0x9e3779b97f4a7c15ULL);
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
    return z ^ (z >> 31);
  }

  std::uint64_t seed_;
  std::uint64_t state_[4]{};
};

namespace detail {

/// C[m x n] += A[m x k] * B[k x n], all row-major with the given row strides.
/// Every output element accumulates its k products in ascending k order, so
/// the result does not depend on blocking or vector width.
template <typename Scalar>
void gemm_accumulate(Index m, Index n, Index k, const Scalar* a, Index lda, const Scalar* b, Index ldb,
                     Scalar* c, Index ldc) {
  constexpr Index kColBlock = 256;
  for (Index j0 = 0; j0 < n; j0 += kColBlock) {
    const Index nb = std::min(kColBlock, n - j0);
    Index i = 0;
    for (; i + 4 <= m; i += 4) {
      Scalar* __restrict c0 = c + (i + 0) * ldc + j0;
      Scalar* __restrict c1 = c + (i + 1) * ldc + j0;
      Scalar* __restrict c2 = c + (i + 2) * ldc + j0;
      Scalar* __restrict c3 = c + (i + 3) * ldc + j0;
      for (Index p = 0; p < k; ++p) {
        const Scalar* __restrict brow = b + p * ldb + j0;
        const Scalar a0 = a[(i + 0) * lda + p];
        const Scalar a1 = a[(i + 1) * lda + p];
        const Scalar a2 = a[(i + 2) * lda + p];
        const Scalar a3 = a[(i + 3) * lda + p];
        for (Index j = 0; j < nb; ++j) {
          const Scalar bv = brow[j];
          c0[j] += a0 * bv;
          c1[j] += a1 * bv;
          c2[j] += a2 * bv;
          c3[j] += a3 * bv;
        }
      }
    }
    for (; i < m; ++i) {
      Scalar* __restrict c0 = c + i * ldc + j0;
      for (Index p = 0; p < k; ++p) {
        const Scalar* __restrict brow = b + p * ldb + j0;
        const Scalar a0 = a[i * lda + p];
        for (Index j = 0; j < nb; ++j) c0[j] += a0 * brow[j];
      }
    }
  }
}

}  // namespace detail

/// Standard matrix product with ascending-index summation.
template <typename Scalar>
Tensor<Scalar> matmul(const Tensor<Scalar>& a, const Tensor<Scalar>& b) {
  a.require_rank(2, "matmul lhs");
  b.require_rank(2, "matmul rhs");
  if (a.dim(1) != b.dim(0))
    throw DimensionError("matmul: inner extents differ, " + shape_string(a.shape()) + " * " +
                         shape_string(b.shape()));
  Tensor<Scalar> c({a.dim(0), b.dim(1)});
  detail::gemm_accumulate(a.dim(0), b.dim(1), a.dim(1), a.data(), a.dim(1), b.data(), b.dim(1), c.data(),
                          b.dim(1));
  c.require_finite("matmul");
  return c;
}

template <typename Scalar>
Tensor<Scalar> transpose(const Tensor<Scalar>& t) {
  t.require_rank(2, "transpose");
  Tensor<Scalar> out({t.dim(1), t.dim(0)});
  out.matrix() = t.matrix().transpose();
  return out;
}

template <typename Scalar>
Tensor<Scalar> reshape(const Tensor<Scalar>& t, Shape shape) {
  if (shape_product(shape) != t.size())
    throw DimensionError("reshape: " + shape_string(t.shape()) + " -> " + shape_string(shape));
  return Tensor<Scalar>(std::move(shape), t.values());
}

template <typename Scalar, typename Fn>
Tensor<Scalar> map(const Tensor<Scalar>& t, Fn&& fn) {
  typename Tensor<Scalar>::Vector out(t.size());
  for (Index i = 0; i < t.size(); ++i) out[i] = fn(t[i]);
  return Tensor<Scalar>(t.shape(), std::move(out));
}

template <typename Scalar, typename Fn>
Tensor<Scalar> zip(const Tensor<Scalar>& a, const Tensor<Scalar>& b, Fn&& fn) {
  if (a.shape() != b.shape())
    throw DimensionError("zip: " + shape_string(a.shape()) + " vs " + shape_string(b.shape()));
  typename Tensor<Scalar>::Vector out(a.size());
  for (Index i = 0; i < a.size(); ++i) out[i] = fn(a[i], b[i]);
  return Tensor<Scalar>(a.shape(), std::move(out));
}

/// Left fold in ascending index order.
template <typename Scalar, typename Fn>
Scalar reduce(const Tensor<Scalar>& t, Fn&& fn, Scalar init = Scalar(0)) {
  Scalar acc = init;
  for (Index i = 0; i < t.size(); ++i) acc = fn(acc, t[i]);
  return acc;
}

template <typename Scalar>
Scalar sum(const Tensor<Scalar>& t) {
  return reduce(t, [](Scalar x, Scalar y) { return x + y; });
}

template <typename Scalar = double>
Tensor<Scalar> rand_uniform(Rng& rng, Shape shape, Scalar lo, Scalar hi) {
  if (!(lo < hi)) throw ArgumentError("rand_uniform: requires lo < hi");
  Tensor<Scalar> t(std::move(shape));
  const double span = static_cast<double>(hi) - static_cast<double>(lo);
  for (Index i = 0; i < t.size(); ++i) {
    Scalar v = static_cast<Scalar>(static_cast<double>(lo) + span * rng.uniform());
    t[i] = v < hi ? v : std::nextafter(hi, lo);  // rounding can land on hi
  }
  return t;
}

}  // namespace adact
