#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <initializer_list>
#include <numbers>
#include <span>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include <Eigen/Eigenvalues>

#include "acfl/errors.hpp"

namespace acfl {

// ---------------------------------------------------------------------------
// Matrix
// ---------------------------------------------------------------------------

/// Dense row-major matrix of doubles.
///
/// Sized constructors require positive dimensions and finite entries; the
/// default-constructed matrix is the empty 0x0 placeholder. Arithmetic does
/// not re-check finiteness.
class Matrix {
 public:
  Matrix() = default;

  Matrix(std::size_t rows, std::size_t cols, double fill = 0.0)
      : rows_(rows), cols_(cols), data_(rows * cols, fill) {
    check_dims();
    check_finite();
  }

  Matrix(std::size_t rows, std::size_t cols, std::vector<double> data)
      : rows_(rows), cols_(cols), data_(std::move(data)) {
    check_dims();
    if (data_.size() != rows_ * cols_) {
      throw ParameterError("Matrix: entry count " + std::to_string(data_.size()) +
                           " does not match " + std::to_string(rows_) + "x" +
                           std::to_string(cols_));
    }
    check_finite();
  }

  Matrix(std::initializer_list<std::initializer_list<double>> rows) {
    rows_ = rows.size();
    cols_ = rows_ == 0 ? 0 : rows.begin()->size();
    check_dims();
    data_.reserve(rows_ * cols_);
    for (const auto& row : rows) {
      if (row.size() != cols_) throw ParameterError("Matrix: ragged initializer");
      data_.insert(data_.end(), row.begin(), row.end());
    }
    check_finite();
  }

  static Matrix zeros(std::size_t rows, std::size_t cols) { return Matrix(rows, cols); }

  static Matrix identity(std::size_t n, double scale = 1.0) {
    Matrix m(n, n);
    for (std::size_t i = 0; i < n; ++i) m(i, i) = scale;
    return m;
  }

  std::size_t rows() const noexcept { return rows_; }
  std::size_t cols() const noexcept { return cols_; }
  std::size_t size() const noexcept { return data_.size(); }
  bool empty() const noexcept { return data_.empty(); }

  double& operator()(std::size_t r, std::size_t c) noexcept { return data_[r * cols_ + c]; }
  double operator()(std::size_t r, std::size_t c) const noexcept { return data_[r * cols_ + c]; }

  std::span<double> data() noexcept { return data_; }
  std::span<const double> data() const noexcept { return data_; }

  bool same_shape(const Matrix& o) const noexcept { return rows_ == o.rows_ && cols_ == o.cols_; }

  Matrix transpose() const {
    Matrix t(cols_, rows_);
    for (std::size_t r = 0; r < rows_; ++r)
      for (std::size_t c = 0; c < cols_; ++c) t(c, r) = (*this)(r, c);
    return t;
  }

  Matrix& operator+=(const Matrix& o) {
    require_same_shape(o, "+=");
    for (std::size_t k = 0; k < data_.size(); ++k) data_[k] += o.data_[k];
    return *this;
  }

  Matrix& operator-=(const Matrix& o) {
    require_same_shape(o, "-=");
    for (std::size_t k = 0; k < data_.size(); ++k) data_[k] -= o.data_[k];
    return *this;
  }

  Matrix& operator*=(double s) noexcept {
    for (double& v : data_) v *= s;
    return *this;
  }

  // this += s * o
  Matrix& add_scaled(const Matrix& o, double s) {
    require_same_shape(o, "add_scaled");
    for (std::size_t k = 0; k < data_.size(); ++k) data_[k] += s * o.data_[k];
    return *this;
  }

  double max_abs() const noexcept {
    double m = 0.0;
    for (double v : data_) m = std::max(m, std::abs(v));
    return m;
  }

  bool operator==(const Matrix&) const = default;

  void require_same_shape(const Matrix& o, std::string_view op) const {
    if (!same_shape(o)) {
      throw ParameterError("shape mismatch in " + std::string(op) + ": " + shape_string() +
                           " vs " + o.shape_string());
    }
  }

  std::string shape_string() const {
    return std::to_string(rows_) + "x" + std::to_string(cols_);
  }

 private:
  void check_dims() const {
    if (rows_ == 0 || cols_ == 0) throw ParameterError("Matrix: dimensions must be positive");
  }
  void check_finite() const {
    for (double v : data_)
      if (!std::isfinite(v)) throw ParameterError("Matrix: non-finite entry");
  }

  std::size_t rows_ = 0;
  std::size_t cols_ = 0;
  std::vector<double> data_;
};

inline Matrix operator+(Matrix a, const Matrix& b) { return a += b; }
inline Matrix operator-(Matrix a, const Matrix& b) { return a -= b; }
inline Matrix operator*(Matrix a, double s) { return a *= s; }
inline Matrix operator*(double s, Matrix a) { return a *= s; }

inline Matrix operator*(const Matrix& a, const Matrix& b) {
  if (a.cols() != b.rows()) {
    throw ParameterError("shape mismatch in product: " + a.shape_string() + " * " +
                         b.shape_string());
  }
  Matrix out(a.rows(), b.cols());
  for (std::size_t i = 0; i < a.rows(); ++i) {
    for (std::size_t k = 0; k < a.cols(); ++k) {
      const double aik = a(i, k);
      for (std::size_t j = 0; j < b.cols(); ++j) out(i, j) += aik * b(k, j);
    }
  }
  return out;
}

/// Aᵀ·B without materializing the transpose.
inline Matrix transpose_times(const Matrix& a, const Matrix& b) {
  if (a.rows() != b.rows()) {
    throw ParameterError("shape mismatch in transpose product: " + a.shape_string() + "ᵀ * " +
                         b.shape_string());
  }
  Matrix out(a.cols(), b.cols());
  for (std::size_t s = 0; s < a.rows(); ++s) {
    for (std::size_t i = 0; i < a.cols(); ++i) {
      const double asi = a(s, i);
      for (std::size_t j = 0; j < b.cols(); ++j) out(i, j) += asi * b(s, j);
    }
  }
  return out;
}

/// XᵀX, computed on the upper triangle and mirrored so the result is exactly symmetric.
inline Matrix gram(const Matrix& x) {
  const std::size_t d = x.cols();
  Matrix g(d, d);
  for (std::size_t s = 0; s < x.rows(); ++s) {
    for (std::size_t i = 0; i < d; ++i) {
      const double xi = x(s, i);
      for (std::size_t j = i; j < d; ++j) g(i, j) += xi * x(s, j);
    }
  }
  for (std::size_t i = 0; i < d; ++i)
    for (std::size_t j = 0; j < i; ++j) g(i, j) = g(j, i);
  return g;
}

inline double frobenius_inner(const Matrix& a, const Matrix& b) {
  a.require_same_shape(b, "frobenius_inner");
  double s = 0.0;
  const auto da = a.data();
  const auto db = b.data();
  for (std::size_t k = 0; k < da.size(); ++k) s += da[k] * db[k];
  return s;
}

inline double frobenius_norm_sq(const Matrix& a) {
  double s = 0.0;
  for (double v : a.data()) s += v * v;
  return s;
}

inline double frobenius_norm(const Matrix& a) { return std::sqrt(frobenius_norm_sq(a)); }

inline bool is_symmetric(const Matrix& a, double tol) {
  if (a.rows() != a.cols()) return false;
  for (std::size_t i = 0; i < a.rows(); ++i)
    for (std::size_t j = i + 1; j < a.cols(); ++j)
      if (std::abs(a(i, j) - a(j, i)) > tol) return false;
  return true;
}

// ---------------------------------------------------------------------------
// Random streams
// ---------------------------------------------------------------------------

namespace detail {

inline constexpr std::uint64_t kGolden = 0x9E3779B97F4A7C15ULL;

constexpr std::uint64_t mix64(std::uint64_t z) noexcept {
  z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
  z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
  return z ^ (z >> 31);
}

constexpr std::uint64_t fnv1a(std::string_view s) noexcept {
  std::uint64_t h = 0xCBF29CE484222325ULL;
  for (unsigned char c : s) {
    h ^= c;
    h *= 0x100000001B3ULL;
  }
  return h;
}

}  // namespace detail

/// Immutable descriptor of an independent random sequence.
///
/// The sequence is a pure function of (master_seed, purpose_tag, indices): the
/// three are hashed into a 64-bit key and the stream is the SplitMix64 counter
/// sequence mix64(key + k·φ), k = 1, 2, .... Derivation shares no state, so
/// replicas can draw in any order or on any thread.
class RngStream {
 public:
  RngStream(std::uint64_t master_seed, std::string_view purpose_tag,
            std::initializer_list<std::uint64_t> indices = {})
      : master_seed_(master_seed), tag_(purpose_tag), indices_(indices) {
    key_ = detail::mix64(master_seed_ + detail::kGolden);
    key_ = detail::mix64(key_ ^ detail::fnv1a(tag_));
    for (std::uint64_t idx : indices_) absorb(idx);
  }

  /// Stream with one more index appended.
  RngStream child(std::uint64_t index) const {
    RngStream c = *this;
    c.indices_.push_back(index);
    c.absorb(index);
    return c;
  }

  std::uint64_t master_seed() const noexcept { return master_seed_; }
  const std::string& purpose_tag() const noexcept { return tag_; }
  const std::vector<std::uint64_t>& indices() const noexcept { return indices_; }
  std::uint64_t key() const noexcept { return key_; }

 private:
  void absorb(std::uint64_t idx) noexcept {
    key_ = detail::mix64(key_ ^ detail::mix64(idx + 0xD1B54A32D192ED03ULL));
  }

  std::uint64_t master_seed_;
  std::string tag_;
  std::vector<std::uint64_t> indices_;
  std::uint64_t key_ = 0;
};

/// Sequential sampler over one RngStream. Not thread-safe; make one per consumer.
///
/// Normals use the Box-Muller transform with u1 in (0, 1], emitting the cosine
/// branch first and caching the sine branch.
class Generator {
 public:
  using result_type = std::uint64_t;

  explicit Generator(const RngStream& stream) noexcept : state_(stream.key()) {}

  static constexpr result_type min() noexcept { return 0; }
  static constexpr result_type max() noexcept { return ~result_type{0}; }

  result_type operator()() noexcept {
    state_ += detail::kGolden;
    return detail::mix64(state_);
  }

  /// Uniform on [0, 1) with 53 random bits.
  double uniform() noexcept { return static_cast<double>((*this)() >> 11) * 0x1.0p-53; }

  double uniform(double lo, double hi) noexcept { return lo + (hi - lo) * uniform(); }

  double standard_normal() noexcept {
    if (has_spare_) {
      has_spare_ = false;
      return spare_;
    }
    const double u1 = static_cast<double>(((*this)() >> 11) + 1) * 0x1.0p-53;  // (0, 1]
    const double u2 = uniform();
    const double r = std::sqrt(-2.0 * std::log(u1));
    const double theta = 2.0 * std::numbers::pi * u2;
    spare_ = r * std::sin(theta);
    has_spare_ = true;
    return r * std::cos(theta);
  }

  /// True with probability `prob`.
  bool bernoulli(double prob) noexcept { return uniform() < prob; }

 private:
  std::uint64_t state_;
  double spare_ = 0.0;
  bool has_spare_ = false;
};

/// Matrix with i.i.d. N(0, variance) entries drawn row-major from `stream`.
inline Matrix gaussian_matrix(const RngStream& stream, std::size_t rows, std::size_t cols,
                              double variance) {
  if (!(variance >= 0.0) || !std::isfinite(variance)) {
    throw ParameterError("gaussian_matrix: variance must be finite and >= 0");
  }
  Matrix m(rows, cols);
  if (variance == 0.0) return m;
  const double sd = std::sqrt(variance);
  Generator gen(stream);
  for (double& v : m.data()) v = sd * gen.standard_normal();
  return m;
}

/// Matrix with i.i.d. Uniform[lo, hi) entries drawn row-major from `stream`.
inline Matrix uniform_matrix(const RngStream& stream, std::size_t rows, std::size_t cols,
                             double lo, double hi) {
  if (!(lo <= hi)) throw ParameterError("uniform_matrix: lo must not exceed hi");
  Matrix m(rows, cols);
  Generator gen(stream);
  for (double& v : m.data()) v = gen.uniform(lo, hi);
  return m;
}

// ---------------------------------------------------------------------------
// Dense solvers
// ---------------------------------------------------------------------------

inline constexpr double kSymmetryTolerance = 1e-10;

namespace detail {

inline double symmetry_tolerance(const Matrix& a) {
  return kSymmetryTolerance * std::max(1.0, a.max_abs());
}

}  // namespace detail

/// Solves A·Z = B for symmetric positive-definite A via Cholesky.
///
/// Throws NumericError carrying the failing pivot when A is not numerically
/// positive definite.
inline Matrix spd_solve(const Matrix& a, const Matrix& b) {
  const std::size_t n = a.rows();
  if (a.cols() != n) throw ParameterError("spd_solve: A must be square, got " + a.shape_string());
  if (b.rows() != n) {
    throw ParameterError("spd_solve: B has " + std::to_string(b.rows()) + " rows, expected " +
                         std::to_string(n));
  }
  if (!is_symmetric(a, detail::symmetry_tolerance(a))) {
    throw ParameterError("spd_solve: A is not symmetric");
  }

  // Lower-triangular factor, row-major.
  std::vector<double> l(n * n, 0.0);
  for (std::size_t j = 0; j < n; ++j) {
    double diag = a(j, j);
    for (std::size_t k = 0; k < j; ++k) diag -= l[j * n + k] * l[j * n + k];
    if (!(diag > 0.0)) {
      throw NumericError("spd_solve: matrix is not positive definite (pivot " +
                             std::to_string(j) + ")",
                         j);
    }
    const double ljj = std::sqrt(diag);
    l[j * n + j] = ljj;
    for (std::size_t i = j + 1; i < n; ++i) {
      double s = a(i, j);
      for (std::size_t k = 0; k < j; ++k) s -= l[i * n + k] * l[j * n + k];
      l[i * n + j] = s / ljj;
    }
  }

  Matrix z = b;
  for (std::size_t c = 0; c < b.cols(); ++c) {
    for (std::size_t i = 0; i < n; ++i) {
      double s = z(i, c);
      for (std::size_t k = 0; k < i; ++k) s -= l[i * n + k] * z(k, c);
      z(i, c) = s / l[i * n + i];
    }
    for (std::size_t ii = n; ii-- > 0;) {
      double s = z(ii, c);
      for (std::size_t k = ii + 1; k < n; ++k) s -= l[k * n + ii] * z(k, c);
      z(ii, c) = s / l[ii * n + ii];
    }
  }
  return z;
}

/// Smallest eigenvalue of a symmetric matrix (dense symmetric eigensolve).
inline double eig_min_sym(const Matrix& a) {
  if (a.rows() != a.cols()) throw ParameterError("eig_min_sym: matrix must be square");
  if (!is_symmetric(a, detail::symmetry_tolerance(a))) {
    throw ParameterError("eig_min_sym: matrix is not symmetric");
  }
  const auto n = static_cast<Eigen::Index>(a.rows());
  Eigen::MatrixXd m(n, n);
  for (Eigen::Index i = 0; i < n; ++i)
    for (Eigen::Index j = 0; j < n; ++j)
      m(i, j) = a(static_cast<std::size_t>(i), static_cast<std::size_t>(j));
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> solver(m, Eigen::EigenvaluesOnly);
  if (solver.info() != Eigen::Success) throw NumericError("eig_min_sym: eigensolver failed");
  return solver.eigenvalues()(0);
}

}  // namespace acfl
