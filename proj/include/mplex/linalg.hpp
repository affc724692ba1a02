#pragma once

// Dense small-matrix kernels: p-norms, matrix measures, a Jacobi symmetric
// eigensolver and the block (composite) norm majorants used to certify
// contraction of partitioned systems.

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <initializer_list>
#include <limits>
#include <numeric>
#include <ostream>
#include <span>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "mplex/errors.hpp"

namespace mplex {

using Vector = std::vector<double>;

/// Row-major dense real matrix. Sizes here are small (a few dozen at most),
/// so storage is a flat std::vector and every operation is a plain loop.
class Matrix {
 public:
  Matrix() = default;

  Matrix(std::size_t rows, std::size_t cols, double fill = 0.0)
      : rows_(rows), cols_(cols), data_(rows * cols, fill) {
    if (rows == 0 || cols == 0) {
      throw DimensionError("Matrix: rows and cols must be >= 1");
    }
  }

  Matrix(std::initializer_list<std::initializer_list<double>> rows)
      : Matrix(from_rows(std::vector<std::vector<double>>(rows.begin(), rows.end()))) {}

  static Matrix from_rows(const std::vector<std::vector<double>>& rows) {
    if (rows.empty() || rows.front().empty()) {
      throw DimensionError("Matrix: empty row list");
    }
    Matrix m(rows.size(), rows.front().size());
    for (std::size_t i = 0; i < rows.size(); ++i) {
      if (rows[i].size() != m.cols_) {
        throw DimensionError("Matrix: ragged row list");
      }
      for (std::size_t j = 0; j < m.cols_; ++j) {
        if (!std::isfinite(rows[i][j])) {
          throw DomainError("Matrix: non-finite entry");
        }
        m(i, j) = rows[i][j];
      }
    }
    return m;
  }

  static Matrix identity(std::size_t n) {
    Matrix m(n, n);
    for (std::size_t i = 0; i < n; ++i) m(i, i) = 1.0;
    return m;
  }

  static Matrix diagonal(std::span<const double> d) {
    Matrix m(d.size(), d.size());
    for (std::size_t i = 0; i < d.size(); ++i) m(i, i) = d[i];
    return m;
  }

  std::size_t rows() const noexcept { return rows_; }
  std::size_t cols() const noexcept { return cols_; }
  bool empty() const noexcept { return data_.empty(); }
  bool is_square() const noexcept { return rows_ == cols_ && rows_ > 0; }

  double& operator()(std::size_t i, std::size_t j) { return data_[i * cols_ + j]; }
  double operator()(std::size_t i, std::size_t j) const { return data_[i * cols_ + j]; }

  std::span<const double> data() const noexcept { return data_; }
  std::span<const double> row(std::size_t i) const {
    return std::span<const double>(data_).subspan(i * cols_, cols_);
  }

  bool all_finite() const {
    return std::all_of(data_.begin(), data_.end(), [](double v) { return std::isfinite(v); });
  }

  Matrix transpose() const {
    Matrix t(cols_, rows_);
    for (std::size_t i = 0; i < rows_; ++i)
      for (std::size_t j = 0; j < cols_; ++j) t(j, i) = (*this)(i, j);
    return t;
  }

  Matrix block(std::size_t r0, std::size_t c0, std::size_t nr, std::size_t nc) const {
    if (r0 + nr > rows_ || c0 + nc > cols_) {
      throw DimensionError("Matrix::block: out of range");
    }
    Matrix b(nr, nc);
    for (std::size_t i = 0; i < nr; ++i)
      for (std::size_t j = 0; j < nc; ++j) b(i, j) = (*this)(r0 + i, c0 + j);
    return b;
  }

  void set_block(std::size_t r0, std::size_t c0, const Matrix& b) {
    if (r0 + b.rows() > rows_ || c0 + b.cols() > cols_) {
      throw DimensionError("Matrix::set_block: out of range");
    }
    for (std::size_t i = 0; i < b.rows(); ++i)
      for (std::size_t j = 0; j < b.cols(); ++j) (*this)(r0 + i, c0 + j) = b(i, j);
  }

  void add_block(std::size_t r0, std::size_t c0, const Matrix& b) {
    if (r0 + b.rows() > rows_ || c0 + b.cols() > cols_) {
      throw DimensionError("Matrix::add_block: out of range");
    }
    for (std::size_t i = 0; i < b.rows(); ++i)
      for (std::size_t j = 0; j < b.cols(); ++j) (*this)(r0 + i, c0 + j) += b(i, j);
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
  Matrix& operator*=(double s) {
    for (double& v : data_) v *= s;
    return *this;
  }

  friend Matrix operator+(Matrix a, const Matrix& b) { return a += b; }
  friend Matrix operator-(Matrix a, const Matrix& b) { return a -= b; }
  friend Matrix operator*(Matrix a, double s) { return a *= s; }
  friend Matrix operator*(double s, Matrix a) { return a *= s; }
  friend Matrix operator-(Matrix a) { return a *= -1.0; }

  friend Matrix operator*(const Matrix& a, const Matrix& b) {
    if (a.cols_ != b.rows_) throw DimensionError("Matrix product: inner dimensions differ");
    Matrix c(a.rows_, b.cols_);
    for (std::size_t i = 0; i < a.rows_; ++i)
      for (std::size_t k = 0; k < a.cols_; ++k) {
        const double aik = a(i, k);
        if (aik == 0.0) continue;
        for (std::size_t j = 0; j < b.cols_; ++j) c(i, j) += aik * b(k, j);
      }
    return c;
  }

  friend Vector operator*(const Matrix& a, std::span<const double> x) {
    if (a.cols_ != x.size()) throw DimensionError("Matrix-vector product: size mismatch");
    Vector y(a.rows_, 0.0);
    for (std::size_t i = 0; i < a.rows_; ++i) {
      double s = 0.0;
      for (std::size_t j = 0; j < a.cols_; ++j) s += a(i, j) * x[j];
      y[i] = s;
    }
    return y;
  }

  friend bool operator==(const Matrix&, const Matrix&) = default;

  friend std::ostream& operator<<(std::ostream& os, const Matrix& m) {
    os << '[';
    for (std::size_t i = 0; i < m.rows_; ++i) {
      os << (i ? "; " : "");
      for (std::size_t j = 0; j < m.cols_; ++j) os << (j ? " " : "") << m(i, j);
    }
    return os << ']';
  }

 private:
  void require_same_shape(const Matrix& o, const char* op) const {
    if (rows_ != o.rows_ || cols_ != o.cols_) {
      throw DimensionError(std::string("Matrix ") + op + ": shape mismatch");
    }
  }

  std::size_t rows_ = 0;
  std::size_t cols_ = 0;
  std::vector<double> data_;
};

inline Matrix symmetric_part(const Matrix& a) {
  if (!a.is_square()) throw DimensionError("symmetric_part: matrix must be square");
  Matrix s(a.rows(), a.cols());
  for (std::size_t i = 0; i < a.rows(); ++i)
    for (std::size_t j = 0; j < a.cols(); ++j) s(i, j) = 0.5 * (a(i, j) + a(j, i));
  return s;
}

/// Inverse by Gauss-Jordan elimination with partial pivoting.
/// Throws DomainError when a pivot vanishes.
inline Matrix inverse(const Matrix& a) {
  if (!a.is_square()) throw DimensionError("inverse: matrix must be square");
  const std::size_t n = a.rows();
  Matrix w = a;
  Matrix inv = Matrix::identity(n);
  double scale = 0.0;
  for (double v : a.data()) scale = std::max(scale, std::abs(v));
  for (std::size_t col = 0; col < n; ++col) {
    std::size_t piv = col;
    for (std::size_t r = col + 1; r < n; ++r)
      if (std::abs(w(r, col)) > std::abs(w(piv, col))) piv = r;
    if (std::abs(w(piv, col)) <= 1e-14 * scale || w(piv, col) == 0.0) {
      throw DomainError("inverse: matrix is singular");
    }
    if (piv != col) {
      for (std::size_t j = 0; j < n; ++j) {
        std::swap(w(piv, j), w(col, j));
        std::swap(inv(piv, j), inv(col, j));
      }
    }
    const double d = w(col, col);
    for (std::size_t j = 0; j < n; ++j) {
      w(col, j) /= d;
      inv(col, j) /= d;
    }
    for (std::size_t r = 0; r < n; ++r) {
      if (r == col) continue;
      const double f = w(r, col);
      if (f == 0.0) continue;
      for (std::size_t j = 0; j < n; ++j) {
        w(r, j) -= f * w(col, j);
        inv(r, j) -= f * inv(col, j);
      }
    }
  }
  return inv;
}

// ---------------------------------------------------------------------------
// Symmetric eigenvalues (cyclic Jacobi)

struct JacobiOptions {
  double off_tolerance = 1e-12;  // relative to the Frobenius norm of the input
  int max_sweeps = 100;
};

/// Eigenvalues of a symmetric matrix in ascending order. Only the upper
/// triangle's symmetric counterpart is assumed; the input is symmetrized.
inline Vector symmetric_eigenvalues(const Matrix& input, JacobiOptions opts = {}) {
  if (!input.is_square()) throw DimensionError("symmetric_eigenvalues: matrix must be square");
  Matrix a = symmetric_part(input);
  const std::size_t n = a.rows();

  double fro = 0.0;
  for (double v : a.data()) fro += v * v;
  fro = std::sqrt(fro);
  const double threshold = opts.off_tolerance * (fro > 0.0 ? fro : 1.0);

  auto off_norm = [&] {
    double s = 0.0;
    for (std::size_t i = 0; i < n; ++i)
      for (std::size_t j = 0; j < n; ++j)
        if (i != j) s += a(i, j) * a(i, j);
    return std::sqrt(s);
  };

  for (int sweep = 0; sweep < opts.max_sweeps && off_norm() > threshold; ++sweep) {
    for (std::size_t p = 0; p + 1 < n; ++p) {
      for (std::size_t q = p + 1; q < n; ++q) {
        const double apq = a(p, q);
        if (apq == 0.0) continue;
        const double theta = (a(q, q) - a(p, p)) / (2.0 * apq);
        const double t = (theta >= 0.0 ? 1.0 : -1.0) /
                         (std::abs(theta) + std::sqrt(theta * theta + 1.0));
        const double c = 1.0 / std::sqrt(t * t + 1.0);
        const double s = t * c;
        for (std::size_t k = 0; k < n; ++k) {
          const double akp = a(k, p);
          const double akq = a(k, q);
          a(k, p) = c * akp - s * akq;
          a(k, q) = s * akp + c * akq;
        }
        for (std::size_t k = 0; k < n; ++k) {
          const double apk = a(p, k);
          const double aqk = a(q, k);
          a(p, k) = c * apk - s * aqk;
          a(q, k) = s * apk + c * aqk;
        }
        a(p, q) = 0.0;
        a(q, p) = 0.0;
      }
    }
  }

  Vector ev(n);
  for (std::size_t i = 0; i < n; ++i) ev[i] = a(i, i);
  std::sort(ev.begin(), ev.end());
  return ev;
}

inline double max_symmetric_eigenvalue(const Matrix& a) { return symmetric_eigenvalues(a).back(); }
inline double min_symmetric_eigenvalue(const Matrix& a) { return symmetric_eigenvalues(a).front(); }

/// Positive semidefiniteness by smallest eigenvalue, with an absolute slack.
inline bool is_positive_semidefinite(const Matrix& a, double tol = 0.0) {
  return min_symmetric_eigenvalue(a) >= -tol;
}

// ---------------------------------------------------------------------------
// p-norms and measures

enum class NormKind { One, Two, Inf };

inline std::string_view to_string(NormKind p) {
  switch (p) {
    case NormKind::One: return "1";
    case NormKind::Two: return "2";
    case NormKind::Inf: return "inf";
  }
  return "?";
}

inline NormKind parse_norm_kind(std::string_view s) {
  if (s == "1") return NormKind::One;
  if (s == "2") return NormKind::Two;
  if (s == "inf" || s == "infinity" || s == "oo" || s == "Inf") return NormKind::Inf;
  throw DomainError("unsupported norm '" + std::string(s) + "' (expected 1, 2 or inf)");
}

inline double vector_norm(std::span<const double> x, NormKind p) {
  switch (p) {
    case NormKind::One: {
      double s = 0.0;
      for (double v : x) s += std::abs(v);
      return s;
    }
    case NormKind::Two: {
      double s = 0.0;
      for (double v : x) s += v * v;
      return std::sqrt(s);
    }
    case NormKind::Inf: {
      double s = 0.0;
      for (double v : x) s = std::max(s, std::abs(v));
      return s;
    }
  }
  return 0.0;
}

/// Largest singular value, sqrt(lambda_max(A^T A)).
inline double spectral_norm(const Matrix& a) {
  const Matrix ata = a.transpose() * a;
  return std::sqrt(std::max(0.0, max_symmetric_eigenvalue(ata)));
}

inline double induced_norm(const Matrix& a, NormKind p) {
  switch (p) {
    case NormKind::One: {
      double best = 0.0;
      for (std::size_t j = 0; j < a.cols(); ++j) {
        double s = 0.0;
        for (std::size_t i = 0; i < a.rows(); ++i) s += std::abs(a(i, j));
        best = std::max(best, s);
      }
      return best;
    }
    case NormKind::Two:
      return spectral_norm(a);
    case NormKind::Inf: {
      double best = 0.0;
      for (std::size_t i = 0; i < a.rows(); ++i) {
        double s = 0.0;
        for (std::size_t j = 0; j < a.cols(); ++j) s += std::abs(a(i, j));
        best = std::max(best, s);
      }
      return best;
    }
  }
  return 0.0;
}

/// Matrix measure (logarithmic norm) induced by the p-norm.
inline double matrix_measure(const Matrix& a, NormKind p) {
  if (!a.is_square()) throw DimensionError("matrix_measure: matrix must be square");
  const std::size_t n = a.rows();
  switch (p) {
    case NormKind::Two:
      return max_symmetric_eigenvalue(a);
    case NormKind::Inf: {
      double best = -std::numeric_limits<double>::infinity();
      for (std::size_t i = 0; i < n; ++i) {
        double s = a(i, i);
        for (std::size_t j = 0; j < n; ++j)
          if (j != i) s += std::abs(a(i, j));
        best = std::max(best, s);
      }
      return best;
    }
    case NormKind::One: {
      double best = -std::numeric_limits<double>::infinity();
      for (std::size_t j = 0; j < n; ++j) {
        double s = a(j, j);
        for (std::size_t i = 0; i < n; ++i)
          if (i != j) s += std::abs(a(i, j));
        best = std::max(best, s);
      }
      return best;
    }
  }
  return 0.0;
}

namespace detail {

inline void require_positive_weights(std::span<const double> eta) {
  for (double e : eta) {
    if (!(e > 0.0) || !std::isfinite(e)) {
      throw DomainError("weights must be strictly positive and finite");
    }
  }
}

}  // namespace detail

/// mu_{inf,[eta]^-1}(A) = max_i { A_ii + sum_{j != i} (eta_j / eta_i) |A_ij| }.
inline double weighted_inf_measure(const Matrix& a, std::span<const double> eta) {
  if (!a.is_square() || a.rows() != eta.size()) {
    throw DimensionError("weighted_inf_measure: A must be square with dim == len(eta)");
  }
  detail::require_positive_weights(eta);
  double best = -std::numeric_limits<double>::infinity();
  for (std::size_t i = 0; i < a.rows(); ++i) {
    double s = a(i, i);
    for (std::size_t j = 0; j < a.cols(); ++j)
      if (j != i) s += eta[j] / eta[i] * std::abs(a(i, j));
    best = std::max(best, s);
  }
  return best;
}

/// ||A||_{inf,[eta]^-1} = max_i { sum_j (eta_j / eta_i) |A_ij| }.
inline double weighted_inf_norm(const Matrix& a, std::span<const double> eta) {
  if (!a.is_square() || a.rows() != eta.size()) {
    throw DimensionError("weighted_inf_norm: A must be square with dim == len(eta)");
  }
  detail::require_positive_weights(eta);
  double best = 0.0;
  for (std::size_t i = 0; i < a.rows(); ++i) {
    double s = 0.0;
    for (std::size_t j = 0; j < a.cols(); ++j) s += eta[j] / eta[i] * std::abs(a(i, j));
    best = std::max(best, s);
  }
  return best;
}

// ---------------------------------------------------------------------------
// Block partitions and composite norms

/// Sizes n_1..n_r of the diagonal blocks of a partitioned square matrix.
class BlockPartition {
 public:
  BlockPartition() = default;
  explicit BlockPartition(std::vector<std::size_t> sizes) : sizes_(std::move(sizes)) {
    if (sizes_.empty()) throw DimensionError("BlockPartition: no blocks");
    offsets_.reserve(sizes_.size() + 1);
    offsets_.push_back(0);
    for (std::size_t s : sizes_) {
      if (s == 0) throw DimensionError("BlockPartition: block sizes must be >= 1");
      offsets_.push_back(offsets_.back() + s);
    }
  }

  static BlockPartition uniform(std::size_t blocks, std::size_t size) {
    return BlockPartition(std::vector<std::size_t>(blocks, size));
  }

  std::size_t count() const noexcept { return sizes_.size(); }
  std::size_t dimension() const noexcept { return offsets_.empty() ? 0 : offsets_.back(); }
  std::size_t size(std::size_t i) const { return sizes_.at(i); }
  std::size_t offset(std::size_t i) const { return offsets_.at(i); }
  const std::vector<std::size_t>& sizes() const noexcept { return sizes_; }

  Matrix block(const Matrix& a, std::size_t i, std::size_t j) const {
    return a.block(offsets_[i], offsets_[j], sizes_[i], sizes_[j]);
  }

  std::span<const double> block(std::span<const double> x, std::size_t i) const {
    return x.subspan(offsets_[i], sizes_[i]);
  }

  void require_conformal(const Matrix& a, const char* who) const {
    if (!a.is_square() || a.rows() != dimension()) {
      throw DimensionError(std::string(who) + ": matrix does not conform to the block partition");
    }
  }

 private:
  std::vector<std::size_t> sizes_;
  std::vector<std::size_t> offsets_;
};

/// Local p-norm on each block, aggregated by the weighted l-infinity norm
/// with weights eta (one per block).
struct NormSpec {
  NormKind local_p = NormKind::Two;
  Vector eta;

  static NormSpec uniform(std::size_t blocks, NormKind p = NormKind::Two) {
    return NormSpec{p, Vector(blocks, 1.0)};
  }

  void validate(std::size_t blocks) const {
    if (eta.size() != blocks) {
      throw DimensionError("NormSpec: eta has " + std::to_string(eta.size()) +
                           " entries, expected " + std::to_string(blocks));
    }
    detail::require_positive_weights(eta);
  }
};

/// r x r matrix of induced local norms of the blocks A_ij.
inline Matrix aggregate_majorant(const Matrix& a, const BlockPartition& part, const NormSpec& spec) {
  part.require_conformal(a, "aggregate_majorant");
  spec.validate(part.count());
  const std::size_t r = part.count();
  Matrix m(r, r);
  for (std::size_t i = 0; i < r; ++i)
    for (std::size_t j = 0; j < r; ++j) m(i, j) = induced_norm(part.block(a, i, j), spec.local_p);
  return m;
}

/// Like aggregate_majorant but with local measures on the diagonal; the
/// result is Metzler.
inline Matrix metzler_majorant(const Matrix& a, const BlockPartition& part, const NormSpec& spec) {
  part.require_conformal(a, "metzler_majorant");
  spec.validate(part.count());
  const std::size_t r = part.count();
  Matrix m(r, r);
  for (std::size_t i = 0; i < r; ++i)
    for (std::size_t j = 0; j < r; ++j) {
      const Matrix b = part.block(a, i, j);
      m(i, j) = (i == j) ? matrix_measure(b, spec.local_p) : induced_norm(b, spec.local_p);
    }
  return m;
}

/// max_i ||x_i||_p / eta_i.
inline double composite_vector_norm(std::span<const double> x, const BlockPartition& part,
                                    const NormSpec& spec) {
  if (x.size() != part.dimension()) {
    throw DimensionError("composite_vector_norm: vector does not conform to the block partition");
  }
  spec.validate(part.count());
  double best = 0.0;
  for (std::size_t i = 0; i < part.count(); ++i)
    best = std::max(best, vector_norm(part.block(x, i), spec.local_p) / spec.eta[i]);
  return best;
}

/// Upper bound on the composite matrix measure via the Metzler majorant.
inline double composite_measure_bound(const Matrix& a, const BlockPartition& part,
                                      const NormSpec& spec) {
  return weighted_inf_measure(metzler_majorant(a, part, spec), spec.eta);
}

/// Upper bound on the composite induced norm via the aggregate majorant.
inline double composite_norm_bound(const Matrix& a, const BlockPartition& part,
                                   const NormSpec& spec) {
  return weighted_inf_norm(aggregate_majorant(a, part, spec), spec.eta);
}

}  // namespace mplex
