#pragma once

#include <Eigen/Dense>

#include <cmath>
#include <cstdint>
#include <optional>
#include <stdexcept>
#include <string>
#include <utility>

namespace lrf {

using Index = Eigen::Index;

template <typename Scalar>
using RowMatrixT = Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
template <typename Scalar>
using VectorT = Eigen::Matrix<Scalar, Eigen::Dynamic, 1>;

using RowMatrix = RowMatrixT<double>;
using Vector = VectorT<double>;

/// (time, batch, tokens, channels) extents. Every component is strictly positive.
struct Shape4 {
  Index t = 1;
  Index b = 1;
  Index n = 1;
  Index d = 1;

  Shape4() = default;
  Shape4(Index t_, Index b_, Index n_, Index d_) : t(t_), b(b_), n(n_), d(d_) {
    if (t < 1 || b < 1 || n < 1 || d < 1) {
      throw std::invalid_argument("Shape4: all extents must be positive");
    }
  }

  Index size() const { return t * b * n * d; }
  Index slices() const { return t * b; }
  friend bool operator==(const Shape4&, const Shape4&) = default;
};

inline std::string to_string(const Shape4& s) {
  return "(" + std::to_string(s.t) + "," + std::to_string(s.b) + "," + std::to_string(s.n) + "," +
         std::to_string(s.d) + ")";
}

/// Dense row-major storage over (t, b, n, d). Each (t, b) slice is a contiguous
/// n x d row-major block exposed as an Eigen map.
template <typename Scalar>
class DenseTensor {
 public:
  using Matrix = RowMatrixT<Scalar>;
  using SliceMap = Eigen::Map<Matrix>;
  using ConstSliceMap = Eigen::Map<const Matrix>;

  DenseTensor() : DenseTensor(Shape4{}) {}
  explicit DenseTensor(const Shape4& shape) : shape_(shape), data_(VectorT<Scalar>::Zero(shape.size())) {}
  DenseTensor(const Shape4& shape, VectorT<Scalar> data) : shape_(shape), data_(std::move(data)) {
    if (data_.size() != shape_.size()) {
      throw std::invalid_argument("DenseTensor: element count does not match shape " + to_string(shape_));
    }
  }

  /// Builds a (1, 1, n, d) tensor from one slice.
  template <typename Derived>
  static DenseTensor from_slice(const Eigen::MatrixBase<Derived>& m) {
    DenseTensor out(Shape4{1, 1, m.rows(), m.cols()});
    out.slice(0, 0) = m;
    return out;
  }

  const Shape4& shape() const { return shape_; }
  Index size() const { return data_.size(); }

  SliceMap slice(Index t, Index b) { return SliceMap(data_.data() + offset(t, b), shape_.n, shape_.d); }
  ConstSliceMap slice(Index t, Index b) const {
    return ConstSliceMap(data_.data() + offset(t, b), shape_.n, shape_.d);
  }

  Scalar& operator()(Index t, Index b, Index n, Index d) { return data_[offset(t, b) + n * shape_.d + d]; }
  Scalar operator()(Index t, Index b, Index n, Index d) const { return data_[offset(t, b) + n * shape_.d + d]; }

  VectorT<Scalar>& flat() { return data_; }
  const VectorT<Scalar>& flat() const { return data_; }

  bool all_finite() const { return data_.allFinite(); }

 private:
  Index offset(Index t, Index b) const {
    if (t < 0 || t >= shape_.t || b < 0 || b >= shape_.b) {
      throw std::out_of_range("DenseTensor: slice index out of range");
    }
    return (t * shape_.b + b) * shape_.n * shape_.d;
  }

  Shape4 shape_;
  VectorT<Scalar> data_;
};

using Tensor = DenseTensor<double>;

/// Binary activations. Construction validates that every element is 0 or 1.
class SpikeTensor {
 public:
  SpikeTensor() = default;
  explicit SpikeTensor(const Shape4& shape) : values_(shape) {}
  explicit SpikeTensor(Tensor values) : values_(std::move(values)) {
    const auto& f = values_.flat();
    for (Index i = 0; i < f.size(); ++i) {
      if (f[i] != 0.0 && f[i] != 1.0) {
        throw std::domain_error("SpikeTensor: element " + std::to_string(i) + " is not binary");
      }
    }
  }

  /// 1 where x >= threshold, 0 elsewhere.
  static SpikeTensor threshold(const Tensor& x, double threshold) {
    Tensor out(x.shape());
    out.flat() = (x.flat().array() >= threshold).cast<double>();
    SpikeTensor s;
    s.values_ = std::move(out);
    return s;
  }

  const Shape4& shape() const { return values_.shape(); }
  const Tensor& values() const { return values_; }
  Tensor::ConstSliceMap slice(Index t, Index b) const { return values_.slice(t, b); }
  double operator()(Index t, Index b, Index n, Index d) const { return values_(t, b, n, d); }

  double firing_rate() const { return values_.flat().mean(); }

 private:
  Tensor values_;
};

struct GridPos {
  Index row = 0;
  Index col = 0;
  friend bool operator==(const GridPos&, const GridPos&) = default;
};

struct Offset {
  Index di = 0;
  Index dj = 0;
};

/// Rectangular token layout in raster order: token n sits at (n / cols, n % cols).
class TokenGrid {
 public:
  TokenGrid(Index rows, Index cols) : rows_(rows), cols_(cols) {
    if (rows < 1 || cols < 1) {
      throw std::invalid_argument("TokenGrid: rows and cols must be positive");
    }
  }

  /// Most square factorisation rows x cols = n with rows <= cols.
  static TokenGrid near_square(Index n) {
    if (n < 1) {
      throw std::invalid_argument("TokenGrid: token count must be positive");
    }
    auto rows = static_cast<Index>(std::sqrt(static_cast<double>(n)));
    while (rows > 1 && n % rows != 0) {
      --rows;
    }
    return TokenGrid(rows, n / rows);
  }

  Index rows() const { return rows_; }
  Index cols() const { return cols_; }
  Index size() const { return rows_ * cols_; }
  bool contains(Index n) const { return n >= 0 && n < size(); }

  GridPos token_to_grid(Index n) const {
    if (!contains(n)) {
      throw std::domain_error("TokenGrid: token index " + std::to_string(n) + " out of range");
    }
    return {n / cols_, n % cols_};
  }

  Index grid_to_token(GridPos p) const {
    if (p.row < 0 || p.row >= rows_ || p.col < 0 || p.col >= cols_) {
      throw std::domain_error("TokenGrid: grid position out of range");
    }
    return p.row * cols_ + p.col;
  }

  void require_tokens(Index n) const {
    if (n != size()) {
      throw std::domain_error("TokenGrid: " + std::to_string(rows_) + "x" + std::to_string(cols_) +
                              " grid does not hold " + std::to_string(n) + " tokens");
    }
  }

 private:
  Index rows_;
  Index cols_;
};

inline Index manhattan_distance(const TokenGrid& grid, Index i, Index j) {
  const GridPos a = grid.token_to_grid(i);
  const GridPos b = grid.token_to_grid(j);
  return std::abs(a.row - b.row) + std::abs(a.col - b.col);
}

/// Token at (row + di, col + dj), or nullopt when that falls outside the grid.
inline std::optional<Index> neighbor_index(const TokenGrid& grid, Index n, Offset offset) {
  const GridPos p = grid.token_to_grid(n);
  const Index r = p.row + offset.di;
  const Index c = p.col + offset.dj;
  if (r < 0 || r >= grid.rows() || c < 0 || c >= grid.cols()) {
    return std::nullopt;
  }
  return r * grid.cols() + c;
}

/// |a - b| elementwise maximum, the residual used by every equivalence check.
template <typename DerivedA, typename DerivedB>
double max_abs_diff(const Eigen::MatrixBase<DerivedA>& a, const Eigen::MatrixBase<DerivedB>& b) {
  if (a.rows() != b.rows() || a.cols() != b.cols()) {
    throw std::domain_error("max_abs_diff: shape mismatch");
  }
  if (a.size() == 0) {
    return 0.0;
  }
  return static_cast<double>((a.derived() - b.derived()).cwiseAbs().maxCoeff());
}

inline double max_abs_diff(const Tensor& a, const Tensor& b) {
  if (!(a.shape() == b.shape())) {
    throw std::domain_error("max_abs_diff: shape mismatch");
  }
  return max_abs_diff(a.flat(), b.flat());
}

/// Elementwise relative error |a - ref| / max(|ref|, floor) with floor = 1e-8 * max|ref|,
/// so entries that are exactly zero in the reference do not divide by zero.
template <typename DerivedA, typename DerivedB>
double max_rel_diff(const Eigen::MatrixBase<DerivedA>& a, const Eigen::MatrixBase<DerivedB>& ref) {
  if (a.rows() != ref.rows() || a.cols() != ref.cols()) {
    throw std::domain_error("max_rel_diff: shape mismatch");
  }
  if (a.size() == 0) {
    return 0.0;
  }
  const double scale = ref.cwiseAbs().maxCoeff();
  const double floor = scale > 0.0 ? 1e-8 * scale : 1e-300;
  const auto denom = ref.derived().cwiseAbs().array().max(floor);
  return ((a.derived() - ref.derived()).cwiseAbs().array() / denom).maxCoeff();
}

}  // namespace lrf
