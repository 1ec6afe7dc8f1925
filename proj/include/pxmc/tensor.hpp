#pragma once

#include <algorithm>
#include <cmath>
#include <functional>
#include <initializer_list>
#include <numeric>
#include <string>
#include <utility>
#include <vector>

#include <Eigen/Dense>

#include "pxmc/errors.hpp"
#include "pxmc/rng.hpp"

namespace pxmc {

template <typename Scalar>
using MatrixX = Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic>;
template <typename Scalar>
using VectorX = Eigen::Matrix<Scalar, Eigen::Dynamic, 1>;

using Eigen::Index;
using Dims = std::vector<Index>;

inline std::string dims_string(const Dims& dims) {
  std::string s = "[";
  for (std::size_t i = 0; i < dims.size(); ++i) {
    if (i) s += "x";
    s += std::to_string(dims[i]);
  }
  return s + "]";
}

// Dense tensor of rank 1..4 with column-major storage: element (i, j, k, l)
// lives at i + d0 * (j + d1 * (k + d2 * l)). Rank-1 and rank-2 tensors view
// directly as Eigen vectors/matrices.
template <typename Scalar>
class BasicTensor {
 public:
  using Storage = VectorX<Scalar>;

  BasicTensor() = default;

  explicit BasicTensor(Dims dims) : dims_(std::move(dims)) {
    check_dims(dims_);
    values_ = Storage::Zero(product(dims_));
  }

  BasicTensor(Dims dims, Storage values) : dims_(std::move(dims)), values_(std::move(values)) {
    check_dims(dims_);
    if (values_.size() != product(dims_))
      throw ShapeError("tensor payload of " + std::to_string(values_.size()) +
                       " entries does not match dims " + dims_string(dims_));
  }

  template <typename Derived>
  static BasicTensor from_matrix(const Eigen::MatrixBase<Derived>& m) {
    MatrixX<Scalar> dense = m;
    return BasicTensor({dense.rows(), dense.cols()},
                       Eigen::Map<const Storage>(dense.data(), dense.size()));
  }

  template <typename Derived>
  static BasicTensor from_vector(const Eigen::MatrixBase<Derived>& v) {
    Storage dense = v;
    const Index n = dense.size();
    return BasicTensor({n}, std::move(dense));
  }

  static BasicTensor identity(Index n) {
    return from_matrix(MatrixX<Scalar>::Identity(n, n));
  }

  const Dims& dims() const { return dims_; }
  Index dim(std::size_t axis) const { return dims_.at(axis); }
  std::size_t rank() const { return dims_.size(); }
  Index size() const { return values_.size(); }

  Storage& flat() { return values_; }
  const Storage& flat() const { return values_; }

  Eigen::Map<MatrixX<Scalar>> matrix() {
    require_matrix_view();
    return {values_.data(), dims_[0], rank() == 2 ? dims_[1] : 1};
  }
  Eigen::Map<const MatrixX<Scalar>> matrix() const {
    require_matrix_view();
    return {values_.data(), dims_[0], rank() == 2 ? dims_[1] : 1};
  }

  Scalar& operator()(Index i) { return values_(i); }
  Scalar operator()(Index i) const { return values_(i); }
  Scalar& operator()(Index i, Index j) { return values_(i + dims_[0] * j); }
  Scalar operator()(Index i, Index j) const { return values_(i + dims_[0] * j); }
  Scalar& operator()(Index i, Index j, Index k, Index l) { return values_(offset4(i, j, k, l)); }
  Scalar operator()(Index i, Index j, Index k, Index l) const { return values_(offset4(i, j, k, l)); }

  bool all_finite() const { return values_.allFinite(); }

  BasicTensor& operator+=(const BasicTensor& o) {
    require_same_dims(o);
    values_ += o.values_;
    return *this;
  }
  BasicTensor& operator-=(const BasicTensor& o) {
    require_same_dims(o);
    values_ -= o.values_;
    return *this;
  }
  BasicTensor& operator*=(Scalar s) {
    values_ *= s;
    return *this;
  }
  friend BasicTensor operator+(BasicTensor a, const BasicTensor& b) { return a += b; }
  friend BasicTensor operator-(BasicTensor a, const BasicTensor& b) { return a -= b; }
  friend BasicTensor operator*(Scalar s, BasicTensor a) { return a *= s; }

  friend bool operator==(const BasicTensor& a, const BasicTensor& b) {
    return a.dims_ == b.dims_ && a.values_ == b.values_;
  }

  void require_same_dims(const BasicTensor& o) const {
    if (o.dims_ != dims_)
      throw ShapeError("dims " + dims_string(dims_) + " vs " + dims_string(o.dims_));
  }

 private:
  static Index product(const Dims& d) {
    return std::accumulate(d.begin(), d.end(), Index{1}, std::multiplies<>());
  }
  static void check_dims(const Dims& d) {
    if (d.empty() || d.size() > 4) throw ShapeError("tensor rank must be 1..4, got " + std::to_string(d.size()));
    for (Index e : d)
      if (e < 0) throw ShapeError("negative extent in " + dims_string(d));
  }
  void require_matrix_view() const {
    if (rank() > 2) throw ShapeError("matrix view of rank-" + std::to_string(rank()) + " tensor");
  }
  Index offset4(Index i, Index j, Index k, Index l) const {
    return i + dims_[0] * (j + dims_[1] * (k + dims_[2] * l));
  }

  Dims dims_;
  Storage values_;
};

using Tensor = BasicTensor<double>;

template <typename Scalar>
void require_matrix(const BasicTensor<Scalar>& t, const char* what) {
  if (t.rank() != 2) throw ShapeError(std::string(what) + ": expected a matrix, got " + dims_string(t.dims()));
}

template <typename Scalar>
BasicTensor<Scalar> matmul(const BasicTensor<Scalar>& a, const BasicTensor<Scalar>& b) {
  require_matrix(a, "matmul");
  require_matrix(b, "matmul");
  if (a.dim(1) != b.dim(0))
    throw ShapeError("matmul: " + dims_string(a.dims()) + " * " + dims_string(b.dims()));
  return BasicTensor<Scalar>::from_matrix(a.matrix() * b.matrix());
}

/// Kronecker product: block (i, j) of the result is a(i, j) * b.
template <typename DerivedA, typename DerivedB>
MatrixX<typename DerivedA::Scalar> kron(const Eigen::MatrixBase<DerivedA>& a,
                                        const Eigen::MatrixBase<DerivedB>& b) {
  const Index p = b.rows(), q = b.cols();
  MatrixX<typename DerivedA::Scalar> out(a.rows() * p, a.cols() * q);
  for (Index j = 0; j < a.cols(); ++j)
    for (Index i = 0; i < a.rows(); ++i) out.block(i * p, j * q, p, q) = a(i, j) * b;
  return out;
}

template <typename Scalar>
BasicTensor<Scalar> kron(const BasicTensor<Scalar>& a, const BasicTensor<Scalar>& b) {
  require_matrix(a, "kron");
  require_matrix(b, "kron");
  return BasicTensor<Scalar>::from_matrix(kron(a.matrix(), b.matrix()));
}

/// Column-major vectorization, so that vec(A X B) == (B^T kron A) vec(X).
template <typename Derived>
VectorX<typename Derived::Scalar> vec(const Eigen::MatrixBase<Derived>& a) {
  MatrixX<typename Derived::Scalar> dense = a;
  return Eigen::Map<const VectorX<typename Derived::Scalar>>(dense.data(), dense.size());
}

template <typename Derived>
MatrixX<typename Derived::Scalar> unvec(const Eigen::MatrixBase<Derived>& v, Index rows, Index cols) {
  if (v.size() != rows * cols)
    throw ShapeError("unvec: " + std::to_string(v.size()) + " entries into " + std::to_string(rows) +
                     "x" + std::to_string(cols));
  VectorX<typename Derived::Scalar> dense = v;
  return Eigen::Map<const MatrixX<typename Derived::Scalar>>(dense.data(), rows, cols);
}

template <typename Scalar>
BasicTensor<Scalar> vec(const BasicTensor<Scalar>& a) {
  require_matrix(a, "vec");
  return BasicTensor<Scalar>({a.size(), 1}, a.flat());
}

// Singular values in descending order.
template <typename Derived>
std::vector<typename Derived::Scalar> svd_values(const Eigen::MatrixBase<Derived>& a) {
  using Scalar = typename Derived::Scalar;
  if (!a.allFinite()) throw NumericError("svd_values: non-finite input");
  const Eigen::JacobiSVD<MatrixX<Scalar>> svd(a.eval());
  const auto& s = svd.singularValues();
  return std::vector<Scalar>(s.data(), s.data() + s.size());
}

template <typename Scalar>
std::vector<Scalar> svd_values(const BasicTensor<Scalar>& a) {
  require_matrix(a, "svd_values");
  return svd_values(a.matrix());
}

inline Tensor gaussian(RngStream& rng, Dims dims) {
  Tensor t(std::move(dims));
  rng.fill_normal(t.flat().data(), static_cast<std::size_t>(t.size()));
  return t;
}

inline Tensor uniform(RngStream& rng, Dims dims, double lo = 0.0, double hi = 1.0) {
  Tensor t(std::move(dims));
  for (Index i = 0; i < t.size(); ++i) t(i) = lo + (hi - lo) * rng.uniform();
  return t;
}

}  // namespace pxmc
