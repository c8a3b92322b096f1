#include "cond/sparse.hpp"

#include <cmath>
#include <string>

#include "cond/error.hpp"

namespace cond {

namespace {

bool exactly_symmetric(const SparseSymmetric::Storage& m) {
  SparseSymmetric::Storage t = m.transpose();
  if (t.nonZeros() != m.nonZeros()) return false;
  for (Index col = 0; col < m.outerSize(); ++col) {
    SparseSymmetric::Storage::InnerIterator a(m, col);
    SparseSymmetric::Storage::InnerIterator b(t, col);
    for (; a && b; ++a, ++b) {
      if (a.row() != b.row() || a.value() != b.value()) return false;
    }
    if (a || b) return false;
  }
  return true;
}

}  // namespace

SparseSymmetric::SparseSymmetric(Storage m) : m_(std::move(m)) {
  if (m_.rows() != m_.cols()) {
    throw Error(ErrorCode::kInvalidArgument, "SparseSymmetric: matrix is not square");
  }
  m_.makeCompressed();
  for (Index k = 0; k < m_.nonZeros(); ++k) {
    if (!std::isfinite(m_.valuePtr()[k])) {
      throw Error(ErrorCode::kInvalidArgument, "SparseSymmetric: non-finite entry");
    }
  }
  if (!exactly_symmetric(m_)) {
    throw Error(ErrorCode::kInvalidArgument, "SparseSymmetric: matrix is not symmetric");
  }
}

SparseSymmetric SparseSymmetric::from_triplets(Index dim,
                                               const std::vector<Triplet>& triplets) {
  Storage m(dim, dim);
  m.setFromTriplets(triplets.begin(), triplets.end());
  Storage t = m.transpose();
  Storage sym = 0.5 * (m + t);
  return SparseSymmetric(std::move(sym));
}

SparseSymmetric SparseSymmetric::identity(Index dim) {
  Storage m(dim, dim);
  m.setIdentity();
  return SparseSymmetric(std::move(m));
}

DenseSymmetric::DenseSymmetric(Matrix m) : m_(std::move(m)) {
  if (m_.rows() != m_.cols()) {
    throw Error(ErrorCode::kInvalidArgument, "DenseSymmetric: matrix is not square");
  }
  const double scale = std::max(1.0, m_.cwiseAbs().maxCoeff());
  if ((m_ - m_.transpose()).cwiseAbs().maxCoeff() > 1e-12 * scale) {
    throw Error(ErrorCode::kInvalidArgument, "DenseSymmetric: matrix is not symmetric");
  }
}

Vector spmv(const SparseSymmetric& a, const Eigen::Ref<const Vector>& x) {
  Vector out(a.dim());
  spmv(a, x, out);
  return out;
}

void spmv(const SparseSymmetric& a, const Eigen::Ref<const Vector>& x,
          Eigen::Ref<Vector> out) {
  if (x.size() != a.dim() || out.size() != a.dim()) {
    throw Error(ErrorCode::kInvalidArgument,
                "spmv: dimension mismatch (matrix " + std::to_string(a.dim()) +
                    ", vector " + std::to_string(x.size()) + ")");
  }
  out.noalias() = a.matrix() * x;
}

Vector row_norms_sq(const SparseSymmetric& a) {
  // Column j of a symmetric matrix is row j.
  const auto& m = a.matrix();
  Vector out = Vector::Zero(a.dim());
  for (Index col = 0; col < m.outerSize(); ++col) {
    double sum = 0.0;
    for (SparseSymmetric::Storage::InnerIterator it(m, col); it; ++it) {
      sum += it.value() * it.value();
    }
    out[col] = sum;
  }
  return out;
}

namespace {

Index checked_dim(Index dim) {
  if (dim > kDenseFactorCapacity) {
    throw Error(ErrorCode::kCapacity,
                "factor_spd: dimension " + std::to_string(dim) +
                    " exceeds dense capacity " + std::to_string(kDenseFactorCapacity));
  }
  return dim;
}

}  // namespace

SpdFactor factor_spd(const DenseSymmetric& a) {
  SpdFactor f;
  f.dim_ = checked_dim(a.dim());
  f.llt_.compute(a.matrix());
  if (f.llt_.info() != Eigen::Success) {
    throw Error(ErrorCode::kNotPositiveDefinite, "factor_spd: non-positive pivot");
  }
  return f;
}

SpdFactor factor_spd(const SparseSymmetric& a) {
  checked_dim(a.dim());
  return factor_spd(DenseSymmetric(a.to_dense()));
}

Vector solve_with(const SpdFactor& f, const Vector& b) {
  if (b.size() != f.dim_) {
    throw Error(ErrorCode::kInvalidArgument, "solve_with: dimension mismatch");
  }
  return f.llt_.solve(b);
}

Matrix solve_with(const SpdFactor& f, const Matrix& b) {
  if (b.rows() != f.dim_) {
    throw Error(ErrorCode::kInvalidArgument, "solve_with: dimension mismatch");
  }
  return f.llt_.solve(b);
}

}  // namespace cond
