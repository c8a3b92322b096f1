#pragma once

#include <Eigen/Cholesky>
#include <Eigen/Core>
#include <Eigen/SparseCore>

#include <vector>

namespace cond {

using Index = Eigen::Index;
using Vector = Eigen::VectorXd;
using Matrix = Eigen::MatrixXd;
using Vector3 = Eigen::Vector3d;
using Matrix3 = Eigen::Matrix3d;
using Triplet = Eigen::Triplet<double>;

/// Largest system the dense factorization accepts. Only the impulse-space
/// baselines factor A, and they run at desk scale.
inline constexpr Index kDenseFactorCapacity = 4096;

/// Symmetric matrix in compressed sparse column layout with both triangles
/// stored explicitly. Every stored (i, j, v) has a bitwise-identical (j, i, v).
class SparseSymmetric {
 public:
  using Storage = Eigen::SparseMatrix<double, Eigen::ColMajor, int>;

  SparseSymmetric() = default;

  /// Takes ownership of `m`; throws kInvalidArgument unless it is square,
  /// finite and exactly symmetric.
  explicit SparseSymmetric(Storage m);

  /// Sums duplicate triplets, then stores 0.5 (M + M^T), which is exactly
  /// symmetric regardless of accumulation order.
  static SparseSymmetric from_triplets(Index dim,
                                       const std::vector<Triplet>& triplets);

  static SparseSymmetric identity(Index dim);

  Index dim() const { return m_.cols(); }
  Index nonzeros() const { return m_.nonZeros(); }
  const Storage& matrix() const { return m_; }
  double diagonal(Index i) const { return m_.coeff(i, i); }
  Vector diagonal() const { return m_.diagonal(); }
  Matrix to_dense() const { return Matrix(m_); }

 private:
  Storage m_;
};

/// Dense symmetric matrix; symmetric to within 1e-12 relative.
class DenseSymmetric {
 public:
  DenseSymmetric() = default;
  explicit DenseSymmetric(Matrix m);

  Index dim() const { return m_.rows(); }
  const Matrix& matrix() const { return m_; }

 private:
  Matrix m_;
};

/// Cholesky factor of an SPD matrix (dense after densify).
class SpdFactor {
 public:
  Index dim() const { return dim_; }
  Matrix lower() const { return llt_.matrixL(); }

 private:
  friend SpdFactor factor_spd(const SparseSymmetric& a);
  friend SpdFactor factor_spd(const DenseSymmetric& a);
  friend Vector solve_with(const SpdFactor& f, const Vector& b);
  friend Matrix solve_with(const SpdFactor& f, const Matrix& b);

  Index dim_ = 0;
  Eigen::LLT<Matrix> llt_;
};

Vector spmv(const SparseSymmetric& a, const Eigen::Ref<const Vector>& x);

/// Allocation-free form used inside solver loops.
void spmv(const SparseSymmetric& a, const Eigen::Ref<const Vector>& x,
          Eigen::Ref<Vector> out);

/// Squared 2-norm of every row.
Vector row_norms_sq(const SparseSymmetric& a);

SpdFactor factor_spd(const SparseSymmetric& a);
SpdFactor factor_spd(const DenseSymmetric& a);

Vector solve_with(const SpdFactor& f, const Vector& b);
Matrix solve_with(const SpdFactor& f, const Matrix& b);

}  // namespace cond
