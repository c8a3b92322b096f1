#pragma once

#include <span>
#include <vector>

#include "cond/contact.hpp"
#include "cond/sparse.hpp"

namespace cond {

/// Contact-space problem min ½λᵀA_cλ + λᵀ(b_c + φ_c) over the product of
/// friction cones, with A_c = J_c A⁻¹ J_cᵀ and b_c = J_c A⁻¹ b.
struct DelassusProblem {
  DenseSymmetric ac;
  Vector bc;
  Vector phi;  // φ_n in the normal slot of each contact
  std::vector<Contact> contacts;
  Matrix ainv_jt;  // A⁻¹ J_cᵀ
  Vector ainv_b;
  double assembly_ms = 0.0;

  Index contact_count() const { return static_cast<Index>(contacts.size()); }
};

DelassusProblem assemble_delassus(const SparseSymmetric& a, std::span<const Contact> contacts,
                                  const Eigen::Ref<const Vector>& b);

struct BaselineConfig {
  double residual_tol = 1e-4;  // m/s, velocity space
  int max_iterations = 500;
};

struct BaselineReport {
  int iterations = 0;
  std::vector<double> residuals;
  bool converged = false;
  double solve_ms = 0.0;
  /// Objective value recorded at every restart (APGD only).
  std::vector<double> restart_objectives;
};

struct BaselineResult {
  Vector lambda;
  BaselineReport report;
};

double ccp_objective(const DelassusProblem& p, const Eigen::Ref<const Vector>& lambda);

/// Block Gauss–Seidel sweep with per-block step 1/λ_max(D_m) and Euclidean
/// cone projection. Residual per sweep is ‖A⁻¹J_cᵀΔλ‖.
BaselineResult solve_pgs(const DelassusProblem& p, const BaselineConfig& cfg,
                         const Eigen::Ref<const Vector>& warm = Vector());

/// Nesterov projected gradient with step 1/L and gradient restart.
BaselineResult solve_apgd(const DelassusProblem& p, const BaselineConfig& cfg,
                          const Eigen::Ref<const Vector>& warm = Vector());

/// v̂ = A⁻¹(b + J_cᵀλ).
Vector recover_velocity(const DelassusProblem& p, const Eigen::Ref<const Vector>& lambda);

}  // namespace cond
