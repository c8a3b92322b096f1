#pragma once

#include <optional>
#include <span>
#include <vector>

#include "cond/contact.hpp"
#include "cond/friction_cone.hpp"
#include "cond/sparse.hpp"

namespace cond {

enum class StepStrategy { kFrobenius, kBB1, kBB2, kBBAlternating, kFixed };

struct SolverConfig {
  ContactOperator op = ContactOperator::kStrict;
  StepStrategy strategy = StepStrategy::kFrobenius;
  double fixed_alpha = 0.0;  // kFixed only, s/kg
  double residual_tol = 1e-4;
  int max_iterations = 500;
  bool chebyshev = true;
  int chebyshev_start = 10;
  double under_relaxation = 0.9;
  double regularization = 0.0;  // Ω_c = ω I
  int recycle_period = 1;       // steps between Frobenius W rebuilds
};

/// Validates ranges; throws kInvalidArgument naming the offending field.
void validate(const SolverConfig& cfg);

/// Diagonal W stored as its entries.
struct StepMatrix {
  Vector w;
};

struct SolverReport {
  int iterations = 0;
  std::vector<double> residuals;
  Vector lambda;
  double solve_ms = 0.0;
  bool converged = false;
  Vector scc;
  /// ‖diag(A)⁻¹(A v̂ − b − J_cᵀλ)‖ in m/s, and the unscaled norm in N.
  double consistency = 0.0;
  double consistency_raw = 0.0;
};

struct VfpiResult {
  Vector v;
  Vector lambda;
  SolverReport report;
};

/// Contacted nodes share w̄ = Σ a_kk / Σ ‖A_k*‖² over their three rows. With
/// the proximal operator a D-contact ties both nodes over all six rows.
StepMatrix step_matrix_frobenius(const SparseSymmetric& a, std::span<const Contact> contacts,
                                 ContactOperator op);

enum class BBVariant { kBB1, kBB2 };

/// sᵀs / sᵀz (BB1) or sᵀz / zᵀz (BB2); falls back to `previous` when sᵀz ≤ 0.
double step_matrix_bb(const Eigen::Ref<const Vector>& s, const Eigen::Ref<const Vector>& z,
                      BBVariant variant, double previous);

/// γ_m = w̄_i (S) or w̄_i + w̄_j (D). Throws kInvariantViolation when a
/// contacted node's three entries differ.
Vector surrogate_gamma(const StepMatrix& w, std::span<const Contact> contacts);

/// λ = Proj(−(η + φ e_n) / (γ + ω)) for one contact.
Vector3 solve_contact(double gamma, const Vector3& eta, const Contact& contact, ContactOperator op,
                      double omega);

/// Per-contact one-shot solve; parallel over contacts.
Vector contact_solve_oneshot(const Eigen::Ref<const Vector>& gamma, const Eigen::Ref<const Vector>& eta,
                             std::span<const Contact> contacts, ContactOperator op, double omega);

/// ν schedule: 1 before l_s, 2/(2 − ϱ²) at l_s, 4/(4 − ϱ² ν_l) after.
double chebyshev_nu(int l, int l_s, double rho, double nu_prev);

/// ν (v̂** − v̂^{l−1}) + v̂^{l−1}.
Vector chebyshev_update(const Eigen::Ref<const Vector>& vss, const Eigen::Ref<const Vector>& v_prev,
                        double nu);

/// min(now / before, 1); `previous` when before is zero.
double estimate_rho(double now, double before, double previous);

/// SCC violation for one contact given its contact-frame velocity u (without φ).
double scc_residual(const Vector3& u, const Vector3& lambda, const Contact& contact);

Vector scc_residual(const Eigen::Ref<const Vector>& v, const Eigen::Ref<const Vector>& lambda,
                    std::span<const Contact> contacts);

/// λ_m = Proj(−ω⁻¹(J_c,m v̂ + φ_m e_n)).
Vector inverse_contact(const Eigen::Ref<const Vector>& v, double omega, std::span<const Contact> contacts,
                       ContactOperator op);

/// Velocity fixed-point iteration. `cached_w`, when given with a matching
/// dimension, is reused instead of rebuilding the Frobenius W.
VfpiResult solve_vfpi(const AugmentedDynamics& dyn, std::span<const Contact> contacts,
                      const SolverConfig& cfg, const Eigen::Ref<const Vector>& warm,
                      const StepMatrix* cached_w = nullptr);

}  // namespace cond
