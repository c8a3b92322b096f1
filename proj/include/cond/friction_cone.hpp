#pragma once

#include <Eigen/Core>

#include <algorithm>
#include <cmath>

#include "cond/error.hpp"

namespace cond {

template <typename Scalar>
using Impulse3 = Eigen::Matrix<Scalar, 3, 1>;

/// Two-stage projection: clamp the normal at zero, then clamp the tangential
/// part radially onto the disk of radius μ λ_n.
template <typename Scalar>
Impulse3<Scalar> project_strict(const Impulse3<Scalar>& lambda, Scalar mu) {
  Impulse3<Scalar> out = Impulse3<Scalar>::Zero();
  if (!(lambda[0] > Scalar(0))) return out;
  out[0] = lambda[0];
  const Scalar radius = mu * lambda[0];
  const Scalar tn = lambda.template tail<2>().norm();
  if (tn <= radius) {
    out.template tail<2>() = lambda.template tail<2>();
  } else {
    out.template tail<2>() = lambda.template tail<2>() * (radius / tn);
  }
  return out;
}

/// Euclidean projection onto {λ_n ≥ 0, ‖λ_t‖ ≤ μ λ_n}.
template <typename Scalar>
Impulse3<Scalar> project_proximal(const Impulse3<Scalar>& lambda, Scalar mu) {
  const Scalar n = lambda[0];
  const Scalar tn = lambda.template tail<2>().norm();
  if (n >= Scalar(0) && tn <= mu * n) return lambda;
  if (mu * tn <= -n) return Impulse3<Scalar>::Zero();
  Impulse3<Scalar> out;
  out[0] = (n + mu * tn) / (Scalar(1) + mu * mu);
  out.template tail<2>() = lambda.template tail<2>() * (mu * out[0] / tn);
  return out;
}

/// Closest point of the ellipse (x/a)² + (y/b)² ≤ 1 to p. Outside points are
/// projected with x_i = p_i a_i² / (a_i² + τ), τ found by bisection.
template <typename Scalar>
Eigen::Matrix<Scalar, 2, 1> project_ellipse(const Eigen::Matrix<Scalar, 2, 1>& p, Scalar a, Scalar b) {
  using V2 = Eigen::Matrix<Scalar, 2, 1>;
  const V2 axes(a, b);
  const V2 sq = axes.cwiseProduct(axes);
  auto level = [&](Scalar tau) {
    Scalar sum = 0;
    for (int i = 0; i < 2; ++i) {
      if (sq[i] > Scalar(0)) {
        const Scalar r = p[i] * axes[i] / (sq[i] + tau);
        sum += r * r;
      }
    }
    return sum;
  };
  if (level(Scalar(0)) <= Scalar(1) && sq.minCoeff() > Scalar(0)) return p;

  Scalar lo = 0;
  Scalar hi = p.norm() * axes.maxCoeff();
  if (!(hi > Scalar(0))) return V2::Zero();
  bool done = false;
  for (int it = 0; it < 200; ++it) {
    const Scalar mid = Scalar(0.5) * (lo + hi);
    if (level(mid) > Scalar(1)) {
      lo = mid;
    } else {
      hi = mid;
    }
    if (hi - lo <= Scalar(1e-13) * hi) {
      done = true;
      break;
    }
  }
  if (!done) throw Error(ErrorCode::kNumeric, "project_ellipse: bisection did not converge");
  const Scalar tau = hi;
  V2 out;
  for (int i = 0; i < 2; ++i) out[i] = sq[i] > Scalar(0) ? p[i] * sq[i] / (sq[i] + tau) : Scalar(0);
  return out;
}

/// Normal clamp, then minimum-distance projection of the tangential part onto
/// the friction ellipse with semi-axes (μ1 λ_n, μ2 λ_n).
template <typename Scalar>
Impulse3<Scalar> project_strict_anisotropic(const Impulse3<Scalar>& lambda, Scalar mu1, Scalar mu2) {
  if (!(mu1 > Scalar(0)) || !(mu2 > Scalar(0))) {
    throw Error(ErrorCode::kInvalidArgument, "project_strict_anisotropic: coefficients must be > 0");
  }
  Impulse3<Scalar> out = Impulse3<Scalar>::Zero();
  if (!(lambda[0] > Scalar(0))) return out;
  out[0] = lambda[0];
  out.template tail<2>() =
      project_ellipse<Scalar>(lambda.template tail<2>(), mu1 * lambda[0], mu2 * lambda[0]);
  return out;
}

enum class ContactOperator { kStrict, kProximal, kStrictAnisotropic };

template <typename Scalar>
Impulse3<Scalar> project_cone(ContactOperator op, const Impulse3<Scalar>& lambda, Scalar mu1, Scalar mu2) {
  switch (op) {
    case ContactOperator::kStrict:
      return project_strict(lambda, mu1);
    case ContactOperator::kProximal:
      return project_proximal(lambda, mu1);
    case ContactOperator::kStrictAnisotropic:
      return project_strict_anisotropic(lambda, mu1, mu2);
  }
  return lambda;
}

}  // namespace cond
