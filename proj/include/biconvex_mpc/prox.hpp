/**
 * @file prox.hpp
 * @brief Closed-form proximal operators of the constraint indicators.
 */
#pragma once

#include <variant>
#include <vector>

#include "biconvex_mpc/centroidal_model.hpp"

namespace biconvex_mpc {

/// Elementwise clamp to [lower, upper]. Throws if lower > upper anywhere.
Vector box_project(const Eigen::Ref<const Vector>& x, const Eigen::Ref<const Vector>& lower,
                   const Eigen::Ref<const Vector>& upper);

/// Euclidean projection onto the friction cone sqrt(fx^2 + fy^2) <= mu fz.
Vec3 soc_project(const Vec3& f, double mu);

struct IdentityProx {};

struct BoxProx {
  Vector lower;
  Vector upper;
};

/// Projects each consecutive 3-group onto its friction cone. Groups whose
/// mask entry is false are projected onto {0}; an empty mask means all groups
/// are active.
struct FrictionConeProx {
  double mu = 0.8;
  std::vector<unsigned char> active;
};

using ProxOperator = std::variant<IdentityProx, BoxProx, FrictionConeProx>;

/// Checks the operator's invariants against a variable of size dim.
void validate_prox(const ProxOperator& prox, Eigen::Index dim);

/// out = prox(x).
void apply_prox(const ProxOperator& prox, const Eigen::Ref<const Vector>& x, Eigen::Ref<Vector> out);

/// True if x lies in the operator's constraint set (tolerance tol).
bool is_feasible(const ProxOperator& prox, const Eigen::Ref<const Vector>& x, double tol = 1e-9);

}  // namespace biconvex_mpc
