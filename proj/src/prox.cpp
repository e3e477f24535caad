#include "biconvex_mpc/prox.hpp"

#include <cmath>
#include <stdexcept>
#include <string>

namespace biconvex_mpc {

Vector box_project(const Eigen::Ref<const Vector>& x, const Eigen::Ref<const Vector>& lower,
                   const Eigen::Ref<const Vector>& upper) {
  if (x.size() != lower.size() || x.size() != upper.size())
    throw std::invalid_argument("box_project: dimension mismatch");
  if ((lower.array() > upper.array()).any()) throw std::invalid_argument("box_project: lower > upper");
  return x.cwiseMin(upper).cwiseMax(lower);
}

Vec3 soc_project(const Vec3& f, double mu) {
  if (!(mu > 0.0)) throw std::invalid_argument("soc_project: mu must be positive");
  const double tangential = std::hypot(f.x(), f.y());
  // Polar cone: mu |f_xy| <= -f_z.
  if (mu * tangential <= -f.z()) return Vec3::Zero();
  if (tangential <= mu * f.z()) return f;
  // Outside both cones; tangential > 0 here since f_z < 0 would have hit the
  // polar case and f_z >= 0 with tangential = 0 is inside.
  const double mu2 = mu * mu;
  const double beta = (mu2 * tangential + mu * f.z()) / ((mu2 + 1.0) * tangential);
  const double gamma = (mu * tangential + f.z()) / (mu2 + 1.0);
  return {beta * f.x(), beta * f.y(), gamma};
}

void validate_prox(const ProxOperator& prox, Eigen::Index dim) {
  if (const auto* box = std::get_if<BoxProx>(&prox)) {
    if (box->lower.size() != dim || box->upper.size() != dim)
      throw std::invalid_argument("box prox: bounds have wrong dimension");
    if ((box->lower.array() > box->upper.array()).any()) throw std::invalid_argument("box prox: lower > upper");
  } else if (const auto* cone = std::get_if<FrictionConeProx>(&prox)) {
    if (!(cone->mu > 0.0)) throw std::invalid_argument("friction cone prox: mu must be positive");
    if (dim % 3 != 0) throw std::invalid_argument("friction cone prox: dimension must be a multiple of 3");
    if (!cone->active.empty() && static_cast<Eigen::Index>(cone->active.size()) * 3 != dim)
      throw std::invalid_argument("friction cone prox: mask has wrong length");
  }
}

void apply_prox(const ProxOperator& prox, const Eigen::Ref<const Vector>& x, Eigen::Ref<Vector> out) {
  if (const auto* box = std::get_if<BoxProx>(&prox)) {
    out = x.cwiseMin(box->upper).cwiseMax(box->lower);
  } else if (const auto* cone = std::get_if<FrictionConeProx>(&prox)) {
    for (Eigen::Index g = 0; g < x.size() / 3; ++g) {
      const bool on = cone->active.empty() || cone->active[static_cast<std::size_t>(g)] != 0;
      out.segment<3>(3 * g) = on ? soc_project(x.segment<3>(3 * g), cone->mu) : Vec3::Zero();
    }
  } else {
    out = x;
  }
}

bool is_feasible(const ProxOperator& prox, const Eigen::Ref<const Vector>& x, double tol) {
  if (const auto* box = std::get_if<BoxProx>(&prox)) {
    return ((x - box->lower).array() >= -tol).all() && ((box->upper - x).array() >= -tol).all();
  }
  if (const auto* cone = std::get_if<FrictionConeProx>(&prox)) {
    for (Eigen::Index g = 0; g < x.size() / 3; ++g) {
      const Vec3 f = x.segment<3>(3 * g);
      const bool on = cone->active.empty() || cone->active[static_cast<std::size_t>(g)] != 0;
      if (!on && f.squaredNorm() != 0.0) return false;
      if (std::hypot(f.x(), f.y()) > cone->mu * f.z() + tol) return false;
    }
  }
  return true;
}

}  // namespace biconvex_mpc
