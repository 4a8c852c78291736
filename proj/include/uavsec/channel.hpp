#pragma once

#include "uavsec/scenario.hpp"

#include <Eigen/Core>

#include <cmath>

namespace uavsec {

/// Squared 3D distance between a UAV at horizontal position `q` and
/// altitude `H` and a ground point `w`.
template <class DerivedQ, class DerivedW>
typename DerivedQ::Scalar link_distance_sq(const Eigen::MatrixBase<DerivedQ>& q,
                                           const Eigen::MatrixBase<DerivedW>& w,
                                           typename DerivedQ::Scalar H) {
    return (q - w).squaredNorm() + H * H;
}

template <class DerivedQ, class DerivedW>
typename DerivedQ::Scalar link_distance(const Eigen::MatrixBase<DerivedQ>& q,
                                        const Eigen::MatrixBase<DerivedW>& w,
                                        typename DerivedQ::Scalar H) {
    using std::sqrt;
    return sqrt(link_distance_sq(q, w, H));
}

/// Free-space LoS power gain beta0 / d^2.
template <class DerivedQ, class DerivedW>
typename DerivedQ::Scalar channel_gain(const Eigen::MatrixBase<DerivedQ>& q,
                                       const Eigen::MatrixBase<DerivedW>& w,
                                       typename DerivedQ::Scalar H,
                                       typename DerivedQ::Scalar beta0) {
    return beta0 / link_distance_sq(q, w, H);
}

/// True iff `q` is strictly inside the ground disk of `z`; the boundary is
/// allowed.
template <class DerivedQ>
bool inside_nfz(const Eigen::MatrixBase<DerivedQ>& q, const NoFlyZone& z) {
    using Scalar = typename DerivedQ::Scalar;
    const Scalar r = static_cast<Scalar>(z.radius);
    return (q - z.center.template cast<Scalar>()).squaredNorm() < r * r;
}

}  // namespace uavsec
