#pragma once

#include <Eigen/Dense>

#include "gmt/errors.hpp"

namespace gmt {

using Vec3 = Eigen::Vector3d;
using Mat3 = Eigen::Matrix3d;
using Vec6 = Eigen::Matrix<double, 6, 1>;
using Vec9 = Eigen::Matrix<double, 9, 1>;

/// Continuous 6D rotation parameterization: the first two columns of a
/// rotation matrix before re-orthonormalization.
struct Rot6D {
  Vec3 a1{1.0, 0.0, 0.0};
  Vec3 a2{0.0, 1.0, 0.0};

  static Rot6D identity() { return {}; }

  Vec6 coeffs() const {
    Vec6 v;
    v << a1, a2;
    return v;
  }
  static Rot6D from_coeffs(const Vec6& v) { return {v.head<3>(), v.tail<3>()}; }
};

/// One trajectory frame: 3D position plus 6D rotation.
struct Pose9 {
  Vec3 position{0.0, 0.0, 0.0};
  Rot6D rotation;

  Vec9 coeffs() const {
    Vec9 v;
    v << position, rotation.coeffs();
    return v;
  }
  static Pose9 from_coeffs(const Vec9& v) {
    return {v.head<3>(), Rot6D::from_coeffs(v.tail<6>())};
  }
};

/// Box with full extents `size` (all > 0), rotated by `rotation` about `center`.
struct OrientedBox {
  Vec3 center{0.0, 0.0, 0.0};
  Vec3 size{1.0, 1.0, 1.0};
  Rot6D rotation;

  Eigen::Matrix<double, 12, 1> coeffs() const {
    Eigen::Matrix<double, 12, 1> v;
    v << center, size, rotation.coeffs();
    return v;
  }
  static OrientedBox from_coeffs(const Eigen::Matrix<double, 12, 1>& v) {
    return {v.head<3>(), v.segment<3>(3), Rot6D::from_coeffs(v.tail<6>())};
  }
};

/// Gram-Schmidt reconstruction of the full rotation matrix: normalize a1,
/// orthogonalize a2 against it, complete with the cross product.
/// Throws DegenerateRotation when |a1| or the orthogonal residual of a2
/// falls below 1e-8.
Mat3 rot6d_to_matrix(const Rot6D& r);

/// Drops the third column. Throws NotARotation unless R is orthonormal with
/// det +1 within 1e-5.
Rot6D matrix_to_rot6d(const Mat3& R);

/// Orthonormal frame with column 0 along `primary_axis`; the remaining
/// columns are fixed by the plane normal found via SVD of [primary, normal],
/// signed so column 2 points toward `normal`. Throws DegenerateRotation on
/// zero or parallel inputs (within 1e-6).
Mat3 frame_from_vectors(const Vec3& primary_axis, const Vec3& normal);

/// The 8 corners, row i encodes the half-extent signs of (x, y, z) as the
/// bits of i with z fastest: i = 0 -> (-,-,-), i = 1 -> (-,-,+), ...,
/// i = 7 -> (+,+,+).
Eigen::Matrix<double, 8, 3> obb_corners(const OrientedBox& box);

/// Separating-axis test over the 15 candidate axes (3 + 3 face normals and
/// 9 edge cross products). Touching boxes count as intersecting.
bool obb_intersect(const OrientedBox& a, const OrientedBox& b);

}  // namespace gmt
