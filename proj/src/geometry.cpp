#include "gmt/geometry.hpp"

#include <cmath>

namespace gmt {

Mat3 rot6d_to_matrix(const Rot6D& r) {
  const double n1 = r.a1.norm();
  if (n1 <= 1e-8) {
    throw DegenerateRotation("rot6d_to_matrix: first column near zero");
  }
  const Vec3 b1 = r.a1 / n1;
  const Vec3 v = r.a2 - b1.dot(r.a2) * b1;
  const double n2 = v.norm();
  if (n2 <= 1e-8) {
    throw DegenerateRotation("rot6d_to_matrix: columns near parallel");
  }
  const Vec3 b2 = v / n2;
  Mat3 R;
  R.col(0) = b1;
  R.col(1) = b2;
  R.col(2) = b1.cross(b2);
  return R;
}

Rot6D matrix_to_rot6d(const Mat3& R) {
  const double ortho = (R.transpose() * R - Mat3::Identity()).cwiseAbs().maxCoeff();
  if (ortho > 1e-5 || std::abs(R.determinant() - 1.0) > 1e-5) {
    throw NotARotation("matrix_to_rot6d: input is not a rotation matrix");
  }
  return {R.col(0), R.col(1)};
}

Mat3 frame_from_vectors(const Vec3& primary_axis, const Vec3& normal) {
  const double np = primary_axis.norm();
  const double nn = normal.norm();
  if (np <= 1e-12 || nn <= 1e-12 ||
      primary_axis.cross(normal).norm() <= 1e-6 * np * nn) {
    throw DegenerateRotation("frame_from_vectors: zero or parallel inputs");
  }
  const Vec3 b1 = primary_axis / np;

  // Null direction of span{primary, normal} from the SVD of the 3x2 stack.
  Eigen::Matrix<double, 3, 2> span;
  span.col(0) = b1;
  span.col(1) = normal / nn;
  Eigen::JacobiSVD<Eigen::Matrix<double, 3, 2>> svd(span, Eigen::ComputeFullU);
  Vec3 w = svd.matrixU().col(2);

  Vec3 b3 = w.cross(b1);
  if (b3.dot(normal) < 0.0) b3 = -b3;
  b3.normalize();
  Mat3 R;
  R.col(0) = b1;
  R.col(1) = b3.cross(b1);
  R.col(2) = b3;
  return R;
}

Eigen::Matrix<double, 8, 3> obb_corners(const OrientedBox& box) {
  const Mat3 R = rot6d_to_matrix(box.rotation);
  const Vec3 h = 0.5 * box.size;
  Eigen::Matrix<double, 8, 3> corners;
  for (int i = 0; i < 8; ++i) {
    const Vec3 local((i & 4) ? h.x() : -h.x(),
                     (i & 2) ? h.y() : -h.y(),
                     (i & 1) ? h.z() : -h.z());
    corners.row(i) = (box.center + R * local).transpose();
  }
  return corners;
}

bool obb_intersect(const OrientedBox& a, const OrientedBox& b) {
  const Mat3 Ra = rot6d_to_matrix(a.rotation);
  const Mat3 Rb = rot6d_to_matrix(b.rotation);
  // Everything in a's frame; standard Gottschalk SAT.
  const Mat3 C = Ra.transpose() * Rb;
  const Vec3 t = Ra.transpose() * (b.center - a.center);
  const Vec3 ea = 0.5 * a.size;
  const Vec3 eb = 0.5 * b.size;
  // Epsilon absorbs the cross-product axes' degeneracy for parallel edges.
  const Mat3 absC = C.cwiseAbs() + Mat3::Constant(1e-12);

  for (int i = 0; i < 3; ++i) {  // a's face normals
    if (std::abs(t(i)) > ea(i) + absC.row(i).dot(eb)) return false;
  }
  for (int j = 0; j < 3; ++j) {  // b's face normals
    if (std::abs(t.dot(C.col(j))) > eb(j) + absC.col(j).dot(ea)) return false;
  }
  for (int i = 0; i < 3; ++i) {  // edge-edge axes a_i x b_j
    const int i1 = (i + 1) % 3, i2 = (i + 2) % 3;
    for (int j = 0; j < 3; ++j) {
      const int j1 = (j + 1) % 3, j2 = (j + 2) % 3;
      const double ra = ea(i1) * absC(i2, j) + ea(i2) * absC(i1, j);
      const double rb = eb(j1) * absC(i, j2) + eb(j2) * absC(i, j1);
      if (std::abs(t(i2) * C(i1, j) - t(i1) * C(i2, j)) > ra + rb) return false;
    }
  }
  return true;
}

}  // namespace gmt
