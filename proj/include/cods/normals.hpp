#pragma once

#include <Eigen/Eigenvalues>
#include <optional>

#include "cods/geometry.hpp"
#include "cods/image.hpp"

namespace cods {

// PCA plane fit over valid 3D neighbors within `radius`, oriented toward the
// camera. Returns nullopt for <3 neighbors or a degenerate neighborhood.
inline std::optional<Vec3> normal_at_pixel(const Image<float>& depth, const CameraView& view,
                                           int px, int py, double radius) {
  if (!depth.in_bounds(px, py) || depth.at(px, py) <= 0) return std::nullopt;
  const auto& k = view.intrinsics;
  const double d0 = depth.at(px, py);
  // pixel pitch in meters at this depth bounds the search window
  const double pitch = d0 / std::min(k.fx, k.fy);
  const int win = std::max(1, static_cast<int>(std::ceil(radius / pitch)));

  const Vec3 center = unproject({px, py}, d0, view);
  Eigen::Matrix3d cov = Eigen::Matrix3d::Zero();
  Vec3 mean = Vec3::Zero();
  std::vector<Vec3> pts;
  for (int dy = -win; dy <= win; ++dy)
    for (int dx = -win; dx <= win; ++dx) {
      const int x = px + dx, y = py + dy;
      if (!depth.in_bounds(x, y) || depth.at(x, y) <= 0) continue;
      const Vec3 p = unproject({x, y}, depth.at(x, y), view);
      if ((p - center).norm() > radius) continue;
      pts.push_back(p);
      mean += p;
    }
  if (pts.size() < 3) return std::nullopt;
  mean /= double(pts.size());
  for (const auto& p : pts) cov += (p - mean) * (p - mean).transpose();
  Eigen::SelfAdjointEigenSolver<Eigen::Matrix3d> es(cov);
  // collinear neighborhood: two near-zero eigenvalues
  if (es.eigenvalues()(1) < 1e-12 * std::max(1e-30, es.eigenvalues()(2))) return std::nullopt;
  Vec3 n = es.eigenvectors().col(0);
  const Vec3 to_camera = view.pose.translation_vector() - center;
  if (n.dot(to_camera) < 0) n = -n;
  return n.normalized();
}

// Per-pixel normals for the whole depth map; invalid pixels are zero vectors.
inline Image<Eigen::Vector3f> estimate_normals(const Image<float>& depth, const CameraView& view,
                                               double radius) {
  if (radius <= 0) throw DomainError("estimate_normals: radius must be positive");
  Image<Eigen::Vector3f> out(depth.width(), depth.height(), Eigen::Vector3f::Zero());
  for (int y = 0; y < depth.height(); ++y)
    for (int x = 0; x < depth.width(); ++x)
      if (auto n = normal_at_pixel(depth, view, x, y, radius))
        out.at(x, y) = n->cast<float>();
  return out;
}

}  // namespace cods
