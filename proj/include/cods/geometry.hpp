#pragma once

#include <Eigen/Dense>
#include <optional>
#include <stdexcept>
#include <string>

#include "json.hpp"

namespace cods {

using Vec2 = Eigen::Vector2d;
using Vec3 = Eigen::Vector3d;
using Mat3 = Eigen::Matrix3d;
using Mat4 = Eigen::Matrix4d;

struct DomainError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// Ideal pinhole camera, no distortion. Pixel (u,v): u = fx*X/Z + cx with
// X right, Y down, Z forward in the camera frame.
struct CameraIntrinsics {
  double fx = 0, fy = 0, cx = 0, cy = 0;
  int width = 0, height = 0;

  void validate() const {
    if (fx <= 0 || fy <= 0) throw DomainError("intrinsics: focal length must be positive");
    if (cx < 0 || cx >= width || cy < 0 || cy >= height)
      throw DomainError("intrinsics: principal point outside image");
  }
  bool in_bounds(int u, int v) const {
    return u >= 0 && u < width && v >= 0 && v < height;
  }
};

// Proper rigid transform: orthonormal rotation (det +1) plus translation.
class RigidTransform {
 public:
  RigidTransform() : r_(Mat3::Identity()), t_(Vec3::Zero()) {}
  RigidTransform(const Mat3& r, const Vec3& t) : r_(r), t_(t) {
    if (((r * r.transpose()) - Mat3::Identity()).cwiseAbs().maxCoeff() > 1e-9 ||
        std::abs(r.determinant() - 1.0) > 1e-9)
      throw DomainError("RigidTransform: rotation not orthonormal with det +1");
  }

  static RigidTransform identity() { return {}; }
  static RigidTransform from_matrix(const Mat4& m) {
    return RigidTransform(m.topLeftCorner<3, 3>(), m.topRightCorner<3, 1>());
  }
  // Rotation about a unit axis by angle (radians).
  static RigidTransform rotation(const Vec3& axis, double angle, const Vec3& t = Vec3::Zero()) {
    return RigidTransform(Eigen::AngleAxisd(angle, axis.normalized()).toRotationMatrix(), t);
  }
  static RigidTransform translation(const Vec3& t) { return RigidTransform(Mat3::Identity(), t); }

  const Mat3& rotation_matrix() const { return r_; }
  const Vec3& translation_vector() const { return t_; }

  Vec3 apply(const Vec3& p) const { return r_ * p + t_; }
  Vec3 rotate(const Vec3& v) const { return r_ * v; }

  RigidTransform operator*(const RigidTransform& o) const {
    RigidTransform out;
    out.r_ = r_ * o.r_;
    out.t_ = r_ * o.t_ + t_;
    return out;
  }
  RigidTransform inverse() const {
    RigidTransform out;
    out.r_ = r_.transpose();
    out.t_ = -(r_.transpose() * t_);
    return out;
  }
  Mat4 matrix() const {
    Mat4 m = Mat4::Identity();
    m.topLeftCorner<3, 3>() = r_;
    m.topRightCorner<3, 1>() = t_;
    return m;
  }

 private:
  Mat3 r_;
  Vec3 t_;
};

struct CameraView {
  CameraIntrinsics intrinsics;
  RigidTransform pose;  // camera-to-world
};

// World-frame point on the camera ray through `pixel` at camera-axis depth `depth`.
inline Vec3 unproject(const Eigen::Vector2i& pixel, double depth, const CameraView& view) {
  if (!view.intrinsics.in_bounds(pixel.x(), pixel.y()))
    throw DomainError("unproject: pixel out of bounds");
  if (depth <= 0) throw DomainError("unproject: depth must be positive");
  const auto& k = view.intrinsics;
  Vec3 cam((pixel.x() - k.cx) / k.fx * depth, (pixel.y() - k.cy) / k.fy * depth, depth);
  return view.pose.apply(cam);
}

struct Projection {
  Vec2 pixel;
  double depth = 0;
  bool behind_camera = false;
};

inline Projection project(const Vec3& world, const CameraView& view) {
  Vec3 cam = view.pose.inverse().apply(world);
  Projection out;
  out.depth = cam.z();
  if (cam.z() <= 0) {
    out.behind_camera = true;
    return out;
  }
  const auto& k = view.intrinsics;
  out.pixel = Vec2(k.fx * cam.x() / cam.z() + k.cx, k.fy * cam.y() / cam.z() + k.cy);
  return out;
}

inline nlohmann::json camera_to_json(const CameraView& view) {
  nlohmann::json j;
  j["fx"] = view.intrinsics.fx;
  j["fy"] = view.intrinsics.fy;
  j["cx"] = view.intrinsics.cx;
  j["cy"] = view.intrinsics.cy;
  j["width"] = view.intrinsics.width;
  j["height"] = view.intrinsics.height;
  Mat4 m = view.pose.matrix();
  std::vector<double> pose;
  for (int r = 0; r < 4; ++r)
    for (int c = 0; c < 4; ++c) pose.push_back(m(r, c));
  j["pose"] = pose;
  return j;
}

inline CameraView camera_from_json(const nlohmann::json& j) {
  CameraView v;
  v.intrinsics = {j.at("fx"), j.at("fy"), j.at("cx"), j.at("cy"), j.at("width"), j.at("height")};
  v.intrinsics.validate();
  std::vector<double> pose = j.at("pose");
  Mat4 m;
  for (int r = 0; r < 4; ++r)
    for (int c = 0; c < 4; ++c) m(r, c) = pose[4 * r + c];
  v.pose = RigidTransform::from_matrix(m);
  return v;
}

}  // namespace cods
