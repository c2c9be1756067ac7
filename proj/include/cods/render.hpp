#pragma once

#include <cstdint>

#include "cods/geometry.hpp"
#include "cods/image.hpp"
#include "cods/scene.hpp"

namespace cods {

struct RGBDFrame {
  Image<Color> rgb;
  Image<float> depth;             // camera-axis depth in meters, 0 = invalid
  Image<int32_t> instance_mask;   // 0 = background/workspace
  Image<Eigen::Vector3f> world_coords;
  CameraView view;

  bool valid_depth(int x, int y) const { return depth.at(x, y) > 0; }
};

// Prebuilt acceleration + per-object inverse poses for texture lookup.
class SceneRaycaster {
 public:
  SceneRaycaster() = default;
  explicit SceneRaycaster(const Scene& scene, bool brute_force = false)
      : scene_(&scene), brute_force_(brute_force) {
    auto soup = scene_to_soup(scene);
    if (brute_force_)
      soup_ = std::move(soup);
    else
      bvh_ = Bvh(std::move(soup));
    for (const auto& obj : scene.objects) inv_poses_.push_back(obj.pose.inverse());
  }

  const Scene& scene() const { return *scene_; }

  RayHit cast(const Ray& ray, double max_t = std::numeric_limits<double>::infinity()) const {
    return brute_force_ ? raycast_brute_force(ray, soup_, max_t) : bvh_.raycast(ray, max_t);
  }

  const std::vector<SoupTriangle>& triangles() const {
    return brute_force_ ? soup_ : bvh_.triangles();
  }

  RGBDFrame render(const CameraView& view) const {
    const auto& k = view.intrinsics;
    RGBDFrame frame;
    frame.view = view;
    frame.rgb = Image<Color>(k.width, k.height, Color{0, 0, 0});
    frame.depth = Image<float>(k.width, k.height, 0.0f);
    frame.instance_mask = Image<int32_t>(k.width, k.height, 0);
    frame.world_coords = Image<Eigen::Vector3f>(k.width, k.height, Eigen::Vector3f::Zero());

    const Vec3 origin = view.pose.translation_vector();
    // fixed directional light plus ambient; enough for texture-randomized data
    const Vec3 light = Vec3(0.3, 0.2, 1.0).normalized();
    const double ambient = 0.35;

    for (int y = 0; y < k.height; ++y) {
      for (int x = 0; x < k.width; ++x) {
        Ray ray;
        ray.origin = origin;
        // dir has unit z in the camera frame, so hit t is camera-axis depth
        ray.dir = view.pose.rotate(Vec3((x - k.cx) / k.fx, (y - k.cy) / k.fy, 1.0));
        const RayHit hit = cast(ray);
        if (!hit.valid) continue;
        const SoupTriangle& tri = triangles()[hit.tri_index];
        const Vec3 p = ray.origin + hit.t * ray.dir;
        frame.depth.at(x, y) = static_cast<float>(hit.t);
        frame.instance_mask.at(x, y) = tri.instance_id;
        frame.world_coords.at(x, y) = p.cast<float>();

        const Texture& tex = tri.object_index < 0
                                 ? scene_->workspace.texture
                                 : scene_->objects[tri.object_index].model.texture;
        const Vec3 local =
            tri.object_index < 0 ? p : inv_poses_[tri.object_index].apply(p);
        const Color base = tex.sample(local);
        Vec3 n = (tri.b - tri.a).cross(tri.c - tri.a).normalized();
        if (n.dot(ray.dir) > 0) n = -n;  // face the camera
        const double shade = ambient + (1 - ambient) * std::max(0.0, n.dot(light));
        for (int c = 0; c < 3; ++c)
          frame.rgb.at(x, y)[c] = static_cast<uint8_t>(std::min(255.0, base[c] * shade));
      }
    }
    return frame;
  }

 private:
  const Scene* scene_ = nullptr;
  bool brute_force_ = false;
  Bvh bvh_;
  std::vector<SoupTriangle> soup_;
  std::vector<RigidTransform> inv_poses_;
};

inline RGBDFrame render_frame(const Scene& scene, const CameraView& view,
                              bool brute_force = false) {
  return SceneRaycaster(scene, brute_force).render(view);
}

}  // namespace cods
