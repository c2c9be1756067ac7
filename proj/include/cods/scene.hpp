#pragma once

#include <optional>
#include <string>
#include <vector>

#include "cods/bvh.hpp"
#include "cods/mesh.hpp"
#include "cods/random.hpp"
#include "cods/texture.hpp"

namespace cods {

enum class ShapeFamily { box, cylinder, sphere, capsule, superellipsoid, union2 };
enum class Split { train, test, novel };

inline const char* split_name(Split s) {
  switch (s) {
    case Split::train: return "train";
    case Split::test: return "test";
    case Split::novel: return "novel";
  }
  return "?";
}

inline std::optional<Split> split_from_name(const std::string& s) {
  if (s == "train") return Split::train;
  if (s == "test") return Split::test;
  if (s == "novel") return Split::novel;
  return std::nullopt;
}

struct ObjectModel {
  TriangleMesh mesh;  // local frame, origin at mesh center
  Texture texture;
  int instance_id = 0;
  ShapeFamily family = ShapeFamily::box;
  Vec3 canonical_extent = Vec3::Zero();
};

enum class WorkspaceKind { table, basket };

struct Workspace {
  WorkspaceKind kind = WorkspaceKind::table;
  Vec2 extent{0.4, 0.4};      // interior footprint (m)
  double wall_height = 0.10;  // basket only
  double wall_thickness = 0.01;
  Texture texture;

  TriangleMesh build_mesh() const {
    TriangleMesh m;
    const double t = wall_thickness;
    auto add_box = [&m](const Vec3& ext, const Vec3& center) {
      TriangleMesh b = make_box(ext);
      b.transform(RigidTransform::translation(center));
      m.append(b);
    };
    // floor top surface at z = 0, slightly larger than the interior
    add_box({extent.x() + 4 * t, extent.y() + 4 * t, t}, {0, 0, -t / 2});
    if (kind == WorkspaceKind::basket) {
      const double wx = extent.x() / 2 + t / 2, wy = extent.y() / 2 + t / 2;
      add_box({t, extent.y() + 2 * t, wall_height}, {+wx, 0, wall_height / 2});
      add_box({t, extent.y() + 2 * t, wall_height}, {-wx, 0, wall_height / 2});
      add_box({extent.x() + 2 * t, t, wall_height}, {0, +wy, wall_height / 2});
      add_box({extent.x() + 2 * t, t, wall_height}, {0, -wy, wall_height / 2});
    }
    return m;
  }
};

struct SceneSpec {
  int object_count = 5;
  uint64_t rng_seed = 0;
  Split split = Split::train;
  Workspace workspace;
  int max_placement_retries = 50;
};

struct PosedObject {
  ObjectModel model;
  RigidTransform pose;

  TriangleMesh world_mesh() const {
    TriangleMesh m = model.mesh;
    m.transform(pose);
    return m;
  }
};

struct Scene {
  std::vector<PosedObject> objects;
  Workspace workspace;
  bool overflow_warning = false;
};

// --- procedural object library with split-disjoint parameter ranges ---

struct SplitRanges {
  std::vector<ShapeFamily> families;
  double size_lo, size_hi;  // per-axis extent range (m)
};

inline SplitRanges split_ranges(Split split) {
  switch (split) {
    case Split::train:
      return {{ShapeFamily::box, ShapeFamily::cylinder, ShapeFamily::sphere}, 0.030, 0.065};
    case Split::test:
      return {{ShapeFamily::box, ShapeFamily::cylinder, ShapeFamily::sphere, ShapeFamily::capsule},
              0.068, 0.100};
    case Split::novel:
      // family-disjoint from train/test
      return {{ShapeFamily::superellipsoid, ShapeFamily::union2}, 0.030, 0.150};
  }
  return {};
}

// Families overlapping between splits must have disjoint size ranges.
inline bool splits_disjoint() {
  const Split all[] = {Split::train, Split::test, Split::novel};
  for (int i = 0; i < 3; ++i)
    for (int j = i + 1; j < 3; ++j) {
      const auto a = split_ranges(all[i]), b = split_ranges(all[j]);
      for (auto fa : a.families)
        for (auto fb : b.families)
          if (fa == fb && a.size_lo <= b.size_hi && b.size_lo <= a.size_hi) return false;
    }
  return true;
}

class ObjectLibrary {
 public:
  ObjectModel sample(Split split, Rng& rng, int instance_id) const {
    const SplitRanges r = split_ranges(split);
    ObjectModel obj;
    obj.instance_id = instance_id;
    obj.family = r.families[rng.uniform_int(0, static_cast<int>(r.families.size()) - 1)];
    obj.texture = Texture::random(rng);
    auto dim = [&]() { return rng.uniform(r.size_lo, r.size_hi); };
    switch (obj.family) {
      case ShapeFamily::box: {
        const Vec3 e(dim(), dim(), dim());
        obj.mesh = make_box(e);
        obj.canonical_extent = e;
        break;
      }
      case ShapeFamily::cylinder: {
        const double d = dim(), h = dim();
        obj.mesh = make_cylinder(d / 2, h);
        obj.canonical_extent = Vec3(d, d, h);
        break;
      }
      case ShapeFamily::sphere: {
        const double d = dim();
        obj.mesh = make_sphere(d / 2);
        obj.canonical_extent = Vec3(d, d, d);
        break;
      }
      case ShapeFamily::capsule: {
        const double d = dim();
        const double total = std::min(0.15, d * rng.uniform(1.3, 1.8));
        obj.mesh = make_capsule(d / 2, total - d);
        obj.canonical_extent = Vec3(d, d, total);
        break;
      }
      case ShapeFamily::superellipsoid: {
        const Vec3 e(dim(), dim(), dim());
        obj.mesh = make_superellipsoid(e / 2, rng.uniform(0.3, 1.6), rng.uniform(0.3, 1.6));
        obj.canonical_extent = e;
        break;
      }
      case ShapeFamily::union2: {
        const Vec3 e1v(dim(), dim(), dim());
        TriangleMesh a = make_box(e1v);
        const double d = dim();
        TriangleMesh b = make_cylinder(d / 2, std::min(0.15, d * 1.2));
        b.transform(RigidTransform::translation(
            Vec3(rng.uniform(-0.2, 0.2) * e1v.x(), rng.uniform(-0.2, 0.2) * e1v.y(),
                 e1v.z() / 2)));
        a.append(b);
        Vec3 lo = a.min_corner(), hi = a.max_corner();
        a.transform(RigidTransform::translation(-(lo + hi) / 2));
        // keep the union inside the suction-compatible extent cap
        const double scale = std::min(1.0, 0.15 / (hi - lo).maxCoeff());
        if (scale < 1.0)
          for (auto& v : a.vertices) v *= scale;
        obj.mesh = a;
        obj.canonical_extent = (hi - lo) * scale;
        break;
      }
    }
    return obj;
  }
};

// --- settle procedure: heightmap drop, no dynamics ---

class Heightmap {
 public:
  Heightmap(const Vec2& extent, double margin, double cell = 0.002)
      : cell_(cell),
        origin_(-extent.x() / 2 - margin, -extent.y() / 2 - margin),
        nx_(static_cast<int>((extent.x() + 2 * margin) / cell) + 1),
        ny_(static_cast<int>((extent.y() + 2 * margin) / cell) + 1),
        h_(nx_, ny_, 0.0f) {}

  double at(double x, double y) const {
    const int ix = static_cast<int>(std::floor((x - origin_.x()) / cell_));
    const int iy = static_cast<int>(std::floor((y - origin_.y()) / cell_));
    if (!h_.in_bounds(ix, iy)) return 0.0;
    return h_.at(ix, iy);
  }

  void add_mesh(const TriangleMesh& m) {
    for (const auto& f : m.faces) {
      const Vec3 &a = m.vertices[f[0]], &b = m.vertices[f[1]], &c = m.vertices[f[2]];
      for (const Vec3* v : {&a, &b, &c}) bump(v->x(), v->y(), v->z());
      const double xlo = std::min({a.x(), b.x(), c.x()}), xhi = std::max({a.x(), b.x(), c.x()});
      const double ylo = std::min({a.y(), b.y(), c.y()}), yhi = std::max({a.y(), b.y(), c.y()});
      for (double x = std::floor(xlo / cell_) * cell_; x <= xhi; x += cell_)
        for (double y = std::floor(ylo / cell_) * cell_; y <= yhi; y += cell_) {
          // barycentric in the xy projection
          const double d = (b.y() - c.y()) * (a.x() - c.x()) + (c.x() - b.x()) * (a.y() - c.y());
          if (std::abs(d) < 1e-14) continue;
          const double w0 = ((b.y() - c.y()) * (x - c.x()) + (c.x() - b.x()) * (y - c.y())) / d;
          const double w1 = ((c.y() - a.y()) * (x - c.x()) + (a.x() - c.x()) * (y - c.y())) / d;
          const double w2 = 1 - w0 - w1;
          if (w0 < -1e-9 || w1 < -1e-9 || w2 < -1e-9) continue;
          bump(x, y, w0 * a.z() + w1 * b.z() + w2 * c.z());
        }
    }
  }

 private:
  void bump(double x, double y, double z) {
    const int ix = static_cast<int>(std::floor((x - origin_.x()) / cell_));
    const int iy = static_cast<int>(std::floor((y - origin_.y()) / cell_));
    if (h_.in_bounds(ix, iy) && z > h_.at(ix, iy)) h_.at(ix, iy) = static_cast<float>(z);
  }

  double cell_;
  Vec2 origin_;
  int nx_, ny_;
  Image<float> h_;
};

namespace detail {

inline std::vector<RigidTransform> stable_orientations(ShapeFamily family) {
  const Vec3 ex(1, 0, 0), ey(0, 1, 0);
  std::vector<RigidTransform> face_down = {
      RigidTransform::identity(),
      RigidTransform::rotation(ex, M_PI / 2),
      RigidTransform::rotation(ex, -M_PI / 2),
      RigidTransform::rotation(ex, M_PI),
      RigidTransform::rotation(ey, M_PI / 2),
      RigidTransform::rotation(ey, -M_PI / 2),
  };
  switch (family) {
    case ShapeFamily::sphere:
      return {RigidTransform::identity()};
    case ShapeFamily::cylinder:
      return {RigidTransform::identity(), RigidTransform::rotation(ex, M_PI),
              RigidTransform::rotation(ex, M_PI / 2)};
    case ShapeFamily::capsule:
      return {RigidTransform::rotation(ex, M_PI / 2)};
    default:
      return face_down;
  }
}

// Lowest z placing the rotated samples on/above the heightmap.
inline double drop_height(const std::vector<Vec3>& samples, const Mat3& rot, double x, double y,
                          const Heightmap& hm) {
  double z = -1e30;
  for (const auto& s : samples) {
    const Vec3 p = rot * s;
    z = std::max(z, hm.at(x + p.x(), y + p.y()) - p.z());
  }
  return z;
}

}  // namespace detail

inline Scene build_scene(const SceneSpec& spec, const ObjectLibrary& library) {
  Rng rng(spec.rng_seed);
  Scene scene;
  scene.workspace = spec.workspace;
  scene.workspace.texture = Texture::random(rng);

  Heightmap hm(spec.workspace.extent, /*margin=*/0.05);
  const double max_pile_height = 0.30;

  for (int i = 0; i < spec.object_count; ++i) {
    ObjectModel obj = library.sample(spec.split, rng, i + 1);
    const auto samples = sample_surface(obj.mesh, 0.004);
    const auto orientations = detail::stable_orientations(obj.family);
    bool placed = false;
    for (int attempt = 0; attempt < spec.max_placement_retries && !placed; ++attempt) {
      const double rad = obj.canonical_extent.maxCoeff() / 2;
      const double hx = std::max(0.01, spec.workspace.extent.x() / 2 - rad);
      const double hy = std::max(0.01, spec.workspace.extent.y() / 2 - rad);
      const double x = rng.uniform(-hx, hx), y = rng.uniform(-hy, hy);
      const double yaw = rng.uniform(0, 2 * M_PI);
      RigidTransform orient =
          RigidTransform::rotation(Vec3(0, 0, 1), yaw) *
          orientations[rng.uniform_int(0, static_cast<int>(orientations.size()) - 1)];
      // local relaxation: accept a small tilt only if it lowers the rest height
      double best_z = detail::drop_height(samples, orient.rotation_matrix(), x, y, hm);
      for (int k = 0; k < 4; ++k) {
        const double ang = rng.uniform(0, M_PI / 6);
        const double dir = rng.uniform(0, 2 * M_PI);
        RigidTransform tilted =
            RigidTransform::rotation(Vec3(std::cos(dir), std::sin(dir), 0), ang) * orient;
        const double z = detail::drop_height(samples, tilted.rotation_matrix(), x, y, hm);
        if (z < best_z - 1e-6) {
          best_z = z;
          orient = tilted;
        }
      }
      const RigidTransform pose = RigidTransform::translation(Vec3(x, y, best_z)) * orient;
      TriangleMesh world = obj.mesh;
      world.transform(pose);
      const Vec3 lo = world.min_corner(), hi = world.max_corner();
      const double wx = spec.workspace.extent.x() / 2, wy = spec.workspace.extent.y() / 2;
      if (hi.z() > max_pile_height) continue;
      if (lo.x() < -wx || hi.x() > wx || lo.y() < -wy || hi.y() > wy) continue;
      hm.add_mesh(world);
      scene.objects.push_back({std::move(obj), pose});
      placed = true;
    }
    if (!placed) {
      scene.overflow_warning = true;
      break;
    }
  }
  return scene;
}

inline void randomize_textures(Scene& scene, Rng& rng) {
  scene.workspace.texture = Texture::random(rng);
  for (auto& obj : scene.objects) obj.model.texture = Texture::random(rng);
}

// Flatten a scene for raycasting. Triangle order is workspace first, then
// objects in placement order, so it is deterministic.
inline std::vector<SoupTriangle> scene_to_soup(const Scene& scene) {
  std::vector<SoupTriangle> soup;
  auto add = [&soup](const TriangleMesh& m, int object_index, int instance_id) {
    for (int fi = 0; fi < static_cast<int>(m.faces.size()); ++fi) {
      const auto& f = m.faces[fi];
      soup.push_back({m.vertices[f[0]], m.vertices[f[1]], m.vertices[f[2]], object_index,
                      instance_id, fi});
    }
  };
  add(scene.workspace.build_mesh(), -1, 0);
  for (int i = 0; i < static_cast<int>(scene.objects.size()); ++i)
    add(scene.objects[i].world_mesh(), i, scene.objects[i].model.instance_id);
  return soup;
}

}  // namespace cods
