#pragma once

#include <algorithm>
#include <cstdint>
#include <limits>
#include <numeric>
#include <vector>

#include "cods/mesh.hpp"

namespace cods {

struct Ray {
  Vec3 origin;
  Vec3 dir;  // need not be unit length; hit t is in units of |dir|
};

struct RayHit {
  bool valid = false;
  double t = std::numeric_limits<double>::infinity();
  int tri_index = -1;  // index into the soup
  double u = 0, v = 0;  // barycentric at hit
};

// One triangle of a flattened scene, tagged with its source object.
struct SoupTriangle {
  Vec3 a, b, c;
  int object_index = -1;   // scene object slot, -1 = workspace
  int instance_id = 0;     // 0 = workspace/background
  int face_index = 0;      // face id within the source mesh
};

inline bool intersect_triangle(const Ray& ray, const Vec3& a, const Vec3& b, const Vec3& c,
                               double& t, double& u, double& v) {
  // Moller-Trumbore
  const Vec3 e1 = b - a, e2 = c - a;
  const Vec3 pv = ray.dir.cross(e2);
  const double det = e1.dot(pv);
  if (std::abs(det) < 1e-14) return false;
  const double inv = 1.0 / det;
  const Vec3 tv = ray.origin - a;
  // edge-inclusive so rays on shared edges of a quad cannot slip between
  // its two triangles
  constexpr double kEdgeTol = 1e-12;
  u = tv.dot(pv) * inv;
  if (u < -kEdgeTol || u > 1 + kEdgeTol) return false;
  const Vec3 qv = tv.cross(e1);
  v = ray.dir.dot(qv) * inv;
  if (v < -kEdgeTol || u + v > 1 + kEdgeTol) return false;
  t = e2.dot(qv) * inv;
  return t > 1e-9;
}

// Nearest-hit selection shared by BVH and brute force so both agree bit-exactly:
// smaller t wins, equal t broken by lower triangle index.
inline void consider_hit(RayHit& best, double t, double u, double v, int index) {
  if (t < best.t || (t == best.t && index < best.tri_index)) {
    best.valid = true;
    best.t = t;
    best.u = u;
    best.v = v;
    best.tri_index = index;
  }
}

inline RayHit raycast_brute_force(const Ray& ray, const std::vector<SoupTriangle>& tris,
                                  double max_t = std::numeric_limits<double>::infinity()) {
  RayHit best;
  best.t = max_t;
  best.tri_index = std::numeric_limits<int>::max();
  for (int i = 0; i < static_cast<int>(tris.size()); ++i) {
    double t, u, v;
    if (intersect_triangle(ray, tris[i].a, tris[i].b, tris[i].c, t, u, v))
      consider_hit(best, t, u, v, i);
  }
  if (!best.valid) best.tri_index = -1;
  return best;
}

// Median-split BVH over triangle centroids, leaf size 8.
class Bvh {
 public:
  Bvh() = default;
  explicit Bvh(std::vector<SoupTriangle> tris) : tris_(std::move(tris)) { build(); }

  const std::vector<SoupTriangle>& triangles() const { return tris_; }
  bool empty() const { return tris_.empty(); }

  RayHit raycast(const Ray& ray,
                 double max_t = std::numeric_limits<double>::infinity()) const {
    RayHit best;
    best.t = max_t;
    best.tri_index = std::numeric_limits<int>::max();
    if (!nodes_.empty()) {
      const Vec3 inv_dir = ray.dir.cwiseInverse();
      traverse(0, ray, inv_dir, best);
    }
    if (!best.valid) best.tri_index = -1;
    return best;
  }

  // True if anything lies within `max_t` along the ray.
  bool occluded(const Ray& ray, double max_t) const { return raycast(ray, max_t).valid; }

 private:
  struct Node {
    Vec3 lo, hi;
    int left = -1, right = -1;   // child node indices, -1 for leaf
    int first = 0, count = 0;    // leaf triangle range in order_
  };

  void build() {
    order_.resize(tris_.size());
    std::iota(order_.begin(), order_.end(), 0);
    centroids_.reserve(tris_.size());
    for (const auto& t : tris_) centroids_.push_back((t.a + t.b + t.c) / 3.0);
    if (!tris_.empty()) build_node(0, static_cast<int>(tris_.size()));
    centroids_.clear();
  }

  int build_node(int first, int count) {
    Node node;
    node.lo = Vec3::Constant(1e30);
    node.hi = Vec3::Constant(-1e30);
    for (int i = first; i < first + count; ++i) {
      const auto& t = tris_[order_[i]];
      node.lo = node.lo.cwiseMin(t.a).cwiseMin(t.b).cwiseMin(t.c);
      node.hi = node.hi.cwiseMax(t.a).cwiseMax(t.b).cwiseMax(t.c);
    }
    const int index = static_cast<int>(nodes_.size());
    nodes_.push_back(node);
    if (count <= 8) {
      nodes_[index].first = first;
      nodes_[index].count = count;
      return index;
    }
    int axis;
    (node.hi - node.lo).maxCoeff(&axis);
    const int mid = first + count / 2;
    std::nth_element(order_.begin() + first, order_.begin() + mid,
                     order_.begin() + first + count, [&](int a, int b) {
                       const double ca = centroids_[a][axis], cb = centroids_[b][axis];
                       return ca < cb || (ca == cb && a < b);
                     });
    const int left = build_node(first, count / 2);
    const int right = build_node(mid, count - count / 2);
    nodes_[index].left = left;
    nodes_[index].right = right;
    return index;
  }

  bool hit_box(const Node& n, const Ray& ray, const Vec3& inv_dir, double max_t) const {
    double t0 = 0, t1 = max_t;
    for (int a = 0; a < 3; ++a) {
      double ta = (n.lo[a] - ray.origin[a]) * inv_dir[a];
      double tb = (n.hi[a] - ray.origin[a]) * inv_dir[a];
      if (ta > tb) std::swap(ta, tb);
      t0 = std::max(t0, ta);
      t1 = std::min(t1, tb);
      if (t0 > t1) return false;
    }
    return true;
  }

  void traverse(int node_index, const Ray& ray, const Vec3& inv_dir, RayHit& best) const {
    const Node& n = nodes_[node_index];
    if (!hit_box(n, ray, inv_dir, best.t)) return;
    if (n.left < 0) {
      for (int i = n.first; i < n.first + n.count; ++i) {
        const int tri = order_[i];
        double t, u, v;
        if (intersect_triangle(ray, tris_[tri].a, tris_[tri].b, tris_[tri].c, t, u, v))
          consider_hit(best, t, u, v, tri);
      }
      return;
    }
    traverse(n.left, ray, inv_dir, best);
    traverse(n.right, ray, inv_dir, best);
  }

  std::vector<SoupTriangle> tris_;
  std::vector<int> order_;
  std::vector<Node> nodes_;
  std::vector<Vec3> centroids_;
};

}  // namespace cods
