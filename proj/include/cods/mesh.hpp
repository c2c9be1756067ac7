#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <vector>

#include "cods/geometry.hpp"

namespace cods {

struct TriangleMesh {
  std::vector<Vec3> vertices;
  std::vector<std::array<int, 3>> faces;

  void transform(const RigidTransform& t) {
    for (auto& v : vertices) v = t.apply(v);
  }
  void append(const TriangleMesh& other) {
    const int base = static_cast<int>(vertices.size());
    vertices.insert(vertices.end(), other.vertices.begin(), other.vertices.end());
    for (auto f : other.faces)
      faces.push_back({f[0] + base, f[1] + base, f[2] + base});
  }
  Vec3 min_corner() const {
    Vec3 m = Vec3::Constant(1e30);
    for (const auto& v : vertices) m = m.cwiseMin(v);
    return m;
  }
  Vec3 max_corner() const {
    Vec3 m = Vec3::Constant(-1e30);
    for (const auto& v : vertices) m = m.cwiseMax(v);
    return m;
  }
  Vec3 centroid() const {
    Vec3 c = Vec3::Zero();
    for (const auto& v : vertices) c += v;
    return vertices.empty() ? c : Vec3(c / double(vertices.size()));
  }
};

// --- primitive builders (centered at origin, z up) ---

inline TriangleMesh make_box(const Vec3& extent) {
  TriangleMesh m;
  const Vec3 h = extent / 2.0;
  for (int i = 0; i < 8; ++i)
    m.vertices.emplace_back((i & 1) ? h.x() : -h.x(), (i & 2) ? h.y() : -h.y(),
                            (i & 4) ? h.z() : -h.z());
  // outward-wound faces, two per side
  const int f[12][3] = {{0, 2, 1}, {1, 2, 3}, {4, 5, 6}, {5, 7, 6}, {0, 1, 4}, {1, 5, 4},
                        {2, 6, 3}, {3, 6, 7}, {0, 4, 2}, {2, 4, 6}, {1, 3, 5}, {3, 7, 5}};
  for (auto& t : f) m.faces.push_back({t[0], t[1], t[2]});
  return m;
}

inline TriangleMesh make_cylinder(double radius, double height, int segments = 24) {
  TriangleMesh m;
  const double hz = height / 2.0;
  for (int i = 0; i < segments; ++i) {
    const double a = 2.0 * M_PI * i / segments;
    m.vertices.emplace_back(radius * std::cos(a), radius * std::sin(a), -hz);
    m.vertices.emplace_back(radius * std::cos(a), radius * std::sin(a), hz);
  }
  const int bot_c = static_cast<int>(m.vertices.size());
  m.vertices.emplace_back(0, 0, -hz);
  const int top_c = bot_c + 1;
  m.vertices.emplace_back(0, 0, hz);
  for (int i = 0; i < segments; ++i) {
    const int j = (i + 1) % segments;
    m.faces.push_back({2 * i, 2 * j, 2 * i + 1});
    m.faces.push_back({2 * i + 1, 2 * j, 2 * j + 1});
    m.faces.push_back({bot_c, 2 * j, 2 * i});
    m.faces.push_back({top_c, 2 * i + 1, 2 * j + 1});
  }
  return m;
}

inline TriangleMesh make_sphere(double radius, int rings = 12, int segments = 18) {
  TriangleMesh m;
  for (int r = 0; r <= rings; ++r) {
    const double phi = M_PI * r / rings;  // 0 = north pole (+z)
    for (int s = 0; s < segments; ++s) {
      const double th = 2.0 * M_PI * s / segments;
      m.vertices.emplace_back(radius * std::sin(phi) * std::cos(th),
                              radius * std::sin(phi) * std::sin(th), radius * std::cos(phi));
    }
  }
  auto idx = [&](int r, int s) { return r * segments + (s % segments); };
  for (int r = 0; r < rings; ++r)
    for (int s = 0; s < segments; ++s) {
      if (r > 0) m.faces.push_back({idx(r, s), idx(r, s + 1), idx(r + 1, s)});
      if (r < rings - 1) m.faces.push_back({idx(r, s + 1), idx(r + 1, s + 1), idx(r + 1, s)});
    }
  return m;
}

inline TriangleMesh make_capsule(double radius, double cyl_height, int rings = 8,
                                 int segments = 18) {
  // Sphere stretched along z: move upper-hemisphere vertices up, lower down.
  TriangleMesh m = make_sphere(radius, 2 * rings, segments);
  for (auto& v : m.vertices) v.z() += (v.z() >= 0 ? 1.0 : -1.0) * cyl_height / 2.0;
  return m;
}

// |x/a|^(2/e2) style superellipsoid, tessellated from spherical parameters.
inline TriangleMesh make_superellipsoid(const Vec3& half_extent, double e1, double e2,
                                        int rings = 14, int segments = 20) {
  auto spow = [](double x, double p) {
    return (x < 0 ? -1.0 : 1.0) * std::pow(std::abs(x), p);
  };
  TriangleMesh m = make_sphere(1.0, rings, segments);
  for (auto& v : m.vertices) {
    const double phi = std::acos(std::clamp(v.z(), -1.0, 1.0)) - M_PI / 2.0;  // latitude
    const double th = std::atan2(v.y(), v.x());
    v = Vec3(half_extent.x() * spow(std::cos(phi), e1) * spow(std::cos(th), e2),
             half_extent.y() * spow(std::cos(phi), e1) * spow(std::sin(th), e2),
             half_extent.z() * spow(-std::sin(phi), e1));
  }
  return m;
}

// --- queries used by the settle procedure and its oracle ---

inline double point_triangle_distance(const Vec3& p, const Vec3& a, const Vec3& b, const Vec3& c) {
  // Ericson, Real-Time Collision Detection, closest point on triangle.
  const Vec3 ab = b - a, ac = c - a, ap = p - a;
  const double d1 = ab.dot(ap), d2 = ac.dot(ap);
  if (d1 <= 0 && d2 <= 0) return (p - a).norm();
  const Vec3 bp = p - b;
  const double d3 = ab.dot(bp), d4 = ac.dot(bp);
  if (d3 >= 0 && d4 <= d3) return (p - b).norm();
  const double vc = d1 * d4 - d3 * d2;
  if (vc <= 0 && d1 >= 0 && d3 <= 0) return (p - (a + ab * (d1 / (d1 - d3)))).norm();
  const Vec3 cp = p - c;
  const double d5 = ab.dot(cp), d6 = ac.dot(cp);
  if (d6 >= 0 && d5 <= d6) return (p - c).norm();
  const double vb = d5 * d2 - d1 * d6;
  if (vb <= 0 && d2 >= 0 && d6 <= 0) return (p - (a + ac * (d2 / (d2 - d6)))).norm();
  const double va = d3 * d6 - d5 * d4;
  if (va <= 0 && (d4 - d3) >= 0 && (d5 - d6) >= 0) {
    const double w = (d4 - d3) / ((d4 - d3) + (d5 - d6));
    return (p - (b + (c - b) * w)).norm();
  }
  const double denom = 1.0 / (va + vb + vc);
  return (p - (a + ab * (vb * denom) + ac * (vc * denom))).norm();
}

inline double point_mesh_distance(const Vec3& p, const TriangleMesh& m) {
  double best = 1e30;
  for (const auto& f : m.faces)
    best = std::min(best, point_triangle_distance(p, m.vertices[f[0]], m.vertices[f[1]],
                                                  m.vertices[f[2]]));
  return best;
}

// Ray parity test along +x. Good enough for the closed primitive meshes here.
inline bool point_inside_mesh(const Vec3& p, const TriangleMesh& m) {
  int crossings = 0;
  for (const auto& f : m.faces) {
    const Vec3 &a = m.vertices[f[0]], &b = m.vertices[f[1]], &c = m.vertices[f[2]];
    const Vec3 e1 = b - a, e2 = c - a;
    const Vec3 dir(1, 0, 0);
    const Vec3 pv = dir.cross(e2);
    const double det = e1.dot(pv);
    if (std::abs(det) < 1e-14) continue;
    const double inv = 1.0 / det;
    const Vec3 tv = p - a;
    const double u = tv.dot(pv) * inv;
    if (u < 0 || u > 1) continue;
    const Vec3 qv = tv.cross(e1);
    const double v = dir.dot(qv) * inv;
    if (v < 0 || u + v > 1) continue;
    const double t = e2.dot(qv) * inv;
    if (t > 1e-12) ++crossings;
  }
  return (crossings % 2) == 1;
}

// Penetration of `a` into `b`: deepest surface sample of `a` inside `b`.
inline double mesh_penetration_depth(const TriangleMesh& a, const TriangleMesh& b,
                                     const std::vector<Vec3>& a_samples) {
  const Vec3 blo = b.min_corner(), bhi = b.max_corner();
  double depth = 0;
  for (const auto& p : a_samples) {
    if ((p.array() < blo.array()).any() || (p.array() > bhi.array()).any()) continue;
    if (point_inside_mesh(p, b)) depth = std::max(depth, point_mesh_distance(p, b));
  }
  return depth;
}

// Surface points with spacing bounded by `max_spacing`: vertices plus
// recursively subdivided face interiors.
inline std::vector<Vec3> sample_surface(const TriangleMesh& m, double max_spacing) {
  std::vector<Vec3> out(m.vertices);
  const double limit2 = max_spacing * max_spacing;
  std::vector<std::array<Vec3, 3>> stack;
  for (const auto& f : m.faces)
    stack.push_back({m.vertices[f[0]], m.vertices[f[1]], m.vertices[f[2]]});
  while (!stack.empty()) {
    auto [a, b, c] = stack.back();
    stack.pop_back();
    if ((a - b).squaredNorm() <= limit2 && (b - c).squaredNorm() <= limit2 &&
        (c - a).squaredNorm() <= limit2)
      continue;
    const Vec3 ab = (a + b) / 2, bc = (b + c) / 2, ca = (c + a) / 2;
    out.insert(out.end(), {ab, bc, ca});
    stack.push_back({a, ab, ca});
    stack.push_back({ab, b, bc});
    stack.push_back({ca, bc, c});
    stack.push_back({ab, bc, ca});
  }
  return out;
}

}  // namespace cods
