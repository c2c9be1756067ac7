#include <catch2/catch_amalgamated.hpp>

#include "cods/bvh.hpp"
#include "cods/mesh.hpp"
#include "cods/random.hpp"

using namespace cods;

namespace {

std::vector<SoupTriangle> random_soup(Rng& rng, int n_tris) {
  std::vector<SoupTriangle> soup;
  for (int i = 0; i < n_tris; ++i) {
    auto rv = [&rng]() {
      return Vec3(rng.uniform(-1, 1), rng.uniform(-1, 1), rng.uniform(-1, 1));
    };
    const Vec3 a = rv();
    soup.push_back({a, a + 0.2 * rv(), a + 0.2 * rv(), 0, i + 1, i});
  }
  return soup;
}

}  // namespace

TEST_CASE("primitive meshes are sane") {
  for (const TriangleMesh& m :
       {make_box({0.1, 0.2, 0.3}), make_cylinder(0.05, 0.1), make_sphere(0.07),
        make_capsule(0.03, 0.05), make_superellipsoid({0.04, 0.05, 0.03}, 0.8, 1.2)}) {
    REQUIRE(!m.faces.empty());
    // no degenerate faces
    for (const auto& f : m.faces) {
      const Vec3 n = (m.vertices[f[1]] - m.vertices[f[0]])
                         .cross(m.vertices[f[2]] - m.vertices[f[0]]);
      CHECK(n.norm() > 1e-12);
    }
  }
  const TriangleMesh box = make_box({0.1, 0.2, 0.3});
  CHECK((box.max_corner() - Vec3(0.05, 0.1, 0.15)).norm() < 1e-12);
  CHECK((box.min_corner() + Vec3(0.05, 0.1, 0.15)).norm() < 1e-12);
}

TEST_CASE("point containment and distance on a box") {
  const TriangleMesh box = make_box({0.2, 0.2, 0.2});
  CHECK(point_inside_mesh({0, 0, 0}, box));
  CHECK(point_inside_mesh({0.09, 0.0, -0.05}, box));
  CHECK_FALSE(point_inside_mesh({0.11, 0, 0}, box));
  CHECK(point_mesh_distance({0.09, 0.0, 0.0}, box) == Catch::Approx(0.01));
  CHECK(point_mesh_distance({0.2, 0.0, 0.0}, box) == Catch::Approx(0.1));
}

TEST_CASE("mesh penetration depth of overlapping boxes") {
  const TriangleMesh a = make_box({0.1, 0.1, 0.1});
  TriangleMesh b = make_box({0.1, 0.1, 0.1});
  b.transform(RigidTransform::translation({0.08, 0, 0}));  // 2 cm overlap
  const auto samples = sample_surface(a, 0.01);
  const double depth = mesh_penetration_depth(a, b, samples);
  CHECK(depth == Catch::Approx(0.02).margin(1e-6));
  TriangleMesh c = make_box({0.1, 0.1, 0.1});
  c.transform(RigidTransform::translation({0.2, 0, 0}));
  CHECK(mesh_penetration_depth(a, c, samples) == 0.0);
}

TEST_CASE("surface samples respect spacing") {
  const TriangleMesh box = make_box({0.1, 0.1, 0.1});
  const auto samples = sample_surface(box, 0.02);
  CHECK(samples.size() > 100);
  // every sample lies on the surface
  for (const auto& p : samples) CHECK(point_mesh_distance(p, box) < 1e-9);
}

TEST_CASE("ray-sphere hit matches analytic intersection") {
  const double r = 0.5;
  Bvh bvh([&] {
    std::vector<SoupTriangle> soup;
    const TriangleMesh s = make_sphere(r, 64, 96);
    for (size_t i = 0; i < s.faces.size(); ++i) {
      const auto& f = s.faces[i];
      soup.push_back({s.vertices[f[0]], s.vertices[f[1]], s.vertices[f[2]], 0, 1, int(i)});
    }
    return soup;
  }());
  Ray ray{Vec3(0, 0, 2), Vec3(0, 0, -1)};
  const RayHit hit = bvh.raycast(ray);
  REQUIRE(hit.valid);
  CHECK(hit.t == Catch::Approx(2 - r).margin(2e-3));  // tessellation error
}

TEST_CASE("BVH equals brute force bit-exactly on random soups") {
  Rng rng(11);
  for (int trial = 0; trial < 20; ++trial) {
    const auto soup = random_soup(rng, rng.uniform_int(10, 500));
    Bvh bvh(soup);
    for (int i = 0; i < 200; ++i) {
      Ray ray{Vec3(rng.uniform(-2, 2), rng.uniform(-2, 2), rng.uniform(-2, 2)),
              Vec3(rng.uniform(-1, 1), rng.uniform(-1, 1), rng.uniform(-1, 1))};
      if (ray.dir.norm() < 1e-6) continue;
      const RayHit a = bvh.raycast(ray);
      const RayHit b = raycast_brute_force(ray, soup);
      REQUIRE(a.valid == b.valid);
      if (a.valid) {
        CHECK(a.t == b.t);  // bit-exact
        CHECK(a.tri_index == b.tri_index);
      }
    }
  }
}

TEST_CASE("occlusion query respects max range") {
  std::vector<SoupTriangle> soup = {{{-1, -1, 1}, {1, -1, 1}, {0, 1, 1}, 0, 1, 0}};
  Bvh bvh(soup);
  Ray ray{Vec3(0, 0, 0), Vec3(0, 0, 1)};
  CHECK(bvh.occluded(ray, 2.0));
  CHECK_FALSE(bvh.occluded(ray, 0.5));
}
