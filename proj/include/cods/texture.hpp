#pragma once

#include <cmath>
#include <cstdint>

#include "cods/geometry.hpp"
#include "cods/image.hpp"
#include "cods/random.hpp"

namespace cods {

// Procedural texture evaluated at object-local 3D position. Kinds match the
// randomization palette: solid color, two-color checker, value noise.
struct Texture {
  enum class Kind { solid, checker, noise };
  Kind kind = Kind::solid;
  Color color_a{180, 180, 180};
  Color color_b{60, 60, 60};
  double cell = 0.02;      // checker cell / noise feature size (m)
  uint64_t noise_seed = 0;

  static Texture random(Rng& rng) {
    Texture t;
    auto rand_color = [&rng]() -> Color {
      return {static_cast<uint8_t>(rng.uniform_int(20, 235)),
              static_cast<uint8_t>(rng.uniform_int(20, 235)),
              static_cast<uint8_t>(rng.uniform_int(20, 235))};
    };
    const int k = rng.uniform_int(0, 2);
    t.kind = static_cast<Kind>(k);
    t.color_a = rand_color();
    t.color_b = rand_color();
    t.cell = rng.uniform(0.01, 0.05);
    t.noise_seed = rng.next_u64();
    return t;
  }

  Color sample(const Vec3& local) const {
    switch (kind) {
      case Kind::solid:
        return color_a;
      case Kind::checker: {
        const int p = static_cast<int>(std::floor(local.x() / cell)) +
                      static_cast<int>(std::floor(local.y() / cell)) +
                      static_cast<int>(std::floor(local.z() / cell));
        return (p & 1) ? color_b : color_a;
      }
      case Kind::noise: {
        const double w = value_noise(local / cell);
        Color c;
        for (int i = 0; i < 3; ++i)
          c[i] = static_cast<uint8_t>(color_a[i] + w * (color_b[i] - color_a[i]));
        return c;
      }
    }
    return color_a;
  }

 private:
  double lattice(int64_t x, int64_t y, int64_t z) const {
    uint64_t h = Rng::splitmix(noise_seed ^ (uint64_t(x) * 0x8da6b343ull) ^
                               (uint64_t(y) * 0xd8163841ull) ^ (uint64_t(z) * 0xcb1ab31full));
    return double(h >> 11) / double(1ull << 53);
  }
  double value_noise(const Vec3& p) const {
    const int64_t xi = static_cast<int64_t>(std::floor(p.x()));
    const int64_t yi = static_cast<int64_t>(std::floor(p.y()));
    const int64_t zi = static_cast<int64_t>(std::floor(p.z()));
    const double fx = p.x() - xi, fy = p.y() - yi, fz = p.z() - zi;
    auto smooth = [](double t) { return t * t * (3 - 2 * t); };
    const double sx = smooth(fx), sy = smooth(fy), sz = smooth(fz);
    double acc = 0;
    for (int dz = 0; dz < 2; ++dz)
      for (int dy = 0; dy < 2; ++dy)
        for (int dx = 0; dx < 2; ++dx) {
          const double w = (dx ? sx : 1 - sx) * (dy ? sy : 1 - sy) * (dz ? sz : 1 - sz);
          acc += w * lattice(xi + dx, yi + dy, zi + dz);
        }
    return acc;
  }
};

}  // namespace cods
