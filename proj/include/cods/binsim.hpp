#pragma once

#include <fstream>

#include "cods/dataset.hpp"
#include "cods/normals.hpp"

namespace cods {

// Geometric suction model: a circular pad probed by a center ray plus a ring
// of sensor rays. A seal forms only if every sensor lands on the same object
// within the pad's compliance range.
struct SuctionPadModel {
  double pad_radius = 0.015;
  int ring_sensors = 6;         // plus the center ray
  double seal_range = 0.007;    // max surface deviation the pad can absorb
  double standoff = 0.001;      // sensor rays start this far off the surface
  double clearance_radius = 0.04;  // tool collision proxy: cylinder around approach
  double approach_length = 0.15;   // swept segment length above the contact
  double max_tilt_deg = 60;        // approach axis clipped to this tilt from vertical
};

enum class PickOutcome { success, partial_seal, miss, collision };

inline const char* pick_outcome_name(PickOutcome o) {
  switch (o) {
    case PickOutcome::success: return "success";
    case PickOutcome::partial_seal: return "partial_seal";
    case PickOutcome::miss: return "miss";
    case PickOutcome::collision: return "collision";
  }
  return "?";
}

// Clip an approach axis to at most max_tilt from vertical, preserving its
// azimuth. `normal` must point away from the surface (upward-ish).
inline Vec3 clip_approach_axis(const Vec3& normal, double max_tilt_deg) {
  const Vec3 up(0, 0, 1);
  Vec3 n = normal.normalized();
  const double max_tilt = max_tilt_deg * M_PI / 180.0;
  const double cos_tilt = std::clamp(n.dot(up), -1.0, 1.0);
  if (std::acos(cos_tilt) <= max_tilt) return n;
  Vec3 h = n - cos_tilt * up;  // horizontal component carries the azimuth
  if (h.norm() < 1e-12) return up;
  h.normalize();
  return std::cos(max_tilt) * up + std::sin(max_tilt) * h;
}

struct SuctionProbe {
  PickOutcome outcome = PickOutcome::miss;
  int target_instance = 0;     // instance id under the center ray, 0 = none
  Vec3 contact = Vec3::Zero();
  Vec3 axis = Vec3::Zero();    // clipped approach axis (away from surface)
  int sealed_sensors = 0;
};

// Probe a suction attempt at a world contact point. Does not test collisions.
inline SuctionProbe probe_suction(const SceneRaycaster& caster, const Vec3& contact,
                                  const Vec3& surface_normal, const SuctionPadModel& pad) {
  SuctionProbe probe;
  probe.contact = contact;
  probe.axis = clip_approach_axis(surface_normal, pad.max_tilt_deg);

  // orthonormal basis in the pad plane, deterministic for a given axis
  Vec3 u = probe.axis.cross(Vec3(1, 0, 0));
  if (u.norm() < 1e-6) u = probe.axis.cross(Vec3(0, 1, 0));
  u.normalize();
  const Vec3 v = probe.axis.cross(u);

  const double max_t = pad.standoff + pad.seal_range;
  auto sense = [&](const Vec3& offset) -> int {
    Ray ray;
    ray.origin = contact + pad.standoff * probe.axis + offset;
    ray.dir = -probe.axis;
    const RayHit hit = caster.cast(ray, max_t);
    if (!hit.valid) return -1;
    return caster.triangles()[hit.tri_index].instance_id;
  };

  const int center = sense(Vec3::Zero());
  probe.target_instance = std::max(0, center);
  if (center <= 0) {
    probe.outcome = PickOutcome::miss;  // nothing, or the workspace, under the pad
    return probe;
  }
  probe.sealed_sensors = 1;
  for (int i = 0; i < pad.ring_sensors; ++i) {
    const double ang = 2 * M_PI * i / pad.ring_sensors;
    const Vec3 offset = pad.pad_radius * (std::cos(ang) * u + std::sin(ang) * v);
    if (sense(offset) == center) ++probe.sealed_sensors;
  }
  probe.outcome = probe.sealed_sensors == 1 + pad.ring_sensors ? PickOutcome::success
                                                               : PickOutcome::partial_seal;
  return probe;
}

namespace detail {

inline double point_aabb_distance(const Vec3& p, const Vec3& lo, const Vec3& hi) {
  Vec3 d = Vec3::Zero();
  for (int i = 0; i < 3; ++i)
    d[i] = std::max({lo[i] - p[i], 0.0, p[i] - hi[i]});
  return d.norm();
}

}  // namespace detail

// Axis-aligned bounds of the basket walls, for the tool-clearance proxy.
inline std::vector<std::pair<Vec3, Vec3>> wall_aabbs(const Workspace& ws) {
  if (ws.kind != WorkspaceKind::basket) return {};
  const double t = ws.wall_thickness, h = ws.wall_height;
  const double wx = ws.extent.x() / 2, wy = ws.extent.y() / 2;
  return {{{+wx, -wy - t, 0}, {+wx + t, +wy + t, h}},
          {{-wx - t, -wy - t, 0}, {-wx, +wy + t, h}},
          {{-wx - t, +wy, 0}, {+wx + t, +wy + t, h}},
          {{-wx - t, -wy - t, 0}, {+wx + t, -wy, h}}};
}

// Collision proxy: the tool is a cylinder of `clearance_radius` around the
// approach segment; it collides if any wall comes closer than that radius.
// The segment is sampled densely, which is exact to the sample spacing.
inline bool approach_collides(const Workspace& ws, const Vec3& contact, const Vec3& axis,
                              const SuctionPadModel& pad, int segment_samples = 64) {
  const auto walls = wall_aabbs(ws);
  if (walls.empty()) return false;
  for (int i = 0; i <= segment_samples; ++i) {
    const Vec3 p = contact + (pad.approach_length * i / segment_samples) * axis;
    for (const auto& [lo, hi] : walls)
      if (detail::point_aabb_distance(p, lo, hi) < pad.clearance_radius) return true;
  }
  return false;
}

// --- the environment ---

struct BinEnvConfig {
  int n_objects = 10;
  Split split = Split::train;
  int width = 64, height = 64;
  Vec2 extent{0.25, 0.25};
  double camera_height = 0.55;
  double depth_noise_sigma = 0;  // observation-only Gaussian depth noise (m)
  SuctionPadModel pad;
  double normal_radius = 0.015;  // neighborhood for surface normal estimation
  std::string log_path;          // optional JSON-lines episode log
  uint64_t seed = 0;
};

struct BinStep {
  double reward = 0;
  bool done = false;
  PickOutcome outcome = PickOutcome::miss;
  bool unsafe = false;       // terminal due to a tool collision
  bool budget_exhausted = false;
  int picked = 0;            // running total this episode
  int remaining = 0;
};

// Suction bin-picking environment. Actions are pixels of the overhead
// observation; a successful seal removes the object. Episodes end when the
// bin is empty, a collision occurs, or the step budget (twice the initial
// object count) runs out; exhausting the budget adds -1 to the final reward.
class BinEnv {
 public:
  explicit BinEnv(BinEnvConfig cfg) : cfg_(std::move(cfg)), rng_(cfg_.seed), episode_(-1) {
    if (cfg_.n_objects < 1) throw DomainError("BinEnv: n_objects must be >= 1");
    if (!cfg_.log_path.empty()) log_.open(cfg_.log_path, std::ios::app);
    view_.intrinsics = {1.2 * cfg_.width, 1.2 * cfg_.width, cfg_.width / 2.0, cfg_.height / 2.0,
                        cfg_.width, cfg_.height};
    view_.pose = look_at(Vec3(0, 0, cfg_.camera_height), Vec3(0, 0, 0), Vec3(0, 1, 0));
  }

  const RGBDFrame& reset() {
    ++episode_;
    SceneSpec spec;
    spec.split = cfg_.split;
    spec.rng_seed = rng_.next_u64();
    spec.workspace.kind = WorkspaceKind::basket;
    spec.workspace.extent = cfg_.extent;
    spec.object_count = cfg_.n_objects;
    scene_ = build_scene(spec, ObjectLibrary());
    initial_count_ = static_cast<int>(scene_.objects.size());
    steps_ = 0;
    picked_ = 0;
    done_ = false;
    rebuild();
    return obs_;
  }

  BinStep step(const Eigen::Vector2i& pixel) {
    if (done_) throw DomainError("BinEnv: step after episode end; call reset");
    if (episode_ < 0) throw DomainError("BinEnv: call reset before step");
    BinStep out;
    ++steps_;

    SuctionProbe probe;
    if (clean_frame_.depth.in_bounds(pixel.x(), pixel.y()) &&
        clean_frame_.valid_depth(pixel.x(), pixel.y())) {
      const Vec3 contact =
          clean_frame_.world_coords.at(pixel.x(), pixel.y()).cast<double>();
      const auto normal =
          normal_at_pixel(clean_frame_.depth, view_, pixel.x(), pixel.y(), cfg_.normal_radius);
      if (normal) {
        probe = probe_suction(caster_, contact, *normal, cfg_.pad);
        if (probe.target_instance > 0 &&
            approach_collides(scene_.workspace, probe.contact, probe.axis, cfg_.pad))
          probe.outcome = PickOutcome::collision;
      }
    }
    out.outcome = probe.outcome;

    switch (probe.outcome) {
      case PickOutcome::success: {
        out.reward = 0.1;
        remove_instance(probe.target_instance);
        ++picked_;
        break;
      }
      case PickOutcome::collision:
        out.reward = -1.0;
        out.unsafe = true;
        done_ = true;
        break;
      default:
        out.reward = -0.1;
    }

    if (!done_) {
      if (picked_ == initial_count_) {
        done_ = true;  // bin emptied: terminal reward stays at +0.1
      } else if (steps_ >= step_budget()) {
        out.reward += -1.0;  // ran out of attempts
        out.budget_exhausted = true;
        done_ = true;
      }
    }
    out.done = done_;
    out.picked = picked_;
    out.remaining = initial_count_ - picked_;
    if (probe.outcome == PickOutcome::success && !done_) refresh_observation();

    if (log_.is_open()) {
      nlohmann::json j{{"episode", episode_},      {"step", steps_},
                       {"pixel", {pixel.x(), pixel.y()}}, {"outcome", pick_outcome_name(out.outcome)},
                       {"reward", out.reward},     {"picked", picked_},
                       {"done", out.done}};
      log_ << j.dump() << "\n" << std::flush;
    }
    return out;
  }

  const RGBDFrame& observation() const { return obs_; }
  const Scene& scene() const { return scene_; }
  const CameraView& view() const { return view_; }
  int steps_taken() const { return steps_; }
  int picked() const { return picked_; }
  int initial_count() const { return initial_count_; }
  int remaining() const { return initial_count_ - picked_; }
  int step_budget() const { return 2 * initial_count_; }
  bool done() const { return done_; }

 private:
  void remove_instance(int instance_id) {
    for (size_t i = 0; i < scene_.objects.size(); ++i)
      if (scene_.objects[i].model.instance_id == instance_id) {
        scene_.objects.erase(scene_.objects.begin() + i);
        rebuild();
        return;
      }
    throw DomainError("BinEnv: picked instance not in scene");
  }

  void rebuild() {
    caster_ = SceneRaycaster(scene_);
    refresh_observation();
  }

  void refresh_observation() {
    clean_frame_ = caster_.render(view_);
    obs_ = clean_frame_;
    if (cfg_.depth_noise_sigma > 0) {
      // noise goes to the agent's observation only; physics stays clean
      for (int y = 0; y < obs_.depth.height(); ++y)
        for (int x = 0; x < obs_.depth.width(); ++x)
          if (obs_.valid_depth(x, y))
            obs_.depth.at(x, y) +=
                static_cast<float>(rng_.gaussian(0, cfg_.depth_noise_sigma));
    }
  }

  BinEnvConfig cfg_;
  Rng rng_;
  int episode_;
  Scene scene_;
  SceneRaycaster caster_;
  CameraView view_;
  RGBDFrame clean_frame_;  // noiseless frame backing the pick physics
  RGBDFrame obs_;
  std::ofstream log_;
  int initial_count_ = 0, steps_ = 0, picked_ = 0;
  bool done_ = true;
};

}  // namespace cods
