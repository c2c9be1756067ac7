#pragma once

#include <optional>
#include <vector>

#include "cods/render.hpp"

namespace cods {

using PixelPair = std::pair<Eigen::Vector2i, Eigen::Vector2i>;

struct PixelMatchSet {
  std::vector<PixelPair> matches;
  std::vector<PixelPair> nonmatch_oo;  // object-object
  std::vector<PixelPair> nonmatch_ob;  // object-background
  std::vector<PixelPair> nonmatch_bb;  // background-background
  bool empty_match_flag = false;       // no co-visible object pixels; skip pair
  bool under_budget = false;           // fewer matches than requested
};

// Reproject frame_a's world point into frame_b with an occlusion test:
// the landing pixel must see (within tol) the same 3D point.
inline std::optional<Eigen::Vector2i> find_correspondence(const Eigen::Vector2i& u_a,
                                                          const RGBDFrame& frame_a,
                                                          const RGBDFrame& frame_b,
                                                          double tol = 0.003) {
  if (!frame_a.depth.in_bounds(u_a.x(), u_a.y()) || !frame_a.valid_depth(u_a.x(), u_a.y()))
    throw DomainError("find_correspondence: source pixel has no valid depth");
  const Vec3 world = frame_a.world_coords.at(u_a.x(), u_a.y()).cast<double>();
  const Projection proj = project(world, frame_b.view);
  if (proj.behind_camera) return std::nullopt;
  const Eigen::Vector2i u_b(static_cast<int>(std::lround(proj.pixel.x())),
                            static_cast<int>(std::lround(proj.pixel.y())));
  if (!frame_b.depth.in_bounds(u_b.x(), u_b.y())) return std::nullopt;
  if (!frame_b.valid_depth(u_b.x(), u_b.y())) return std::nullopt;
  const Vec3 seen = frame_b.world_coords.at(u_b.x(), u_b.y()).cast<double>();
  if ((seen - world).norm() > tol) return std::nullopt;  // occluded or off-surface
  return u_b;
}

struct PairSamplingConfig {
  int n_match = 100;
  int n_nonmatch_per_type = 1500;
  double occlusion_tol = 0.003;
  int oversample_factor = 10;      // match rejection-sampling budget
  int min_nonmatch_pixel_dist = 2; // object-object pairs this close to a true
                                   // correspondence are rejected
};

namespace detail {

inline std::vector<Eigen::Vector2i> mask_pixels(const RGBDFrame& f, bool object) {
  std::vector<Eigen::Vector2i> out;
  for (int y = 0; y < f.depth.height(); ++y)
    for (int x = 0; x < f.depth.width(); ++x)
      if (f.valid_depth(x, y) && (f.instance_mask.at(x, y) > 0) == object)
        out.push_back({x, y});
  return out;
}

}  // namespace detail

inline PixelMatchSet sample_training_pairs(const RGBDFrame& frame_a, const RGBDFrame& frame_b,
                                           const PairSamplingConfig& cfg, Rng& rng) {
  PixelMatchSet set;
  const auto obj_a = detail::mask_pixels(frame_a, true);
  const auto obj_b = detail::mask_pixels(frame_b, true);
  const auto bg_a = detail::mask_pixels(frame_a, false);
  const auto bg_b = detail::mask_pixels(frame_b, false);
  if (obj_a.empty() || obj_b.empty()) {
    set.empty_match_flag = true;
    return set;
  }
  auto draw = [&rng](const std::vector<Eigen::Vector2i>& v) {
    return v[rng.uniform_int(0, static_cast<int>(v.size()) - 1)];
  };

  const int budget = cfg.n_match * cfg.oversample_factor;
  for (int i = 0; i < budget && static_cast<int>(set.matches.size()) < cfg.n_match; ++i) {
    const Eigen::Vector2i u_a = draw(obj_a);
    if (auto u_b = find_correspondence(u_a, frame_a, frame_b, cfg.occlusion_tol))
      if (frame_b.instance_mask.at(u_b->x(), u_b->y()) > 0) set.matches.push_back({u_a, *u_b});
  }
  if (set.matches.empty()) {
    set.empty_match_flag = true;
    return set;
  }
  set.under_budget = static_cast<int>(set.matches.size()) < cfg.n_match;

  // Non-matches: independent draws from the designated mask classes, one side
  // per frame. Object-object pairs near a true correspondence are excluded.
  for (int i = 0; i < cfg.n_nonmatch_per_type * cfg.oversample_factor &&
                  static_cast<int>(set.nonmatch_oo.size()) < cfg.n_nonmatch_per_type;
       ++i) {
    const Eigen::Vector2i u_a = draw(obj_a), u_b = draw(obj_b);
    if (auto truth = find_correspondence(u_a, frame_a, frame_b, cfg.occlusion_tol))
      if ((*truth - u_b).cwiseAbs().maxCoeff() <= cfg.min_nonmatch_pixel_dist) continue;
    set.nonmatch_oo.push_back({u_a, u_b});
  }
  for (int i = 0; i < cfg.n_nonmatch_per_type && !bg_b.empty(); ++i)
    set.nonmatch_ob.push_back({draw(obj_a), draw(bg_b)});
  for (int i = 0; i < cfg.n_nonmatch_per_type && !bg_a.empty() && !bg_b.empty(); ++i)
    set.nonmatch_bb.push_back({draw(bg_a), draw(bg_b)});
  return set;
}

inline nlohmann::json match_set_to_json(const PixelMatchSet& set) {
  auto dump = [](const std::vector<PixelPair>& v) {
    nlohmann::json arr = nlohmann::json::array();
    for (const auto& [a, b] : v) arr.push_back({a.x(), a.y(), b.x(), b.y()});
    return arr;
  };
  nlohmann::json j;
  j["matches"] = dump(set.matches);
  j["nonmatch_oo"] = dump(set.nonmatch_oo);
  j["nonmatch_ob"] = dump(set.nonmatch_ob);
  j["nonmatch_bb"] = dump(set.nonmatch_bb);
  j["empty_match_flag"] = set.empty_match_flag;
  return j;
}

}  // namespace cods
