#pragma once

#include <filesystem>
#include <fstream>
#include <opencv2/imgcodecs.hpp>
#include <string>

#include "cods/normals.hpp"
#include "cods/render.hpp"

namespace cods {

namespace fs = std::filesystem;

constexpr int kDatasetSchemaVersion = 1;

// --- camera pose sampling: hemisphere shell above the workspace center ---

struct CameraSampling {
  double radius_lo = 0.5, radius_hi = 0.9;
  double elevation_lo_deg = 30, elevation_hi_deg = 90;
  double lookat_jitter = 0.03;
};

inline RigidTransform look_at(const Vec3& eye, const Vec3& target, const Vec3& up_hint) {
  const Vec3 z = (target - eye).normalized();  // camera looks along +z
  Vec3 x = z.cross(up_hint);
  if (x.norm() < 1e-6) x = z.cross(Vec3(0, 1, 0));
  x.normalize();
  const Vec3 y = z.cross(x);  // y points "down" in the image
  Mat3 r;
  r.col(0) = x;
  r.col(1) = y;
  r.col(2) = z;
  return RigidTransform(r, eye);
}

inline CameraView sample_camera(const CameraSampling& cfg, int width, int height, Rng& rng) {
  CameraView v;
  v.intrinsics = {1.2 * width, 1.2 * width, width / 2.0, height / 2.0, width, height};
  const double r = rng.uniform(cfg.radius_lo, cfg.radius_hi);
  const double elev = rng.uniform(cfg.elevation_lo_deg, cfg.elevation_hi_deg) * M_PI / 180.0;
  const double azim = rng.uniform(0, 2 * M_PI);
  const Vec3 eye(r * std::cos(elev) * std::cos(azim), r * std::cos(elev) * std::sin(azim),
                 r * std::sin(elev));
  const Vec3 target(rng.uniform(-cfg.lookat_jitter, cfg.lookat_jitter),
                    rng.uniform(-cfg.lookat_jitter, cfg.lookat_jitter), 0.0);
  v.pose = look_at(eye, target, Vec3(0, 0, 1));
  return v;
}

// --- frame I/O: rgb png, depth/mask 16-bit png (depth in millimeters) ---

inline void save_frame(const RGBDFrame& frame, const fs::path& dir, const std::string& stem) {
  const int w = frame.rgb.width(), h = frame.rgb.height();
  cv::Mat rgb(h, w, CV_8UC3), depth(h, w, CV_16UC1), mask(h, w, CV_16UC1);
  for (int y = 0; y < h; ++y)
    for (int x = 0; x < w; ++x) {
      const Color& c = frame.rgb.at(x, y);
      rgb.at<cv::Vec3b>(y, x) = {c[2], c[1], c[0]};  // OpenCV is BGR
      const double mm = frame.depth.at(x, y) * 1000.0;
      depth.at<uint16_t>(y, x) = static_cast<uint16_t>(std::clamp(std::round(mm), 0.0, 65535.0));
      mask.at<uint16_t>(y, x) = static_cast<uint16_t>(frame.instance_mask.at(x, y));
    }
  cv::imwrite((dir / (stem + ".rgb.png")).string(), rgb);
  cv::imwrite((dir / (stem + ".depth.u16.png")).string(), depth);
  cv::imwrite((dir / (stem + ".mask.u16.png")).string(), mask);
  std::ofstream(dir / (stem + ".cam.json")) << camera_to_json(frame.view).dump(2) << "\n";
}

inline RGBDFrame load_frame(const fs::path& dir, const std::string& stem) {
  RGBDFrame frame;
  nlohmann::json camj;
  std::ifstream in(dir / (stem + ".cam.json"));
  if (!in) throw std::runtime_error("load_frame: missing " + (dir / stem).string() + ".cam.json");
  in >> camj;
  frame.view = camera_from_json(camj);
  cv::Mat rgb = cv::imread((dir / (stem + ".rgb.png")).string(), cv::IMREAD_COLOR);
  cv::Mat depth = cv::imread((dir / (stem + ".depth.u16.png")).string(), cv::IMREAD_UNCHANGED);
  cv::Mat mask = cv::imread((dir / (stem + ".mask.u16.png")).string(), cv::IMREAD_UNCHANGED);
  if (rgb.empty() || depth.empty() || mask.empty())
    throw std::runtime_error("load_frame: unreadable frame " + (dir / stem).string());
  const int w = rgb.cols, h = rgb.rows;
  frame.rgb = Image<Color>(w, h);
  frame.depth = Image<float>(w, h);
  frame.instance_mask = Image<int32_t>(w, h);
  frame.world_coords = Image<Eigen::Vector3f>(w, h, Eigen::Vector3f::Zero());
  for (int y = 0; y < h; ++y)
    for (int x = 0; x < w; ++x) {
      const auto& c = rgb.at<cv::Vec3b>(y, x);
      frame.rgb.at(x, y) = {c[2], c[1], c[0]};
      frame.depth.at(x, y) = depth.at<uint16_t>(y, x) / 1000.0f;
      frame.instance_mask.at(x, y) = mask.at<uint16_t>(y, x);
      if (frame.depth.at(x, y) > 0)
        frame.world_coords.at(x, y) =
            unproject({x, y}, frame.depth.at(x, y), frame.view).cast<float>();
    }
  return frame;
}

// --- dataset generation ---

struct DatasetConfig {
  std::string root;
  int n_scenes = 170;
  int n_single_object_scenes = 20;  // the rest get [min,max]_objects
  int min_objects = 2, max_objects = 15;
  int views_per_scene = 80;
  int width = 256, height = 256;
  Split split = Split::train;
  uint64_t seed = 0;
  bool retexture_per_view = true;  // per-scene textures when false
  Vec2 workspace_extent{0.4, 0.4};
  CameraSampling camera;

  static DatasetConfig desk_scale() {
    DatasetConfig c;
    c.n_scenes = 20;
    c.n_single_object_scenes = 4;
    c.views_per_scene = 16;
    c.width = c.height = 64;
    return c;
  }
};

inline std::string scene_dir_name(int scene) {
  char buf[32];
  std::snprintf(buf, sizeof(buf), "scene_%03d", scene);
  return buf;
}
inline std::string view_stem(int view) {
  char buf[32];
  std::snprintf(buf, sizeof(buf), "view_%03d", view);
  return buf;
}

inline nlohmann::json generate_descriptor_dataset(const DatasetConfig& cfg) {
  const fs::path root(cfg.root);
  fs::create_directories(root);
  const fs::path manifest_path = root / "manifest.json";
  ObjectLibrary library;
  Rng rng(cfg.seed);

  nlohmann::json manifest;
  manifest["schema_version"] = kDatasetSchemaVersion;
  manifest["seed"] = cfg.seed;
  manifest["split"] = split_name(cfg.split);
  manifest["n_scenes"] = cfg.n_scenes;
  manifest["views_per_scene"] = cfg.views_per_scene;
  manifest["width"] = cfg.width;
  manifest["height"] = cfg.height;
  manifest["retexture_per_view"] = cfg.retexture_per_view;
  manifest["splits_disjoint"] = splits_disjoint();
  manifest["scenes"] = nlohmann::json::array();

  double depth_sum = 0, depth_sq = 0;
  int64_t depth_n = 0;

  try {
    for (int s = 0; s < cfg.n_scenes; ++s) {
      SceneSpec spec;
      spec.split = cfg.split;
      spec.rng_seed = rng.next_u64();
      spec.workspace.kind = WorkspaceKind::table;
      spec.workspace.extent = cfg.workspace_extent;
      spec.object_count = s < cfg.n_single_object_scenes
                              ? 1
                              : rng.uniform_int(cfg.min_objects, cfg.max_objects);
      Scene scene = build_scene(spec, library);
      const fs::path sdir = root / scene_dir_name(s);
      fs::create_directories(sdir);
      nlohmann::json sj;
      sj["seed"] = spec.rng_seed;
      sj["object_count"] = static_cast<int>(scene.objects.size());
      sj["overflow_warning"] = scene.overflow_warning;
      sj["views"] = nlohmann::json::array();
      Rng view_rng = rng.fork();
      for (int v = 0; v < cfg.views_per_scene; ++v) {
        if (cfg.retexture_per_view || v == 0) randomize_textures(scene, view_rng);
        const CameraView cam = sample_camera(cfg.camera, cfg.width, cfg.height, view_rng);
        const RGBDFrame frame = render_frame(scene, cam);
        save_frame(frame, sdir, view_stem(v));
        for (const float d : frame.depth.data())
          if (d > 0) {
            depth_sum += d;
            depth_sq += double(d) * d;
            ++depth_n;
          }
        sj["views"].push_back(view_stem(v));
      }
      manifest["scenes"].push_back(sj);
    }
  } catch (...) {
    // abort with partial-manifest cleanup: never leave a manifest that lies
    std::error_code ec;
    fs::remove(manifest_path, ec);
    throw;
  }

  const double mean = depth_n ? depth_sum / depth_n : 0.0;
  manifest["depth_mean"] = mean;
  manifest["depth_std"] =
      depth_n ? std::sqrt(std::max(1e-12, depth_sq / depth_n - mean * mean)) : 1.0;
  std::ofstream(manifest_path) << manifest.dump(2) << "\n";
  return manifest;
}

inline nlohmann::json load_manifest(const std::string& root) {
  std::ifstream in(fs::path(root) / "manifest.json");
  if (!in) throw std::runtime_error("dataset manifest not found under " + root);
  nlohmann::json j;
  in >> j;
  return j;
}

}  // namespace cods
