#pragma once

#include <opencv2/imgcodecs.hpp>
#include <opencv2/imgproc.hpp>

#include "cods/correspond.hpp"
#include "cods/descriptor.hpp"

namespace cods {

inline cv::Mat to_bgr_mat(const Image<Color>& img) {
  cv::Mat out(img.height(), img.width(), CV_8UC3);
  for (int y = 0; y < img.height(); ++y)
    for (int x = 0; x < img.width(); ++x) {
      const Color& c = img.at(x, y);
      out.at<cv::Vec3b>(y, x) = {c[2], c[1], c[0]};  // OpenCV is BGR
    }
  return out;
}

inline void save_png(const std::string& path, const cv::Mat& bgr) {
  fs::create_directories(fs::path(path).parent_path());
  if (!cv::imwrite(path, bgr)) throw std::runtime_error("save_png: cannot write " + path);
}

// Min-max normalize a scalar field into a JET colormap image. Pass lo >= hi
// to derive the range from the data.
inline cv::Mat colorize(const Image<float>& field, float lo = 0, float hi = 0) {
  if (lo >= hi) {
    lo = std::numeric_limits<float>::infinity();
    hi = -lo;
    for (const float v : field.data()) {
      lo = std::min(lo, v);
      hi = std::max(hi, v);
    }
    if (lo >= hi) hi = lo + 1;
  }
  cv::Mat gray(field.height(), field.width(), CV_8UC1);
  for (int y = 0; y < field.height(); ++y)
    for (int x = 0; x < field.width(); ++x) {
      const float t = std::clamp((field.at(x, y) - lo) / (hi - lo), 0.0f, 1.0f);
      gray.at<uint8_t>(y, x) = static_cast<uint8_t>(std::lround(t * 255));
    }
  cv::Mat out;
  cv::applyColorMap(gray, out, cv::COLORMAP_JET);
  return out;
}

// First three descriptor channels, each min-max normalized, as an RGB image.
inline cv::Mat descriptor_rgb(const DescriptorMap& map) {
  if (map.dim < 3) throw DomainError("descriptor_rgb: need at least 3 channels");
  cv::Mat out(map.height, map.width, CV_8UC3);
  for (int d = 0; d < 3; ++d) {
    float lo = std::numeric_limits<float>::infinity(), hi = -lo;
    for (int y = 0; y < map.height; ++y)
      for (int x = 0; x < map.width; ++x) {
        lo = std::min(lo, map.at(x, y, d));
        hi = std::max(hi, map.at(x, y, d));
      }
    if (lo >= hi) hi = lo + 1;
    for (int y = 0; y < map.height; ++y)
      for (int x = 0; x < map.width; ++x)
        out.at<cv::Vec3b>(y, x)[2 - d] =  // channel 0 -> red
            static_cast<uint8_t>(std::lround((map.at(x, y, d) - lo) / (hi - lo) * 255));
  }
  return out;
}

// Two frames side by side with a line per pixel pair, color-cycled so
// neighboring pairs stay distinguishable.
inline cv::Mat correspondence_image(const RGBDFrame& frame_a, const RGBDFrame& frame_b,
                                    const std::vector<PixelPair>& pairs, int max_pairs = 30) {
  cv::Mat a = to_bgr_mat(frame_a.rgb), b = to_bgr_mat(frame_b.rgb);
  cv::Mat out(std::max(a.rows, b.rows), a.cols + b.cols, CV_8UC3, cv::Scalar(0, 0, 0));
  a.copyTo(out(cv::Rect(0, 0, a.cols, a.rows)));
  b.copyTo(out(cv::Rect(a.cols, 0, b.cols, b.rows)));
  const int n = std::min<int>(max_pairs, static_cast<int>(pairs.size()));
  const int step = n > 0 ? std::max<size_t>(1, pairs.size() / n) : 1;
  int drawn = 0;
  for (size_t i = 0; i < pairs.size() && drawn < n; i += step, ++drawn) {
    cv::Mat hsv(1, 1, CV_8UC3, cv::Scalar(drawn * 180 / std::max(1, n), 255, 255));
    cv::cvtColor(hsv, hsv, cv::COLOR_HSV2BGR);
    const cv::Scalar color(hsv.at<cv::Vec3b>(0, 0)[0], hsv.at<cv::Vec3b>(0, 0)[1],
                           hsv.at<cv::Vec3b>(0, 0)[2]);
    const cv::Point pa(pairs[i].first.x(), pairs[i].first.y());
    const cv::Point pb(pairs[i].second.x() + a.cols, pairs[i].second.y());
    cv::circle(out, pa, 2, color, -1);
    cv::circle(out, pb, 2, color, -1);
    cv::line(out, pa, pb, color, 1, cv::LINE_AA);
  }
  return out;
}

// Query frame with a crosshair next to the target frame's descriptor-distance
// heatmap, best match circled.
inline cv::Mat match_visualization(const RGBDFrame& frame_a, const Eigen::Vector2i& u_a,
                                   const RGBDFrame& frame_b, const BestMatch& bm,
                                   double heat_alpha = 0.6) {
  cv::Mat a = to_bgr_mat(frame_a.rgb);
  cv::Mat heat = colorize(bm.heatmap);
  cv::Mat b;
  cv::addWeighted(heat, heat_alpha, to_bgr_mat(frame_b.rgb), 1 - heat_alpha, 0, b);
  cv::drawMarker(a, {u_a.x(), u_a.y()}, {255, 255, 255}, cv::MARKER_CROSS, 9, 1);
  cv::circle(b, {bm.pixel.x(), bm.pixel.y()}, 4, {255, 255, 255}, 1, cv::LINE_AA);
  cv::Mat out(std::max(a.rows, b.rows), a.cols + b.cols, CV_8UC3, cv::Scalar(0, 0, 0));
  a.copyTo(out(cv::Rect(0, 0, a.cols, a.rows)));
  b.copyTo(out(cv::Rect(a.cols, 0, b.cols, b.rows)));
  return out;
}

// Pick-logit overlay: softmax probabilities over the action mask on the
// observation image, chosen pixel circled.
inline cv::Mat policy_overlay(const RGBDFrame& obs, const nn::Tensor& logits,
                              const Image<uint8_t>& mask,
                              std::optional<Eigen::Vector2i> chosen = {}) {
  const int H = obs.rgb.height(), W = obs.rgb.width();
  Image<float> prob(W, H, 0.0f);
  float mx = -std::numeric_limits<float>::infinity();
  for (int i = 0; i < H * W; ++i)
    if (mask.data()[i]) mx = std::max(mx, logits.v[i]);
  double z = 0;
  for (int i = 0; i < H * W; ++i)
    if (mask.data()[i]) z += std::exp(double(logits.v[i]) - mx);
  for (int i = 0; i < H * W; ++i)
    if (mask.data()[i]) prob.data()[i] = static_cast<float>(std::exp(double(logits.v[i]) - mx) / z);
  cv::Mat out;
  cv::addWeighted(colorize(prob), 0.6, to_bgr_mat(obs.rgb), 0.4, 0, out);
  if (chosen) cv::circle(out, {chosen->x(), chosen->y()}, 4, {255, 255, 255}, 1, cv::LINE_AA);
  return out;
}

// Line plot of one or more labeled series, e.g. a training curve.
inline cv::Mat line_plot(const std::vector<std::pair<std::string, std::vector<double>>>& series,
                         int width = 640, int height = 360) {
  cv::Mat out(height, width, CV_8UC3, cv::Scalar(255, 255, 255));
  double lo = std::numeric_limits<double>::infinity(), hi = -lo;
  size_t longest = 0;
  for (const auto& [name, ys] : series) {
    longest = std::max(longest, ys.size());
    for (const double y : ys) {
      lo = std::min(lo, y);
      hi = std::max(hi, y);
    }
  }
  if (longest < 2) return out;
  if (lo >= hi) hi = lo + 1;
  const int margin = 30;
  auto px = [&](size_t i) {
    return margin + static_cast<int>(double(i) / (longest - 1) * (width - 2 * margin));
  };
  auto py = [&](double y) {
    return height - margin - static_cast<int>((y - lo) / (hi - lo) * (height - 2 * margin));
  };
  cv::rectangle(out, {margin, margin}, {width - margin, height - margin}, {200, 200, 200});
  const cv::Scalar palette[] = {{180, 60, 30}, {30, 60, 180}, {30, 150, 30}, {130, 30, 150}};
  for (size_t s = 0; s < series.size(); ++s) {
    const auto& ys = series[s].second;
    const cv::Scalar& color = palette[s % std::size(palette)];
    for (size_t i = 0; i + 1 < ys.size(); ++i)
      cv::line(out, {px(i), py(ys[i])}, {px(i + 1), py(ys[i + 1])}, color, 1, cv::LINE_AA);
    cv::putText(out, series[s].first, {margin + 4, margin + 14 + 14 * static_cast<int>(s)},
                cv::FONT_HERSHEY_SIMPLEX, 0.35, color, 1, cv::LINE_AA);
  }
  char buf[64];
  std::snprintf(buf, sizeof(buf), "%.4g", hi);
  cv::putText(out, buf, {2, margin + 4}, cv::FONT_HERSHEY_SIMPLEX, 0.3, {80, 80, 80});
  std::snprintf(buf, sizeof(buf), "%.4g", lo);
  cv::putText(out, buf, {2, height - margin}, cv::FONT_HERSHEY_SIMPLEX, 0.3, {80, 80, 80});
  return out;
}

// Read one numeric column from a CSV with a header row.
inline std::vector<double> read_csv_column(const std::string& path, const std::string& column) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("read_csv_column: cannot open " + path);
  std::string line;
  if (!std::getline(in, line)) throw std::runtime_error("read_csv_column: empty file " + path);
  int target = -1, idx = 0;
  for (size_t pos = 0; pos <= line.size(); ++idx) {
    size_t next = line.find(',', pos);
    if (next == std::string::npos) next = line.size();
    if (line.substr(pos, next - pos) == column) target = idx;
    pos = next + 1;
    if (next == line.size()) break;
  }
  if (target < 0) throw std::runtime_error("read_csv_column: no column " + column + " in " + path);
  std::vector<double> out;
  while (std::getline(in, line)) {
    size_t pos = 0;
    for (int i = 0; i < target; ++i) pos = line.find(',', pos) + 1;
    out.push_back(std::stod(line.substr(pos)));
  }
  return out;
}

}  // namespace cods
