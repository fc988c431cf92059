#pragma once

// Dense layout synthesis from keyframes and the box geometry shared by
// grounding and evaluation.

#include <cmath>
#include <numbers>
#include <optional>
#include <string>
#include <vector>

#include <Eigen/Dense>
#include <json.hpp>

#include "vdgpt/plan.hpp"

namespace vdgpt::layout {

inline constexpr int kDefaultFourierBands = 8;

struct EntityBox {
  std::string entity_id;
  std::string name;
  BoundingBox box;

  bool operator==(const EntityBox&) const = default;
};

struct DenseLayout {
  int scene_index = 1;
  int frame_count = 0;
  std::optional<double> fps_hint;
  std::vector<std::vector<EntityBox>> frames;

  bool operator==(const DenseLayout&) const = default;
};

/// Linearly interpolates a keyframe track onto `target_frames` dense frames.
/// Keyframe k maps to dense position (f_k - f_0) * (T - 1) / (f_last - f_0),
/// so the first and last keyframes land exactly on the first and last frame.
/// A single keyframe is held constant (diagnostic "SINGLE_KEYFRAME"); an empty
/// track throws kEmptyTrack. Outputs are not re-quantized.
std::vector<BoundingBox> interpolate_layouts(const EntityTrack& track, int target_frames,
                                             std::vector<Diagnostic>* diagnostics = nullptr);

/// Dense layout for one scene at `target_frames` (scene.target_frames when
/// not given).
DenseLayout densify_scene(const SceneSpec& scene, std::optional<int> target_frames = std::nullopt,
                          std::vector<Diagnostic>* diagnostics = nullptr);

std::vector<DenseLayout> densify_plan(const VideoPlan& plan,
                                      std::optional<int> target_frames = std::nullopt);

/// NeRF-style encoding: for each coordinate (x0, y0, x1, y1) and band j in
/// [0, L) emit sin(2^j pi c) then cos(2^j pi c). Length 8L.
template <typename Scalar = double>
Eigen::Matrix<Scalar, Eigen::Dynamic, 1> fourier_features(const BoundingBox& b,
                                                          int bands = kDefaultFourierBands) {
  Eigen::Matrix<Scalar, Eigen::Dynamic, 1> out(8 * bands);
  const double coords[4] = {b.x0, b.y0, b.x1, b.y1};
  Eigen::Index i = 0;
  for (double c : coords) {
    double freq = std::numbers::pi;
    for (int j = 0; j < bands; ++j, freq *= 2.0) {
      out(i++) = Scalar(std::sin(freq * c));
      out(i++) = Scalar(std::cos(freq * c));
    }
  }
  return out;
}

struct Point {
  double x = 0.0;
  double y = 0.0;
};

inline Point box_center(const BoundingBox& b) { return {0.5 * (b.x0 + b.x1), 0.5 * (b.y0 + b.y1)}; }

inline double box_area(const BoundingBox& b) {
  return std::max(0.0, b.x1 - b.x0) * std::max(0.0, b.y1 - b.y0);
}

/// Replaces each box by the zero-area box at its center.
DenseLayout to_center_point_layout(const DenseLayout& dense);

nlohmann::ordered_json dense_to_json(const std::vector<DenseLayout>& scenes);
std::vector<DenseLayout> dense_from_json(const nlohmann::ordered_json& doc);

inline constexpr std::string_view kDenseSchema = "vdgpt-dense/1";

}  // namespace vdgpt::layout
