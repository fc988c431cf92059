#pragma once

// Movement, cross-scene consistency and layout-skill metrics over pluggable
// detectors, plus report aggregation.

#include <map>
#include <memory>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include <Eigen/Dense>
#include <json.hpp>

#include "vdgpt/layout.hpp"
#include "vdgpt/plan.hpp"

namespace vdgpt::eval {

using ojson = nlohmann::ordered_json;

enum class Direction { kLeftToRight, kRightToLeft, kTopToBottom, kBottomToTop };

inline constexpr Direction kAllDirections[] = {Direction::kLeftToRight, Direction::kRightToLeft,
                                               Direction::kTopToBottom, Direction::kBottomToTop};

/// "L2R", "R2L", "T2B", "B2T".
std::string_view to_string(Direction d);
/// Accepts the short codes and the phrases "left to right" etc.
Direction direction_from_string(std::string_view s);
std::string_view direction_phrase(Direction d);

struct Detection {
  std::string label;
  BoundingBox box;
  double score = 1.0;

  bool operator==(const Detection&) const = default;
};

/// A frame of some video; `frame` may be negative to count from the end.
struct FrameRef {
  std::string video;
  int frame = 0;
};

class DetectorProvider {
 public:
  virtual ~DetectorProvider() = default;
  virtual std::vector<Detection> detect(const FrameRef& frame, const std::string& label) const = 0;
};

/// Echoes a dense layout's own boxes (score 1) for entities whose name or id
/// equals the label. Ignores FrameRef::video.
class LayoutOracleDetector : public DetectorProvider {
 public:
  explicit LayoutOracleDetector(layout::DenseLayout dense) : dense_(std::move(dense)) {}
  std::vector<Detection> detect(const FrameRef& frame, const std::string& label) const override;
  const layout::DenseLayout& layout() const { return dense_; }

 private:
  layout::DenseLayout dense_;
};

/// Detections loaded from an exchange file:
/// {"schema": "vdgpt-detections/1", "detections": [{"video", "frame", "label",
/// "box": [x0, y0, x1, y1], "score"}]}. A negative lookup with no record under
/// that exact frame counts back from the video's last recorded frame.
class RecordedDetector : public DetectorProvider {
 public:
  explicit RecordedDetector(const ojson& doc);
  static RecordedDetector from_file(const std::string& path);
  std::vector<Detection> detect(const FrameRef& frame, const std::string& label) const override;

 private:
  std::map<std::pair<std::string, int>, std::vector<Detection>> by_frame_;
  std::map<std::string, int> last_frame_;
};

ojson detections_to_json(const std::vector<std::pair<FrameRef, Detection>>& records);

/// Highest score, ties broken by the larger box area, then input order.
std::optional<Detection> best_detection(const std::vector<Detection>& detections);

struct Score {
  int value = 0;
  /// Empty on success; "NO_DETECTION", "MISSING_LABEL", ... otherwise.
  std::string reason;
};

/// 1 iff the box center moved past `epsilon` along the direction's axis
/// (y grows downward). A missing detection scores 0 with NO_DETECTION.
Score movement_direction_score(const std::optional<Detection>& first, const std::optional<Detection>& last,
                               Direction direction, double epsilon = 0.0);

/// Detects `label` on the first and last frame of `video` and scores it.
Score score_movement(const DetectorProvider& detector, const std::string& video, int last_frame,
                     const std::string& label, Direction direction, double epsilon = 0.0);

/// Oracle closed loop on one plan: densifies scene 1 and scores the entity
/// named `label` (the first entity of scene 1 when empty).
Score score_plan_movement(const VideoPlan& plan, Direction direction, const std::string& label = {},
                          double epsilon = 0.0);

/// Accuracy of uniformly random axis-aligned trajectories scored against
/// balanced labels (trial i is labelled with direction i mod 4).
double random_direction_baseline(int trials, std::uint64_t seed);

enum class ConsistencyMode {
  /// Mean over the N-1 adjacent pairs.
  kAdjacentMean,
  /// Sum over the N-1 adjacent pairs divided by N.
  kLiteral,
};

/// Cosine similarity of consecutive scene embeddings, averaged.
/// INSUFFICIENT_SCENES for fewer than two.
double object_consistency(const std::vector<Eigen::VectorXd>& embeddings,
                          ConsistencyMode mode = ConsistencyMode::kAdjacentMean);

struct LabeledBox {
  std::string label;
  BoundingBox box;
};

std::vector<LabeledBox> labeled_boxes(const std::vector<layout::EntityBox>& frame);

struct SkillThresholds {
  /// bigger iff area_A > bigger * area_B.
  double bigger = 1.2;
  /// same iff area_A / area_B in [1/same, same].
  double same = 1.1;
};

Score vpeval_object(const std::vector<LabeledBox>& boxes, const std::string& target);
Score vpeval_count(const std::vector<LabeledBox>& boxes, const std::string& target, int k);
/// relation: left, right, above, below. Centers compared on the dominant axis.
Score vpeval_spatial(const std::vector<LabeledBox>& boxes, const std::string& a, const std::string& relation,
                     const std::string& b);
/// relation: bigger, smaller, same.
Score vpeval_scale(const std::vector<LabeledBox>& boxes, const std::string& a, const std::string& relation,
                   const std::string& b, const SkillThresholds& thresholds = {});

struct MetricItem {
  std::string prompt_id;
  std::string metric;
  double score = 0.0;
  ojson details = ojson::object();
};

struct MetricSummary {
  std::string metric;
  int count = 0;
  double sum = 0.0;
  double mean() const { return count ? sum / count : 0.0; }
};

struct MetricReport {
  std::vector<MetricItem> items;
  /// One entry per metric, in order of first appearance.
  std::vector<MetricSummary> metrics;
  /// Mean of the per-metric means.
  double overall = 0.0;
  /// Mean over all items.
  double item_mean = 0.0;
};

MetricReport aggregate(std::vector<MetricItem> items);
ojson report_to_json(const MetricReport& report);
/// Aligned text table: metric, count, mean (percent), then the overall rows.
std::string report_to_table(const MetricReport& report);

}  // namespace vdgpt::eval
