#include "vdgpt/eval.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <iomanip>
#include <random>
#include <sstream>

namespace vdgpt::eval {

std::string_view to_string(Direction d) {
  switch (d) {
    case Direction::kLeftToRight: return "L2R";
    case Direction::kRightToLeft: return "R2L";
    case Direction::kTopToBottom: return "T2B";
    case Direction::kBottomToTop: return "B2T";
  }
  return "?";
}

std::string_view direction_phrase(Direction d) {
  switch (d) {
    case Direction::kLeftToRight: return "left to right";
    case Direction::kRightToLeft: return "right to left";
    case Direction::kTopToBottom: return "top to bottom";
    case Direction::kBottomToTop: return "bottom to top";
  }
  return "?";
}

Direction direction_from_string(std::string_view s) {
  for (Direction d : kAllDirections) {
    if (s == to_string(d) || s == direction_phrase(d)) return d;
  }
  throw Error(ErrorCode::kArgError, "unknown direction '" + std::string(s) + "'");
}

std::vector<Detection> LayoutOracleDetector::detect(const FrameRef& frame, const std::string& label) const {
  const int n = static_cast<int>(dense_.frames.size());
  const int f = frame.frame < 0 ? n + frame.frame : frame.frame;
  std::vector<Detection> out;
  if (f < 0 || f >= n) return out;
  for (const auto& eb : dense_.frames[static_cast<std::size_t>(f)]) {
    if (eb.name == label || eb.entity_id == label) out.push_back({label, eb.box, 1.0});
  }
  return out;
}

RecordedDetector::RecordedDetector(const ojson& doc) {
  try {
    if (doc.value("schema", std::string("vdgpt-detections/1")) != "vdgpt-detections/1") {
      throw Error(ErrorCode::kParseError, "unsupported detections schema", "schema");
    }
    const auto& list = doc.at("detections");
    for (std::size_t i = 0; i < list.size(); ++i) {
      const auto& r = list[i];
      const auto& b = r.at("box");
      if (!b.is_array() || b.size() != 4) {
        throw Error(ErrorCode::kParseError, "box must have 4 numbers", "detections[" + std::to_string(i) + "].box");
      }
      Detection d{r.at("label").get<std::string>(),
                  {b[0].get<double>(), b[1].get<double>(), b[2].get<double>(), b[3].get<double>()},
                  r.value("score", 1.0)};
      if (!(d.score >= 0.0 && d.score <= 1.0)) {
        throw Error(ErrorCode::kParseError, "score outside [0, 1]", "detections[" + std::to_string(i) + "].score");
      }
      const std::string video = r.value("video", std::string());
      const int frame = r.at("frame").get<int>();
      by_frame_[{video, frame}].push_back(std::move(d));
      auto [last, fresh] = last_frame_.try_emplace(video, frame);
      if (!fresh) last->second = std::max(last->second, frame);
    }
  } catch (const nlohmann::json::exception& e) {
    throw Error(ErrorCode::kParseError, std::string("malformed detections: ") + e.what());
  }
}

RecordedDetector RecordedDetector::from_file(const std::string& path) {
  std::ifstream f(path);
  if (!f) throw Error(ErrorCode::kIoError, "cannot open " + path);
  try {
    return RecordedDetector(ojson::parse(f));
  } catch (const nlohmann::json::exception& e) {
    throw Error(ErrorCode::kParseError, std::string("malformed detections: ") + e.what(), path);
  }
}

std::vector<Detection> RecordedDetector::detect(const FrameRef& frame, const std::string& label) const {
  std::vector<Detection> out;
  auto it = by_frame_.find({frame.video, frame.frame});
  if (it == by_frame_.end() && frame.frame < 0) {
    const auto last = last_frame_.find(frame.video);
    if (last != last_frame_.end()) it = by_frame_.find({frame.video, last->second + 1 + frame.frame});
  }
  if (it == by_frame_.end()) return out;
  for (const auto& d : it->second)
    if (d.label == label) out.push_back(d);
  return out;
}

ojson detections_to_json(const std::vector<std::pair<FrameRef, Detection>>& records) {
  ojson doc;
  doc["schema"] = "vdgpt-detections/1";
  doc["detections"] = ojson::array();
  for (const auto& [ref, d] : records) {
    ojson r;
    r["video"] = ref.video;
    r["frame"] = ref.frame;
    r["label"] = d.label;
    r["box"] = {d.box.x0, d.box.y0, d.box.x1, d.box.y1};
    r["score"] = d.score;
    doc["detections"].push_back(std::move(r));
  }
  return doc;
}

std::optional<Detection> best_detection(const std::vector<Detection>& detections) {
  std::optional<Detection> best;
  for (const auto& d : detections) {
    if (!best || d.score > best->score ||
        (d.score == best->score && layout::box_area(d.box) > layout::box_area(best->box))) {
      best = d;
    }
  }
  return best;
}

Score movement_direction_score(const std::optional<Detection>& first, const std::optional<Detection>& last,
                               Direction direction, double epsilon) {
  if (!first || !last) return {0, "NO_DETECTION"};
  const layout::Point a = layout::box_center(first->box), b = layout::box_center(last->box);
  double delta = 0.0;
  switch (direction) {
    case Direction::kLeftToRight: delta = b.x - a.x; break;
    case Direction::kRightToLeft: delta = a.x - b.x; break;
    case Direction::kTopToBottom: delta = b.y - a.y; break;
    case Direction::kBottomToTop: delta = a.y - b.y; break;
  }
  return {delta > epsilon ? 1 : 0, {}};
}

Score score_movement(const DetectorProvider& detector, const std::string& video, int last_frame,
                     const std::string& label, Direction direction, double epsilon) {
  return movement_direction_score(best_detection(detector.detect({video, 0}, label)),
                                  best_detection(detector.detect({video, last_frame}, label)), direction, epsilon);
}

Score score_plan_movement(const VideoPlan& plan, Direction direction, const std::string& label, double epsilon) {
  if (plan.scenes.empty()) return {0, "NO_DETECTION"};
  const auto& scene = plan.scenes.front();
  std::string target = label;
  if (target.empty()) {
    if (scene.entities.empty()) return {0, "NO_DETECTION"};
    target = scene.entities.front().name;
  }
  const LayoutOracleDetector oracle(layout::densify_scene(scene));
  return score_movement(oracle, "", -1, target, direction, epsilon);
}

double random_direction_baseline(int trials, std::uint64_t seed) {
  if (trials < 1) throw Error(ErrorCode::kArgError, "need at least one trial");
  std::mt19937_64 rng(seed);
  std::uniform_int_distribution<int> pick(0, 3);
  std::uniform_real_distribution<double> start(0.3, 0.7), dist(0.05, 0.25);
  int correct = 0;
  for (int i = 0; i < trials; ++i) {
    const double cx = start(rng), cy = start(rng), d = dist(rng);
    double ex = cx, ey = cy;
    switch (kAllDirections[pick(rng)]) {
      case Direction::kLeftToRight: ex += d; break;
      case Direction::kRightToLeft: ex -= d; break;
      case Direction::kTopToBottom: ey += d; break;
      case Direction::kBottomToTop: ey -= d; break;
    }
    const Detection first{"object", {cx - 0.05, cy - 0.05, cx + 0.05, cy + 0.05}, 1.0};
    const Detection last{"object", {ex - 0.05, ey - 0.05, ex + 0.05, ey + 0.05}, 1.0};
    correct += movement_direction_score(first, last, kAllDirections[i % 4]).value;
  }
  return double(correct) / trials;
}

double object_consistency(const std::vector<Eigen::VectorXd>& embeddings, ConsistencyMode mode) {
  const std::size_t n = embeddings.size();
  if (n < 2) throw Error(ErrorCode::kInsufficientScenes, "consistency needs at least two scenes");
  double sum = 0.0;
  for (std::size_t i = 0; i + 1 < n; ++i) {
    const auto& a = embeddings[i];
    const auto& b = embeddings[i + 1];
    if (a.size() != b.size()) throw Error(ErrorCode::kShapeError, "embedding dimensions differ");
    // one reduction order for all three sums: identical vectors give exactly 1
    const double ab = a.cwiseProduct(b).sum();
    const double denom = std::sqrt(a.cwiseProduct(a).sum() * b.cwiseProduct(b).sum());
    if (denom == 0.0) throw Error(ErrorCode::kArgError, "zero embedding has no direction");
    sum += std::clamp(ab / denom, -1.0, 1.0);
  }
  return mode == ConsistencyMode::kAdjacentMean ? sum / double(n - 1) : sum / double(n);
}

std::vector<LabeledBox> labeled_boxes(const std::vector<layout::EntityBox>& frame) {
  std::vector<LabeledBox> out;
  for (const auto& eb : frame) out.push_back({eb.name.empty() ? eb.entity_id : eb.name, eb.box});
  return out;
}

namespace {

const LabeledBox* find_label(const std::vector<LabeledBox>& boxes, const std::string& label) {
  for (const auto& b : boxes)
    if (b.label == label) return &b;
  return nullptr;
}

}  // namespace

Score vpeval_object(const std::vector<LabeledBox>& boxes, const std::string& target) {
  return find_label(boxes, target) ? Score{1, {}} : Score{0, "MISSING_LABEL"};
}

Score vpeval_count(const std::vector<LabeledBox>& boxes, const std::string& target, int k) {
  const auto n = std::count_if(boxes.begin(), boxes.end(), [&](const LabeledBox& b) { return b.label == target; });
  if (n == 0 && k > 0) return {0, "MISSING_LABEL"};
  return {n == k ? 1 : 0, n == k ? std::string() : "COUNT_MISMATCH"};
}

Score vpeval_spatial(const std::vector<LabeledBox>& boxes, const std::string& a, const std::string& relation,
                     const std::string& b) {
  if (relation != "left" && relation != "right" && relation != "above" && relation != "below") {
    throw Error(ErrorCode::kArgError, "unknown spatial relation '" + relation + "'");
  }
  const LabeledBox* A = find_label(boxes, a);
  const LabeledBox* B = find_label(boxes, b);
  if (!A || !B) return {0, "MISSING_LABEL"};
  const layout::Point ca = layout::box_center(A->box), cb = layout::box_center(B->box);
  const double dx = cb.x - ca.x, dy = cb.y - ca.y;
  bool ok = false;
  if (relation == "left") ok = std::abs(dx) > std::abs(dy) && dx > 0;
  if (relation == "right") ok = std::abs(dx) > std::abs(dy) && dx < 0;
  if (relation == "above") ok = std::abs(dy) > std::abs(dx) && dy > 0;
  if (relation == "below") ok = std::abs(dy) > std::abs(dx) && dy < 0;
  return {ok ? 1 : 0, {}};
}

Score vpeval_scale(const std::vector<LabeledBox>& boxes, const std::string& a, const std::string& relation,
                   const std::string& b, const SkillThresholds& t) {
  if (relation != "bigger" && relation != "smaller" && relation != "same") {
    throw Error(ErrorCode::kArgError, "unknown scale relation '" + relation + "'");
  }
  const LabeledBox* A = find_label(boxes, a);
  const LabeledBox* B = find_label(boxes, b);
  if (!A || !B) return {0, "MISSING_LABEL"};
  const double aa = layout::box_area(A->box), ab = layout::box_area(B->box);
  bool ok = false;
  if (relation == "bigger") ok = aa > t.bigger * ab;
  if (relation == "smaller") ok = ab > t.bigger * aa;
  if (relation == "same") ok = ab > 0.0 && aa / ab >= 1.0 / t.same && aa / ab <= t.same;
  return {ok ? 1 : 0, {}};
}

MetricReport aggregate(std::vector<MetricItem> items) {
  MetricReport r;
  std::map<std::string, std::size_t> index;
  double total = 0.0;
  for (const auto& item : items) {
    auto [it, inserted] = index.emplace(item.metric, r.metrics.size());
    if (inserted) r.metrics.push_back({item.metric, 0, 0.0});
    auto& m = r.metrics[it->second];
    ++m.count;
    m.sum += item.score;
    total += item.score;
  }
  double means = 0.0;
  for (const auto& m : r.metrics) means += m.mean();
  r.overall = r.metrics.empty() ? 0.0 : means / double(r.metrics.size());
  r.item_mean = items.empty() ? 0.0 : total / double(items.size());
  r.items = std::move(items);
  return r;
}

ojson report_to_json(const MetricReport& report) {
  ojson doc;
  doc["metrics"] = ojson::array();
  for (const auto& m : report.metrics) {
    doc["metrics"].push_back({{"metric", m.metric}, {"count", m.count}, {"sum", m.sum}, {"mean", m.mean()}});
  }
  doc["overall"] = report.overall;
  doc["item_mean"] = report.item_mean;
  doc["items"] = ojson::array();
  for (const auto& i : report.items) {
    doc["items"].push_back(
        {{"prompt_id", i.prompt_id}, {"metric", i.metric}, {"score", i.score}, {"details", i.details}});
  }
  return doc;
}

std::string report_to_table(const MetricReport& report) {
  std::size_t width = std::string("overall (item mean)").size();
  for (const auto& m : report.metrics) width = std::max(width, m.metric.size());
  std::ostringstream os;
  os << std::fixed << std::setprecision(1);
  os << std::left << std::setw(static_cast<int>(width)) << "metric" << "  " << std::right << std::setw(6) << "count"
     << "  " << std::setw(7) << "mean %" << "\n";
  os << std::string(width + 17, '-') << "\n";
  auto row = [&](const std::string& name, int count, double mean) {
    os << std::left << std::setw(static_cast<int>(width)) << name << "  " << std::right << std::setw(6) << count
       << "  " << std::setw(7) << 100.0 * mean << "\n";
  };
  for (const auto& m : report.metrics) row(m.metric, m.count, m.mean());
  os << std::string(width + 17, '-') << "\n";
  row("overall", static_cast<int>(report.metrics.size()), report.overall);
  row("overall (item mean)", static_cast<int>(report.items.size()), report.item_mean);
  return os.str();
}

}  // namespace vdgpt::eval
