#include "vdgpt/layout.hpp"

#include <algorithm>

namespace vdgpt::layout {

namespace {

BoundingBox lerp(const BoundingBox& a, const BoundingBox& b, double s) {
  return {a.x0 + s * (b.x0 - a.x0), a.y0 + s * (b.y0 - a.y0), a.x1 + s * (b.x1 - a.x1),
          a.y1 + s * (b.y1 - a.y1)};
}

}  // namespace

std::vector<BoundingBox> interpolate_layouts(const EntityTrack& track, int target_frames,
                                             std::vector<Diagnostic>* diagnostics) {
  const auto& keys = track.keyframes;
  if (keys.empty()) {
    throw Error(ErrorCode::kEmptyTrack, "track '" + track.id + "' has no keyframes", track.id);
  }
  if (target_frames < 1) throw Error(ErrorCode::kArgError, "target_frames must be positive");
  if (keys.size() == 1) {
    if (diagnostics) {
      diagnostics->push_back({"SINGLE_KEYFRAME", "track '" + track.id + "' held constant"});
    }
    return std::vector<BoundingBox>(static_cast<std::size_t>(target_frames), keys.front().box);
  }
  if (target_frames < static_cast<int>(keys.size())) {
    throw Error(ErrorCode::kArgError, "target_frames is smaller than the keyframe count");
  }
  for (std::size_t k = 1; k < keys.size(); ++k) {
    if (keys[k].frame <= keys[k - 1].frame) {
      throw Error(ErrorCode::kArgError, "keyframe indices must be strictly increasing", track.id);
    }
  }

  const double span = keys.back().frame - keys.front().frame;
  const double last = target_frames - 1;
  std::vector<double> position(keys.size());
  for (std::size_t k = 0; k < keys.size(); ++k) {
    position[k] = (keys[k].frame - keys.front().frame) * last / span;
  }

  std::vector<BoundingBox> out(static_cast<std::size_t>(target_frames));
  std::size_t seg = 0;
  for (int i = 0; i < target_frames; ++i) {
    if (i == 0) {
      out[0] = keys.front().box;
      continue;
    }
    if (i == target_frames - 1) {
      out[static_cast<std::size_t>(i)] = keys.back().box;
      continue;
    }
    while (seg + 2 < keys.size() && position[seg + 1] <= i) ++seg;
    const double s = (i - position[seg]) / (position[seg + 1] - position[seg]);
    out[static_cast<std::size_t>(i)] = lerp(keys[seg].box, keys[seg + 1].box, s);
  }
  return out;
}

DenseLayout densify_scene(const SceneSpec& scene, std::optional<int> target_frames,
                          std::vector<Diagnostic>* diagnostics) {
  DenseLayout dense;
  dense.scene_index = scene.index;
  dense.frame_count = target_frames.value_or(scene.target_frames);
  dense.frames.resize(static_cast<std::size_t>(std::max(dense.frame_count, 0)));
  for (const EntityTrack& track : scene.entities) {
    if (track.keyframes.empty()) {
      if (diagnostics) diagnostics->push_back({"EMPTY_TRACK", "track '" + track.id + "' skipped"});
      continue;
    }
    const auto boxes = interpolate_layouts(track, dense.frame_count, diagnostics);
    for (std::size_t f = 0; f < boxes.size(); ++f) {
      dense.frames[f].push_back({track.id, track.name, boxes[f]});
    }
  }
  return dense;
}

std::vector<DenseLayout> densify_plan(const VideoPlan& plan, std::optional<int> target_frames) {
  std::vector<DenseLayout> out;
  out.reserve(plan.scenes.size());
  for (const SceneSpec& scene : plan.scenes) out.push_back(densify_scene(scene, target_frames));
  return out;
}

DenseLayout to_center_point_layout(const DenseLayout& dense) {
  DenseLayout out = dense;
  for (auto& frame : out.frames) {
    for (EntityBox& eb : frame) {
      const Point c = box_center(eb.box);
      eb.box = {c.x, c.y, c.x, c.y};
    }
  }
  return out;
}

nlohmann::ordered_json dense_to_json(const std::vector<DenseLayout>& scenes) {
  using nlohmann::ordered_json;
  ordered_json doc;
  doc["schema"] = kDenseSchema;
  ordered_json list = ordered_json::array();
  for (const DenseLayout& dense : scenes) {
    ordered_json s;
    s["index"] = dense.scene_index;
    s["frame_count"] = dense.frame_count;
    s["fps_hint"] = dense.fps_hint ? ordered_json(*dense.fps_hint) : ordered_json(nullptr);
    ordered_json frames = ordered_json::array();
    for (std::size_t f = 0; f < dense.frames.size(); ++f) {
      ordered_json boxes = ordered_json::array();
      for (const EntityBox& eb : dense.frames[f]) {
        boxes.push_back({{"id", eb.entity_id},
                         {"name", eb.name},
                         {"box", {eb.box.x0, eb.box.y0, eb.box.x1, eb.box.y1}}});
      }
      frames.push_back({{"frame", f}, {"boxes", std::move(boxes)}});
    }
    s["frames"] = std::move(frames);
    list.push_back(std::move(s));
  }
  doc["scenes"] = std::move(list);
  return doc;
}

std::vector<DenseLayout> dense_from_json(const nlohmann::ordered_json& doc) {
  std::vector<DenseLayout> out;
  try {
    for (const auto& s : doc.at("scenes")) {
      DenseLayout dense;
      dense.scene_index = s.at("index").get<int>();
      dense.frame_count = s.at("frame_count").get<int>();
      if (s.contains("fps_hint") && s["fps_hint"].is_number()) dense.fps_hint = s["fps_hint"].get<double>();
      for (const auto& f : s.at("frames")) {
        std::vector<EntityBox> boxes;
        for (const auto& b : f.at("boxes")) {
          const auto& v = b.at("box");
          boxes.push_back({b.at("id").get<std::string>(), b.value("name", std::string{}),
                           {v.at(0).get<double>(), v.at(1).get<double>(), v.at(2).get<double>(),
                            v.at(3).get<double>()}});
        }
        dense.frames.push_back(std::move(boxes));
      }
      if (static_cast<int>(dense.frames.size()) != dense.frame_count) {
        throw Error(ErrorCode::kParseError, "frame_count does not match frames", "scenes.frames");
      }
      out.push_back(std::move(dense));
    }
  } catch (const nlohmann::json::exception& e) {
    throw Error(ErrorCode::kParseError, std::string("dense layout: ") + e.what());
  }
  return out;
}

}  // namespace vdgpt::layout
