#pragma once

#include <random>
#include <string>
#include <vector>

#include "vdgpt/plan.hpp"

namespace vdgpt::testing {

inline BoundingBox random_grid_box(std::mt19937_64& rng) {
  std::uniform_int_distribution<int> bin(0, 20);
  int a = bin(rng), b = bin(rng), c = bin(rng), d = bin(rng);
  if (a > b) std::swap(a, b);
  if (c > d) std::swap(c, d);
  return {a / 20.0, c / 20.0, b / 20.0, d / 20.0};
}

inline EntityTrack make_track(const std::string& name, int keyframes, std::mt19937_64& rng) {
  EntityTrack t;
  t.id = name;
  t.name = name;
  t.description = "a " + name;
  for (int k = 0; k < keyframes; ++k) t.keyframes.push_back({k, random_grid_box(rng)});
  return t;
}

/// Valid plan with `scenes` scenes drawn from a small name pool.
inline VideoPlan random_plan(std::mt19937_64& rng, int scenes = 3) {
  static const std::vector<std::string> pool = {"chef", "oven", "dog", "café table",
                                                "狗", "ball \"red\"", "chefé"};
  VideoPlan plan;
  plan.source_prompt = "make caraway cakes";
  std::uniform_int_distribution<std::size_t> pick(0, pool.size() - 1);
  for (int s = 1; s <= scenes; ++s) {
    SceneSpec scene;
    scene.index = s;
    scene.description = "scene " + std::to_string(s);
    scene.background = s % 2 ? "kitchen" : "garden";
    const std::string first = pool[pick(rng)];
    std::string second = pool[pick(rng)];
    scene.entities.push_back(make_track(first, scene.num_keyframes, rng));
    if (second != first) scene.entities.push_back(make_track(second, scene.num_keyframes, rng));
    for (const auto& e : scene.entities) plan.consistency.groups[e.name].push_back(s);
    plan.scenes.push_back(std::move(scene));
  }
  plan.alpha = {AlphaMode::kLlmDynamic, 0.2};
  plan.provenance.model = "mock";
  plan.provenance.created_at = "2026-01-01T00:00:00Z";
  plan.provenance.responses.push_back({"step1", 0, 1, "prompt\nwith lines", "```json\n{}\n```"});
  return plan;
}

}  // namespace vdgpt::testing
