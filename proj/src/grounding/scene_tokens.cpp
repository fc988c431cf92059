#include "vdgpt/grounding/scene_tokens.hpp"

#include <cmath>
#include <set>

namespace vdgpt::grounding {

SceneTokens tokens_for_layout(const layout::DenseLayout& dense, EmbeddingCache& cache,
                              const GroundingMlpParams<double>& params, TokenVariant variant) {
  SceneTokens out;
  out.scene_index = dense.scene_index;
  for (const auto& frame : dense.frames) {
    std::vector<GroundingToken> tokens;
    for (const auto& eb : frame) {
      const EntityEmbedding& emb = cache.get(eb.name.empty() ? eb.entity_id : eb.name);
      tokens.push_back({eb.entity_id, grounding_token<double>(emb.image.values, emb.text.values, eb.box, params, variant)});
    }
    out.frames.push_back(std::move(tokens));
  }
  return out;
}

SceneTokens tokens_for_scene(const VideoPlan& plan, int scene_index, EmbeddingCache& cache,
                             const GroundingMlpParams<double>& params, TokenVariant variant) {
  if (scene_index < 1 || scene_index > static_cast<int>(plan.scenes.size())) {
    throw Error(ErrorCode::kArgError, "scene " + std::to_string(scene_index) + " not in plan");
  }
  return tokens_for_layout(layout::densify_scene(plan.scenes[static_cast<std::size_t>(scene_index - 1)]), cache,
                           params, variant);
}

int dense_frame_for_latent(int latent_frame, int latent_frames, int dense_frames) {
  if (latent_frames <= 1 || dense_frames <= 1) return 0;
  return static_cast<int>(std::lround(double(latent_frame) * (dense_frames - 1) / (latent_frames - 1)));
}

SceneConditioning<double> conditioning_for(const SceneTokens& tokens, const layout::DenseLayout& dense,
                                           EmbeddingCache& cache, int latent_frames) {
  SceneConditioning<double> cond;
  const int n = static_cast<int>(tokens.frames.size());
  for (int f = 0; f < latent_frames && n > 0; ++f) {
    const auto& row = tokens.frames[static_cast<std::size_t>(dense_frame_for_latent(f, latent_frames, n))];
    Eigen::MatrixXd g(static_cast<Eigen::Index>(row.size()), row.empty() ? 0 : row[0].vector.size());
    for (std::size_t i = 0; i < row.size(); ++i) g.row(static_cast<Eigen::Index>(i)) = row[i].vector.transpose();
    cond.grounding.push_back(std::move(g));
  }
  std::vector<std::string> names;
  std::set<std::string> seen;
  for (const auto& frame : dense.frames) {
    for (const auto& eb : frame) {
      const std::string key = eb.name.empty() ? eb.entity_id : eb.name;
      if (seen.insert(key).second) names.push_back(key);
    }
  }
  const int de = cache.provider().dim();
  cond.text.resize(static_cast<Eigen::Index>(names.size()), de);
  for (std::size_t i = 0; i < names.size(); ++i) {
    cond.text.row(static_cast<Eigen::Index>(i)) = cache.get(names[i]).text.values.transpose();
  }
  return cond;
}

}  // namespace vdgpt::grounding
