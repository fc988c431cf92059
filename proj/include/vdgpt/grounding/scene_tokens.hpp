#pragma once

// Per-frame grounding tokens for a planned scene, with entity embeddings
// shared through an EmbeddingCache keyed by entity name.

#include <vector>

#include "vdgpt/grounding/embedding.hpp"
#include "vdgpt/grounding/mlp.hpp"
#include "vdgpt/grounding/toy_model.hpp"
#include "vdgpt/layout.hpp"

namespace vdgpt::grounding {

struct SceneTokens {
  int scene_index = 1;
  /// One entry per dense frame, one token per entity in that frame.
  std::vector<std::vector<GroundingToken>> frames;
};

/// Tokens for the 1-based `scene_index`. The scene is densified to its
/// target frame count first.
SceneTokens tokens_for_scene(const VideoPlan& plan, int scene_index, EmbeddingCache& cache,
                             const GroundingMlpParams<double>& params,
                             TokenVariant variant = TokenVariant::kImageText);

SceneTokens tokens_for_layout(const layout::DenseLayout& dense, EmbeddingCache& cache,
                              const GroundingMlpParams<double>& params,
                              TokenVariant variant = TokenVariant::kImageText);

/// Dense frame feeding latent frame f: round(f * (dense - 1) / (latent - 1)).
int dense_frame_for_latent(int latent_frame, int latent_frames, int dense_frames);

/// Stacks tokens into per-latent-frame matrices and adds the text rows of
/// each distinct entity name in the scene.
SceneConditioning<double> conditioning_for(const SceneTokens& tokens, const layout::DenseLayout& dense,
                                           EmbeddingCache& cache, int latent_frames);

}  // namespace vdgpt::grounding
