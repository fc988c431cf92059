#pragma once

// Synthetic two-entity task (coloured rectangles on a noisy latent) and plain
// SGD over the grounding MLP and gated attention.

#include <functional>
#include <memory>
#include <vector>

#include "vdgpt/grounding/embedding.hpp"
#include "vdgpt/grounding/toy_model.hpp"

namespace vdgpt::grounding {

struct SyntheticExample {
  Eigen::MatrixXd z0;  // channels x cells
  std::vector<BoundingBox> boxes;
  int t = 1;
  Eigen::MatrixXd noise;
};

class SyntheticTask {
 public:
  explicit SyntheticTask(const ToyConfig& config, std::shared_ptr<const EmbeddingProvider> provider = nullptr,
                         std::vector<std::string> entity_names = {"red block", "green block"});

  SyntheticExample draw(Rng& rng) const;
  std::vector<SyntheticExample> draw_many(std::uint64_t seed, int count) const;

  const ToyConfig& config() const { return config_; }
  const std::vector<std::string>& entity_names() const { return names_; }
  const std::vector<EntityEmbedding>& embeddings() const { return embeddings_; }
  /// Text rows for cross-attention, one per entity.
  const Eigen::MatrixXd& text_tokens() const { return text_; }

 private:
  ToyConfig config_;
  std::vector<std::string> names_;
  std::vector<EntityEmbedding> embeddings_;
  std::vector<Eigen::Vector4d> colors_;
  Eigen::MatrixXd text_;
};

/// Mean squared error between predicted and true noise for one example;
/// gradients go to `grads` when given.
double example_loss(ToyDenoiser<double>& model, const SyntheticTask& task, const SyntheticExample& ex,
                    TokenVariant variant = TokenVariant::kImageText, ToyTrainable<double>* grads = nullptr,
                    double grad_scale = 1.0);

double eval_loss(ToyDenoiser<double>& model, const SyntheticTask& task, const std::vector<SyntheticExample>& set,
                 TokenVariant variant = TokenVariant::kImageText);

struct TrainConfig {
  int steps = 500;
  int batch = 4;
  double learning_rate = 0.5;
  std::uint64_t seed = 11;
  int eval_samples = 64;
  std::uint64_t eval_seed = 123;
  int eval_every = 100;
  TokenVariant variant = TokenVariant::kImageText;
};

struct TrainResult {
  double initial_loss = 0.0;
  double final_loss = 0.0;
  /// Mean batch loss at every step.
  std::vector<double> batch_losses;
  /// (step, eval loss) pairs.
  std::vector<std::pair<int, double>> eval_losses;
  ParameterReport parameters;

  double loss_ratio() const { return final_loss / initial_loss; }
};

/// Throws kTrainingDiverged (path "step N") on a non-finite loss or update.
TrainResult train_toy(ToyDenoiser<double>& model, const SyntheticTask& task, const TrainConfig& config = {},
                      const std::function<void(int, double)>& on_step = nullptr);

}  // namespace vdgpt::grounding
