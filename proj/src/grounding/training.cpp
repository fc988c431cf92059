#include "vdgpt/grounding/training.hpp"

#include <cmath>

namespace vdgpt::grounding {

SyntheticTask::SyntheticTask(const ToyConfig& config, std::shared_ptr<const EmbeddingProvider> provider,
                             std::vector<std::string> entity_names)
    : config_(config), names_(std::move(entity_names)) {
  if (!provider) provider = std::make_shared<HashEmbeddingProvider>(config.mlp.embed, config.seed);
  if (provider->dim() != config.mlp.embed) throw Error(ErrorCode::kShapeError, "provider dimension mismatch");
  EmbeddingCache cache(provider);
  text_.resize(static_cast<Eigen::Index>(names_.size()), config.mlp.embed);
  for (std::size_t i = 0; i < names_.size(); ++i) {
    embeddings_.push_back(cache.get(names_[i]));
    text_.row(static_cast<Eigen::Index>(i)) = embeddings_.back().text.values.transpose();
  }
  const std::vector<Eigen::Vector4d> palette = {{4.0, 0.0, 2.0, 0.0}, {0.0, 4.0, 0.0, -2.0}};
  for (std::size_t i = 0; i < names_.size(); ++i) colors_.push_back(palette[i % palette.size()]);
  if (config.channels != 4) throw Error(ErrorCode::kShapeError, "synthetic task expects 4 latent channels");
}

SyntheticExample SyntheticTask::draw(Rng& rng) const {
  const double sigma = config_.data_sigma;
  const int w = config_.width, h = config_.height;
  SyntheticExample ex;
  ex.z0 = rng.normal_matrix<double>(config_.channels, config_.cells(), sigma);
  for (std::size_t i = 0; i < names_.size(); ++i) {
    const double bw = 0.25 + 0.35 * rng.uniform();
    const double bh = 0.25 + 0.35 * rng.uniform();
    const double x0 = (1.0 - bw) * rng.uniform();
    const double y0 = (1.0 - bh) * rng.uniform();
    const BoundingBox box{x0, y0, x0 + bw, y0 + bh};
    ex.boxes.push_back(box);
    for (int y = 0; y < h; ++y) {
      for (int x = 0; x < w; ++x) {
        const double cx = (x + 0.5) / w, cy = (y + 0.5) / h;
        if (cx < box.x0 || cx >= box.x1 || cy < box.y0 || cy >= box.y1) continue;
        for (int c = 0; c < config_.channels; ++c) ex.z0(c, y * w + x) = colors_[i](c) + sigma * rng.normal();
      }
    }
  }
  ex.t = rng.uniform_int(1, config_.train_steps);
  ex.noise = rng.normal_matrix<double>(config_.channels, config_.cells());
  return ex;
}

std::vector<SyntheticExample> SyntheticTask::draw_many(std::uint64_t seed, int count) const {
  Rng rng(seed);
  std::vector<SyntheticExample> out;
  for (int i = 0; i < count; ++i) out.push_back(draw(rng));
  return out;
}

double example_loss(ToyDenoiser<double>& model, const SyntheticTask& task, const SyntheticExample& ex,
                    TokenVariant variant, ToyTrainable<double>* grads, double grad_scale) {
  const auto& mlp = model.trainable().mlp;
  const std::size_t m = ex.boxes.size();
  std::vector<GroundingMlpCache<double>> caches(m);
  Eigen::MatrixXd g(static_cast<Eigen::Index>(m), model.config().mlp.model);
  for (std::size_t i = 0; i < m; ++i) {
    const auto& emb = task.embeddings()[i];
    g.row(static_cast<Eigen::Index>(i)) =
        grounding_token<double>(emb.image.values, emb.text.values, ex.boxes[i], mlp, variant, &caches[i]).transpose();
  }
  const double ab = model.schedule().alpha_bar_at(ex.t);
  const Eigen::MatrixXd zt = std::sqrt(ab) * ex.z0 + std::sqrt(1.0 - ab) * ex.noise;
  ToyCache<double> cache;
  const Eigen::MatrixXd eps = model.forward(zt, ex.t, g, task.text_tokens(), true, grads ? &cache : nullptr);
  const Eigen::MatrixXd diff = eps - ex.noise;
  const double loss = diff.squaredNorm() / double(diff.size());
  if (grads) {
    const Eigen::MatrixXd dEps = (2.0 * grad_scale / double(diff.size())) * diff;
    const Eigen::MatrixXd dG = model.backward(dEps, cache, grads->gated);
    for (std::size_t i = 0; i < m; ++i) {
      grounding_token_backward<double>(dG.row(static_cast<Eigen::Index>(i)).transpose(), caches[i], mlp, grads->mlp);
    }
  }
  return loss;
}

double eval_loss(ToyDenoiser<double>& model, const SyntheticTask& task, const std::vector<SyntheticExample>& set,
                 TokenVariant variant) {
  double total = 0.0;
  for (const auto& ex : set) total += example_loss(model, task, ex, variant);
  return set.empty() ? 0.0 : total / double(set.size());
}

TrainResult train_toy(ToyDenoiser<double>& model, const SyntheticTask& task, const TrainConfig& config,
                      const std::function<void(int, double)>& on_step) {
  if (config.steps < 0 || config.batch < 1) throw Error(ErrorCode::kArgError, "invalid training configuration");
  TrainResult result;
  result.parameters = model.parameter_report();
  const auto eval_set = task.draw_many(config.eval_seed, config.eval_samples);
  result.initial_loss = eval_loss(model, task, eval_set, config.variant);
  result.eval_losses.emplace_back(0, result.initial_loss);
  Rng rng(config.seed);
  for (int step = 1; step <= config.steps; ++step) {
    auto grads = ToyTrainable<double>::zeros(model.config());
    double batch_loss = 0.0;
    for (int b = 0; b < config.batch; ++b) {
      batch_loss += example_loss(model, task, task.draw(rng), config.variant, &grads, 1.0 / config.batch);
    }
    batch_loss /= config.batch;
    if (!std::isfinite(batch_loss) || !grads.all_finite()) {
      throw Error(ErrorCode::kTrainingDiverged, "non-finite loss during training", "step " + std::to_string(step));
    }
    grads *= -config.learning_rate;
    model.trainable() += grads;
    if (!model.trainable().all_finite()) {
      throw Error(ErrorCode::kTrainingDiverged, "non-finite parameters after update", "step " + std::to_string(step));
    }
    result.batch_losses.push_back(batch_loss);
    if (on_step) on_step(step, batch_loss);
    if (config.eval_every > 0 && step % config.eval_every == 0 && step != config.steps) {
      result.eval_losses.emplace_back(step, eval_loss(model, task, eval_set, config.variant));
    }
  }
  result.final_loss = config.steps == 0 ? result.initial_loss : eval_loss(model, task, eval_set, config.variant);
  if (config.steps > 0) result.eval_losses.emplace_back(config.steps, result.final_loss);
  return result;
}

}  // namespace vdgpt::grounding
