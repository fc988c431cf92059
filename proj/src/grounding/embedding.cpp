#include "vdgpt/grounding/embedding.hpp"

#include "vdgpt/grounding/rng.hpp"

namespace vdgpt::grounding {

HashEmbeddingProvider::HashEmbeddingProvider(int dim, std::uint64_t seed) : dim_(dim), seed_(seed) {
  if (dim < 1) throw Error(ErrorCode::kArgError, "embedding dimension must be positive");
  Rng rng(seed ^ 0x5052494F52ULL);
  const Eigen::MatrixXd g = rng.normal_matrix(dim, dim);
  Eigen::HouseholderQR<Eigen::MatrixXd> qr(g);
  prior_ = qr.householderQ() * Eigen::MatrixXd::Identity(dim, dim);
}

Eigen::VectorXd HashEmbeddingProvider::unit_from_hash(const std::string& key) const {
  Rng rng(fnv1a64(key) ^ (seed_ * 0x9E3779B97F4A7C15ULL));
  Eigen::VectorXd v(dim_);
  for (int i = 0; i < dim_; ++i) v(i) = rng.normal();
  return v / v.norm();
}

EmbeddingVector HashEmbeddingProvider::embed_text(const std::string& text) const {
  return {unit_from_hash("text:" + text), EmbeddingKind::kText};
}

EmbeddingVector HashEmbeddingProvider::embed_image_crop(const ImageCrop& crop) const {
  const BoundingBox q = quantize_box(crop.box);
  const std::string key = "crop:" + crop.source + ":" + std::to_string(q.x0) + "," + std::to_string(q.y0) + "," +
                          std::to_string(q.x1) + "," + std::to_string(q.y1);
  return {unit_from_hash(key), EmbeddingKind::kImage};
}

EmbeddingVector HashEmbeddingProvider::prior_text_to_image(const EmbeddingVector& text) const {
  if (text.kind != EmbeddingKind::kText) throw Error(ErrorCode::kShapeError, "prior expects a text embedding");
  if (text.values.size() != dim_) throw Error(ErrorCode::kShapeError, "embedding dimension mismatch");
  return {prior_ * text.values, EmbeddingKind::kImage};
}

const EntityEmbedding& EmbeddingCache::get(const std::string& name) {
  std::lock_guard lock(mutex_);
  auto it = entries_.find(name);
  if (it != entries_.end()) return *it->second;
  auto entry = std::make_unique<EntityEmbedding>();
  entry->text = provider_->embed_text(name);
  entry->image = provider_->prior_text_to_image(entry->text);
  ++computations_;
  return *entries_.emplace(name, std::move(entry)).first->second;
}

int EmbeddingCache::computations() const {
  std::lock_guard lock(mutex_);
  return computations_;
}

}  // namespace vdgpt::grounding
