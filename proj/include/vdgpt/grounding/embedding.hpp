#pragma once

// Entity embeddings: the provider interface standing in for CLIP text/image
// encoders and the unCLIP prior, a deterministic hash-based default, and a
// shared per-name cache.

#include <cstdint>
#include <map>
#include <memory>
#include <mutex>
#include <string>

#include <Eigen/Dense>

#include "vdgpt/plan.hpp"

namespace vdgpt::grounding {

enum class EmbeddingKind { kText, kImage };

struct EmbeddingVector {
  Eigen::VectorXd values;
  EmbeddingKind kind = EmbeddingKind::kText;
};

/// Opaque reference to an image region (frame source plus box).
struct ImageCrop {
  std::string source;
  BoundingBox box;
};

class EmbeddingProvider {
 public:
  virtual ~EmbeddingProvider() = default;
  virtual int dim() const = 0;
  virtual EmbeddingVector embed_text(const std::string& text) const = 0;
  virtual EmbeddingVector embed_image_crop(const ImageCrop& crop) const = 0;
  /// Maps a text embedding to the image-embedding space. SHAPE_ERROR when
  /// given anything but a text embedding of dim().
  virtual EmbeddingVector prior_text_to_image(const EmbeddingVector& text) const = 0;
};

/// Seeded FNV-1a hash of the string expands into a unit vector; the prior is a
/// fixed seeded orthogonal matrix.
class HashEmbeddingProvider : public EmbeddingProvider {
 public:
  explicit HashEmbeddingProvider(int dim = 32, std::uint64_t seed = 0);

  int dim() const override { return dim_; }
  EmbeddingVector embed_text(const std::string& text) const override;
  EmbeddingVector embed_image_crop(const ImageCrop& crop) const override;
  EmbeddingVector prior_text_to_image(const EmbeddingVector& text) const override;

  const Eigen::MatrixXd& prior_matrix() const { return prior_; }

 private:
  Eigen::VectorXd unit_from_hash(const std::string& key) const;

  int dim_;
  std::uint64_t seed_;
  Eigen::MatrixXd prior_;
};

struct EntityEmbedding {
  EmbeddingVector image;
  EmbeddingVector text;
};

/// Computes each name's (image, text) pair once and hands out the same
/// vectors afterwards. Thread-safe.
class EmbeddingCache {
 public:
  explicit EmbeddingCache(std::shared_ptr<const EmbeddingProvider> provider)
      : provider_(std::move(provider)) {}

  const EntityEmbedding& get(const std::string& name);
  int computations() const;
  const EmbeddingProvider& provider() const { return *provider_; }

 private:
  std::shared_ptr<const EmbeddingProvider> provider_;
  mutable std::mutex mutex_;
  std::map<std::string, std::unique_ptr<EntityEmbedding>> entries_;
  int computations_ = 0;
};

}  // namespace vdgpt::grounding
