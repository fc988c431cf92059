#pragma once

// Desk-scale noise predictor: a frozen backbone (input projection, spatial
// self-attention, text cross-attention, Wiener skip) with a trainable grounding
// MLP and gated self-attention.

#include <cmath>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "vdgpt/grounding/attention.hpp"
#include "vdgpt/grounding/diffusion.hpp"
#include "vdgpt/grounding/mlp.hpp"

namespace vdgpt::grounding {

/// Conditioning for one scene: grounding tokens per latent frame (rows of
/// width Dh) and text embeddings (rows of width De).
template <typename Scalar>
struct SceneConditioning {
  std::vector<Mat<Scalar>> grounding;
  Mat<Scalar> text;

  const Mat<Scalar>& grounding_for(int frame) const {
    static const Mat<Scalar> empty;
    if (grounding.empty()) return empty;
    return grounding[static_cast<std::size_t>(std::min<int>(frame, static_cast<int>(grounding.size()) - 1))];
  }
};

template <typename Scalar>
class Denoiser {
 public:
  virtual ~Denoiser() = default;
  /// Predicted noise for one latent frame (channels x cells) at step t.
  virtual Mat<Scalar> epsilon(const Mat<Scalar>& z, int t, int frame, const SceneConditioning<Scalar>& cond,
                              bool guided) = 0;
};

/// eps(z_t) = (z_t - sqrt(ab_t) z*) / sqrt(1 - ab_t): the exact noise for a
/// known clean target z*.
template <typename Scalar>
class OracleDenoiser : public Denoiser<Scalar> {
 public:
  OracleDenoiser(LatentGrid<Scalar> target, DenoiseSchedule schedule)
      : target_(std::move(target)), schedule_(std::move(schedule)) {}

  Mat<Scalar> epsilon(const Mat<Scalar>& z, int t, int frame, const SceneConditioning<Scalar>&, bool) override {
    const double ab = schedule_.alpha_bar_at(t);
    return (z - Scalar(std::sqrt(ab)) * target_.frames[static_cast<std::size_t>(frame)]) /
           Scalar(std::sqrt(1.0 - ab));
  }

 private:
  LatentGrid<Scalar> target_;
  DenoiseSchedule schedule_;
};

struct ToyConfig {
  int channels = 4;
  int height = 8;
  int width = 8;
  MlpDims mlp;
  /// Per-cell standard deviation of the synthetic data; sets the skip gain.
  double data_sigma = 0.3;
  int train_steps = 1000;
  std::uint64_t seed = 0;

  int cells() const { return height * width; }
  int input_dim() const { return channels + 32 + 8; }
};

template <typename Scalar>
struct ToyTrainable {
  GroundingMlpParams<Scalar> mlp;
  GatedAttentionParams<Scalar> gated;

  static ToyTrainable zeros(const ToyConfig& c) {
    return {GroundingMlpParams<Scalar>::zeros(c.mlp), GatedAttentionParams<Scalar>::zeros(c.mlp.model)};
  }
  Eigen::Index parameter_count() const { return mlp.parameter_count() + gated.parameter_count(); }
  ToyTrainable& operator+=(const ToyTrainable& o) {
    mlp += o.mlp;
    gated += o.gated;
    return *this;
  }
  ToyTrainable& operator*=(Scalar s) {
    mlp *= s;
    gated *= s;
    return *this;
  }
  bool all_finite() const {
    return mlp.P_img.allFinite() && mlp.P_text.allFinite() && mlp.W1.allFinite() && mlp.b1.allFinite() &&
           mlp.W2.allFinite() && mlp.b2.allFinite() && gated.attn.Wq.allFinite() && gated.attn.Wk.allFinite() &&
           gated.attn.Wv.allFinite() && gated.attn.Wo.allFinite() && std::isfinite(double(gated.gamma));
  }
};

template <typename Scalar>
struct ToyFrozen {
  Mat<Scalar> W_in;   // input_dim x Dh
  Mat<Scalar> W_out;  // Dh x C
  Mat<Scalar> P_ctx;  // De x Dh
  AttentionParams<Scalar> self_attn;
  AttentionParams<Scalar> cross_attn;

  Eigen::Index parameter_count() const {
    return W_in.size() + W_out.size() + P_ctx.size() + self_attn.parameter_count() + cross_attn.parameter_count();
  }
  bool operator==(const ToyFrozen& o) const {
    return W_in == o.W_in && W_out == o.W_out && P_ctx == o.P_ctx && self_attn.Wq == o.self_attn.Wq &&
           self_attn.Wk == o.self_attn.Wk && self_attn.Wv == o.self_attn.Wv && self_attn.Wo == o.self_attn.Wo &&
           cross_attn.Wq == o.cross_attn.Wq && cross_attn.Wk == o.cross_attn.Wk &&
           cross_attn.Wv == o.cross_attn.Wv && cross_attn.Wo == o.cross_attn.Wo;
  }
};

template <typename Scalar>
struct ToyCache {
  Mat<Scalar> z;
  int t = 0;
  GuidedBlockCache<Scalar> block;
};

struct ParameterReport {
  Eigen::Index trainable = 0;
  Eigen::Index frozen = 0;
  double trainable_fraction() const { return double(trainable) / double(trainable + frozen); }
};

template <typename Scalar>
class ToyDenoiser : public Denoiser<Scalar> {
 public:
  explicit ToyDenoiser(ToyConfig config = {}) : config_(config), schedule_(DenoiseSchedule::linear(config.train_steps)) {
    const int dh = config.mlp.model;
    Rng frozen_rng(config.seed);
    frozen_.W_in = frozen_rng.normal_matrix<Scalar>(config.input_dim(), dh, 1.0 / std::sqrt(double(config.input_dim())));
    frozen_.W_out = frozen_rng.normal_matrix<Scalar>(dh, config.channels, 0.05);
    frozen_.self_attn = AttentionParams<Scalar>::random(dh, frozen_rng, 0.1);
    frozen_.cross_attn = AttentionParams<Scalar>::random(dh, frozen_rng, 0.1);
    frozen_.P_ctx = frozen_rng.normal_matrix<Scalar>(config.mlp.embed, dh, 1.0 / std::sqrt(double(config.mlp.embed)));
    Rng trainable_rng(config.seed + 1);
    trainable_.mlp = GroundingMlpParams<Scalar>::random(config.mlp, trainable_rng);
    trainable_.gated = GatedAttentionParams<Scalar>::random(dh, trainable_rng);

    positional_.resize(config.cells(), 32);
    for (int y = 0; y < config.height; ++y) {
      for (int x = 0; x < config.width; ++x) {
        const double cx = (x + 0.5) / config.width, cy = (y + 0.5) / config.height;
        positional_.row(y * config.width + x) = layout::fourier_features<Scalar>({cx, cy, cx, cy}, 8).head(32).transpose();
      }
    }
  }

  const ToyConfig& config() const { return config_; }
  const DenoiseSchedule& schedule() const { return schedule_; }
  ToyFrozen<Scalar>& frozen() { return frozen_; }
  const ToyFrozen<Scalar>& frozen() const { return frozen_; }
  ToyTrainable<Scalar>& trainable() { return trainable_; }
  const ToyTrainable<Scalar>& trainable() const { return trainable_; }

  ParameterReport parameter_report() const { return {trainable_.parameter_count(), frozen_.parameter_count()}; }

  /// Number of forward passes that ran the gated grounding layer.
  long guided_calls() const { return guided_calls_; }
  void reset_counters() { guided_calls_ = 0; }

  Vec<Scalar> time_embedding(int t) const {
    Vec<Scalar> e(8);
    for (int k = 0; k < 4; ++k) {
      const double a = t * std::exp(-std::log(1000.0) * k / 4.0);
      e(k) = Scalar(std::sin(a));
      e(k + 4) = Scalar(std::cos(a));
    }
    return e;
  }

  /// Gain of the frozen skip path: the Wiener estimate of the noise in z_t
  /// when the clean latent has per-cell variance data_sigma^2.
  double skip_gain(int t) const {
    const double ab = schedule_.alpha_bar_at(t);
    const double s2 = config_.data_sigma * config_.data_sigma;
    return std::sqrt(1.0 - ab) / (ab * s2 + 1.0 - ab);
  }

  GuidedBlockParams<Scalar> block() const { return {frozen_.self_attn, trainable_.gated, frozen_.cross_attn}; }

  /// z: channels x cells. grounding: m x Dh. text: k x De.
  Mat<Scalar> forward(const Mat<Scalar>& z, int t, const Mat<Scalar>& grounding, const Mat<Scalar>& text,
                      bool guided, ToyCache<Scalar>* cache = nullptr) {
    if (z.rows() != config_.channels || z.cols() != config_.cells()) {
      throw Error(ErrorCode::kShapeError, "latent frame shape does not match the model");
    }
    if (text.rows() > 0 && text.cols() != config_.mlp.embed) {
      throw Error(ErrorCode::kShapeError, "text embedding width does not match the model");
    }
    Mat<Scalar> tokens(config_.cells(), config_.input_dim());
    tokens.leftCols(config_.channels) = z.transpose();
    tokens.middleCols(config_.channels, 32) = positional_;
    tokens.rightCols(8) = time_embedding(t).transpose().replicate(config_.cells(), 1);
    const Mat<Scalar> v = tokens * frozen_.W_in;
    const Mat<Scalar> ctx = text.rows() > 0 ? Mat<Scalar>(text * frozen_.P_ctx) : Mat<Scalar>(0, config_.mlp.model);
    const bool run_gate = guided && grounding.rows() > 0;
    if (run_gate) ++guided_calls_;
    const Mat<Scalar> g = grounding.rows() > 0 ? grounding : Mat<Scalar>(0, config_.mlp.model);
    const Mat<Scalar> h = guided_2d_attention(v, g, ctx, block(), run_gate, cache ? &cache->block : nullptr);
    if (cache) {
      cache->z = z;
      cache->t = t;
    }
    return (Scalar(skip_gain(t)) * z.transpose() + h * frozen_.W_out).transpose();
  }

  Mat<Scalar> epsilon(const Mat<Scalar>& z, int t, int frame, const SceneConditioning<Scalar>& cond,
                      bool guided) override {
    return forward(z, t, cond.grounding_for(frame), cond.text, guided);
  }

  /// Gradients of <dEps, eps> for the gated layer (accumulated into `grads`);
  /// returns the gradient with respect to the grounding token rows.
  Mat<Scalar> backward(const Mat<Scalar>& dEps, ToyCache<Scalar>& cache, GatedAttentionParams<Scalar>& grads) const {
    const Mat<Scalar> dh = dEps.transpose() * frozen_.W_out.transpose();
    auto g = GuidedBlockGradients<Scalar>::zeros(config_.mlp.model);
    guided_2d_attention_backward(dh, cache.block, block(), g);
    grads += g.params.gated;
    return g.d_grounding;
  }

 private:
  ToyConfig config_;
  DenoiseSchedule schedule_;
  ToyFrozen<Scalar> frozen_;
  ToyTrainable<Scalar> trainable_;
  Mat<Scalar> positional_;
  long guided_calls_ = 0;
};

}  // namespace vdgpt::grounding
