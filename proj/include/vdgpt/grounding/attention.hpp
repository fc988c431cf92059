#pragma once

// Scaled dot-product attention over token rows, the gated grounding
// self-attention and the guided 2D attention block, each with a backward pass.

#include <cmath>

#include <Eigen/Dense>

#include "vdgpt/error.hpp"
#include "vdgpt/grounding/mlp.hpp"
#include "vdgpt/grounding/rng.hpp"

namespace vdgpt::grounding {

template <typename Scalar>
struct AttentionParams {
  Mat<Scalar> Wq, Wk, Wv, Wo;  // D x D

  /// q/k/v ~ N(0, 1/D); the output matrix uses `out_scale`/sqrt(D).
  static AttentionParams random(int d, Rng& rng, double out_scale = 1.0) {
    const double s = 1.0 / std::sqrt(double(d));
    return {rng.normal_matrix<Scalar>(d, d, s), rng.normal_matrix<Scalar>(d, d, s),
            rng.normal_matrix<Scalar>(d, d, s), rng.normal_matrix<Scalar>(d, d, out_scale * s)};
  }

  static AttentionParams zeros(int d) {
    return {Mat<Scalar>::Zero(d, d), Mat<Scalar>::Zero(d, d), Mat<Scalar>::Zero(d, d), Mat<Scalar>::Zero(d, d)};
  }

  Eigen::Index dim() const { return Wq.rows(); }
  Eigen::Index parameter_count() const { return Wq.size() + Wk.size() + Wv.size() + Wo.size(); }

  AttentionParams& operator+=(const AttentionParams& o) {
    Wq += o.Wq;
    Wk += o.Wk;
    Wv += o.Wv;
    Wo += o.Wo;
    return *this;
  }
  AttentionParams& operator*=(Scalar s) {
    Wq *= s;
    Wk *= s;
    Wv *= s;
    Wo *= s;
    return *this;
  }
};

template <typename Scalar>
struct AttentionCache {
  Mat<Scalar> X, Y, Q, K, V, A, H;
};

template <typename Scalar>
void check_tokens(const Mat<Scalar>& tokens, Eigen::Index dim, const char* what) {
  if (tokens.cols() != dim) {
    throw Error(ErrorCode::kShapeError, std::string(what) + " tokens have width " + std::to_string(tokens.cols()) +
                                            ", expected " + std::to_string(dim));
  }
}

/// Rows of X attend over rows of Y: softmax(X Wq (Y Wk)^T / sqrt(D)) Y Wv Wo.
template <typename Scalar>
Mat<Scalar> attention(const Mat<Scalar>& X, const Mat<Scalar>& Y, const AttentionParams<Scalar>& p,
                      AttentionCache<Scalar>* cache = nullptr) {
  const Eigen::Index d = p.dim();
  check_tokens(X, d, "query");
  check_tokens(Y, d, "key/value");
  Mat<Scalar> Q = X * p.Wq;
  Mat<Scalar> K = Y * p.Wk;
  Mat<Scalar> V = Y * p.Wv;
  Mat<Scalar> A = (Q * K.transpose()) / Scalar(std::sqrt(double(d)));
  for (Eigen::Index i = 0; i < A.rows(); ++i) {
    const Scalar m = A.row(i).maxCoeff();
    A.row(i) = (A.row(i).array() - m).exp().matrix();
    A.row(i) /= A.row(i).sum();
  }
  Mat<Scalar> H = A * V;
  Mat<Scalar> out = H * p.Wo;
  if (cache) *cache = {X, Y, std::move(Q), std::move(K), std::move(V), std::move(A), std::move(H)};
  return out;
}

/// Accumulates parameter gradients; writes input gradients to dX / dY.
template <typename Scalar>
void attention_backward(const Mat<Scalar>& dOut, const AttentionCache<Scalar>& c, const AttentionParams<Scalar>& p,
                        AttentionParams<Scalar>& grads, Mat<Scalar>& dX, Mat<Scalar>& dY) {
  const Scalar scale = Scalar(1) / Scalar(std::sqrt(double(p.dim())));
  grads.Wo.noalias() += c.H.transpose() * dOut;
  const Mat<Scalar> dH = dOut * p.Wo.transpose();
  const Mat<Scalar> dA = dH * c.V.transpose();
  const Mat<Scalar> dV = c.A.transpose() * dH;
  Mat<Scalar> dS = c.A.cwiseProduct(dA);
  const Vec<Scalar> row = dS.rowwise().sum();
  dS -= c.A.cwiseProduct(row.replicate(1, dS.cols()));
  const Mat<Scalar> dQ = dS * c.K * scale;
  const Mat<Scalar> dK = dS.transpose() * c.Q * scale;
  grads.Wq.noalias() += c.X.transpose() * dQ;
  grads.Wk.noalias() += c.Y.transpose() * dK;
  grads.Wv.noalias() += c.Y.transpose() * dV;
  dX = dQ * p.Wq.transpose();
  dY = dK * p.Wk.transpose() + dV * p.Wv.transpose();
}

template <typename Scalar>
struct GatedAttentionParams {
  AttentionParams<Scalar> attn;
  Scalar gamma = Scalar(0);

  static GatedAttentionParams random(int d, Rng& rng) { return {AttentionParams<Scalar>::random(d, rng), Scalar(0)}; }
  static GatedAttentionParams zeros(int d) { return {AttentionParams<Scalar>::zeros(d), Scalar(0)}; }
  Eigen::Index parameter_count() const { return attn.parameter_count() + 1; }

  GatedAttentionParams& operator+=(const GatedAttentionParams& o) {
    attn += o.attn;
    gamma += o.gamma;
    return *this;
  }
  GatedAttentionParams& operator*=(Scalar s) {
    attn *= s;
    gamma *= s;
    return *this;
  }
};

template <typename Scalar>
struct GatedCache {
  AttentionCache<Scalar> attn;
  Mat<Scalar> attn_out;  // visual rows of the attention output
  Scalar gate = Scalar(0);
  Eigen::Index visual_rows = 0;
  bool skipped = true;
};

/// visual + tanh(gamma) * (attention of the visual rows over [visual; grounding]).
/// When tanh(gamma) is exactly zero the input is returned untouched.
template <typename Scalar>
Mat<Scalar> gated_self_attention(const Mat<Scalar>& visual, const Mat<Scalar>& grounding,
                                 const GatedAttentionParams<Scalar>& p, GatedCache<Scalar>* cache = nullptr) {
  const Eigen::Index d = p.attn.dim();
  check_tokens(visual, d, "visual");
  if (grounding.rows() > 0) check_tokens(grounding, d, "grounding");
  const Scalar gate = std::tanh(p.gamma);
  if (cache) {
    cache->gate = gate;
    cache->visual_rows = visual.rows();
    cache->skipped = gate == Scalar(0);
  }
  if (gate == Scalar(0)) return visual;
  Mat<Scalar> all(visual.rows() + grounding.rows(), d);
  all << visual, grounding;
  Mat<Scalar> a = attention(visual, all, p.attn, cache ? &cache->attn : nullptr);
  Mat<Scalar> out = visual + gate * a;
  if (cache) cache->attn_out = std::move(a);
  return out;
}

/// Gradients for the gated layer. Returns d(visual); d(grounding) goes to dG.
/// At tanh(gamma) == 0 only gamma receives a gradient, which needs the
/// attention output, so the forward is recomputed when the cache skipped it.
template <typename Scalar>
Mat<Scalar> gated_self_attention_backward(const Mat<Scalar>& dOut, const Mat<Scalar>& visual,
                                          const Mat<Scalar>& grounding, const GatedAttentionParams<Scalar>& p,
                                          GatedCache<Scalar>& c, GatedAttentionParams<Scalar>& grads,
                                          Mat<Scalar>& dG) {
  if (c.skipped) {
    Mat<Scalar> all(visual.rows() + grounding.rows(), p.attn.dim());
    all << visual, grounding;
    c.attn_out = attention(visual, all, p.attn, &c.attn);
  }
  grads.gamma += (Scalar(1) - c.gate * c.gate) * dOut.cwiseProduct(c.attn_out).sum();
  Mat<Scalar> dX, dY;
  const Mat<Scalar> dA = c.gate * dOut;
  attention_backward(dA, c.attn, p.attn, grads.attn, dX, dY);
  Mat<Scalar> dVisual = dOut + dX + dY.topRows(c.visual_rows);
  dG = dY.bottomRows(dY.rows() - c.visual_rows);
  return dVisual;
}

template <typename Scalar>
struct GuidedBlockParams {
  AttentionParams<Scalar> self_attn;
  GatedAttentionParams<Scalar> gated;
  AttentionParams<Scalar> cross_attn;
};

template <typename Scalar>
struct GuidedBlockCache {
  Mat<Scalar> v0, v1, v2, grounding;
  AttentionCache<Scalar> self_attn, cross_attn;
  GatedCache<Scalar> gated;
  bool guided = false;
  bool has_text = false;
};

/// self-attention -> gated grounding attention -> text cross-attention, each
/// residual. `guided == false` bypasses the gated layer; an empty text list
/// skips the cross-attention.
template <typename Scalar>
Mat<Scalar> guided_2d_attention(const Mat<Scalar>& latent, const Mat<Scalar>& grounding, const Mat<Scalar>& text,
                                const GuidedBlockParams<Scalar>& p, bool guided = true,
                                GuidedBlockCache<Scalar>* cache = nullptr) {
  Mat<Scalar> v1 = latent + attention(latent, latent, p.self_attn, cache ? &cache->self_attn : nullptr);
  Mat<Scalar> v2 = guided ? gated_self_attention(v1, grounding, p.gated, cache ? &cache->gated : nullptr) : v1;
  Mat<Scalar> v3 = v2;
  if (text.rows() > 0) v3 += attention(v2, text, p.cross_attn, cache ? &cache->cross_attn : nullptr);
  if (cache) {
    cache->v0 = latent;
    cache->v1 = std::move(v1);
    cache->v2 = std::move(v2);
    cache->grounding = grounding;
    cache->guided = guided;
    cache->has_text = text.rows() > 0;
  }
  return v3;
}

template <typename Scalar>
struct GuidedBlockGradients {
  GuidedBlockParams<Scalar> params;
  Mat<Scalar> d_latent, d_grounding, d_text;

  static GuidedBlockGradients zeros(int d) {
    return {{AttentionParams<Scalar>::zeros(d), GatedAttentionParams<Scalar>::zeros(d),
             AttentionParams<Scalar>::zeros(d)},
            {},
            {},
            {}};
  }
};

template <typename Scalar>
void guided_2d_attention_backward(const Mat<Scalar>& dOut, GuidedBlockCache<Scalar>& c,
                                  const GuidedBlockParams<Scalar>& p, GuidedBlockGradients<Scalar>& g) {
  Mat<Scalar> dv2 = dOut;
  g.d_text = Mat<Scalar>::Zero(0, p.cross_attn.dim());
  if (c.has_text) {
    Mat<Scalar> dX;
    attention_backward(dOut, c.cross_attn, p.cross_attn, g.params.cross_attn, dX, g.d_text);
    dv2 += dX;
  }
  Mat<Scalar> dv1;
  if (c.guided) {
    dv1 = gated_self_attention_backward(dv2, c.v1, c.grounding, p.gated, c.gated, g.params.gated, g.d_grounding);
  } else {
    dv1 = dv2;
    g.d_grounding = Mat<Scalar>::Zero(c.grounding.rows(), p.self_attn.dim());
  }
  Mat<Scalar> dX, dY;
  attention_backward(dv1, c.self_attn, p.self_attn, g.params.self_attn, dX, dY);
  g.d_latent = dv1 + dX + dY;
}

}  // namespace vdgpt::grounding
