#pragma once

// Grounding token h = MLP(P_img f_img, P_text f_text, Fourier(box)).

#include <cmath>
#include <numbers>
#include <string>

#include <Eigen/Dense>

#include "vdgpt/error.hpp"
#include "vdgpt/grounding/rng.hpp"
#include "vdgpt/layout.hpp"

namespace vdgpt::grounding {

template <typename Scalar>
using Mat = Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic>;
template <typename Scalar>
using Vec = Eigen::Matrix<Scalar, Eigen::Dynamic, 1>;

/// Which embedding slots feed the MLP; the others are zeroed.
enum class TokenVariant { kImageText, kImageOnly, kTextOnly };

struct MlpDims {
  int embed = 32;   // De
  int project = 16; // Dp
  int hidden = 64;
  int model = 32;   // Dh
  int bands = layout::kDefaultFourierBands;

  int input() const { return 2 * project + 8 * bands; }
};

template <typename Scalar>
struct GroundingMlpParams {
  Mat<Scalar> P_img;   // De x Dp
  Mat<Scalar> P_text;  // De x Dp
  Mat<Scalar> W1;      // (2Dp + 8L) x hidden
  Vec<Scalar> b1;
  Mat<Scalar> W2;      // hidden x Dh
  Vec<Scalar> b2;
  int bands = layout::kDefaultFourierBands;

  static GroundingMlpParams zeros(const MlpDims& d) {
    GroundingMlpParams p;
    p.P_img = Mat<Scalar>::Zero(d.embed, d.project);
    p.P_text = Mat<Scalar>::Zero(d.embed, d.project);
    p.W1 = Mat<Scalar>::Zero(d.input(), d.hidden);
    p.b1 = Vec<Scalar>::Zero(d.hidden);
    p.W2 = Mat<Scalar>::Zero(d.hidden, d.model);
    p.b2 = Vec<Scalar>::Zero(d.model);
    p.bands = d.bands;
    return p;
  }

  /// Fan-in scaled normal weights, zero biases.
  static GroundingMlpParams random(const MlpDims& d, Rng& rng) {
    GroundingMlpParams p = zeros(d);
    p.P_img = rng.normal_matrix<Scalar>(d.embed, d.project, 1.0 / std::sqrt(double(d.embed)));
    p.P_text = rng.normal_matrix<Scalar>(d.embed, d.project, 1.0 / std::sqrt(double(d.embed)));
    p.W1 = rng.normal_matrix<Scalar>(d.input(), d.hidden, 1.0 / std::sqrt(double(d.input())));
    p.W2 = rng.normal_matrix<Scalar>(d.hidden, d.model, 1.0 / std::sqrt(double(d.hidden)));
    return p;
  }

  Eigen::Index parameter_count() const {
    return P_img.size() + P_text.size() + W1.size() + b1.size() + W2.size() + b2.size();
  }

  GroundingMlpParams& operator+=(const GroundingMlpParams& o) {
    P_img += o.P_img;
    P_text += o.P_text;
    W1 += o.W1;
    b1 += o.b1;
    W2 += o.W2;
    b2 += o.b2;
    return *this;
  }

  GroundingMlpParams& operator*=(Scalar s) {
    P_img *= s;
    P_text *= s;
    W1 *= s;
    b1 *= s;
    W2 *= s;
    b2 *= s;
    return *this;
  }
};

struct GroundingToken {
  std::string entity_id;
  Eigen::VectorXd vector;
};

template <typename Scalar>
struct GroundingMlpCache {
  Vec<Scalar> img;
  Vec<Scalar> txt;
  Vec<Scalar> x;    // MLP input
  Vec<Scalar> pre;  // W1^T x + b1
  Vec<Scalar> act;  // gelu(pre)
  TokenVariant variant = TokenVariant::kImageText;
};

/// tanh-approximated GELU and its derivative.
template <typename Scalar>
Scalar gelu(Scalar x) {
  const Scalar c = Scalar(std::sqrt(2.0 / std::numbers::pi));
  return Scalar(0.5) * x * (Scalar(1) + std::tanh(c * (x + Scalar(0.044715) * x * x * x)));
}

template <typename Scalar>
Scalar gelu_grad(Scalar x) {
  const Scalar c = Scalar(std::sqrt(2.0 / std::numbers::pi));
  const Scalar u = c * (x + Scalar(0.044715) * x * x * x);
  const Scalar th = std::tanh(u);
  const Scalar du = c * (Scalar(1) + Scalar(3 * 0.044715) * x * x);
  return Scalar(0.5) * (Scalar(1) + th) + Scalar(0.5) * x * (Scalar(1) - th * th) * du;
}

template <typename Scalar>
Vec<Scalar> grounding_token(const Vec<Scalar>& img, const Vec<Scalar>& txt, const BoundingBox& box,
                            const GroundingMlpParams<Scalar>& p,
                            TokenVariant variant = TokenVariant::kImageText,
                            GroundingMlpCache<Scalar>* cache = nullptr) {
  if (img.size() != p.P_img.rows() || txt.size() != p.P_text.rows()) {
    throw Error(ErrorCode::kShapeError, "embedding dimension does not match the projection");
  }
  const Eigen::Index dp = p.P_img.cols();
  if (p.W1.rows() != 2 * dp + 8 * p.bands || p.W2.rows() != p.W1.cols() || p.b1.size() != p.W1.cols() ||
      p.b2.size() != p.W2.cols() || p.P_text.cols() != dp) {
    throw Error(ErrorCode::kShapeError, "inconsistent grounding MLP shapes");
  }
  Vec<Scalar> x(p.W1.rows());
  if (variant == TokenVariant::kTextOnly) {
    x.head(dp).setZero();
  } else {
    x.head(dp).noalias() = p.P_img.transpose() * img;
  }
  if (variant == TokenVariant::kImageOnly) {
    x.segment(dp, dp).setZero();
  } else {
    x.segment(dp, dp).noalias() = p.P_text.transpose() * txt;
  }
  x.tail(8 * p.bands) = layout::fourier_features<Scalar>(box, p.bands);
  Vec<Scalar> pre = p.W1.transpose() * x + p.b1;
  Vec<Scalar> act = pre.unaryExpr([](Scalar v) { return gelu(v); });
  Vec<Scalar> out = p.W2.transpose() * act + p.b2;
  if (cache) {
    cache->img = img;
    cache->txt = txt;
    cache->x = std::move(x);
    cache->pre = std::move(pre);
    cache->act = std::move(act);
    cache->variant = variant;
  }
  return out;
}

/// Accumulates parameter gradients of <dout, token> into `grads`.
template <typename Scalar>
void grounding_token_backward(const Vec<Scalar>& dout, const GroundingMlpCache<Scalar>& c,
                              const GroundingMlpParams<Scalar>& p, GroundingMlpParams<Scalar>& grads) {
  const Eigen::Index dp = p.P_img.cols();
  grads.b2 += dout;
  grads.W2.noalias() += c.act * dout.transpose();
  const Vec<Scalar> dact = p.W2 * dout;
  const Vec<Scalar> dpre =
      dact.cwiseProduct(c.pre.unaryExpr([](Scalar v) { return gelu_grad(v); }));
  grads.b1 += dpre;
  grads.W1.noalias() += c.x * dpre.transpose();
  const Vec<Scalar> dx = p.W1 * dpre;
  if (c.variant != TokenVariant::kTextOnly) grads.P_img.noalias() += c.img * dx.head(dp).transpose();
  if (c.variant != TokenVariant::kImageOnly) grads.P_text.noalias() += c.txt * dx.segment(dp, dp).transpose();
}

}  // namespace vdgpt::grounding
