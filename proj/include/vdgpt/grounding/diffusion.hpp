#pragma once

// Variance schedule, latent grids and the closed-form forward process.

#include <cmath>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "vdgpt/error.hpp"
#include "vdgpt/grounding/mlp.hpp"
#include "vdgpt/grounding/rng.hpp"

namespace vdgpt::grounding {

struct DenoiseSchedule {
  /// beta_t for t = 1..T, stored at index t-1.
  std::vector<double> betas;
  std::vector<double> alpha_bar;
  /// Reverse steps N used by the sampler and how many of them are guided.
  int sampling_steps = 50;
  int guided_steps = 0;

  int train_steps() const { return static_cast<int>(betas.size()); }

  /// alpha_bar at step t in [1, T]; 1 at t = 0.
  double alpha_bar_at(int t) const {
    if (t == 0) return 1.0;
    check(t);
    return alpha_bar[static_cast<std::size_t>(t - 1)];
  }
  double beta_at(int t) const {
    check(t);
    return betas[static_cast<std::size_t>(t - 1)];
  }

  void check(int t) const {
    if (t < 1 || t > train_steps()) {
      throw Error(ErrorCode::kStepError,
                  "step " + std::to_string(t) + " outside [1, " + std::to_string(train_steps()) + "]");
    }
  }

  /// Linear betas from beta_start to beta_end over T steps.
  static DenoiseSchedule linear(int T = 1000, double beta_start = 1e-4, double beta_end = 2e-2) {
    if (T < 1) throw Error(ErrorCode::kArgError, "schedule needs at least one step");
    DenoiseSchedule s;
    s.betas.resize(static_cast<std::size_t>(T));
    s.alpha_bar.resize(static_cast<std::size_t>(T));
    double prod = 1.0;
    for (int i = 0; i < T; ++i) {
      const double b = T == 1 ? beta_start : beta_start + (beta_end - beta_start) * i / (T - 1);
      s.betas[static_cast<std::size_t>(i)] = b;
      prod *= 1.0 - b;
      s.alpha_bar[static_cast<std::size_t>(i)] = prod;
    }
    return s;
  }

  /// Sets N and guided_steps = round(alpha * N).
  DenoiseSchedule& with_sampling(int steps, double alpha) {
    if (steps < 1 || steps > train_steps()) throw Error(ErrorCode::kArgError, "sampling steps outside [1, T]");
    if (!(alpha >= 0.0 && alpha <= 1.0)) throw Error(ErrorCode::kArgError, "alpha outside [0, 1]");
    sampling_steps = steps;
    guided_steps = static_cast<int>(std::lround(alpha * steps));
    return *this;
  }
};

/// frames x channels x height x width; each frame is stored as a
/// channels x (height*width) matrix, cells row-major.
template <typename Scalar>
struct LatentGrid {
  int channels = 4;
  int height = 8;
  int width = 8;
  std::vector<Mat<Scalar>> frames;

  static LatentGrid zeros(int frames, int channels = 4, int height = 8, int width = 8) {
    LatentGrid g{channels, height, width, {}};
    g.frames.assign(static_cast<std::size_t>(frames), Mat<Scalar>::Zero(channels, height * width));
    return g;
  }

  static LatentGrid noise(Rng& rng, int frames, int channels = 4, int height = 8, int width = 8) {
    LatentGrid g{channels, height, width, {}};
    for (int f = 0; f < frames; ++f) g.frames.push_back(rng.normal_matrix<Scalar>(channels, height * width));
    return g;
  }

  int frame_count() const { return static_cast<int>(frames.size()); }

  bool same_shape(const LatentGrid& o) const {
    return channels == o.channels && height == o.height && width == o.width && frames.size() == o.frames.size();
  }

  Scalar max_abs_diff(const LatentGrid& o) const {
    Scalar m = Scalar(0);
    for (std::size_t f = 0; f < frames.size(); ++f) m = std::max(m, (frames[f] - o.frames[f]).cwiseAbs().maxCoeff());
    return m;
  }

  bool operator==(const LatentGrid& o) const {
    if (!same_shape(o)) return false;
    for (std::size_t f = 0; f < frames.size(); ++f)
      if (frames[f] != o.frames[f]) return false;
    return true;
  }
};

template <typename Scalar>
void check_same_shape(const LatentGrid<Scalar>& a, const LatentGrid<Scalar>& b) {
  if (!a.same_shape(b)) throw Error(ErrorCode::kShapeError, "latent grids differ in shape");
}

/// z_t = sqrt(alpha_bar_t) z0 + sqrt(1 - alpha_bar_t) noise.
template <typename Scalar>
LatentGrid<Scalar> forward_diffuse(const LatentGrid<Scalar>& z0, int t, const DenoiseSchedule& s,
                                   const LatentGrid<Scalar>& noise) {
  check_same_shape(z0, noise);
  s.check(t);
  const double ab = s.alpha_bar_at(t);
  LatentGrid<Scalar> out = z0;
  for (std::size_t f = 0; f < out.frames.size(); ++f) {
    out.frames[f] = Scalar(std::sqrt(ab)) * z0.frames[f] + Scalar(std::sqrt(1.0 - ab)) * noise.frames[f];
  }
  return out;
}

/// One step of q(z_t | z_{t-1}) = N(sqrt(1 - beta_t) z_{t-1}, beta_t I).
template <typename Scalar>
LatentGrid<Scalar> forward_step(const LatentGrid<Scalar>& prev, int t, const DenoiseSchedule& s,
                                const LatentGrid<Scalar>& noise) {
  check_same_shape(prev, noise);
  const double b = s.beta_at(t);
  LatentGrid<Scalar> out = prev;
  for (std::size_t f = 0; f < out.frames.size(); ++f) {
    out.frames[f] = Scalar(std::sqrt(1.0 - b)) * prev.frames[f] + Scalar(std::sqrt(b)) * noise.frames[f];
  }
  return out;
}

/// Mean scale and variance of z_t given z0 after composing t single steps;
/// equals (sqrt(alpha_bar_t), 1 - alpha_bar_t) in exact arithmetic.
inline std::pair<double, double> composed_step_moments(int t, const DenoiseSchedule& s) {
  s.check(t);
  double mean = 1.0, var = 0.0;
  for (int k = 1; k <= t; ++k) {
    const double b = s.beta_at(k);
    mean *= std::sqrt(1.0 - b);
    var = (1.0 - b) * var + b;
  }
  return {mean, var};
}

}  // namespace vdgpt::grounding
