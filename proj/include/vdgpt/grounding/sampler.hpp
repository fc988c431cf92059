#pragma once

// Two-stage reverse sampler: the first guided_steps reverse steps run the
// gated grounding layer, the rest bypass it.

#include <cmath>
#include <string_view>
#include <vector>

#include "vdgpt/error.hpp"
#include "vdgpt/grounding/diffusion.hpp"
#include "vdgpt/grounding/toy_model.hpp"

namespace vdgpt::grounding {

enum class SamplerKind { kDdim, kPlms };

inline SamplerKind sampler_from_string(std::string_view s) {
  if (s == "ddim") return SamplerKind::kDdim;
  if (s == "plms") return SamplerKind::kPlms;
  throw Error(ErrorCode::kArgError, "unknown sampler '" + std::string(s) + "'");
}

/// Timesteps visited in reverse order: 1 + k*(T/N) for k = N-1 .. 0.
inline std::vector<int> sampling_timesteps(const DenoiseSchedule& s) {
  const int n = s.sampling_steps;
  if (n < 1 || n > s.train_steps()) throw Error(ErrorCode::kArgError, "sampling steps outside [1, T]");
  const int stride = s.train_steps() / n;
  std::vector<int> ts;
  for (int k = n - 1; k >= 0; --k) ts.push_back(1 + k * stride);
  return ts;
}

struct SamplerTrace {
  std::vector<int> timesteps;
  std::vector<bool> guided;

  int guided_count() const {
    int n = 0;
    for (bool g : guided) n += g;
    return n;
  }
};

/// Deterministic DDIM (eta = 0) or PLMS-style multistep reverse process, run
/// frame by frame from z_T.
template <typename Scalar>
LatentGrid<Scalar> denoise_sample(Denoiser<Scalar>& model, const DenoiseSchedule& s, const LatentGrid<Scalar>& z_T,
                                  const SceneConditioning<Scalar>& cond, SamplerKind kind = SamplerKind::kDdim,
                                  SamplerTrace* trace = nullptr) {
  if (s.guided_steps < 0 || s.guided_steps > s.sampling_steps) {
    throw Error(ErrorCode::kArgError, "guided steps outside [0, N]");
  }
  const std::vector<int> ts = sampling_timesteps(s);
  if (trace) {
    trace->timesteps = ts;
    trace->guided.clear();
    for (std::size_t i = 0; i < ts.size(); ++i) trace->guided.push_back(static_cast<int>(i) < s.guided_steps);
  }
  LatentGrid<Scalar> out = z_T;
  for (int f = 0; f < out.frame_count(); ++f) {
    Mat<Scalar> z = out.frames[static_cast<std::size_t>(f)];
    std::vector<Mat<Scalar>> history;
    for (std::size_t i = 0; i < ts.size(); ++i) {
      const int t = ts[i];
      const bool guided = static_cast<int>(i) < s.guided_steps;
      const double ab = s.alpha_bar_at(t);
      const double ab_prev = i + 1 < ts.size() ? s.alpha_bar_at(ts[i + 1]) : 1.0;
      const Mat<Scalar> eps = model.epsilon(z, t, f, cond, guided);
      Mat<Scalar> e = eps;
      if (kind == SamplerKind::kPlms) {
        const std::size_t h = history.size();
        if (h == 1) {
          e = (Scalar(3) * eps - history[0]) / Scalar(2);
        } else if (h == 2) {
          e = (Scalar(23) * eps - Scalar(16) * history[1] + Scalar(5) * history[0]) / Scalar(12);
        } else if (h >= 3) {
          e = (Scalar(55) * eps - Scalar(59) * history[h - 1] + Scalar(37) * history[h - 2] -
               Scalar(9) * history[h - 3]) /
              Scalar(24);
        }
        history.push_back(eps);
        if (history.size() > 3) history.erase(history.begin());
      }
      const Mat<Scalar> x0 = (z - Scalar(std::sqrt(1.0 - ab)) * e) / Scalar(std::sqrt(ab));
      z = Scalar(std::sqrt(ab_prev)) * x0 + Scalar(std::sqrt(1.0 - ab_prev)) * e;
    }
    out.frames[static_cast<std::size_t>(f)] = std::move(z);
  }
  return out;
}

}  // namespace vdgpt::grounding
