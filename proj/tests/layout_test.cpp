#include <cmath>
#include <numbers>
#include <random>

#include <gtest/gtest.h>

#include "test_util.hpp"
#include "vdgpt/layout.hpp"

namespace vdgpt::layout {
namespace {

// Independent evaluator: keyframe k sits at time k/(K-1) on [0,1]; dense
// frame i samples time i/(T-1).
double reference_at(const std::vector<double>& values, double t) {
  const std::size_t n = values.size();
  const double u = t * static_cast<double>(n - 1);
  std::size_t k = static_cast<std::size_t>(std::floor(u));
  if (k >= n - 1) return values.back();
  const double w = u - static_cast<double>(k);
  return values[k] + w * (values[k + 1] - values[k]);
}

TEST(InterpolateLayouts, LinearMidpoint) {
  EntityTrack t;
  t.id = "a";
  t.keyframes = {{0, {0.0, 0.1, 0.2, 0.3}}, {8, {0.8, 0.1, 1.0, 0.3}}};
  const auto out = interpolate_layouts(t, 9);
  ASSERT_EQ(out.size(), 9u);
  EXPECT_NEAR(out[4].x0, 0.4, 1e-15);
}

TEST(InterpolateLayouts, NineToSixteenMatchesReferenceEvaluator) {
  std::mt19937_64 rng(99);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  double worst = 0.0;
  for (int trial = 0; trial < 1000; ++trial) {
    EntityTrack t;
    t.id = "e";
    std::vector<std::vector<double>> coords(4);
    for (int k = 0; k < 9; ++k) {
      const BoundingBox b{u(rng), u(rng), u(rng), u(rng)};
      t.keyframes.push_back({k, b});
      coords[0].push_back(b.x0);
      coords[1].push_back(b.y0);
      coords[2].push_back(b.x1);
      coords[3].push_back(b.y1);
    }
    const auto out = interpolate_layouts(t, 16);
    ASSERT_EQ(out.size(), 16u);
    EXPECT_EQ(out.front(), t.keyframes.front().box);
    EXPECT_EQ(out.back(), t.keyframes.back().box);
    for (int i = 0; i < 16; ++i) {
      const double time = i / 15.0;
      const double got[4] = {out[i].x0, out[i].y0, out[i].x1, out[i].y1};
      for (int c = 0; c < 4; ++c) worst = std::max(worst, std::abs(got[c] - reference_at(coords[c], time)));
    }
  }
  EXPECT_LT(worst, 1e-12);
}

TEST(InterpolateLayouts, ConstantTrackStaysConstant) {
  EntityTrack t;
  t.id = "c";
  for (int k = 0; k < 9; ++k) t.keyframes.push_back({k, {0.2, 0.3, 0.6, 0.7}});
  for (const auto& b : interpolate_layouts(t, 16)) EXPECT_EQ(b, (BoundingBox{0.2, 0.3, 0.6, 0.7}));
}

TEST(InterpolateLayouts, IdentityWhenTargetEqualsKeyframes) {
  std::mt19937_64 rng(3);
  const EntityTrack t = testing::make_track("x", 9, rng);
  const auto out = interpolate_layouts(t, 9);
  for (int k = 0; k < 9; ++k) EXPECT_EQ(out[k], t.keyframes[k].box);
}

TEST(InterpolateLayouts, MonotoneBetweenKeyframes) {
  std::mt19937_64 rng(5);
  const EntityTrack t = testing::make_track("m", 9, rng);
  const auto out = interpolate_layouts(t, 33);
  // keyframe k lands on dense frame 4k
  for (int k = 0; k + 1 < 9; ++k) {
    const double a = t.keyframes[k].box.x0, b = t.keyframes[k + 1].box.x0;
    for (int i = 4 * k; i < 4 * (k + 1); ++i) {
      if (b >= a) EXPECT_LE(out[i].x0, out[i + 1].x0 + 1e-15);
      else EXPECT_GE(out[i].x0 + 1e-15, out[i + 1].x0);
    }
  }
}

TEST(InterpolateLayouts, SingleKeyframeHeldWithDiagnostic) {
  EntityTrack t;
  t.id = "solo";
  t.keyframes = {{0, {0.1, 0.1, 0.2, 0.2}}};
  std::vector<Diagnostic> diags;
  const auto out = interpolate_layouts(t, 16, &diags);
  ASSERT_EQ(out.size(), 16u);
  for (const auto& b : out) EXPECT_EQ(b, t.keyframes[0].box);
  ASSERT_EQ(diags.size(), 1u);
  EXPECT_EQ(diags[0].code, "SINGLE_KEYFRAME");
}

TEST(InterpolateLayouts, EmptyTrackThrows) {
  EntityTrack t;
  try {
    interpolate_layouts(t, 16);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::kEmptyTrack);
  }
}

TEST(InterpolateLayouts, OutputsAreNotRequantized) {
  EntityTrack t;
  t.id = "q";
  t.keyframes = {{0, {0.0, 0.0, 0.05, 0.05}}, {1, {0.05, 0.0, 0.1, 0.05}}};
  const auto out = interpolate_layouts(t, 4);
  EXPECT_NEAR(out[1].x0, 0.05 / 3.0, 1e-15);
}

TEST(DensifyScene, EveryEntityInEveryFrame) {
  std::mt19937_64 rng(8);
  const VideoPlan plan = testing::random_plan(rng, 2);
  const auto dense = densify_plan(plan);
  ASSERT_EQ(dense.size(), 2u);
  for (std::size_t s = 0; s < dense.size(); ++s) {
    EXPECT_EQ(dense[s].frame_count, 16);
    ASSERT_EQ(dense[s].frames.size(), 16u);
    for (const auto& frame : dense[s].frames) EXPECT_EQ(frame.size(), plan.scenes[s].entities.size());
  }
  const auto back = dense_from_json(dense_to_json(dense));
  EXPECT_EQ(back, dense);
}

TEST(FourierFeatures, ZeroBox) {
  const auto f = fourier_features<double>({0, 0, 0, 0}, 2);
  ASSERT_EQ(f.size(), 16);
  for (int i = 0; i < 16; i += 2) {
    EXPECT_EQ(f(i), 0.0);
    EXPECT_EQ(f(i + 1), 1.0);
  }
}

TEST(FourierFeatures, UnitBox) {
  const auto f = fourier_features<double>({1, 1, 1, 1}, 1);
  ASSERT_EQ(f.size(), 8);
  for (int i = 0; i < 8; i += 2) {
    EXPECT_NEAR(f(i), 0.0, 1e-12);
    EXPECT_NEAR(f(i + 1), -1.0, 1e-12);
  }
}

TEST(FourierFeatures, LayoutCoordinateMajorSinFirst) {
  const BoundingBox b{0.1, 0.2, 0.3, 0.4};
  const auto f = fourier_features<double>(b, 3);
  const double c[4] = {0.1, 0.2, 0.3, 0.4};
  for (int i = 0; i < 4; ++i) {
    for (int j = 0; j < 3; ++j) {
      const double w = std::ldexp(std::numbers::pi, j);
      EXPECT_DOUBLE_EQ(f(i * 6 + 2 * j), std::sin(w * c[i]));
      EXPECT_DOUBLE_EQ(f(i * 6 + 2 * j + 1), std::cos(w * c[i]));
    }
  }
}

TEST(FourierFeatures, LipschitzUnderQuantization) {
  std::mt19937_64 rng(21);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  const int L = 8;
  const double lipschitz = std::ldexp(std::numbers::pi, L - 1);
  for (int i = 0; i < 2000; ++i) {
    const BoundingBox b = quantize_box({u(rng), u(rng), u(rng), u(rng)});
    const BoundingBox raw{b.x0 + 0.01 * (u(rng) - 0.5), b.y0 + 0.01 * (u(rng) - 0.5),
                          b.x1 + 0.01 * (u(rng) - 0.5), b.y1 + 0.01 * (u(rng) - 0.5)};
    const BoundingBox q = quantize_box(raw);
    const double err = std::max({std::abs(q.x0 - raw.x0), std::abs(q.y0 - raw.y0), std::abs(q.x1 - raw.x1),
                                 std::abs(q.y1 - raw.y1)});
    const auto diff = (fourier_features<double>(q, L) - fourier_features<double>(raw, L)).cwiseAbs();
    EXPECT_LE(diff.maxCoeff(), lipschitz * err + 1e-12);
  }
}

TEST(FourierFeatures, FloatScalar) {
  const auto f = fourier_features<float>({0.25, 0.5, 0.75, 1.0});
  EXPECT_EQ(f.size(), 64);
  EXPECT_TRUE(f.allFinite());
}

TEST(BoxGeometry, CenterAndArea) {
  const Point c = box_center({0, 0, 1, 1});
  EXPECT_EQ(c.x, 0.5);
  EXPECT_EQ(c.y, 0.5);
  EXPECT_EQ(box_area({0, 0, 1, 1}), 1.0);
  EXPECT_EQ(box_area({0.2, 0.2, 0.2, 0.8}), 0.0);
}

TEST(BoxGeometry, QuantizedAreaCloseOnGridSweep) {
  double worst = 0.0;
  const int n = 40;
  for (int a = 0; a <= n; ++a)
    for (int b = a; b <= n; ++b)
      for (int c = 0; c <= n; c += 3)
        for (int d = c; d <= n; d += 3) {
          const BoundingBox box{a / double(n), c / double(n), b / double(n), d / double(n)};
          if (box.x1 - box.x0 < 0.1 || box.y1 - box.y0 < 0.1) continue;
          worst = std::max(worst, std::abs(box_area(quantize_box(box)) - box_area(box)));
        }
  EXPECT_LT(worst, 0.1);
}

TEST(CenterPointLayout, DegenerateAtCenterAndIdempotent) {
  std::mt19937_64 rng(31);
  const VideoPlan plan = testing::random_plan(rng, 1);
  const DenseLayout dense = densify_scene(plan.scenes[0]);
  const DenseLayout pts = to_center_point_layout(dense);
  ASSERT_EQ(pts.frames.size(), dense.frames.size());
  for (std::size_t f = 0; f < dense.frames.size(); ++f) {
    for (std::size_t e = 0; e < dense.frames[f].size(); ++e) {
      const auto& p = pts.frames[f][e];
      EXPECT_EQ(p.entity_id, dense.frames[f][e].entity_id);
      EXPECT_EQ(box_area(p.box), 0.0);
      const Point c = box_center(dense.frames[f][e].box);
      EXPECT_EQ(p.box.x0, c.x);
      EXPECT_EQ(p.box.y1, c.y);
    }
  }
  EXPECT_EQ(to_center_point_layout(pts), pts);
}

}  // namespace
}  // namespace vdgpt::layout
