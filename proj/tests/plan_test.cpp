#include <cmath>
#include <limits>
#include <random>

#include <gtest/gtest.h>

#include "test_util.hpp"
#include "vdgpt/plan.hpp"
#include "vdgpt/plan_json.hpp"

namespace vdgpt {
namespace {

bool on_grid(double v) { return std::abs(v * 20.0 - std::round(v * 20.0)) < 1e-9; }

TEST(QuantizeBox, OnGridUnchanged) {
  EXPECT_EQ(quantize_box({0.0, 0.0, 1.0, 1.0}), (BoundingBox{0.0, 0.0, 1.0, 1.0}));
}

TEST(QuantizeBox, NearestMultiple) {
  const BoundingBox q = quantize_box({0.326, 0.1, 0.674, 0.9});
  EXPECT_NEAR(q.x0, 0.35, 1e-12);
  EXPECT_NEAR(q.y0, 0.1, 1e-12);
  EXPECT_NEAR(q.x1, 0.65, 1e-12);  // 13.48 bins
  EXPECT_NEAR(q.y1, 0.9, 1e-12);
}

TEST(QuantizeBox, InvertedPairCollapsesToMean) {
  const BoundingBox q = quantize_box({0.51, 0.2, 0.49, 0.8});
  EXPECT_NEAR(q.x0, 0.5, 1e-12);
  EXPECT_NEAR(q.x1, 0.5, 1e-12);
  EXPECT_NEAR(q.y0, 0.2, 1e-12);
  EXPECT_NEAR(q.y1, 0.8, 1e-12);
}

TEST(QuantizeBox, TiesRoundAwayFromZero) {
  EXPECT_NEAR(snap_to_grid(0.025), 0.05, 1e-12);
  EXPECT_NEAR(snap_to_grid(0.075), 0.10, 1e-12);
  EXPECT_NEAR(snap_to_grid(-0.025), -0.05, 1e-12);
}

TEST(QuantizeBox, NonFiniteRejected) {
  try {
    quantize_box({std::numeric_limits<double>::quiet_NaN(), 0, 1, 1});
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::kInvalidCoordinate);
  }
  EXPECT_THROW(quantize_box({0, 0, std::numeric_limits<double>::infinity(), 1}), Error);
}

// Adversarial sweep: out-of-range, inverted and near-tie coordinates.
TEST(QuantizeBox, InvariantsHoldOnAdversarialGrid) {
  std::vector<double> values;
  for (int i = -30; i <= 50; ++i) {
    values.push_back(i * 0.025);
    values.push_back(i * 0.025 + 1e-10);
    values.push_back(i * 0.025 - 1e-10);
  }
  std::size_t checked = 0;
  for (double a : values) {
    for (double b : values) {
      const BoundingBox q = quantize_box({a, 0.3, b, 0.7});
      ASSERT_TRUE(is_valid(q)) << a << " " << b;
      ASSERT_TRUE(on_grid(q.x0) && on_grid(q.x1)) << a << " " << b;
      ASSERT_EQ(quantize_box(q), q);
      ++checked;
    }
  }
  EXPECT_GT(checked, 50000u);
}

TEST(QuantizeBox, IdempotentOnRandomBoxes) {
  std::mt19937_64 rng(7);
  std::uniform_real_distribution<double> u(-0.2, 1.2);
  for (int i = 0; i < 10000; ++i) {
    const BoundingBox b{u(rng), u(rng), u(rng), u(rng)};
    const BoundingBox q = quantize_box(b);
    EXPECT_EQ(quantize_box(q), q);
    EXPECT_TRUE(is_valid(q));
  }
}

TEST(ValidatePlan, ValidPlanHasNoViolations) {
  std::mt19937_64 rng(1);
  const VideoPlan plan = testing::random_plan(rng, 4);
  const ValidationReport report = validate_plan(plan);
  EXPECT_TRUE(report.valid());
}

TEST(ValidatePlan, SevenKeyframesIsMissingKeyframes) {
  std::mt19937_64 rng(2);
  VideoPlan plan = testing::random_plan(rng, 3);
  plan.scenes[1].entities[0].keyframes.resize(7);
  const ValidationReport report = validate_plan(plan);
  ASSERT_TRUE(report.has(ViolationCode::kMissingKeyframes));
  const auto it = std::find_if(report.violations.begin(), report.violations.end(), [](const Violation& v) {
    return v.code == ViolationCode::kMissingKeyframes;
  });
  EXPECT_EQ(it->scene, 2);
  EXPECT_EQ(it->entity, plan.scenes[1].entities[0].id);
}

TEST(ValidatePlan, GroupSceneOutOfRange) {
  std::mt19937_64 rng(3);
  VideoPlan plan = testing::random_plan(rng, 4);
  plan.scenes[0].entities[0].name = "chef";
  plan.scenes[0].entities[0].id = "chef";
  plan.consistency.groups["chef"] = {1, 2, 5};
  const ValidationReport report = validate_plan(plan);
  EXPECT_TRUE(report.has(ViolationCode::kUnknownGroupScene));
}

TEST(ValidatePlan, GroupNameNotInAnyScene) {
  std::mt19937_64 rng(4);
  VideoPlan plan = testing::random_plan(rng, 2);
  plan.consistency.groups["unicorn"] = {1};
  EXPECT_TRUE(validate_plan(plan).has(ViolationCode::kUnknownGroupEntity));
}

TEST(ValidatePlan, BoxOutOfRangeAndEmptyFrame) {
  std::mt19937_64 rng(5);
  VideoPlan plan = testing::random_plan(rng, 1);
  plan.scenes[0].entities[0].keyframes[3].box = {0.2, 0.2, 1.3, 0.9};
  EXPECT_TRUE(validate_plan(plan).has(ViolationCode::kBoxOutOfRange));

  VideoPlan empty = testing::random_plan(rng, 1);
  for (auto& e : empty.scenes[0].entities) e.keyframes.clear();
  const auto report = validate_plan(empty);
  EXPECT_TRUE(report.has(ViolationCode::kEmptyFrame));
}

TEST(ValidatePlan, SceneIndexGap) {
  std::mt19937_64 rng(6);
  VideoPlan plan = testing::random_plan(rng, 3);
  plan.scenes[2].index = 4;
  EXPECT_TRUE(validate_plan(plan).has(ViolationCode::kSceneIndexGap));
}

TEST(ValidatePlan, NoScenes) {
  EXPECT_TRUE(validate_plan(VideoPlan{}).has(ViolationCode::kNoScenes));
}

TEST(ValidatePlan, DynamicAlphaAboveRange) {
  std::mt19937_64 rng(8);
  VideoPlan plan = testing::random_plan(rng, 1);
  plan.alpha = {AlphaMode::kLlmDynamic, 0.4};
  EXPECT_TRUE(validate_plan(plan).has(ViolationCode::kAlphaOutOfRange));
  plan.alpha = {AlphaMode::kStatic, 0.4};
  EXPECT_FALSE(validate_plan(plan).has(ViolationCode::kAlphaOutOfRange));
}

TEST(PlanFormat, RoundTripRandomPlans) {
  std::mt19937_64 rng(11);
  for (int i = 0; i < 200; ++i) {
    const VideoPlan plan = testing::random_plan(rng, 1 + i % 5);
    const std::string bytes = serialize_plan(plan);
    const VideoPlan back = deserialize_plan(bytes);
    ASSERT_EQ(back, plan);
    ASSERT_EQ(serialize_plan(back), bytes);
  }
}

TEST(PlanFormat, UnicodeNamesSurviveByteIdentically) {
  std::mt19937_64 rng(12);
  VideoPlan plan = testing::random_plan(rng, 1);
  plan.scenes[0].entities[0].name = "chef 👨‍🍳 Zoë";
  plan.scenes[0].entities[0].id = "chef 👨‍🍳 Zoë";
  plan.consistency = {};
  plan.consistency.groups["chef 👨‍🍳 Zoë"] = {1};
  const std::string bytes = serialize_plan(plan);
  EXPECT_NE(bytes.find("👨‍🍳"), std::string::npos);
  EXPECT_EQ(serialize_plan(deserialize_plan(bytes)), bytes);
}

TEST(PlanFormat, SchemaAndFieldOrder) {
  std::mt19937_64 rng(13);
  const std::string bytes = serialize_plan(testing::random_plan(rng, 1));
  const auto schema = bytes.find("\"schema\": \"vdgpt-plan/1\"");
  const auto prompt = bytes.find("\"source_prompt\"");
  const auto scenes = bytes.find("\"scenes\"");
  const auto consistency = bytes.find("\"consistency\"");
  const auto alpha = bytes.find("\"alpha\"");
  ASSERT_NE(schema, std::string::npos);
  EXPECT_LT(schema, prompt);
  EXPECT_LT(prompt, scenes);
  EXPECT_LT(scenes, consistency);
  EXPECT_LT(consistency, alpha);
}

TEST(PlanFormat, MissingScenesNamesField) {
  try {
    deserialize_plan(R"({"schema": "vdgpt-plan/1", "source_prompt": "x"})");
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::kParseError);
    EXPECT_EQ(e.path(), "scenes");
  }
}

TEST(PlanFormat, NestedFieldPath) {
  std::mt19937_64 rng(14);
  ojson doc = plan_to_json(testing::random_plan(rng, 1));
  doc["scenes"][0]["entities"][0]["keyframes"][2] = {1, 0.1, 0.2};
  try {
    plan_from_json(doc);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::kParseError);
    EXPECT_NE(e.path().find("scenes[0].entities[0].keyframes"), std::string::npos) << e.path();
  }
}

TEST(PlanFormat, SyntaxErrorReportsLine) {
  try {
    deserialize_plan("{\n  \"schema\": \"vdgpt-plan/1\",\n  oops\n}");
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::kParseError);
    EXPECT_NE(std::string(e.what()).find("line 3"), std::string::npos) << e.what();
  }
}

TEST(PlanFormat, ValidationReportJson) {
  VideoPlan plan;
  const ojson j = report_to_json(validate_plan(plan));
  EXPECT_FALSE(j["valid"].get<bool>());
  EXPECT_EQ(j["violations"][0]["code"], "NO_SCENES");
}

}  // namespace
}  // namespace vdgpt
