#include <filesystem>
#include <fstream>
#include <random>
#include <sstream>

#include <gtest/gtest.h>
#include <json.hpp>

#include "vdgpt/cli.hpp"
#include "vdgpt/layout.hpp"
#include "vdgpt/plan_json.hpp"

namespace vdgpt::cli {
namespace {

namespace fs = std::filesystem;
using nlohmann::json;

struct Outcome {
  int code;
  std::string out;
  std::string err;
};

Outcome vd(std::vector<std::string> args) {
  std::ostringstream out, err;
  const int code = run(args, out, err);
  return {code, out.str(), err.str()};
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  return {std::istreambuf_iterator<char>(in), {}};
}

class CliTest : public ::testing::Test {
 protected:
  void SetUp() override {
    dir_ = fs::temp_directory_path() /
           ("vdgpt-cli-" + std::to_string(std::random_device{}()) + "-" +
            ::testing::UnitTest::GetInstance()->current_test_info()->name());
    fs::create_directories(dir_);
  }
  void TearDown() override { fs::remove_all(dir_); }

  std::string path(const std::string& name) const { return (dir_ / name).string(); }

  std::string chef_plan() {
    const std::string p = path("chef.json");
    const Outcome r = vd({"plan", "make caraway cakes", "--created-at", "2026-01-01T00:00:00Z", "-o", p});
    EXPECT_EQ(r.code, kExitOk) << r.err;
    return p;
  }

  fs::path dir_;
};

TEST_F(CliTest, PlanChefOvenWritesValidFourScenePlan) {
  const std::string report = path("report.json");
  const Outcome r = vd({"plan", "make caraway cakes", "-o", path("p.json"), "--report", report});
  ASSERT_EQ(r.code, kExitOk) << r.err;
  const VideoPlan plan = deserialize_plan(slurp(path("p.json")));
  EXPECT_EQ(plan.scenes.size(), 4u);
  EXPECT_TRUE(validate_plan(plan).valid());
  EXPECT_EQ(plan.consistency.groups.at("chef"), (std::vector<int>{1, 2, 3, 4}));
  EXPECT_EQ(plan.alpha.mode, AlphaMode::kStatic);
  EXPECT_TRUE(json::parse(slurp(report)).is_object());
}

TEST_F(CliTest, PlanToStdout) {
  const Outcome r = vd({"plan", "make caraway cakes", "--created-at", "2026-01-01T00:00:00Z"});
  ASSERT_EQ(r.code, kExitOk);
  EXPECT_EQ(deserialize_plan(r.out).scenes.size(), 4u);
}

TEST_F(CliTest, CorruptedSceneExitsTwoAndWritesPartialPlan) {
  const Outcome r = vd({"plan", "make caraway cakes", "--mock-corrupt-scene", "2", "-o", path("p.json")});
  EXPECT_EQ(r.code, kExitInvalid);
  EXPECT_NE(r.err.find("2"), std::string::npos);
  ASSERT_TRUE(fs::exists(path("p.json")));
  EXPECT_FALSE(validate_plan(deserialize_plan(slurp(path("p.json")))).valid());
}

TEST_F(CliTest, LlmAlphaRecordsDynamicMode) {
  const Outcome r = vd({"plan", "make caraway cakes", "--alpha", "llm", "-o", path("p.json")});
  ASSERT_EQ(r.code, kExitOk) << r.err;
  const VideoPlan plan = deserialize_plan(slurp(path("p.json")));
  EXPECT_EQ(plan.alpha.mode, AlphaMode::kLlmDynamic);
  EXPECT_GE(plan.alpha.value, 0.0);
  EXPECT_LE(plan.alpha.value, 0.3);
}

TEST_F(CliTest, PlanIsByteDeterministicWithFixedTimestamp) {
  const std::string a = chef_plan();
  const std::string first = slurp(a);
  const std::string b = path("again.json");
  ASSERT_EQ(vd({"plan", "make caraway cakes", "--created-at", "2026-01-01T00:00:00Z", "-o", b}).code, kExitOk);
  EXPECT_EQ(slurp(b), first);
}

TEST_F(CliTest, BadArgumentsExitTwo) {
  EXPECT_EQ(vd({}).code, kExitInvalid);
  EXPECT_EQ(vd({"plan"}).code, kExitInvalid);
  EXPECT_EQ(vd({"plan", "x", "--alpha", "sometimes"}).code, kExitInvalid);
  EXPECT_EQ(vd({"frobnicate"}).code, kExitInvalid);
  EXPECT_EQ(vd({"--help"}).code, kExitOk);
}

TEST_F(CliTest, BackendFailureExitsThree) {
  const Outcome r = vd({"plan", "x", "--backend", "http", "--base-url", "http://127.0.0.1:1", "--timeout", "1"});
  EXPECT_EQ(r.code, kExitBackend) << r.err;
}

TEST_F(CliTest, ValidateExitCodes) {
  const std::string p = chef_plan();
  EXPECT_EQ(vd({"validate", p}).code, kExitOk);
  VideoPlan plan = deserialize_plan(slurp(p));
  plan.scenes[0].entities[0].keyframes.resize(7);
  std::ofstream(path("bad.json")) << serialize_plan(plan);
  const Outcome r = vd({"validate", path("bad.json")});
  EXPECT_EQ(r.code, kExitInvalid);
  EXPECT_NE(r.out.find("MISSING_KEYFRAMES"), std::string::npos);
  std::ofstream(path("junk.json")) << "{ not json";
  EXPECT_EQ(vd({"validate", path("junk.json")}).code, kExitInvalid);
  EXPECT_EQ(vd({"validate", path("missing.json")}).code, kExitInternal);
}

TEST_F(CliTest, InterpSixteenFramesHitsKeyframeEndpoints) {
  const std::string p = chef_plan();
  ASSERT_EQ(vd({"interp", p, "--frames", "16", "-o", path("d.json")}).code, kExitOk);
  const auto dense = layout::dense_from_json(json::parse(slurp(path("d.json"))));
  const VideoPlan plan = deserialize_plan(slurp(p));
  ASSERT_EQ(dense.size(), 4u);
  for (std::size_t s = 0; s < dense.size(); ++s) {
    ASSERT_EQ(dense[s].frames.size(), 16u);
    for (std::size_t e = 0; e < plan.scenes[s].entities.size(); ++e) {
      EXPECT_EQ(dense[s].frames.front()[e].box, plan.scenes[s].entities[e].keyframes.front().box);
      EXPECT_EQ(dense[s].frames.back()[e].box, plan.scenes[s].entities[e].keyframes.back().box);
    }
  }
}

TEST_F(CliTest, InterpNineFramesIsIdentity) {
  const std::string p = chef_plan();
  ASSERT_EQ(vd({"interp", p, "--frames", "9", "-o", path("d.json")}).code, kExitOk);
  const auto dense = layout::dense_from_json(json::parse(slurp(path("d.json"))));
  const VideoPlan plan = deserialize_plan(slurp(p));
  for (std::size_t s = 0; s < dense.size(); ++s)
    for (std::size_t f = 0; f < 9; ++f)
      for (std::size_t e = 0; e < plan.scenes[s].entities.size(); ++e)
        EXPECT_EQ(dense[s].frames[f][e].box, plan.scenes[s].entities[e].keyframes[f].box);
  EXPECT_EQ(vd({"interp", p, "--frames", "0"}).code, kExitInvalid);
}

TEST_F(CliTest, SampleCountsGuidedSteps) {
  const std::string p = chef_plan();
  const Outcome guided = vd({"sample", p, "--steps", "50", "--alpha", "0.1", "--no-latents"});
  ASSERT_EQ(guided.code, kExitOk) << guided.err;
  const json g = json::parse(guided.out);
  EXPECT_EQ(g["guided_steps"], 5);
  EXPECT_EQ(g["trace"]["guided_count"], 5);
  EXPECT_EQ(g["trace"]["timesteps"].size(), 50u);
  for (int k = 0; k < 50; ++k) EXPECT_EQ(g["trace"]["guided"][k].get<bool>(), k < 5);

  const json none = json::parse(vd({"sample", p, "--steps", "50", "--alpha", "0", "--no-latents"}).out);
  EXPECT_EQ(none["trace"]["guided_count"], 0);
  EXPECT_EQ(none["trace"]["gated_forward_passes"], 0);
}

TEST_F(CliTest, SampleIsReproducibleAndSeedSensitive) {
  const std::string p = chef_plan();
  const Outcome a = vd({"sample", p, "--steps", "8", "--seed", "4", "--sampler", "plms"});
  const Outcome b = vd({"sample", p, "--steps", "8", "--seed", "4", "--sampler", "plms"});
  const Outcome c = vd({"sample", p, "--steps", "8", "--seed", "5", "--sampler", "plms"});
  ASSERT_EQ(a.code, kExitOk) << a.err;
  EXPECT_EQ(a.out, b.out);
  EXPECT_NE(a.out, c.out);
  EXPECT_EQ(vd({"sample", p, "--scene", "9"}).code, kExitInvalid);
}

TEST_F(CliTest, TrainWritesCheckpointUsedBySample) {
  const std::string ck = path("ck.bin");
  const Outcome t = vd({"train", "--steps", "20", "-o", ck});
  ASSERT_EQ(t.code, kExitOk) << t.err;
  const json doc = json::parse(t.out);
  EXPECT_LT(doc["final_loss"].get<double>(), doc["initial_loss"].get<double>());
  EXPECT_NEAR(doc["trainable_fraction"].get<double>(), 13409.0 / (13409.0 + 10752.0), 1e-12);
  const std::string p = chef_plan();
  const Outcome trained = vd({"sample", p, "--steps", "6", "--checkpoint", ck});
  const Outcome fresh = vd({"sample", p, "--steps", "6"});
  ASSERT_EQ(trained.code, kExitOk) << trained.err;
  EXPECT_NE(trained.out, fresh.out);

  std::ofstream(path("bad.bin"), std::ios::binary) << "not a checkpoint";
  EXPECT_EQ(vd({"sample", p, "--checkpoint", path("bad.bin")}).code, kExitInternal);
}

TEST_F(CliTest, EvalMovementOracleAndReversed) {
  const std::string prompts = path("ab.jsonl");
  ASSERT_EQ(vd({"datasets", "actionbench", "-o", prompts}).code, kExitOk);
  const std::string report = path("mv.json");
  const Outcome ok = vd({"eval", "movement", "--prompts", prompts, "--oracle", "-o", report});
  ASSERT_EQ(ok.code, kExitOk) << ok.err;
  const json doc = json::parse(slurp(report));
  EXPECT_EQ(doc["metrics"][0]["count"], 400);
  EXPECT_DOUBLE_EQ(doc["overall"].get<double>(), 1.0);
  EXPECT_NE(ok.out.find("100.0"), std::string::npos);

  const Outcome rev = vd({"eval", "movement", "--prompts", prompts, "--oracle", "--reverse-layouts", "-o", report});
  ASSERT_EQ(rev.code, kExitOk);
  EXPECT_DOUBLE_EQ(json::parse(slurp(report))["overall"].get<double>(), 0.0);
  EXPECT_EQ(vd({"eval", "movement", "--prompts", prompts}).code, kExitInvalid);
}

TEST_F(CliTest, EvalMovementFromRecordedDetections) {
  std::ofstream(path("p.jsonl")) << R"({"id":"v1","text":"a ball from left to right","expected_direction":"L2R","target_entity":"ball"})"
                                 << "\n"
                                 << R"({"id":"v2","text":"a ball from top to bottom","expected_direction":"T2B","target_entity":"ball"})"
                                 << "\n";
  std::ofstream(path("det.json")) << R"({"schema":"vdgpt-detections/1","detections":[
    {"video":"v1","frame":0,"label":"ball","box":[0.1,0.4,0.2,0.5],"score":0.9},
    {"video":"v1","frame":15,"label":"ball","box":[0.7,0.4,0.8,0.5],"score":0.9},
    {"video":"v2","frame":0,"label":"ball","box":[0.4,0.7,0.5,0.8],"score":0.9},
    {"video":"v2","frame":15,"label":"ball","box":[0.4,0.1,0.5,0.2],"score":0.9}]})";
  const Outcome r = vd({"eval", "movement", "--prompts", path("p.jsonl"), "--detections", path("det.json"),
                    "--last-frame", "-1", "-o", path("r.json")});
  ASSERT_EQ(r.code, kExitOk) << r.err;
  EXPECT_DOUBLE_EQ(json::parse(slurp(path("r.json")))["overall"].get<double>(), 0.5);
}

TEST_F(CliTest, EvalConsistency) {
  const std::string p = chef_plan();
  const Outcome plan = vd({"eval", "consistency", "--plan", p, "-o", path("c.json")});
  ASSERT_EQ(plan.code, kExitOk) << plan.err;
  EXPECT_NEAR(json::parse(slurp(path("c.json")))["overall"].get<double>(), 1.0, 1e-12);

  std::ofstream(path("e.json")) << R"({"items":[{"id":"a","scenes":[[1,0],[1,0],[0,1]]}]})";
  ASSERT_EQ(vd({"eval", "consistency", "--embeddings", path("e.json"), "-o", path("c.json")}).code, kExitOk);
  EXPECT_NEAR(json::parse(slurp(path("c.json")))["overall"].get<double>(), 0.5, 1e-12);
  ASSERT_EQ(vd({"eval", "consistency", "--embeddings", path("e.json"), "--literal", "-o", path("c.json")}).code,
            kExitOk);
  EXPECT_NEAR(json::parse(slurp(path("c.json")))["overall"].get<double>(), 1.0 / 3.0, 1e-12);

  std::ofstream(path("one.json")) << R"({"items":[{"id":"a","scenes":[[1,0]]}]})";
  EXPECT_EQ(vd({"eval", "consistency", "--embeddings", path("one.json")}).code, kExitInvalid);
  EXPECT_EQ(vd({"eval", "consistency"}).code, kExitInvalid);
}

TEST_F(CliTest, EvalSkillsPerMetricMeans) {
  std::ofstream(path("s.jsonl"))
      << R"({"id":"o1","skill":"object","target":"dog","boxes":[{"label":"dog","box":[0.1,0.1,0.3,0.3]}]})" "\n"
      << R"({"id":"o2","skill":"object","target":"cat","boxes":[{"label":"dog","box":[0.1,0.1,0.3,0.3]}]})" "\n"
      << R"({"id":"c1","skill":"count","target":"dog","k":2,"boxes":[{"label":"dog","box":[0.1,0.1,0.3,0.3]},{"label":"dog","box":[0.5,0.1,0.7,0.3]}]})" "\n"
      << R"({"id":"s1","skill":"spatial","a":"dog","relation":"left","b":"cat","boxes":[{"label":"dog","box":[0.6,0.1,0.8,0.3]},{"label":"cat","box":[0.1,0.1,0.3,0.3]}]})" "\n"
      << R"({"id":"z1","skill":"scale","a":"dog","relation":"bigger","b":"cat","boxes":[{"label":"dog","box":[0.0,0.0,0.6,0.6]},{"label":"cat","box":[0.7,0.7,0.8,0.8]}]})" "\n";
  const Outcome r = vd({"eval", "skills", "--items", path("s.jsonl"), "-o", path("r.json")});
  ASSERT_EQ(r.code, kExitOk) << r.err;
  const json doc = json::parse(slurp(path("r.json")));
  std::map<std::string, double> means;
  for (const auto& m : doc["metrics"]) means[m["metric"]] = m["mean"];
  EXPECT_DOUBLE_EQ(means["object"], 0.5);
  EXPECT_DOUBLE_EQ(means["count"], 1.0);
  EXPECT_DOUBLE_EQ(means["spatial"], 0.0);
  EXPECT_DOUBLE_EQ(means["scale"], 1.0);
  EXPECT_DOUBLE_EQ(doc["overall"].get<double>(), 2.5 / 4.0);

  std::ofstream(path("bad.jsonl")) << R"({"id":"x","skill":"color","boxes":[]})" "\n";
  const Outcome bad = vd({"eval", "skills", "--items", path("bad.jsonl")});
  EXPECT_EQ(bad.code, kExitInvalid);
  EXPECT_NE(bad.err.find("line 1"), std::string::npos);
}

TEST_F(CliTest, DatasetGenerators) {
  const Outcome ab = vd({"datasets", "actionbench"});
  ASSERT_EQ(ab.code, kExitOk);
  EXPECT_EQ(std::count(ab.out.begin(), ab.out.end(), '\n'), 400);

  const Outcome coref = vd({"datasets", "coref", "-o", path("c.jsonl")});
  ASSERT_EQ(coref.code, kExitOk) << coref.err;
  std::ifstream in(path("c.jsonl"));
  std::string line;
  int n = 0;
  while (std::getline(in, line)) {
    const json r = json::parse(line);
    EXPECT_EQ(r["scenes"].size(), 4u);
    ++n;
  }
  EXPECT_EQ(n, 100);

  const Outcome hirest = vd({"datasets", "hirest", "--prompt", "make caraway cakes", "--scenes", "3"});
  EXPECT_NE(hirest.out.find("make caraway cakes, step 3/3"), std::string::npos);
}

}  // namespace
}  // namespace vdgpt::cli
