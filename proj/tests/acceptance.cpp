// Acceptance checks, one line per criterion. Exit status is the number of
// failing criteria.

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <functional>
#include <map>
#include <random>
#include <set>
#include <string>

#include "test_util.hpp"
#include "vdgpt/datasets.hpp"
#include "vdgpt/eval.hpp"
#include "vdgpt/grounding.hpp"
#include "vdgpt/layout.hpp"
#include "vdgpt/planner.hpp"

namespace {

using namespace vdgpt;
using namespace vdgpt::grounding;
using Eigen::MatrixXd;
using Eigen::VectorXd;

struct Check {
  bool ok = true;
  std::string detail;

  void expect(bool cond, const std::string& what) {
    if (!cond && ok) detail = what;
    ok = ok && cond;
  }
};

int failures = 0;

void criterion(int id, const char* name, double limit_seconds, const std::function<void(Check&)>& body) {
  Check c;
  const auto t0 = std::chrono::steady_clock::now();
  try {
    body(c);
  } catch (const std::exception& e) {
    c.expect(false, std::string("exception: ") + e.what());
  }
  const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  if (limit_seconds > 0) {
    char buf[64];
    std::snprintf(buf, sizeof buf, "runtime %.2fs over %.0fs", secs, limit_seconds);
    c.expect(secs < limit_seconds, buf);
  }
  std::printf("[%s] %2d %-44s %8.3fs  %s\n", c.ok ? "PASS" : "FAIL", id, name, secs, c.detail.c_str());
  std::fflush(stdout);
  if (!c.ok) ++failures;
}

std::string fmt(const char* f, double v) {
  char buf[128];
  std::snprintf(buf, sizeof buf, f, v);
  return buf;
}

planner::PlannerConfig fixed_config() {
  planner::PlannerConfig c;
  c.created_at = "2026-01-01T00:00:00Z";
  return c;
}

double rel_err(double a, double b) { return std::abs(a - b) / std::max({std::abs(a), std::abs(b), 1e-6}); }

double worst_fd(MatrixXd& m, const MatrixXd& analytic, const std::function<double()>& f) {
  const double h = 1e-6;
  double worst = 0.0;
  for (Eigen::Index i = 0; i < m.size(); ++i) {
    const double keep = m.data()[i];
    m.data()[i] = keep + h;
    const double up = f();
    m.data()[i] = keep - h;
    const double down = f();
    m.data()[i] = keep;
    worst = std::max(worst, rel_err((up - down) / (2 * h), analytic.data()[i]));
  }
  return worst;
}

// Piecewise-linear reference: keyframe k at time k/(K-1), frame i at i/(T-1).
double reference_at(const std::vector<double>& v, double t) {
  const double u = t * static_cast<double>(v.size() - 1);
  const std::size_t k = static_cast<std::size_t>(std::floor(u));
  if (k >= v.size() - 1) return v.back();
  return v[k] + (u - static_cast<double>(k)) * (v[k + 1] - v[k]);
}

void alpha_to_steps(Check& c) {
  for (auto [alpha, expect] : {std::pair{0.1, 5}, {0.2, 10}, {0.3, 15}}) {
    c.expect(planner::guided_step_count(alpha, 50) == expect, "guided_step_count");
    const auto s = DenoiseSchedule::linear().with_sampling(50, alpha);
    ToyDenoiser<double> model;
    Rng rng(1);
    SceneConditioning<double> cond;
    cond.grounding.push_back(rng.normal_matrix<double>(2, 32));
    SamplerTrace trace;
    denoise_sample<double>(model, s, LatentGrid<double>::noise(rng, 1), cond, SamplerKind::kDdim, &trace);
    c.expect(trace.guided_count() == expect, fmt("trace count wrong at alpha %.1f", alpha));
    c.expect(model.guided_calls() == expect, fmt("gated call counter wrong at alpha %.1f", alpha));
  }
}

void chef_oven_groups(Check& c) {
  planner::RuleBasedMockBackend backend;
  backend.add_script("make caraway cakes", planner::chef_oven_script());
  const auto r = planner::compile_plan("make caraway cakes", backend, fixed_config());
  const std::map<std::string, std::vector<int>> expected{{"chef", {1, 2, 3, 4}}, {"oven", {1}}};
  c.expect(r.plan.consistency.groups == expected, "groups differ from {chef:[1,2,3,4], oven:[1]}");
}

void dataset_counts(Check& c) {
  const std::string dir = VDGPT_ASSET_DIR "/datasets/";
  const auto captions = datasets::read_lines(dir + "actionbench_seed_captions.txt");
  c.expect(captions.size() == 100, "expected 100 seed captions");
  const auto prompts = datasets::gen_actionbench_direction(captions);
  c.expect(prompts.size() == 400, "ActionBench size " + std::to_string(prompts.size()));
  std::map<std::size_t, std::set<eval::Direction>> per_seed;
  std::map<std::size_t, int> per_seed_count;
  for (const auto& p : prompts) {
    per_seed[p.caption_index].insert(p.direction);
    ++per_seed_count[p.caption_index];
  }
  c.expect(per_seed.size() == 100, "not every seed produced variants");
  for (const auto& [seed, dirs] : per_seed) {
    c.expect(dirs.size() == 4 && per_seed_count[seed] == 4, "seed without 4 balanced variants");
  }
  const auto episodes =
      datasets::gen_coref_sv(datasets::load_episode_templates(dir + "coref_episodes.json"),
                             datasets::read_lines(dir + "entities.txt"), datasets::load_pronoun_table(dir + "pronouns.json"));
  c.expect(episodes.size() == 100, "Coref-SV size " + std::to_string(episodes.size()));
  std::set<std::pair<std::string, std::string>> combos;
  for (const auto& e : episodes) combos.insert({e.episode_id, e.target_entity});
  c.expect(combos.size() == 100, "Coref-SV episodes are not 10 x 10 distinct");
  const auto hirest = datasets::hirest_scene_prompts("make caraway cakes", 10);
  c.expect(hirest.size() == 10 && hirest.front() == "make caraway cakes, step 1/10" &&
               hirest.back() == "make caraway cakes, step 10/10",
           "HiREST format");
}

void random_baseline(Check& c) {
  const std::uint64_t seed = std::random_device{}();
  const double acc = eval::random_direction_baseline(10000, seed);
  c.expect(std::abs(acc - 0.25) <= 0.03, fmt("accuracy %.4f", acc));
  c.detail = c.ok ? fmt("accuracy %.4f", acc) + " seed " + std::to_string(seed) : c.detail;
}

void interpolation_oracle(Check& c) {
  std::mt19937_64 rng(2024);
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
    const auto out = layout::interpolate_layouts(t, 16);
    c.expect(out.size() == 16, "frame count");
    c.expect(out.front() == t.keyframes.front().box && out.back() == t.keyframes.back().box, "endpoints not exact");
    for (int i = 0; i < 16; ++i) {
      const double got[4] = {out[i].x0, out[i].y0, out[i].x1, out[i].y1};
      for (int k = 0; k < 4; ++k) worst = std::max(worst, std::abs(got[k] - reference_at(coords[k], i / 15.0)));
    }
  }
  c.expect(worst < 1e-12, fmt("max abs error %.3g", worst));
  if (c.ok) c.detail = fmt("max abs error %.3g", worst);
}

void gate_and_gradients(Check& c) {
  Rng rng(5);
  for (int trial = 0; trial < 50; ++trial) {
    auto p = GatedAttentionParams<double>::random(32, rng);
    p.gamma = 0.0;
    const MatrixXd v = rng.normal_matrix<double>(64, 32, 10.0);
    const MatrixXd g = rng.normal_matrix<double>(1 + trial % 4, 32, 10.0);
    c.expect(gated_self_attention<double>(v, g, p) == v, "gate zero is not a bitwise identity");
  }

  double worst = 0.0;
  {
    MlpDims d{6, 4, 7, 5, 2};
    auto p = GroundingMlpParams<double>::random(d, rng);
    p.b1 = rng.normal_matrix<double>(d.hidden, 1, 0.3);
    p.b2 = rng.normal_matrix<double>(d.model, 1, 0.3);
    const VectorXd img = rng.normal_matrix<double>(6, 1), txt = rng.normal_matrix<double>(6, 1);
    const BoundingBox box{0.15, 0.3, 0.55, 0.8};
    const VectorXd R = rng.normal_matrix<double>(d.model, 1);
    auto loss = [&] { return R.dot(grounding_token<double>(img, txt, box, p)); };
    GroundingMlpCache<double> cache;
    grounding_token<double>(img, txt, box, p, TokenVariant::kImageText, &cache);
    auto g = GroundingMlpParams<double>::zeros(d);
    grounding_token_backward<double>(R, cache, p, g);
    for (auto [w, gw] : {std::pair{&p.P_img, &g.P_img}, {&p.P_text, &g.P_text}, {&p.W1, &g.W1}, {&p.W2, &g.W2}}) {
      worst = std::max(worst, worst_fd(*w, *gw, loss));
    }
    MatrixXd b1 = p.b1, b2 = p.b2;
    worst = std::max(worst, worst_fd(b1, g.b1, [&] { p.b1 = b1; return loss(); }));
    worst = std::max(worst, worst_fd(b2, g.b2, [&] { p.b2 = b2; return loss(); }));
  }
  {
    const int d = 8;
    GuidedBlockParams<double> p{AttentionParams<double>::random(d, rng), GatedAttentionParams<double>::random(d, rng),
                                AttentionParams<double>::random(d, rng)};
    p.gated.gamma = 0.7;
    MatrixXd v = rng.normal_matrix<double>(6, d), g = rng.normal_matrix<double>(3, d);
    MatrixXd txt = rng.normal_matrix<double>(2, d);
    const MatrixXd R = rng.normal_matrix<double>(6, d);
    auto loss = [&] { return guided_2d_attention<double>(v, g, txt, p).cwiseProduct(R).sum(); };
    GuidedBlockCache<double> cache;
    guided_2d_attention<double>(v, g, txt, p, true, &cache);
    auto grads = GuidedBlockGradients<double>::zeros(d);
    guided_2d_attention_backward<double>(R, cache, p, grads);
    for (auto [a, ga] : {std::pair{&p.self_attn, &grads.params.self_attn}, {&p.gated.attn, &grads.params.gated.attn},
                         {&p.cross_attn, &grads.params.cross_attn}}) {
      worst = std::max({worst, worst_fd(a->Wq, ga->Wq, loss), worst_fd(a->Wk, ga->Wk, loss),
                        worst_fd(a->Wv, ga->Wv, loss), worst_fd(a->Wo, ga->Wo, loss)});
    }
    MatrixXd gamma = MatrixXd::Constant(1, 1, p.gated.gamma);
    worst = std::max(worst, worst_fd(gamma, MatrixXd::Constant(1, 1, grads.params.gated.gamma), [&] {
      p.gated.gamma = gamma(0, 0);
      return loss();
    }));
    worst = std::max({worst, worst_fd(v, grads.d_latent, loss), worst_fd(g, grads.d_grounding, loss),
                      worst_fd(txt, grads.d_text, loss)});
  }
  c.expect(worst < 1e-4, fmt("worst relative gradient error %.3g", worst));
  if (c.ok) c.detail = fmt("worst relative gradient error %.3g", worst);
}

void diffusion_sanity(Check& c) {
  const auto s = DenoiseSchedule::linear();
  Rng rng(std::random_device{}());
  double worst_ratio = 0.0;
  for (int t : {50, 200, 600, 999}) {
    const auto z0 = LatentGrid<double>::zeros(1, 1, 1, 1);
    double sum = 0, sq = 0;
    const int n = 100000;
    for (int i = 0; i < n; ++i) {
      const double x = forward_diffuse(z0, t, s, LatentGrid<double>::noise(rng, 1, 1, 1, 1)).frames[0](0, 0);
      sum += x;
      sq += x * x;
    }
    const double var = sq / n - (sum / n) * (sum / n);
    const double ratio = var / (1.0 - s.alpha_bar_at(t));
    worst_ratio = std::max(worst_ratio, std::abs(ratio - 1.0));
  }
  c.expect(worst_ratio < 0.02, fmt("variance off by %.4f", worst_ratio));
  const auto sampling = DenoiseSchedule::linear().with_sampling(50, 0.1);
  const auto target = LatentGrid<double>::noise(rng, 4);
  OracleDenoiser<double> oracle(target, sampling);
  const double err = denoise_sample<double>(oracle, sampling, LatentGrid<double>::noise(rng, 4), {}).max_abs_diff(target);
  c.expect(err < 1e-6, fmt("DDIM oracle error %.3g", err));
  if (c.ok) c.detail = fmt("variance within %.4f, ", worst_ratio) + fmt("DDIM error %.3g", err);
}

VideoPlan reversed(VideoPlan plan) {
  for (auto& scene : plan.scenes)
    for (auto& e : scene.entities) std::reverse(e.keyframes.begin(), e.keyframes.end());
  for (auto& scene : plan.scenes)
    for (auto& e : scene.entities)
      for (std::size_t k = 0; k < e.keyframes.size(); ++k) e.keyframes[k].frame = static_cast<int>(k);
  return plan;
}

void closed_loop_movement(Check& c) {
  auto captions = datasets::read_lines(VDGPT_ASSET_DIR "/datasets/actionbench_seed_captions.txt");
  captions.resize(10);
  const auto prompts = datasets::gen_actionbench_direction(captions);
  c.expect(prompts.size() == 40, "expected 40 prompts");
  planner::RuleBasedMockBackend backend;
  int forward = 0, backward = 0;
  for (const auto& p : prompts) {
    const VideoPlan plan = planner::compile_plan(p.text, backend, fixed_config()).plan;
    forward += eval::score_plan_movement(plan, p.direction).value;
    backward += eval::score_plan_movement(reversed(plan), p.direction).value;
  }
  c.expect(forward == 40, "forward accuracy " + std::to_string(forward) + "/40");
  c.expect(backward == 0, "reversed accuracy " + std::to_string(backward) + "/40");
  if (c.ok) c.detail = "40/40 forward, 0/40 reversed";
}

void shared_embeddings(Check& c) {
  std::mt19937_64 rng(std::random_device{}());
  Rng prng(3);
  const auto params = GroundingMlpParams<double>::random(MlpDims{}, prng);
  int groups_checked = 0;
  for (int trial = 0; trial < 100; ++trial) {
    VideoPlan plan = testing::random_plan(rng, 2 + trial % 4);
    // every box identical, so tokens can differ only through embeddings
    for (auto& scene : plan.scenes)
      for (auto& e : scene.entities)
        for (auto& k : e.keyframes) k.box = {0.25, 0.25, 0.75, 0.75};
    EmbeddingCache cache(std::make_shared<HashEmbeddingProvider>());
    std::vector<SceneTokens> tokens;
    for (int s = 1; s <= static_cast<int>(plan.scenes.size()); ++s) tokens.push_back(tokens_for_scene(plan, s, cache, params));
    std::set<std::string> names;
    for (const auto& scene : plan.scenes)
      for (const auto& e : scene.entities) names.insert(e.name);
    c.expect(cache.computations() == static_cast<int>(names.size()), "embedding computed more than once per name");
    for (const auto& [name, scenes] : plan.consistency.groups) {
      std::vector<VectorXd> member_tokens, member_embeddings;
      for (int s : scenes) {
        const auto& scene = plan.scenes[static_cast<std::size_t>(s - 1)];
        for (std::size_t e = 0; e < scene.entities.size(); ++e) {
          if (scene.entities[e].name != name) continue;
          member_tokens.push_back(tokens[static_cast<std::size_t>(s - 1)].frames[0][e].vector);
          member_embeddings.push_back(cache.get(name).image.values);
        }
      }
      for (const auto& t : member_tokens) c.expect(t == member_tokens.front(), "group tokens differ across scenes");
      if (member_embeddings.size() >= 2) {
        c.expect(eval::object_consistency(member_embeddings) == 1.0, "consistency below 1.0");
        ++groups_checked;
      }
    }
  }
  c.expect(groups_checked > 0, "no multi-scene groups generated");
  if (c.ok) c.detail = std::to_string(groups_checked) + " multi-scene groups";
}

void parse_validity_counter(Check& c) {
  std::vector<std::string> prompts;
  for (int i = 0; i < 600; ++i) prompts.push_back("a paper boat number " + std::to_string(i) + " drifting from left to right");
  std::vector<int> order(600);
  std::iota(order.begin(), order.end(), 0);
  std::shuffle(order.begin(), order.end(), std::mt19937_64(std::random_device{}()));
  std::set<std::string> corrupted;
  for (int i = 0; i < 60; ++i) corrupted.insert(prompts[static_cast<std::size_t>(order[i])]);
  auto mock = std::make_shared<planner::RuleBasedMockBackend>();
  planner::FaultInjectingBackend backend(mock, [&](const std::string& prompt) -> std::optional<std::string> {
    const std::string key = "Scene description: ";
    const auto at = prompt.rfind(key);
    if (at == std::string::npos) return std::nullopt;
    const std::string scene = prompt.substr(at + key.size(), prompt.find('\n', at) - at - key.size());
    if (corrupted.count(scene)) return std::string("Frame 1: nothing to see");
    return std::nullopt;
  });
  const auto r = planner::compile_batch(prompts, backend, fixed_config());
  c.expect(r.total == 600, "total");
  c.expect(r.valid_samples == 540, "#Samples = " + std::to_string(r.valid_samples));
  for (std::size_t i = 0; i < prompts.size(); ++i)
    c.expect(r.valid[i] == (corrupted.count(prompts[i]) == 0), "per-prompt validity disagrees with the mask");
  if (c.ok) c.detail = "#Samples 540 of 600";
}

void toy_training(Check& c) {
  ToyConfig cfg;
  ToyDenoiser<double> model(cfg);
  const ToyFrozen<double> frozen = model.frozen();
  const TrainConfig tc;
  const auto r = train_toy(model, SyntheticTask(cfg), tc);
  c.expect(tc.steps == 500, "step count");
  c.expect(model.frozen() == frozen, "frozen parameters changed");
  c.expect(r.loss_ratio() < 0.5, fmt("loss ratio %.4f", r.loss_ratio()));
  if (c.ok) {
    c.detail = fmt("loss %.4f", r.initial_loss) + fmt(" -> %.4f", r.final_loss) + fmt(" (ratio %.4f)", r.loss_ratio());
  }
}

}  // namespace

int main() {
  criterion(1, "alpha to guided-step counts", 1, alpha_to_steps);
  criterion(2, "chef/oven consistency groups", 1, chef_oven_groups);
  criterion(3, "dataset cardinalities", 0, dataset_counts);
  criterion(4, "random-direction baseline", 10, random_baseline);
  criterion(5, "9->16 interpolation oracle", 0, interpolation_oracle);
  criterion(6, "gate-zero identity and gradient checks", 30, gate_and_gradients);
  criterion(7, "forward variance and DDIM oracle", 60, diffusion_sanity);
  criterion(8, "closed-loop movement suite", 10, closed_loop_movement);
  criterion(9, "shared-embedding consistency", 0, shared_embeddings);
  criterion(10, "parse-validity counter", 30, parse_validity_counter);
  criterion(11, "toy training", 300, toy_training);
  std::printf("%d of 11 criteria failed\n", failures);
  return failures;
}
