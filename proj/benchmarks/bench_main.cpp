#include <benchmark/benchmark.h>

#include <filesystem>
#include <random>

#include "editroom/datagen.hpp"
#include "editroom/diffusion.hpp"
#include "editroom/eval.hpp"
#include "editroom/executor.hpp"
#include "editroom/geometry.hpp"
#include "editroom/parameterizer.hpp"

using namespace editroom;
using namespace editroom::geometry;

namespace {

const ObjectCatalog& catalog() { return builtin_catalog(); }

std::vector<OrientedBox> random_boxes(int n, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> pos(-1.0, 1.0), half(0.1, 1.0), yaw(-kPi, kPi);
  std::vector<OrientedBox> out;
  for (int i = 0; i < n; ++i) {
    OrientedBox b;
    b.half_extents = {half(rng), half(rng), half(rng)};
    b.center = {pos(rng), b.half_extents.y, pos(rng)};
    b.yaw = yaw(rng);
    out.push_back(b);
  }
  return out;
}

void BM_Iou3d(benchmark::State& state) {
  const auto boxes = random_boxes(1024, 1);
  std::size_t i = 0;
  for (auto _ : state) {
    benchmark::DoNotOptimize(iou_3d(boxes[i % 1024], boxes[(i + 1) % 1024]));
    ++i;
  }
}
BENCHMARK(BM_Iou3d);

void BM_Collides(benchmark::State& state) {
  const auto boxes = random_boxes(1024, 2);
  std::size_t i = 0;
  for (auto _ : state) {
    benchmark::DoNotOptimize(collides(boxes[i % 1024], boxes[(i + 7) % 1024]));
    ++i;
  }
}
BENCHMARK(BM_Collides);

std::vector<EditPair> bench_pairs(std::vector<EditType> types, int scenes) {
  GenConfig cfg;
  cfg.types = std::move(types);
  cfg.seed = 3;
  std::vector<EditPair> pairs;
  const auto ss = sample_scenes(RoomType::Toy, scenes, catalog(), cfg.seed);
  for (std::size_t i = 0; i < ss.size(); ++i)
    for (auto& p : generate_pairs(ss[i], i, catalog(), cfg)) pairs.push_back(std::move(p));
  return pairs;
}

void BM_ApplyEdit(benchmark::State& state) {
  const auto pairs = bench_pairs({EditType::Translate, EditType::Rotate, EditType::Replace, EditType::Add}, 32);
  std::vector<EditCommand> cmds;
  for (const auto& p : pairs) cmds.push_back(parse_template_command(p.template_command));
  std::size_t i = 0;
  for (auto _ : state) {
    const auto k = i++ % pairs.size();
    benchmark::DoNotOptimize(apply_edit(pairs[k].source, cmds[k], catalog()));
  }
}
BENCHMARK(BM_ApplyEdit);

void BM_SceneIou(benchmark::State& state) {
  const auto pairs = bench_pairs({EditType::Translate}, 32);
  std::size_t i = 0;
  for (auto _ : state) {
    const auto& p = pairs[i++ % pairs.size()];
    benchmark::DoNotOptimize(scene_iou(p.source, p.target));
  }
}
BENCHMARK(BM_SceneIou);

void BM_PlanWithRules(benchmark::State& state) {
  const auto scene = bench_pairs({EditType::Translate}, 1).front().source;
  const std::string cmd = "remove the " + scene.objects[0].caption + " and then rotate it by 30 degrees";
  for (auto _ : state) {
    try {
      benchmark::DoNotOptimize(plan_with_rules(scene, cmd, catalog()));
    } catch (const Error&) {
    }
  }
}
BENCHMARK(BM_PlanWithRules);

DenoiserConfig bench_config(DenoiserKind kind, int hidden) {
  DenoiserConfig c;
  c.kind = kind;
  c.vocab = GraphVocab::of(RoomType::Toy, catalog());
  c.hidden = hidden;
  return c;
}

void BM_DenoiseGraph(benchmark::State& state) {
  const auto c = bench_config(DenoiserKind::Graph, static_cast<int>(state.range(0)));
  const auto params = DenoiserParams::init(c, 1);
  const TextFeaturizer text(c.text_tokens, c.text_dim, c.text_seed);
  const auto ex = make_examples(bench_pairs({EditType::Remove}, 4), c.vocab, text);
  for (auto _ : state) benchmark::DoNotOptimize(denoise_graph(ex[0].target, ex[0].source, ex[0].text, 50, params));
}
BENCHMARK(BM_DenoiseGraph)->Arg(16)->Arg(64);

void BM_DenoiseLayout(benchmark::State& state) {
  const auto c = bench_config(DenoiserKind::Layout, static_cast<int>(state.range(0)));
  const auto params = DenoiserParams::init(c, 2);
  const TextFeaturizer text(c.text_tokens, c.text_dim, c.text_seed);
  const auto ex = make_examples(bench_pairs({EditType::Translate}, 4), c.vocab, text);
  for (auto _ : state)
    benchmark::DoNotOptimize(
        denoise_layout(ex[0].source_layout, ex[0].target, ex[0].source, ex[0].source_layout, ex[0].text, 50, params));
}
BENCHMARK(BM_DenoiseLayout)->Arg(16)->Arg(64);

void BM_TrainStep(benchmark::State& state) {
  const auto kind = state.range(0) == 0 ? DenoiserKind::Graph : DenoiserKind::Layout;
  const auto c = bench_config(kind, 64);
  const TextFeaturizer text(c.text_tokens, c.text_dim, c.text_seed);
  const auto ex = make_examples(bench_pairs({EditType::Translate, EditType::Remove}, 40), c.vocab, text);
  TrainConfig tc;
  tc.steps = 1 << 30;
  Trainer trainer(DenoiserParams::init(c, 3), tc);
  for (auto _ : state) benchmark::DoNotOptimize(trainer.step(ex));
}
BENCHMARK(BM_TrainStep)->Arg(0)->Arg(1)->Unit(benchmark::kMillisecond);

void BM_EditWithDiffusion(benchmark::State& state) {
  const auto g = bench_config(DenoiserKind::Graph, 64);
  const auto l = bench_config(DenoiserKind::Layout, 64);
  const DiffusionEditor editor{DenoiserParams::init(g, 4), DenoiserParams::init(l, 5)};
  const auto pairs = bench_pairs({EditType::Translate}, 4);
  Rng rng(6);
  for (auto _ : state) {
    try {
      benchmark::DoNotOptimize(
          edit_with_diffusion(pairs[0].source, pairs[0].template_command, editor, catalog(), rng));
    } catch (const Error&) {
    }
  }
}
BENCHMARK(BM_EditWithDiffusion)->Unit(benchmark::kMillisecond);

void BM_BuildDataset(benchmark::State& state) {
  const auto scenes = sample_scenes(RoomType::Toy, static_cast<int>(state.range(0)), catalog(), 7);
  const auto dir = std::filesystem::temp_directory_path() / "editroom_bench_dataset";
  GenConfig cfg;
  int pairs = 0;
  for (auto _ : state) pairs = build_dataset(scenes, catalog(), cfg, dir).total();
  std::filesystem::remove_all(dir);
  state.counters["pairs"] = pairs;
}
BENCHMARK(BM_BuildDataset)->Arg(50)->Unit(benchmark::kMillisecond);

}  // namespace

BENCHMARK_MAIN();
