#include <gtest/gtest.h>

#include <algorithm>
#include <filesystem>
#include <numeric>

#include "editroom/eval.hpp"
#include "editroom/geometry.hpp"

using namespace editroom;
namespace fs = std::filesystem;

namespace {

SceneObject box(std::string id, std::string caption, double x, double z, double hx = 0.4, double hz = 0.4,
                double yaw = 0.0) {
  SceneObject o;
  o.id = std::move(id);
  o.category = 0;
  o.caption = std::move(caption);
  o.feature_indices = {0, 0, 0, 0};
  o.position = {x, 0.5, z};
  o.half_extents = {hx, 0.5, hz};
  o.yaw = yaw;
  return o;
}

Scene scene_of(std::vector<SceneObject> objects) {
  Scene s;
  s.room_bounds = {{-10, 0, -10}, {10, 3, 10}};
  s.objects = std::move(objects);
  return s;
}

double best_assignment(const Eigen::MatrixXd& m) {
  // Exhaustive over injective maps of rows to columns (or columns to rows).
  const bool transpose = m.rows() > m.cols();
  const Eigen::MatrixXd a = transpose ? Eigen::MatrixXd(m.transpose()) : m;
  std::vector<int> cols(a.cols());
  std::iota(cols.begin(), cols.end(), 0);
  double best = 0.0;
  do {
    double s = 0.0;
    for (int r = 0; r < a.rows(); ++r) s += a(r, cols[r]);
    best = std::max(best, s);
  } while (std::next_permutation(cols.begin(), cols.end()));
  return best;
}

Scene random_scene(Rng& rng, int n) {
  std::uniform_real_distribution<double> pos(-1.5, 1.5), ext(0.2, 0.8), yaw(-kPi, kPi);
  std::vector<SceneObject> objs;
  const char* words[] = {"wooden", "red", "bed", "chair", "modern", "lamp"};
  std::uniform_int_distribution<int> w(0, 5);
  for (int i = 0; i < n; ++i)
    objs.push_back(box("o" + std::to_string(i), std::string(words[w(rng)]) + " " + words[w(rng)], pos(rng), pos(rng),
                       ext(rng), ext(rng), yaw(rng)));
  return scene_of(objs);
}

}  // namespace

TEST(GreedyMatch, ReferenceTrace) {
  Eigen::MatrixXd m(2, 2);
  m << 0.9, 0.2, 0.8, 0.7;
  const auto r = greedy_match(m);
  EXPECT_EQ(r.pairs, (std::vector<MatchedPair>{{0, 0, 0.9}, {1, 1, 0.7}}));
  EXPECT_TRUE(r.unmatched_gen.empty());
}

TEST(GreedyMatch, TiesAndZeros) {
  Eigen::MatrixXd m(3, 2);
  m << 0.5, 0.5, 0.5, 0.0, 0.0, 0.0;
  const auto r = greedy_match(m);
  EXPECT_EQ(r.pairs, (std::vector<MatchedPair>{{0, 0, 0.5}}));
  EXPECT_EQ(r.unmatched_gen, (std::vector<int>{1, 2}));
  EXPECT_EQ(r.unmatched_target, (std::vector<int>{1}));
}

TEST(GreedyMatch, NeverBeatsOptimalAssignment) {
  Rng rng(1);
  for (int trial = 0; trial < 300; ++trial) {
    const Scene a = random_scene(rng, 1 + trial % 5);
    const Scene b = random_scene(rng, 1 + (trial / 5) % 5);
    const auto m = iou_matrix(a, b);
    const auto r = match_objects(a, b);
    double greedy = 0.0;
    std::vector<int> gs, ts;
    for (const auto& p : r.pairs) {
      greedy += p.iou;
      gs.push_back(p.gen);
      ts.push_back(p.target);
      EXPECT_GT(p.iou, 0.0);
      EXPECT_LE(p.iou, 1.0);
    }
    for (std::size_t k = 1; k < r.pairs.size(); ++k) EXPECT_GE(r.pairs[k - 1].iou, r.pairs[k].iou);
    std::sort(gs.begin(), gs.end());
    std::sort(ts.begin(), ts.end());
    EXPECT_EQ(std::adjacent_find(gs.begin(), gs.end()), gs.end());
    EXPECT_EQ(std::adjacent_find(ts.begin(), ts.end()), ts.end());
    EXPECT_EQ(r.pairs.size() + r.unmatched_gen.size(), a.objects.size());
    EXPECT_EQ(r.pairs.size() + r.unmatched_target.size(), b.objects.size());
    EXPECT_LE(greedy, best_assignment(m) + 1e-12);
  }
}

TEST(SceneIou, AlgebraicCases) {
  const Scene four = scene_of({box("a", "a bed", 0, 0), box("b", "a chair", 2, 0), box("c", "a lamp", 0, 2),
                               box("d", "a desk", 2, 2)});
  EXPECT_EQ(scene_iou(four, four), 1.0);
  EXPECT_EQ(scene_siou(four, four), 1.0);
  Scene three = four;
  three.objects.pop_back();
  EXPECT_DOUBLE_EQ(scene_iou(three, four), 0.75);
  EXPECT_DOUBLE_EQ(scene_iou(four, three), 0.75);
  Scene far = four;
  for (auto& o : far.objects) o.position.x += 5.0;
  EXPECT_EQ(scene_iou(far, four), 0.0);
  EXPECT_EQ(scene_iou(scene_of({}), scene_of({})), 1.0);
  EXPECT_EQ(scene_iou(scene_of({}), four), 0.0);
  Scene renamed = four;
  renamed.objects[0].caption = "zebra";
  EXPECT_DOUBLE_EQ(scene_siou(renamed, four), 0.75);
  EXPECT_EQ(scene_iou(renamed, four), 1.0);
}

TEST(SceneIou, SymmetricReorderInvariantAndSiouBounded) {
  Rng rng(2);
  for (int trial = 0; trial < 200; ++trial) {
    const Scene a = random_scene(rng, 2 + trial % 4);
    Scene b = random_scene(rng, 2 + trial % 3);
    // Perturb a copy of a so matches are non-trivial.
    if (trial % 2) {
      b = a;
      for (auto& o : b.objects) o.position.x += 0.1 * (trial % 5);
    }
    const double ab = scene_iou(a, b);
    EXPECT_NEAR(ab, scene_iou(b, a), 1e-12);
    Scene ra = a;
    std::reverse(ra.objects.begin(), ra.objects.end());
    EXPECT_NEAR(ab, scene_iou(ra, b), 1e-12);
    EXPECT_LE(scene_siou(a, b), ab + 1e-15);
    EXPECT_GE(ab, 0.0);
    EXPECT_LE(ab, 1.0);
  }
}

TEST(SceneIou, CategoryRestrictedMatching) {
  Scene a = scene_of({box("a", "bed", 0, 0)});
  Scene b = a;
  b.objects[0].category = 1;
  EXPECT_EQ(scene_iou(a, b), 1.0);
  EXPECT_EQ(scene_iou(a, b, {.same_category = true}), 0.0);
}

TEST(CaptionSimilarity, Jaccard) {
  EXPECT_EQ(caption_similarity("a wooden bed", "a wooden bed"), 1.0);
  EXPECT_EQ(caption_similarity("a wooden bed", "red chair"), 0.0);
  EXPECT_DOUBLE_EQ(caption_similarity("a wooden bed", "a wooden wardrobe"), 0.5);
  EXPECT_EQ(caption_similarity("A Wooden Bed", "bed wooden a"), 1.0);
  EXPECT_EQ(caption_similarity("", ""), 1.0);
  EXPECT_EQ(caption_similarity("", "bed"), 0.0);
  EXPECT_EQ(caption_similarity("red red bed", "bed red"), 1.0);
}

namespace {

std::vector<EditPair> toy_pairs(std::vector<EditType> types, int scenes) {
  GenConfig cfg;
  cfg.types = std::move(types);
  std::vector<EditPair> out;
  const auto ss = sample_scenes(RoomType::Toy, scenes, builtin_catalog(), 5);
  for (std::size_t i = 0; i < ss.size(); ++i)
    for (auto& p : generate_pairs(ss[i], i, builtin_catalog(), cfg)) out.push_back(std::move(p));
  return out;
}

}  // namespace

TEST(Evaluate, CopyBaselineOnRemoveIsExact) {
  const auto pairs = toy_pairs({EditType::Remove}, 60);
  ASSERT_GT(pairs.size(), 40u);
  for (const auto& p : pairs) {
    const double n = static_cast<double>(p.source.objects.size());
    EXPECT_DOUBLE_EQ(scene_iou(p.source, p.target), (n - 1) / n);
  }
  std::map<std::string, Scene> copy;
  for (const auto& p : pairs) copy[p.pair_id] = p.source;
  const auto r = evaluate_predictions(pairs, copy);
  double expect = 0.0;
  for (const auto& p : pairs) expect += (p.source.objects.size() - 1.0) / p.source.objects.size();
  EXPECT_NEAR(r.overall().iou.mean(), expect / pairs.size(), 1e-12);
}

TEST(Evaluate, DirectoriesAndReport) {
  const auto pairs = toy_pairs({EditType::Translate, EditType::Remove, EditType::Rotate}, 12);
  const auto dir = fs::temp_directory_path() / ("editroom_eval_" + std::to_string(::getpid()));
  fs::create_directories(dir / "pred");
  write_pairs(dir / "pairs.jsonl", pairs, builtin_catalog());
  for (std::size_t i = 1; i < pairs.size(); ++i)
    write_text_file(dir / "pred" / (pairs[i].pair_id + ".json"), serialize_scene(pairs[i].target, builtin_catalog()));
  write_text_file(dir / "pred" / "stray.json", serialize_scene(pairs[0].target, builtin_catalog()));
  const auto r = evaluate(dir / "pred", dir, builtin_catalog());
  EXPECT_EQ(r.evaluated(), static_cast<int>(pairs.size()));
  EXPECT_EQ(r.missing, std::vector<std::string>{pairs[0].pair_id});
  EXPECT_EQ(r.unknown, std::vector<std::string>{"stray"});
  std::map<std::string, int> counts;
  for (const auto& p : pairs) ++counts[std::string(to_string(p.edit_type))];
  for (const auto& [type, row] : r.rows.at("toy")) {
    EXPECT_EQ(row.iou.count, counts[type]);
    const double expect = type == std::string(to_string(pairs[0].edit_type))
                              ? (row.iou.count - 1.0) / row.iou.count
                              : 1.0;
    EXPECT_NEAR(row.iou.mean(), expect, 1e-12) << type;
  }
  const auto j = r.to_json();
  EXPECT_NE(j.find("\"missing\""), std::string::npos);
  const auto table = r.to_table();
  EXPECT_NE(table.find("| toy |"), std::string::npos);
  EXPECT_NE(table.find("missing predictions: 1"), std::string::npos);
  EXPECT_THROW(evaluate(dir / "nope", dir, builtin_catalog()), Error);
  fs::remove_all(dir);
}
