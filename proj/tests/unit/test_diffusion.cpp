#include <gtest/gtest.h>

#include <filesystem>
#include <map>
#include <numeric>

#include "editroom/diffusion.hpp"
#include "editroom/geometry.hpp"

using namespace editroom;
namespace fs = std::filesystem;

namespace {

const ObjectCatalog& catalog() { return builtin_catalog(); }

GraphVocab toy_vocab() { return GraphVocab::of(RoomType::Toy, catalog()); }

DenoiserConfig small_config(DenoiserKind kind) {
  DenoiserConfig c;
  c.kind = kind;
  c.vocab = toy_vocab();
  c.hidden = 8;
  c.heads = 2;
  c.layers = 2;
  c.text_tokens = 4;
  c.text_dim = 6;
  c.steps = 10;
  return c;
}

// Random state with every slot live, for equivariance checks.
DiscreteState random_state(Rng& rng, const GraphVocab& v, bool with_masks) {
  std::uniform_int_distribution<int> cat(0, v.categories - 1), feat(0, v.codebook - 1), rel(0, kNumRelations - 1);
  std::bernoulli_distribution coin(0.3);
  DiscreteState s;
  s.active = v.max_nodes;
  for (int i = 0; i < v.max_nodes; ++i) {
    s.categories.push_back(with_masks && coin(rng) ? v.mask_category() : cat(rng));
    std::vector<int> f;
    for (int k = 0; k < v.feature_slots; ++k) f.push_back(with_masks && coin(rng) ? v.mask_feature() : feat(rng));
    s.features.push_back(f);
  }
  for (int e = 0; e < v.edge_count(); ++e) s.edges.push_back(with_masks && coin(rng) ? GraphVocab::kMaskEdge : rel(rng));
  return s;
}

int inv_edge(int e) {
  return e < kNumRelations ? static_cast<int>(invert_relation(static_cast<SpatialRelation>(e))) : e;
}

DiscreteState permute(const DiscreteState& s, const std::vector<int>& perm, int m) {
  DiscreteState o = s;
  for (int i = 0; i < m; ++i) {
    o.categories[perm[i]] = s.categories[i];
    o.features[perm[i]] = s.features[i];
  }
  for (int i = 0; i < m; ++i)
    for (int j = i + 1; j < m; ++j) {
      const int e = s.edges[edge_index(i, j, m)];
      const int a = perm[i], b = perm[j];
      if (a < b) o.edges[edge_index(a, b, m)] = e;
      else o.edges[edge_index(b, a, m)] = inv_edge(e);
    }
  return o;
}

std::vector<EditExample> toy_examples(int scenes, std::vector<EditType> types, const TextFeaturizer& text,
                                      std::uint64_t seed = 1) {
  GenConfig cfg;
  cfg.types = std::move(types);
  cfg.seed = seed;
  std::vector<EditPair> pairs;
  const auto ss = sample_scenes(RoomType::Toy, scenes, catalog(), seed);
  for (std::size_t i = 0; i < ss.size(); ++i)
    for (auto& p : generate_pairs(ss[i], i, catalog(), cfg)) pairs.push_back(std::move(p));
  return make_examples(pairs, toy_vocab(), text);
}

// Exhaustive Bayes oracle for one absorbing chain token with K real values.
// Enumerates every trajectory x_0..x_T under the prior p0 on x_0 and returns
// P(x_{t-1} | x_t) over K+1 values (K = MASK).
std::vector<double> bayes_posterior(const std::vector<double>& p0, int T, int t, int xt) {
  const int K = static_cast<int>(p0.size());
  auto abar = [&](int s) { return 1.0 - static_cast<double>(s) / T; };
  std::vector<double> num(K + 1, 0.0);
  std::vector<int> traj(T + 1, 0);
  std::function<void(int, double)> walk = [&](int s, double prob) {
    if (prob == 0.0) return;
    if (s == T + 1) {
      if (traj[t] == xt) num[traj[t - 1]] += prob;
      return;
    }
    const int prev = traj[s - 1];
    if (prev == K) {
      traj[s] = K;
      walk(s + 1, prob);
      return;
    }
    const double keep = abar(s) / abar(s - 1);
    traj[s] = prev;
    walk(s + 1, prob * keep);
    traj[s] = K;
    walk(s + 1, prob * (1.0 - keep));
  };
  for (int v = 0; v < K; ++v) {
    traj[0] = v;
    walk(1, p0[v]);
  }
  const double z = std::accumulate(num.begin(), num.end(), 0.0);
  for (auto& x : num) x /= z;
  return num;
}

}  // namespace

TEST(NoiseSchedule, Invariants) {
  for (int T : {1, 5, 10, 100, 1000}) {
    const auto s = NoiseSchedule::linear(T);
    ASSERT_EQ(static_cast<int>(s.betas.size()), T);
    EXPECT_EQ(s.alpha_bar(0), 1.0);
    for (int t = 1; t <= T; ++t) {
      EXPECT_GT(s.betas[t - 1], 0.0);
      EXPECT_LT(s.betas[t - 1], 1.0);
      EXPECT_LT(s.alpha_bar(t), s.alpha_bar(t - 1));
    }
  }
  const auto s = NoiseSchedule::linear(100);
  EXPECT_GT(s.alpha_bar(1), 0.99);
  EXPECT_LT(s.alpha_bar(100), 1e-3);
  EXPECT_EQ(s.discrete_alpha_bar(100), 0.0);
  EXPECT_THROW(s.alpha_bar(101), ValidationError);
  EXPECT_THROW(NoiseSchedule::linear(0), ValidationError);
}

TEST(QSampleLayout, ClosedFormCases) {
  const auto s = NoiseSchedule::linear(100);
  Eigen::MatrixXd x0 = Eigen::MatrixXd::Random(8, 8);
  const std::vector<bool> rows = {true, true, false, true, true, true, false, true};
  const Eigen::MatrixXd zero = Eigen::MatrixXd::Zero(8, 8);
  const auto xt = q_sample_layout(x0, 40, zero, s, rows);
  for (int i = 0; i < 8; ++i)
    for (int c = 0; c < 8; ++c) EXPECT_DOUBLE_EQ(xt(i, c), rows[i] ? std::sqrt(s.alpha_bar(40)) * x0(i, c) : 0.0);
  const auto tiny = NoiseSchedule::linear(100000);
  const auto x1 = q_sample_layout(x0, 1, Eigen::MatrixXd::Ones(8, 8), tiny, std::vector<bool>(8, true));
  EXPECT_LT((x1 - x0).cwiseAbs().maxCoeff(), 2e-3);
  EXPECT_THROW(q_sample_layout(x0, 0, zero, s, rows), ValidationError);
}

TEST(QSampleLayout, SimulatedMomentsMatchClosedForm) {
  const auto s = NoiseSchedule::linear(100);
  Rng rng(3);
  std::normal_distribution<double> n(0.0, 1.0);
  const int draws = 100000;
  for (int t : {1, 25, 60, 100}) {
    Eigen::MatrixXd x0(1, 8);
    x0 << 0.7, -1.3, 2.0, 0.4, 0.2, 0.9, 1.0, 0.0;
    Eigen::VectorXd sum = Eigen::VectorXd::Zero(8), sq = Eigen::VectorXd::Zero(8);
    for (int k = 0; k < draws; ++k) {
      Eigen::MatrixXd e(1, 8);
      for (int c = 0; c < 8; ++c) e(0, c) = n(rng);
      const Eigen::VectorXd x = q_sample_layout(x0, t, e, s, {true}).row(0).transpose();
      sum += x;
      sq += x.cwiseProduct(x);
    }
    const double ab = s.alpha_bar(t);
    const double var = 1.0 - ab;
    for (int c = 0; c < 8; ++c) {
      const double mean = sum[c] / draws;
      const double v = sq[c] / draws - mean * mean;
      EXPECT_NEAR(mean, std::sqrt(ab) * x0(0, c), 3.0 * std::sqrt(var / draws)) << t;
      EXPECT_NEAR(v, var, 3.0 * var * std::sqrt(2.0 / draws)) << t;
    }
  }
}

TEST(QSampleDiscrete, MaskFractionMatchesSchedule) {
  const auto v = toy_vocab();
  const auto s = NoiseSchedule::linear(100);
  Rng rng(4);
  DiscreteState x0 = random_state(rng, v, false);
  int per_state = v.max_nodes * (1 + v.feature_slots) + v.edge_count();
  for (int t : {1, 30, 77}) {
    long masked = 0, total = 0;
    while (total < 100000) {
      const auto xt = q_sample_discrete(x0, t, s, v, rng);
      for (int i = 0; i < v.max_nodes; ++i) {
        masked += xt.categories[i] == v.mask_category();
        for (int f : xt.features[i]) masked += f == v.mask_feature();
      }
      for (int e : xt.edges) masked += e == GraphVocab::kMaskEdge;
      total += per_state;
    }
    const double p = 1.0 - s.discrete_alpha_bar(t);
    EXPECT_NEAR(static_cast<double>(masked) / total, p, 3.0 * std::sqrt(p * (1 - p) / total)) << t;
  }
  const auto all = q_sample_discrete(x0, 100, s, v, rng);
  for (int c : all.categories) EXPECT_EQ(c, v.mask_category());
  NoiseSchedule huge;
  huge.T = 1000000000;
  EXPECT_EQ(q_sample_discrete(x0, 1, huge, v, rng), x0);
}

TEST(QSampleDiscrete, PaddingNeverNoised) {
  const auto v = toy_vocab();
  const auto s = NoiseSchedule::linear(10);
  Rng rng(5);
  DiscreteState x0 = random_state(rng, v, false);
  x0.active = 3;
  for (int i = 3; i < v.max_nodes; ++i) x0.categories[i] = v.empty_category();
  const auto xt = q_sample_discrete(x0, 10, s, v, rng);
  for (int i = 3; i < v.max_nodes; ++i) EXPECT_EQ(xt.categories[i], v.empty_category());
  for (int i = 0; i < v.max_nodes; ++i)
    for (int j = i + 1; j < v.max_nodes; ++j)
      if (j >= 3) EXPECT_EQ(xt.edges[edge_index(i, j, v.max_nodes)], x0.edges[edge_index(i, j, v.max_nodes)]);
}

TEST(DiscretePosterior, MatchesExhaustiveBayesEnumeration) {
  const int K = 3, T = 5;
  NoiseSchedule s;
  s.T = T;
  Eigen::MatrixXd logits(1, K);
  logits << 0.3, -1.2, 0.8;
  const Eigen::VectorXd p0 = softmax(logits.row(0).transpose());
  const std::vector<double> prior(p0.data(), p0.data() + K);
  for (int t = 1; t <= T; ++t)
    for (int xt = 0; xt <= K; ++xt) {
      if (t == T && xt < K) continue;  // impossible observation
      const int tok[1] = {xt};
      const Eigen::MatrixXd post = discrete_posterior(tok, logits, t, s);
      const auto oracle = bayes_posterior(prior, T, t, xt);
      EXPECT_NEAR(post.row(0).sum(), 1.0, 1e-9);
      for (int k = 0; k <= K; ++k) EXPECT_NEAR(post(0, k), oracle[k], 1e-12) << "t=" << t << " xt=" << xt;
    }
}

TEST(DiscretePosterior, RowsAreDistributions) {
  const auto s = NoiseSchedule::linear(50);
  Rng rng(6);
  std::normal_distribution<double> n(0.0, 3.0);
  for (int trial = 0; trial < 200; ++trial) {
    const int K = 2 + trial % 9;
    Eigen::MatrixXd logits(5, K);
    for (Eigen::Index i = 0; i < logits.size(); ++i) logits.data()[i] = n(rng);
    std::vector<int> xt;
    for (int i = 0; i < 5; ++i) xt.push_back(std::uniform_int_distribution<int>(0, K)(rng));
    const int t = 1 + trial % 50;
    const auto post = discrete_posterior(xt, logits, t, s);
    for (int i = 0; i < 5; ++i) {
      EXPECT_NEAR(post.row(i).sum(), 1.0, 1e-9);
      EXPECT_GE(post.row(i).minCoeff(), 0.0);
      if (xt[i] < K) EXPECT_EQ(post(i, xt[i]), 1.0);
      if (t == 1 && xt[i] == K) {
        EXPECT_EQ(post(i, K), 0.0);
        const Eigen::VectorXd sm = softmax(logits.row(i).transpose());
        for (int k = 0; k < K; ++k) EXPECT_NEAR(post(i, k), sm[k], 1e-15);
      }
    }
  }
  const int bad[1] = {0};
  EXPECT_THROW(discrete_posterior(bad, Eigen::MatrixXd::Zero(2, 3), 1, s), ValidationError);
}

TEST(TokenLoss, ExactKlEqualsKlOfPosteriors) {
  const int T = 5, K = 4;
  NoiseSchedule s;
  s.T = T;
  Eigen::MatrixXd logits(1, K);
  logits << 0.1, 1.5, -0.7, 0.2;
  for (int t = 1; t <= T; ++t)
    for (int x0 = 0; x0 < K; ++x0) {
      const int tok[1] = {K};
      const int truth[1] = {x0};
      const auto model = discrete_posterior(tok, logits, t, s);
      std::vector<double> onehot(K, 0.0);
      onehot[x0] = 1.0;
      const auto q = bayes_posterior(onehot, T, t, K);
      double kl = 0.0;
      for (int k = 0; k <= K; ++k)
        if (q[k] > 0) kl += q[k] * std::log(q[k] / model(0, k));
      const auto [loss, n] = token_loss(tok, truth, logits, K, t, s, GraphObjective::ExactKL, nullptr);
      EXPECT_EQ(n, 1);
      EXPECT_NEAR(loss, kl, 1e-12);
      const auto [ce, n2] = token_loss(tok, truth, logits, K, t, s, GraphObjective::CrossEntropy, nullptr);
      EXPECT_GE(ce, 0.0);
      EXPECT_EQ(n2, 1);
    }
}

TEST(TokenLoss, OneHotLogitsGiveZeroAndUnmaskedSkipped) {
  NoiseSchedule s;
  s.T = 10;
  Eigen::MatrixXd logits = Eigen::MatrixXd::Constant(3, 5, -1e4);
  logits(0, 2) = logits(1, 0) = logits(2, 4) = 0.0;
  const int xt[3] = {5, 5, 4};
  const int x0[3] = {2, 0, 4};
  const auto [loss, n] = token_loss(xt, x0, logits, 5, 3, s, GraphObjective::CrossEntropy, nullptr);
  EXPECT_EQ(loss, 0.0);
  EXPECT_EQ(n, 2);
}

TEST(TextFeaturizer, DeterministicAndTokenAware) {
  TextFeaturizer f;
  const auto a = f.encode("Move object towards the left direction for 0.5 meters : a wooden double bed");
  const auto b = f.encode("Move object towards the left direction for 0.5 meters : a wooden double bed");
  EXPECT_EQ(a.vectors, b.vectors);
  EXPECT_EQ(a.tokens(), 8);
  EXPECT_EQ(a.dim(), 32);
  EXPECT_NE(a.vectors, f.encode("Move object towards the left direction for 0.6 meters : a wooden double bed").vectors);
  EXPECT_NE(a.vectors, TextFeaturizer(8, 32, 1).encode("Move object towards the left direction").vectors);
  EXPECT_EQ(command_tokens("Rotate object -45 degrees : the bed 0.5"),
            (std::vector<std::string>{"rotate", "-45", "degrees", "bed", "0.5"}));
  EXPECT_TRUE(f.encode("").vectors.isZero());
}

TEST(TextFeaturizer, SlotMatchPicksTheDescribedCaption) {
  TextFeaturizer f;
  const std::string cmd = "Move object towards the left direction for 0.5 meters : a wooden double bed";
  const std::vector<std::string> captions = {"a red office chair", "a brass floor lamp", "a wooden double bed",
                                             "a tall white wardrobe"};
  const auto t = f.encode(cmd, captions, 8);
  EXPECT_EQ(t.vectors, f.encode(cmd).vectors);
  ASSERT_EQ(t.slot_match.rows(), 8);
  ASSERT_EQ(t.slot_match.cols(), 8);
  // Row 2 is the segment after ':'.
  Eigen::Index best = -1;
  t.slot_match.col(2).head(4).maxCoeff(&best);
  EXPECT_EQ(best, 2);
  EXPECT_NEAR(t.slot_match(2, 2), f.encode("a wooden double bed").vectors.row(0).squaredNorm(), 1e-12);
  EXPECT_TRUE(t.slot_match.bottomRows(4).isZero());
  EXPECT_EQ(f.encode(cmd).slot_match.size(), 0);
  EXPECT_THROW(f.encode(cmd, captions, 3), ValidationError);
}

TEST(Alignment, CompactTargetEqualsExtractedGraph) {
  TextFeaturizer text;
  GenConfig cfg;
  const auto scenes = sample_scenes(RoomType::Toy, 40, catalog(), 9);
  const auto v = toy_vocab();
  int n = 0;
  for (std::size_t i = 0; i < scenes.size(); ++i)
    for (const auto& p : generate_pairs(scenes[i], i, catalog(), cfg)) {
      const auto ex = make_example(p.source, p.target, p.template_command, v, text, p.edit_type);
      EXPECT_EQ(compact_graph(ex.target, RoomType::Toy, v), extract_scene_graph(p.target));
      EXPECT_EQ(compact_graph(ex.source, RoomType::Toy, v), extract_scene_graph(p.source));
      EXPECT_EQ(ex.target.active, std::min(v.max_nodes, static_cast<int>(p.source.objects.size()) + 1));
      const auto r = ex.layout_residual();
      for (int s = 0; s < v.max_nodes; ++s) {
        if (!ex.target_rows[s]) EXPECT_TRUE(r.row(s).isZero());
        if (p.edit_type == EditType::Translate && s < static_cast<int>(p.source.objects.size()) &&
            p.source.objects[s].id != p.target_object_id)
          EXPECT_TRUE(r.row(s).isZero());
      }
      if (p.edit_type == EditType::Remove) {
        const auto k = *p.source.find(p.target_object_id);
        EXPECT_EQ(ex.target.categories[k], v.empty_category());
      }
      ++n;
    }
  EXPECT_GT(n, 100);
}

TEST(DenoiseGraph, ShapesAndDeterminism) {
  const auto cfg = small_config(DenoiserKind::Graph);
  const auto params = DenoiserParams::init(cfg, 1);
  Rng rng(7);
  const auto v = cfg.vocab;
  const auto src = random_state(rng, v, false);
  const auto xt = random_state(rng, v, true);
  const TextFeature text = TextFeaturizer(4, 6, 1).encode("Remove [a wooden double bed]");
  const auto a = denoise_graph(xt, src, text, 3, params);
  EXPECT_EQ(a.categories.rows(), v.max_nodes);
  EXPECT_EQ(a.categories.cols(), v.categories + 1);
  ASSERT_EQ(static_cast<int>(a.features.size()), v.feature_slots);
  EXPECT_EQ(a.features[0].cols(), v.codebook + 1);
  EXPECT_EQ(a.edges.rows(), v.edge_count());
  EXPECT_EQ(a.edges.cols(), kNumRelations);
  const auto b = denoise_graph(xt, src, text, 3, params);
  EXPECT_EQ(a.categories, b.categories);
  EXPECT_EQ(a.edges, b.edges);
  EXPECT_THROW(denoise_graph(xt, src, TextFeaturizer(8, 32).encode("x"), 3, params), ValidationError);
  EXPECT_THROW(denoise_graph(xt, src, text, 0, params), ValidationError);
  EXPECT_NE(a.categories, denoise_graph(xt, src, TextFeaturizer(4, 6, 1).encode("Remove [a red chair]"), 3, params)
                              .categories);
}

TEST(DenoiseGraph, PermutationEquivariant) {
  const auto cfg = small_config(DenoiserKind::Graph);
  const auto params = DenoiserParams::init(cfg, 2);
  Rng rng(8);
  const auto v = cfg.vocab;
  const int m = v.max_nodes;
  const TextFeature text = TextFeaturizer(4, 6, 1).encode("Remove [a wooden double bed]");
  for (int trial = 0; trial < 5; ++trial) {
    const auto src = random_state(rng, v, false);
    const auto xt = random_state(rng, v, true);
    std::vector<int> perm(m);
    std::iota(perm.begin(), perm.end(), 0);
    std::shuffle(perm.begin(), perm.end(), rng);
    const auto a = denoise_graph(xt, src, text, 4, params);
    const auto b = denoise_graph(permute(xt, perm, m), permute(src, perm, m), text, 4, params);
    for (int i = 0; i < m; ++i) {
      EXPECT_LT((a.categories.row(i) - b.categories.row(perm[i])).cwiseAbs().maxCoeff(), 1e-9);
      for (int s = 0; s < v.feature_slots; ++s)
        EXPECT_LT((a.features[s].row(i) - b.features[s].row(perm[i])).cwiseAbs().maxCoeff(), 1e-9);
      for (int j = i + 1; j < m; ++j) {
        const auto ea = a.edges.row(static_cast<Eigen::Index>(edge_index(i, j, m)));
        const int pa = perm[i], pb = perm[j];
        const auto eb = b.edges.row(static_cast<Eigen::Index>(edge_index(std::min(pa, pb), std::max(pa, pb), m)));
        for (int r = 0; r < kNumRelations; ++r)
          EXPECT_NEAR(ea(r), pa < pb ? eb(r) : eb(inv_edge(r)), 1e-9);
      }
    }
  }
}

TEST(DenoiseLayout, ShapeDeterminismEquivariance) {
  const auto cfg = small_config(DenoiserKind::Layout);
  const auto params = DenoiserParams::init(cfg, 3);
  Rng rng(9);
  const auto v = cfg.vocab;
  const int m = v.max_nodes;
  const auto src = random_state(rng, v, false);
  const auto tg = random_state(rng, v, false);
  const Eigen::MatrixXd bs = Eigen::MatrixXd::Random(m, 8);
  const Eigen::MatrixXd xt = Eigen::MatrixXd::Random(m, 8);
  const TextFeature text = TextFeaturizer(4, 6, 1).encode("Move object towards the left direction for 1 meters : bed");
  const auto e = denoise_layout(xt, tg, src, bs, text, 5, params);
  EXPECT_EQ(e.rows(), m);
  EXPECT_EQ(e.cols(), 8);
  EXPECT_EQ(e, denoise_layout(xt, tg, src, bs, text, 5, params));
  std::vector<int> perm(m);
  std::iota(perm.begin(), perm.end(), 0);
  std::shuffle(perm.begin(), perm.end(), rng);
  Eigen::MatrixXd bsp(m, 8), xtp(m, 8);
  for (int i = 0; i < m; ++i) {
    bsp.row(perm[i]) = bs.row(i);
    xtp.row(perm[i]) = xt.row(i);
  }
  const auto ep = denoise_layout(xtp, permute(tg, perm, m), permute(src, perm, m), bsp, text, 5, params);
  for (int i = 0; i < m; ++i) EXPECT_LT((e.row(i) - ep.row(perm[i])).cwiseAbs().maxCoeff(), 1e-9);
  EXPECT_THROW(denoise_layout(Eigen::MatrixXd::Zero(3, 8), tg, src, bs, text, 5, params), ValidationError);
}

namespace {

// Relative error of analytic vs central-difference directional derivatives.
// Fourth-order stencil so round-off stays small for near-zero derivatives.
template <class LossFn>
double max_fd_error(const DenoiserParams& params, const std::vector<double>& grad, LossFn loss, int directions,
                    std::uint64_t seed) {
  Rng rng(seed);
  std::normal_distribution<double> n(0.0, 1.0);
  double worst = 0.0;
  const double h = 2e-6;  // small enough to rarely straddle a ReLU kink
  for (int d = 0; d < directions; ++d) {
    std::vector<double> u(params.size());
    double norm = 0.0;
    for (auto& x : u) {
      x = n(rng);
      norm += x * x;
    }
    norm = std::sqrt(norm);
    for (auto& x : u) x /= norm;
    auto at = [&](double s) {
      DenoiserParams p = params;
      for (std::size_t i = 0; i < u.size(); ++i) p.values[i] += s * u[i];
      return loss(p);
    };
    const double fd = (8.0 * (at(h) - at(-h)) - (at(2 * h) - at(-2 * h))) / (12.0 * h);
    double an = 0.0;
    for (std::size_t i = 0; i < u.size(); ++i) an += grad[i] * u[i];
    worst = std::max(worst, std::abs(fd - an) / std::max({std::abs(fd), std::abs(an), 1e-8}));
  }
  return worst;
}

}  // namespace

TEST(LossGraph, GradientMatchesFiniteDifferences) {
  const auto cfg = small_config(DenoiserKind::Graph);
  const auto params = DenoiserParams::init(cfg, 11);
  const TextFeaturizer text(cfg.text_tokens, cfg.text_dim, cfg.text_seed);
  const auto ex = toy_examples(6, {EditType::Remove, EditType::Translate, EditType::Add}, text);
  const std::vector<EditExample> batch(ex.begin(), ex.begin() + 4);
  const auto schedule = NoiseSchedule::linear(cfg.steps);
  for (auto obj : {GraphObjective::CrossEntropy, GraphObjective::ExactKL}) {
    Rng rng(21);
    const auto r = loss_graph(batch, params, schedule, rng, obj);
    ASSERT_GT(r.count, 0);
    EXPECT_GE(r.loss, 0.0);
    auto f = [&](const DenoiserParams& p) {
      Rng copy(21);
      return loss_graph(batch, p, schedule, copy, obj, false).loss;
    };
    EXPECT_LT(max_fd_error(params, r.grad, f, 20, 5), 1e-5);
  }
}

TEST(LossLayout, GradientMatchesFiniteDifferences) {
  const auto cfg = small_config(DenoiserKind::Layout);
  const auto params = DenoiserParams::init(cfg, 12);
  const TextFeaturizer text(cfg.text_tokens, cfg.text_dim, cfg.text_seed);
  const auto ex = toy_examples(6, {EditType::Translate, EditType::Add, EditType::Rotate}, text);
  const std::vector<EditExample> batch(ex.begin(), ex.begin() + 4);
  const auto schedule = NoiseSchedule::linear(cfg.steps);
  Rng rng(22);
  const auto r = loss_layout(batch, params, schedule, rng);
  ASSERT_GT(r.count, 0);
  EXPECT_GE(r.loss, 0.0);
  auto f = [&](const DenoiserParams& p) {
    Rng copy(22);
    return loss_layout(batch, p, schedule, copy, false).loss;
  };
  EXPECT_LT(max_fd_error(params, r.grad, f, 20, 6), 1e-5);
}

TEST(LossLayout, InvariantToPaddedRowContents) {
  const auto cfg = small_config(DenoiserKind::Layout);
  const auto params = DenoiserParams::init(cfg, 13);
  const TextFeaturizer text(cfg.text_tokens, cfg.text_dim, cfg.text_seed);
  auto ex = toy_examples(4, {EditType::Remove}, text);
  ASSERT_FALSE(ex.empty());
  const auto schedule = NoiseSchedule::linear(cfg.steps);
  Rng r1(1), r2(1);
  const double a = loss_layout(std::span(ex).first(1), params, schedule, r1, false).loss;
  for (int i = 0; i < cfg.vocab.max_nodes; ++i)
    if (!ex[0].target_rows[i]) ex[0].target_layout.row(i).setConstant(123.0);
  const double b = loss_layout(std::span(ex).first(1), params, schedule, r2, false).loss;
  EXPECT_EQ(a, b);
  EXPECT_THROW(loss_layout({}, params, schedule, r1), ValidationError);
}

TEST(Losses, PermutationConsistent) {
  const auto gcfg = small_config(DenoiserKind::Graph);
  const auto gp = DenoiserParams::init(gcfg, 14);
  const auto v = gcfg.vocab;
  const int m = v.max_nodes;
  const auto schedule = NoiseSchedule::linear(gcfg.steps);
  Rng rng(15);
  const TextFeature text = TextFeaturizer(4, 6, 1).encode("Remove [a red office chair]");
  const auto src = random_state(rng, v, false);
  const auto x0 = random_state(rng, v, false);
  const auto xt = q_sample_discrete(x0, 6, schedule, v, rng);
  std::vector<int> perm(m);
  std::iota(perm.begin(), perm.end(), 0);
  std::shuffle(perm.begin(), perm.end(), rng);
  auto total = [&](const DiscreteState& s, const DiscreteState& x, const DiscreteState& truth) {
    const auto lg = denoise_graph(x, s, text, 6, gp);
    double sum = token_loss(x.categories, truth.categories, lg.categories, v.mask_category(), 6, schedule,
                            GraphObjective::CrossEntropy, nullptr).first;
    sum += token_loss(x.edges, truth.edges, lg.edges, GraphVocab::kMaskEdge, 6, schedule,
                      GraphObjective::CrossEntropy, nullptr).first;
    return sum;
  };
  // Edges of the truth must be remapped with the same permutation.
  EXPECT_NEAR(total(src, xt, x0), total(permute(src, perm, m), permute(xt, perm, m), permute(x0, perm, m)), 1e-9);
}

TEST(GraphSampler, OracleDenoiserRecoversGroundTruth) {
  const auto v = toy_vocab();
  const auto schedule = NoiseSchedule::linear(100);
  Rng rng(16);
  for (int trial = 0; trial < 20; ++trial) {
    DiscreteState truth = random_state(rng, v, false);
    truth.active = 1 + trial % v.max_nodes;
    for (int i = truth.active; i < v.max_nodes; ++i) {
      truth.categories[i] = v.empty_category();
      truth.features[i].assign(v.feature_slots, v.empty_feature());
    }
    for (int i = 0; i < v.max_nodes; ++i)
      for (int j = i + 1; j < v.max_nodes; ++j)
        if (j >= truth.active) truth.edges[edge_index(i, j, v.max_nodes)] = static_cast<int>(SpatialRelation::None);
    int first_t = -1;
    auto oracle = [&](const DiscreteState& x, int t) {
      if (first_t < 0) {
        first_t = t;
        for (int i = 0; i < x.active; ++i) EXPECT_EQ(x.categories[i], v.mask_category());
      }
      GraphLogits g;
      g.categories = Eigen::MatrixXd::Constant(v.max_nodes, v.categories + 1, -1e4);
      for (int i = 0; i < v.max_nodes; ++i) g.categories(i, truth.categories[i]) = 0.0;
      for (int s = 0; s < v.feature_slots; ++s) {
        g.features.push_back(Eigen::MatrixXd::Constant(v.max_nodes, v.codebook + 1, -1e4));
        for (int i = 0; i < v.max_nodes; ++i) g.features[s](i, truth.features[i][s]) = 0.0;
      }
      g.edges = Eigen::MatrixXd::Constant(v.edge_count(), kNumRelations, -1e4);
      for (int e = 0; e < v.edge_count(); ++e) g.edges(e, truth.edges[e]) = 0.0;
      return g;
    };
    DiscreteState shape;
    shape.active = truth.active;
    EXPECT_EQ(sample_graph_with(oracle, shape, v, schedule, rng), truth);
    EXPECT_EQ(first_t, 100);
  }
}

TEST(LayoutSampler, OracleEpsilonRecoversGroundTruth) {
  const auto schedule = NoiseSchedule::linear(100);
  Rng rng(17);
  for (int trial = 0; trial < 10; ++trial) {
    const int m = 8;
    std::vector<bool> rows(m);
    for (int i = 0; i < m; ++i) rows[i] = (i + trial) % 3 != 0;
    Eigen::MatrixXd x0 = Eigen::MatrixXd::Random(m, 8) * 2.0;
    for (int i = 0; i < m; ++i)
      if (!rows[i]) x0.row(i).setZero();
    auto oracle = [&](const Eigen::MatrixXd& xt, int t) -> Eigen::MatrixXd {
      const double ab = schedule.alpha_bar(t);
      return (xt - std::sqrt(ab) * x0) / std::sqrt(1.0 - ab);
    };
    std::vector<Eigen::MatrixXd> trace;
    const auto out = sample_layout_with(oracle, rows, schedule, rng, &trace);
    EXPECT_LT((out - x0).cwiseAbs().maxCoeff(), 1e-6);
    EXPECT_EQ(trace.size(), 101u);
    EXPECT_EQ(trace.back(), out);
  }
}

TEST(SampleTargetLayout, UnitRotationsAndTrace) {
  const auto cfg = small_config(DenoiserKind::Layout);
  const auto params = DenoiserParams::init(cfg, 18);
  const TextFeaturizer text(cfg.text_tokens, cfg.text_dim, cfg.text_seed);
  const auto ex = toy_examples(2, {EditType::Translate}, text);
  ASSERT_FALSE(ex.empty());
  Rng rng(19);
  std::vector<Eigen::MatrixXd> trace;
  const auto schedule = NoiseSchedule::linear(cfg.steps);
  const auto b = sample_target_layout(ex[0].target, ex[0].source, ex[0].source_layout, ex[0].text, params, schedule,
                                      rng, &trace);
  EXPECT_EQ(static_cast<int>(trace.size()), cfg.steps + 1);
  for (int i = 0; i < cfg.vocab.max_nodes; ++i) {
    if (ex[0].target_rows[i]) EXPECT_NEAR(std::hypot(b(i, 6), b(i, 7)), 1.0, 1e-12);
    else EXPECT_TRUE(b.row(i).isZero());
  }
}

TEST(Retrieval, ExactAndNearestFeatures) {
  const auto& cat = catalog();
  for (const auto& p : cat.prototypes) EXPECT_EQ(retrieve_prototype(cat, p.category, p.feature_indices), p);
  const auto& p = cat.prototypes[4];
  auto f = p.feature_indices;
  f[0] = (f[0] + 1) % cat.codebook_size;
  EXPECT_EQ(retrieve_prototype(cat, p.category, f).category, p.category);
  EXPECT_EQ(retrieve_prototype(cat, p.category, f), p);
}

TEST(Trainer, DeterministicResumableAndDecreasing) {
  auto cfg = small_config(DenoiserKind::Graph);
  cfg.hidden = 16;
  cfg.steps = 20;
  const TextFeaturizer text(cfg.text_tokens, cfg.text_dim, cfg.text_seed);
  const auto ex = toy_examples(40, {EditType::Remove}, text);
  TrainConfig tc;
  tc.steps = 100;
  tc.batch = 8;
  tc.lr = 3e-3;
  tc.seed = 5;
  Trainer a(DenoiserParams::init(cfg, 1), tc), b(DenoiserParams::init(cfg, 1), tc);
  a.run(ex);
  b.run(ex);
  EXPECT_EQ(a.losses(), b.losses());
  auto ma = [&](int end) {
    return std::accumulate(a.losses().begin() + end - 20, a.losses().begin() + end, 0.0) / 20.0;
  };
  EXPECT_LT(ma(100), ma(20));

  const auto dir = fs::temp_directory_path() / ("editroom_trainer_" + std::to_string(::getpid()));
  fs::create_directories(dir);
  TrainConfig half = tc;
  half.steps = 50;
  Trainer c(DenoiserParams::init(cfg, 1), half);
  c.run(ex);
  c.save(dir / "ckpt.json");
  Trainer d = Trainer::load(dir / "ckpt.json");
  EXPECT_EQ(d.params(), c.params());
  for (int k = 0; k < 50; ++k) d.step(ex);
  EXPECT_EQ(d.losses(), a.losses());
  EXPECT_EQ(d.params(), a.params());

  save_params(dir / "p.json", a.params());
  EXPECT_EQ(load_params(dir / "p.json"), a.params());
  write_text_file(dir / "bad.json", R"({"format":"nope"})");
  EXPECT_THROW(load_params(dir / "bad.json"), ValidationError);
  write_loss_curve(dir / "loss.csv", a.losses());
  EXPECT_EQ(read_text_file(dir / "loss.csv").rfind("step,loss\n1,", 0), 0u);
  fs::remove_all(dir);
}

TEST(Trainer, NonFiniteLossAborts) {
  const auto cfg = small_config(DenoiserKind::Layout);
  const TextFeaturizer text(cfg.text_tokens, cfg.text_dim, cfg.text_seed);
  const auto ex = toy_examples(4, {EditType::Translate}, text);
  auto p = DenoiserParams::init(cfg, 1);
  p.view("head.eps.b")(0, 0) = std::numeric_limits<double>::quiet_NaN();
  Trainer t(p, TrainConfig{});
  try {
    t.step(ex);
    FAIL() << "expected TrainingDiverged";
  } catch (const TrainingDiverged& e) {
    EXPECT_EQ(e.step(), 1);
  }
}

TEST(EditWithDiffusion, OutputIsValidScene) {
  DiffusionEditor ed{DenoiserParams::init(small_config(DenoiserKind::Graph), 1),
                     DenoiserParams::init(small_config(DenoiserKind::Layout), 2)};
  const auto scenes = sample_scenes(RoomType::Toy, 5, catalog(), 3);
  for (const auto& s : scenes) {
    Rng r1(4), r2(4);
    DiffusionTrace trace;
    const auto out = edit_with_diffusion(s, "Remove [" + s.objects[0].caption + "]", ed, catalog(), r1, &trace);
    EXPECT_NO_THROW(validate_scene(out, catalog()));
    EXPECT_EQ(out, edit_with_diffusion(s, "Remove [" + s.objects[0].caption + "]", ed, catalog(), r2));
    EXPECT_EQ(trace.layouts.size(), 11u);
    const auto jsonl = trace_to_jsonl(trace);
    EXPECT_EQ(std::count(jsonl.begin(), jsonl.end(), '\n'), 11);
  }
  DiffusionEditor mismatched{ed.graph, ed.graph};
  Rng rng(1);
  EXPECT_THROW(edit_with_diffusion(scenes[0], "Remove [x]", mismatched, catalog(), rng), ValidationError);
}
