#include <algorithm>
#include <cmath>
#include <limits>

#include "editroom/diffusion.hpp"
#include "editroom/executor.hpp"
#include "json_io.hpp"

namespace editroom {

namespace {

void check_step(int t, int T, bool allow_zero) {
  if (t < (allow_zero ? 0 : 1) || t > T)
    throw ValidationError("diffusion step " + std::to_string(t) + " outside [" + (allow_zero ? "0" : "1") + ", " +
                          std::to_string(T) + "]");
}

int sample_categorical(const Eigen::RowVectorXd& p, Rng& rng) {
  const double u = std::uniform_real_distribution<double>(0.0, 1.0)(rng);
  double acc = 0.0;
  int last = 0;
  for (int k = 0; k < p.size(); ++k) {
    if (p[k] <= 0.0) continue;
    acc += p[k];
    last = k;
    if (u < acc) return k;
  }
  return last;
}

}  // namespace

GraphVocab GraphVocab::of(RoomType room, const ObjectCatalog& catalog) {
  return {editroom::max_nodes(room), catalog.category_count(), catalog.feature_slots, catalog.codebook_size};
}

NoiseSchedule NoiseSchedule::linear(int T, double beta_start, double beta_end) {
  if (T < 1) throw ValidationError("schedule needs T >= 1");
  NoiseSchedule s;
  s.T = T;
  const double scale = 1000.0 / T;
  double cum = 1.0;
  for (int i = 0; i < T; ++i) {
    const double frac = T == 1 ? 0.0 : static_cast<double>(i) / (T - 1);
    const double beta = std::min(0.999, scale * (beta_start + (beta_end - beta_start) * frac));
    s.betas.push_back(beta);
    s.alphas.push_back(1.0 - beta);
    cum *= 1.0 - beta;
    s.alpha_cumprod.push_back(cum);
  }
  return s;
}

double NoiseSchedule::alpha_bar(int t) const {
  check_step(t, T, true);
  return t == 0 ? 1.0 : alpha_cumprod[static_cast<std::size_t>(t - 1)];
}

double NoiseSchedule::discrete_alpha_bar(int t) const {
  check_step(t, T, true);
  return 1.0 - static_cast<double>(t) / T;
}

Eigen::MatrixXd q_sample_layout(const Eigen::MatrixXd& x0, int t, const Eigen::MatrixXd& eps,
                                const NoiseSchedule& schedule, const std::vector<bool>& rows) {
  check_step(t, schedule.T, false);
  if (eps.rows() != x0.rows() || eps.cols() != x0.cols() || static_cast<Eigen::Index>(rows.size()) != x0.rows())
    throw ValidationError("q_sample_layout shape mismatch");
  const double ab = schedule.alpha_bar(t);
  Eigen::MatrixXd out = std::sqrt(ab) * x0 + std::sqrt(1.0 - ab) * eps;
  for (Eigen::Index i = 0; i < out.rows(); ++i)
    if (!rows[static_cast<std::size_t>(i)]) out.row(i).setZero();
  return out;
}

DiscreteState q_sample_discrete(const DiscreteState& x0, int t, const NoiseSchedule& schedule,
                                const GraphVocab& vocab, Rng& rng) {
  check_step(t, schedule.T, false);
  const double keep = schedule.discrete_alpha_bar(t);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  DiscreteState x = x0;
  const int a = x0.active;
  for (int i = 0; i < a; ++i) {
    if (u(rng) >= keep) x.categories[i] = vocab.mask_category();
    for (auto& f : x.features[i])
      if (u(rng) >= keep) f = vocab.mask_feature();
  }
  for (int i = 0; i < a; ++i)
    for (int j = i + 1; j < a; ++j)
      if (u(rng) >= keep) x.edges[edge_index(i, j, vocab.max_nodes)] = GraphVocab::kMaskEdge;
  return x;
}

Eigen::VectorXd softmax(const Eigen::VectorXd& logits) {
  const double m = logits.maxCoeff();
  Eigen::VectorXd e = (logits.array() - m).exp();
  return e / e.sum();
}

Eigen::MatrixXd discrete_posterior(std::span<const int> x_t, const Eigen::MatrixXd& x0_logits, int t,
                                   const NoiseSchedule& schedule) {
  check_step(t, schedule.T, false);
  if (static_cast<Eigen::Index>(x_t.size()) != x0_logits.rows())
    throw ValidationError("discrete_posterior: token count does not match logits rows");
  const int K = static_cast<int>(x0_logits.cols());
  const double ab_t = schedule.discrete_alpha_bar(t);
  const double ab_prev = schedule.discrete_alpha_bar(t - 1);
  const double stay_masked = (1.0 - ab_prev) / (1.0 - ab_t);
  const double unmask = (ab_prev - ab_t) / (1.0 - ab_t);
  Eigen::MatrixXd post = Eigen::MatrixXd::Zero(x0_logits.rows(), K + 1);
  for (Eigen::Index i = 0; i < post.rows(); ++i) {
    const int v = x_t[static_cast<std::size_t>(i)];
    if (v < 0 || v > K) throw ValidationError("discrete_posterior: token value out of range");
    if (v < K) {
      post(i, v) = 1.0;
      continue;
    }
    post.row(i).head(K) = unmask * softmax(x0_logits.row(i).transpose()).transpose();
    post(i, K) = stay_masked;
  }
  return post;
}

std::pair<double, long> token_loss(std::span<const int> x_t, std::span<const int> x0, const Eigen::MatrixXd& logits,
                                   int mask_value, int t, const NoiseSchedule& schedule, GraphObjective objective,
                                   Eigen::MatrixXd* dlogits) {
  if (x_t.size() != x0.size() || static_cast<Eigen::Index>(x0.size()) > logits.rows())
    throw ValidationError("token_loss shape mismatch");
  double weight = 1.0;
  if (objective == GraphObjective::ExactKL) {
    const double ab_t = schedule.discrete_alpha_bar(t);
    weight = (schedule.discrete_alpha_bar(t - 1) - ab_t) / (1.0 - ab_t);
  }
  double sum = 0.0;
  long count = 0;
  for (std::size_t i = 0; i < x0.size(); ++i) {
    if (x_t[i] != mask_value) continue;
    const auto row = logits.row(static_cast<Eigen::Index>(i));
    const double m = row.maxCoeff();
    const double lse = m + std::log((row.array() - m).exp().sum());
    sum += weight * (lse - row(x0[i]));
    ++count;
    if (dlogits) {
      auto d = dlogits->row(static_cast<Eigen::Index>(i));
      d += weight * (row.array() - lse).exp().matrix();
      d(x0[i]) -= weight;
    }
  }
  return {sum, count};
}

DiscreteState encode_graph(const SceneGraph& graph, const GraphVocab& vocab) {
  if (graph.size() != vocab.max_nodes || graph.feature_slots != vocab.feature_slots)
    throw ValidationError("graph shape does not match the diffusion vocabulary");
  DiscreteState s;
  const int m = vocab.max_nodes;
  s.categories.assign(m, vocab.empty_category());
  s.features.assign(m, std::vector<int>(vocab.feature_slots, vocab.empty_feature()));
  s.edges.assign(vocab.edge_count(), static_cast<int>(SpatialRelation::None));
  for (int i = 0; i < m; ++i) {
    if (!graph.node_mask[i]) continue;
    s.categories[i] = graph.node_categories[i];
    s.features[i] = graph.node_features[i];
    s.active = i + 1;
  }
  for (std::size_t e = 0; e < graph.edges.size(); ++e) s.edges[e] = static_cast<int>(graph.edges[e]);
  return s;
}

SceneGraph compact_graph(const DiscreteState& state, RoomType room, const GraphVocab& vocab) {
  SceneGraph g = empty_graph(room, vocab.feature_slots);
  if (g.size() != vocab.max_nodes) throw ValidationError("room type does not match the diffusion vocabulary");
  std::vector<int> slots;
  for (int i = 0; i < vocab.max_nodes; ++i)
    if (state.categories[i] >= 0 && state.categories[i] < vocab.categories) slots.push_back(i);
  for (std::size_t k = 0; k < slots.size(); ++k) {
    g.node_categories[k] = state.categories[slots[k]];
    g.node_features[k] = state.features[slots[k]];
    g.node_mask[k] = true;
  }
  for (std::size_t a = 0; a < slots.size(); ++a)
    for (std::size_t b = a + 1; b < slots.size(); ++b) {
      const int v = state.edges[edge_index(slots[a], slots[b], vocab.max_nodes)];
      g.set_edge(static_cast<int>(a), static_cast<int>(b),
                 v >= 0 && v < kNumRelations ? static_cast<SpatialRelation>(v) : SpatialRelation::None);
    }
  return g;
}

Eigen::MatrixXd EditExample::layout_residual() const {
  Eigen::MatrixXd r = target_layout - source_layout;
  for (Eigen::Index i = 0; i < r.rows(); ++i)
    if (!target_rows[static_cast<std::size_t>(i)]) r.row(i).setZero();
  return r;
}

namespace {

std::vector<std::string> captions(const Scene& scene) {
  std::vector<std::string> out;
  for (const auto& o : scene.objects) out.push_back(o.caption);
  return out;
}

}  // namespace

EditExample make_example(const Scene& source, const Scene& target, const std::string& command,
                         const GraphVocab& vocab, const TextFeaturizer& text, EditType edit_type) {
  const int m = vocab.max_nodes;
  if (max_nodes(source.room_type) != m || max_nodes(target.room_type) != m)
    throw ValidationError("room type does not match the diffusion vocabulary");
  EditExample ex;
  ex.edit_type = edit_type;
  ex.source = encode_graph(extract_scene_graph(source, vocab.feature_slots), vocab);
  ex.source_layout = layout_matrix(source);
  ex.text = text.encode(command, captions(source), m);

  const int n_s = static_cast<int>(source.objects.size());
  std::vector<int> slot_of(target.objects.size(), -1);
  std::vector<bool> used(m, false);
  for (std::size_t k = 0; k < target.objects.size(); ++k)
    if (auto i = source.find(target.objects[k].id)) {
      slot_of[k] = static_cast<int>(*i);
      used[*i] = true;
    }
  int next = n_s;
  for (auto& s : slot_of)
    if (s < 0) {
      while (next < m && used[next]) ++next;
      if (next >= m) throw ValidationError("target does not fit the slot budget");
      s = next;
      used[next] = true;
    }

  DiscreteState& tg = ex.target;
  tg.categories.assign(m, vocab.empty_category());
  tg.features.assign(m, std::vector<int>(vocab.feature_slots, vocab.empty_feature()));
  tg.edges.assign(vocab.edge_count(), static_cast<int>(SpatialRelation::None));
  tg.active = std::min(m, n_s + 1);
  ex.target_layout = Eigen::MatrixXd::Zero(m, 8);
  ex.target_rows.assign(m, false);
  std::vector<const SceneObject*> at(m, nullptr);
  for (std::size_t k = 0; k < target.objects.size(); ++k) {
    const int s = slot_of[k];
    if (s >= tg.active) throw ValidationError("edit adds more than one object");
    const auto& o = target.objects[k];
    at[s] = &o;
    tg.categories[s] = o.category;
    tg.features[s] = o.feature_indices;
    ex.target_rows[s] = true;
    ex.target_layout.row(s) << o.position.x, o.position.y, o.position.z, o.half_extents.x, o.half_extents.y,
        o.half_extents.z, std::cos(o.yaw), std::sin(o.yaw);
  }
  for (int i = 0; i < m; ++i)
    for (int j = i + 1; j < m; ++j)
      if (at[i] && at[j]) tg.edges[edge_index(i, j, m)] = static_cast<int>(classify_relation(*at[i], *at[j]));
  return ex;
}

std::vector<EditExample> make_examples(const std::vector<EditPair>& pairs, const GraphVocab& vocab,
                                       const TextFeaturizer& text) {
  std::vector<EditExample> out;
  out.reserve(pairs.size());
  for (const auto& p : pairs) out.push_back(make_example(p.source, p.target, p.template_command, vocab, text, p.edit_type));
  return out;
}

DiscreteState sample_graph_with(const GraphDenoiser& denoiser, const DiscreteState& shape, const GraphVocab& vocab,
                                const NoiseSchedule& schedule, Rng& rng) {
  const int m = vocab.max_nodes;
  const int a = shape.active;
  DiscreteState x;
  x.active = a;
  x.categories.assign(m, vocab.empty_category());
  x.features.assign(m, std::vector<int>(vocab.feature_slots, vocab.empty_feature()));
  x.edges.assign(vocab.edge_count(), static_cast<int>(SpatialRelation::None));
  for (int i = 0; i < a; ++i) {
    x.categories[i] = vocab.mask_category();
    for (auto& f : x.features[i]) f = vocab.mask_feature();
    for (int j = i + 1; j < a; ++j) x.edges[edge_index(i, j, m)] = GraphVocab::kMaskEdge;
  }

  std::vector<int> toks;
  for (int t = schedule.T; t >= 1; --t) {
    const GraphLogits lg = denoiser(x, t);
    toks.assign(x.categories.begin(), x.categories.begin() + a);
    Eigen::MatrixXd post = discrete_posterior(toks, lg.categories.topRows(a), t, schedule);
    for (int i = 0; i < a; ++i)
      if (x.categories[i] == vocab.mask_category()) x.categories[i] = sample_categorical(post.row(i), rng);
    for (int s = 0; s < vocab.feature_slots; ++s) {
      toks.clear();
      for (int i = 0; i < a; ++i) toks.push_back(x.features[i][s]);
      post = discrete_posterior(toks, lg.features[s].topRows(a), t, schedule);
      for (int i = 0; i < a; ++i)
        if (x.features[i][s] == vocab.mask_feature()) x.features[i][s] = sample_categorical(post.row(i), rng);
    }
    std::vector<std::size_t> live;
    for (int i = 0; i < a; ++i)
      for (int j = i + 1; j < a; ++j) live.push_back(edge_index(i, j, m));
    if (!live.empty()) {
      toks.clear();
      Eigen::MatrixXd el(static_cast<Eigen::Index>(live.size()), lg.edges.cols());
      for (std::size_t k = 0; k < live.size(); ++k) {
        toks.push_back(x.edges[live[k]]);
        el.row(static_cast<Eigen::Index>(k)) = lg.edges.row(static_cast<Eigen::Index>(live[k]));
      }
      post = discrete_posterior(toks, el, t, schedule);
      for (std::size_t k = 0; k < live.size(); ++k)
        if (x.edges[live[k]] == GraphVocab::kMaskEdge)
          x.edges[live[k]] = sample_categorical(post.row(static_cast<Eigen::Index>(k)), rng);
    }
  }
  for (int i = 0; i < a; ++i) {
    if (x.categories[i] != vocab.empty_category()) continue;
    for (auto& f : x.features[i]) f = vocab.empty_feature();
    for (int j = 0; j < m; ++j)
      if (j != i) x.edges[edge_index(std::min(i, j), std::max(i, j), m)] = static_cast<int>(SpatialRelation::None);
  }
  return x;
}

Eigen::MatrixXd sample_layout_with(const LayoutDenoiser& denoiser, const std::vector<bool>& rows,
                                   const NoiseSchedule& schedule, Rng& rng, std::vector<Eigen::MatrixXd>* trace) {
  const auto m = static_cast<Eigen::Index>(rows.size());
  std::normal_distribution<double> n(0.0, 1.0);
  auto noise = [&] {
    Eigen::MatrixXd z = Eigen::MatrixXd::Zero(m, 8);
    for (Eigen::Index i = 0; i < m; ++i)
      if (rows[static_cast<std::size_t>(i)])
        for (int c = 0; c < 8; ++c) z(i, c) = n(rng);
    return z;
  };
  Eigen::MatrixXd x = noise();
  if (trace) {
    trace->clear();
    trace->push_back(x);
  }
  for (int t = schedule.T; t >= 1; --t) {
    const Eigen::MatrixXd eps = denoiser(x, t);
    const double beta = schedule.betas[static_cast<std::size_t>(t - 1)];
    const double ab = schedule.alpha_bar(t);
    Eigen::MatrixXd mean = (x - beta / std::sqrt(1.0 - ab) * eps) / std::sqrt(1.0 - beta);
    if (t > 1) {
      const double var = beta * (1.0 - schedule.alpha_bar(t - 1)) / (1.0 - ab);
      mean += std::sqrt(var) * noise();
    }
    for (Eigen::Index i = 0; i < m; ++i)
      if (!rows[static_cast<std::size_t>(i)]) mean.row(i).setZero();
    x = std::move(mean);
    if (trace) trace->push_back(x);
  }
  return x;
}

DiscreteState sample_target_graph(const DiscreteState& source, const TextFeature& text, const DenoiserParams& params,
                                  const NoiseSchedule& schedule, Rng& rng) {
  const GraphVocab& vocab = params.config().vocab;
  DiscreteState shape;
  shape.active = std::min(vocab.max_nodes, source.active + 1);
  return sample_graph_with([&](const DiscreteState& x, int t) { return denoise_graph(x, source, text, t, params); },
                           shape, vocab, schedule, rng);
}

namespace {

void to_absolute(Eigen::MatrixXd& x, const Eigen::MatrixXd& source_layout, const std::vector<bool>& rows,
                 double scale) {
  x /= scale;
  for (Eigen::Index i = 0; i < x.rows(); ++i)
    if (rows[static_cast<std::size_t>(i)]) x.row(i) += source_layout.row(i);
}

}  // namespace

Eigen::MatrixXd sample_target_layout(const DiscreteState& target_graph, const DiscreteState& source_graph,
                                     const Eigen::MatrixXd& source_layout, const TextFeature& text,
                                     const DenoiserParams& params, const NoiseSchedule& schedule, Rng& rng,
                                     std::vector<Eigen::MatrixXd>* trace) {
  const GraphVocab& vocab = params.config().vocab;
  std::vector<bool> rows(vocab.max_nodes, false);
  for (int i = 0; i < vocab.max_nodes; ++i)
    rows[i] = target_graph.categories[i] >= 0 && target_graph.categories[i] < vocab.categories;
  Eigen::MatrixXd x = sample_layout_with(
      [&](const Eigen::MatrixXd& xt, int t) {
        return denoise_layout(xt, target_graph, source_graph, source_layout, text, t, params);
      },
      rows, schedule, rng, trace);
  const double scale = params.config().layout_scale;
  to_absolute(x, source_layout, rows, scale);
  if (trace)
    for (auto& s : *trace) to_absolute(s, source_layout, rows, scale);
  for (Eigen::Index i = 0; i < x.rows(); ++i) {
    if (!rows[static_cast<std::size_t>(i)]) continue;
    const double norm = std::hypot(x(i, 6), x(i, 7));
    if (norm > 1e-12) {
      x(i, 6) /= norm;
      x(i, 7) /= norm;
    } else {
      x(i, 6) = 1.0;
      x(i, 7) = 0.0;
    }
  }
  return x;
}

const Prototype& retrieve_prototype(const ObjectCatalog& catalog, int category, const std::vector<int>& features) {
  const Prototype* best = nullptr;
  std::size_t best_d = std::numeric_limits<std::size_t>::max();
  for (std::size_t k : catalog.prototypes_of(category)) {
    const auto& p = catalog.prototypes[k];
    std::size_t d = 0;
    for (std::size_t s = 0; s < p.feature_indices.size(); ++s)
      d += s >= features.size() || features[s] != p.feature_indices[s];
    if (d < best_d) {
      best_d = d;
      best = &p;
    }
  }
  if (!best) throw ValidationError("catalog has no prototype for category " + std::to_string(category));
  return *best;
}

void DiffusionEditor::validate() const {
  const auto& g = graph.config();
  const auto& l = layout.config();
  if (g.kind != DenoiserKind::Graph || l.kind != DenoiserKind::Layout)
    throw ValidationError("editor needs a graph and a layout checkpoint");
  if (g.vocab != l.vocab) throw ValidationError("graph and layout checkpoints use different vocabularies");
  if (g.text_tokens != l.text_tokens || g.text_dim != l.text_dim || g.text_seed != l.text_seed)
    throw ValidationError("graph and layout checkpoints use different text encoders");
}

TextFeaturizer DiffusionEditor::featurizer() const {
  const auto& c = graph.config();
  return TextFeaturizer(c.text_tokens, c.text_dim, c.text_seed);
}

Scene edit_with_diffusion(const Scene& scene, const std::string& template_command, const DiffusionEditor& editor,
                          const ObjectCatalog& catalog, Rng& rng, DiffusionTrace* trace) {
  editor.validate();
  const GraphVocab& vocab = editor.graph.config().vocab;
  if (vocab != GraphVocab::of(scene.room_type, catalog))
    throw ValidationError("checkpoints were trained for a different room type or catalog");
  const TextFeature text = editor.featurizer().encode(template_command, captions(scene), vocab.max_nodes);
  const DiscreteState source = encode_graph(extract_scene_graph(scene, vocab.feature_slots), vocab);
  const Eigen::MatrixXd b_s = layout_matrix(scene);
  const NoiseSchedule gs = NoiseSchedule::linear(editor.graph.config().steps);
  const NoiseSchedule ls = NoiseSchedule::linear(editor.layout.config().steps);

  DiscreteState tg = sample_target_graph(source, text, editor.graph, gs, rng);
  std::vector<Eigen::MatrixXd> steps;
  const Eigen::MatrixXd layout =
      sample_target_layout(tg, source, b_s, text, editor.layout, ls, rng, trace ? &steps : nullptr);
  if (!layout.allFinite()) throw Error("layout sampling produced non-finite values");

  Scene out;
  out.room_type = scene.room_type;
  out.room_bounds = scene.room_bounds;
  std::vector<int> fresh;
  for (int i = 0; i < vocab.max_nodes; ++i) {
    const int c = tg.categories[i];
    if (c < 0 || c >= vocab.categories) continue;
    const Prototype& p = retrieve_prototype(catalog, c, tg.features[i]);
    SceneObject o;
    o.category = c;
    o.caption = p.caption;
    o.feature_indices = p.feature_indices;
    const auto r = layout.row(i);
    const auto& lo = scene.room_bounds.min;
    const auto& hi = scene.room_bounds.max;
    o.position = {std::clamp(r(0), lo.x, hi.x), r(1), std::clamp(r(2), lo.z, hi.z)};
    o.half_extents = {std::max(r(3), 1e-3), std::max(r(4), 1e-3), std::max(r(5), 1e-3)};
    o.yaw = normalize_yaw(std::atan2(r(7), r(6)));
    if (i < static_cast<int>(scene.objects.size()) && scene.objects[i].category == c)
      o.id = scene.objects[i].id;
    else
      fresh.push_back(static_cast<int>(out.objects.size()));
    out.objects.push_back(std::move(o));
  }
  for (int k : fresh) {
    Scene taken = out;
    taken.objects.insert(taken.objects.end(), scene.objects.begin(), scene.objects.end());
    out.objects[k].id = fresh_object_id(taken, catalog, out.objects[k].category);
  }
  validate_scene(out, catalog);
  if (trace) {
    trace->target_graph = std::move(tg);
    trace->layouts = std::move(steps);
  }
  return out;
}

std::string trace_to_jsonl(const DiffusionTrace& trace) {
  std::string out;
  const int T = static_cast<int>(trace.layouts.size()) - 1;
  for (int k = 0; k <= T; ++k) {
    const auto& x = trace.layouts[k];
    detail::json rows = detail::json::array();
    for (Eigen::Index i = 0; i < x.rows(); ++i) {
      detail::json r = detail::json::array();
      for (Eigen::Index c = 0; c < x.cols(); ++c) r.push_back(x(i, c));
      rows.push_back(std::move(r));
    }
    out += detail::json{{"step", k}, {"t", T - k}, {"layout", std::move(rows)}}.dump();
    out += '\n';
  }
  return out;
}

}  // namespace editroom
