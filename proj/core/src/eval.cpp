#include "editroom/eval.hpp"

#include <algorithm>
#include <set>
#include <sstream>
#include <tuple>

#include "editroom/error.hpp"
#include "editroom/geometry.hpp"
#include "json_io.hpp"

namespace editroom {

MatchResult greedy_match(const Eigen::MatrixXd& iou) {
  std::vector<std::tuple<double, int, int>> entries;
  for (int g = 0; g < iou.rows(); ++g)
    for (int t = 0; t < iou.cols(); ++t)
      if (iou(g, t) > 0.0) entries.emplace_back(iou(g, t), g, t);
  std::sort(entries.begin(), entries.end(), [](const auto& a, const auto& b) {
    if (std::get<0>(a) != std::get<0>(b)) return std::get<0>(a) > std::get<0>(b);
    if (std::get<1>(a) != std::get<1>(b)) return std::get<1>(a) < std::get<1>(b);
    return std::get<2>(a) < std::get<2>(b);
  });
  std::vector<bool> gen_used(static_cast<std::size_t>(iou.rows())), tgt_used(static_cast<std::size_t>(iou.cols()));
  MatchResult r;
  for (const auto& [v, g, t] : entries) {
    if (gen_used[g] || tgt_used[t]) continue;
    gen_used[g] = tgt_used[t] = true;
    r.pairs.push_back({g, t, v});
  }
  for (int g = 0; g < iou.rows(); ++g)
    if (!gen_used[g]) r.unmatched_gen.push_back(g);
  for (int t = 0; t < iou.cols(); ++t)
    if (!tgt_used[t]) r.unmatched_target.push_back(t);
  return r;
}

Eigen::MatrixXd iou_matrix(const Scene& gen, const Scene& target, const MatchOptions& options) {
  Eigen::MatrixXd m(gen.objects.size(), target.objects.size());
  for (std::size_t g = 0; g < gen.objects.size(); ++g)
    for (std::size_t t = 0; t < target.objects.size(); ++t) {
      const auto& a = gen.objects[g];
      const auto& b = target.objects[t];
      m(g, t) = options.same_category && a.category != b.category
                    ? 0.0
                    : std::clamp(geometry::iou_3d(geometry::OrientedBox::of(a), geometry::OrientedBox::of(b)), 0.0,
                                 1.0);
    }
  return m;
}

MatchResult match_objects(const Scene& gen, const Scene& target, const MatchOptions& options) {
  return greedy_match(iou_matrix(gen, target, options));
}

double caption_similarity(std::string_view a, std::string_view b) {
  const auto ta = tokenize(a), tb = tokenize(b);
  const std::set<std::string> sa(ta.begin(), ta.end()), sb(tb.begin(), tb.end());
  if (sa.empty() && sb.empty()) return 1.0;
  std::size_t common = 0;
  for (const auto& t : sa) common += sb.count(t);
  return static_cast<double>(common) / static_cast<double>(sa.size() + sb.size() - common);
}

namespace {

double weighted_iou(const Scene& gen, const Scene& target, const MatchOptions& options,
                    const CaptionSimilarity* similarity) {
  const std::size_t n = std::max(gen.objects.size(), target.objects.size());
  if (n == 0) return 1.0;
  double sum = 0.0;
  for (const auto& p : match_objects(gen, target, options).pairs)
    sum += similarity ? p.iou * std::clamp((*similarity)(gen.objects[p.gen].caption, target.objects[p.target].caption),
                                           0.0, 1.0)
                      : p.iou;
  return sum / static_cast<double>(n);
}

}  // namespace

double scene_iou(const Scene& gen, const Scene& target, const MatchOptions& options) {
  return weighted_iou(gen, target, options, nullptr);
}

double scene_siou(const Scene& gen, const Scene& target, const MatchOptions& options,
                  const CaptionSimilarity& similarity) {
  return weighted_iou(gen, target, options, &similarity);
}

int MetricsReport::evaluated() const {
  int n = 0;
  for (const auto& [room, by_type] : rows)
    for (const auto& [type, row] : by_type) n += row.iou.count;
  return n;
}

MetricsReport::Row MetricsReport::overall() const {
  Row all;
  for (const auto& [room, by_type] : rows)
    for (const auto& [type, row] : by_type) {
      all.iou.sum += row.iou.sum;
      all.iou.count += row.iou.count;
      all.s_iou.sum += row.s_iou.sum;
      all.s_iou.count += row.s_iou.count;
    }
  return all;
}

std::string MetricsReport::to_json() const {
  using detail::json;
  json j;
  json jr = json::object();
  for (const auto& [room, by_type] : rows)
    for (const auto& [type, row] : by_type)
      jr[room][type] = {{"iou", {{"mean", row.iou.mean()}, {"count", row.iou.count}}},
                        {"s_iou", {{"mean", row.s_iou.mean()}, {"count", row.s_iou.count}}}};
  const Row all = overall();
  j["rows"] = std::move(jr);
  j["overall"] = {{"iou", all.iou.mean()}, {"s_iou", all.s_iou.mean()}, {"count", all.iou.count}};
  j["missing"] = missing;
  j["unknown"] = unknown;
  return j.dump(2) + "\n";
}

std::string MetricsReport::to_table() const {
  std::set<std::string> types;
  for (const auto& [room, by_type] : rows)
    for (const auto& [type, row] : by_type) types.insert(type);
  std::ostringstream out;
  out.setf(std::ios::fixed);
  out.precision(4);
  out << "| room |";
  for (const auto& t : types) out << ' ' << t << " IOU | " << t << " S-IOU |";
  out << "\n|---|";
  for (std::size_t i = 0; i < types.size(); ++i) out << "---|---|";
  out << '\n';
  for (const auto& [room, by_type] : rows) {
    out << "| " << room << " |";
    for (const auto& t : types) {
      const auto it = by_type.find(t);
      if (it == by_type.end()) out << " - | - |";
      else out << ' ' << it->second.iou.mean() << " | " << it->second.s_iou.mean() << " |";
    }
    out << '\n';
  }
  if (!missing.empty()) out << "\nmissing predictions: " << missing.size() << " (scored 0)\n";
  if (!unknown.empty()) out << "predictions without targets: " << unknown.size() << '\n';
  return out.str();
}

MetricsReport evaluate_predictions(const std::vector<EditPair>& pairs, const std::map<std::string, Scene>& predictions,
                                   const MatchOptions& options) {
  MetricsReport r;
  std::set<std::string> seen;
  for (const auto& p : pairs) {
    seen.insert(p.pair_id);
    auto& row = r.rows[std::string(to_string(p.room_type))][std::string(to_string(p.edit_type))];
    const auto it = predictions.find(p.pair_id);
    if (it == predictions.end()) {
      r.missing.push_back(p.pair_id);
      row.iou.add(0.0);
      row.s_iou.add(0.0);
      continue;
    }
    row.iou.add(scene_iou(it->second, p.target, options));
    row.s_iou.add(scene_siou(it->second, p.target, options));
  }
  for (const auto& [id, scene] : predictions)
    if (!seen.count(id)) r.unknown.push_back(id);
  return r;
}

MetricsReport evaluate(const std::filesystem::path& pred_dir, const std::filesystem::path& target,
                       const ObjectCatalog& catalog, const MatchOptions& options) {
  const auto pairs_file = std::filesystem::is_directory(target) ? target / "pairs.jsonl" : target;
  const auto pairs = read_pairs(pairs_file, catalog);
  if (!std::filesystem::is_directory(pred_dir)) throw Error("not a directory: " + pred_dir.string());
  std::vector<std::filesystem::path> files;
  for (const auto& e : std::filesystem::directory_iterator(pred_dir))
    if (e.is_regular_file() && e.path().extension() == ".json") files.push_back(e.path());
  std::sort(files.begin(), files.end());
  std::map<std::string, Scene> predictions;
  for (const auto& f : files) predictions.emplace(f.stem().string(), deserialize_scene(read_text_file(f), catalog));
  return evaluate_predictions(pairs, predictions, options);
}

}  // namespace editroom
