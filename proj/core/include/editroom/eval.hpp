#pragma once

#include <filesystem>
#include <functional>
#include <map>
#include <string>
#include <string_view>
#include <vector>

#include <Eigen/Core>

#include "editroom/datagen.hpp"
#include "editroom/scene.hpp"

namespace editroom {

struct MatchedPair {
  int gen = 0;
  int target = 0;
  double iou = 0.0;

  friend bool operator==(const MatchedPair&, const MatchedPair&) = default;
};

struct MatchResult {
  std::vector<MatchedPair> pairs;  // selection order, descending iou
  std::vector<int> unmatched_gen;
  std::vector<int> unmatched_target;
};

struct MatchOptions {
  /// Only pair objects of the same category.
  bool same_category = false;
};

/// Greedy matching on a precomputed IOU matrix (rows = generated objects).
/// Ties go to the lowest row, then the lowest column; zero entries never match.
MatchResult greedy_match(const Eigen::MatrixXd& iou);
Eigen::MatrixXd iou_matrix(const Scene& gen, const Scene& target, const MatchOptions& options = {});
MatchResult match_objects(const Scene& gen, const Scene& target, const MatchOptions& options = {});

using CaptionSimilarity = std::function<double(std::string_view, std::string_view)>;

/// Jaccard index of lowercased token sets; two empty captions give 1.
double caption_similarity(std::string_view a, std::string_view b);

/// Sum of matched ious over max(|gen|, |target|); 1 for two empty scenes.
double scene_iou(const Scene& gen, const Scene& target, const MatchOptions& options = {});
/// scene_iou with each matched iou weighted by caption similarity.
double scene_siou(const Scene& gen, const Scene& target, const MatchOptions& options = {},
                  const CaptionSimilarity& similarity = caption_similarity);

struct MetricCell {
  double sum = 0.0;
  int count = 0;

  double mean() const { return count ? sum / count : 0.0; }
  void add(double v) {
    sum += v;
    ++count;
  }
};

struct MetricsReport {
  struct Row {
    MetricCell iou;
    MetricCell s_iou;
  };
  /// room -> edit type -> metrics.
  std::map<std::string, std::map<std::string, Row>> rows;
  /// Pair ids with no prediction, scored as 0.
  std::vector<std::string> missing;
  /// Prediction ids with no matching target record.
  std::vector<std::string> unknown;

  int evaluated() const;
  /// Mean over all evaluated pairs.
  Row overall() const;
  std::string to_json() const;
  /// Markdown table: one line per room, one column pair per edit type.
  std::string to_table() const;
};

/// Predictions keyed by pair id.
MetricsReport evaluate_predictions(const std::vector<EditPair>& pairs, const std::map<std::string, Scene>& predictions,
                                   const MatchOptions& options = {});

/// `pred_dir` holds one `<pair_id>.json` scene per prediction; `target` is a
/// pairs.jsonl file or a directory containing one.
MetricsReport evaluate(const std::filesystem::path& pred_dir, const std::filesystem::path& target,
                       const ObjectCatalog& catalog, const MatchOptions& options = {});

}  // namespace editroom
