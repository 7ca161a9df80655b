#pragma once

#include <cstdint>
#include <filesystem>
#include <functional>
#include <optional>
#include <random>
#include <span>
#include <string>
#include <vector>

#include <Eigen/Core>

#include "editroom/datagen.hpp"
#include "editroom/error.hpp"
#include "editroom/scene.hpp"
#include "editroom/text.hpp"

namespace editroom {

/// Token alphabets of one graph. Real values come first, then EMPTY, then MASK.
struct GraphVocab {
  int max_nodes = 8;
  int categories = 0;     // K_c
  int feature_slots = 4;  // n_f
  int codebook = 64;      // K_f

  int empty_category() const { return categories; }
  int mask_category() const { return categories + 1; }
  int empty_feature() const { return codebook; }
  int mask_feature() const { return codebook + 1; }
  static constexpr int kEdgeValues = kNumRelations;  // 0..10, None = 10
  static constexpr int kMaskEdge = kNumRelations;
  int edge_count() const { return max_nodes * (max_nodes - 1) / 2; }

  static GraphVocab of(RoomType room, const ObjectCatalog& catalog);
  friend bool operator==(const GraphVocab&, const GraphVocab&) = default;
};

/// Slot-aligned token view of a graph. Slots >= active are padding and are
/// never noised or scored.
struct DiscreteState {
  std::vector<int> categories;             // M
  std::vector<std::vector<int>> features;  // M x n_f
  std::vector<int> edges;                  // upper triangle, row-major
  int active = 0;

  friend bool operator==(const DiscreteState&, const DiscreteState&) = default;
};

/// Diffusion schedules. Layout betas are linear and rescaled by 1000/T so short
/// chains still reach near-zero signal; the discrete kernel keeps 1 - t/T.
struct NoiseSchedule {
  int T = 100;
  std::vector<double> betas;          // index t-1
  std::vector<double> alphas;
  std::vector<double> alpha_cumprod;

  static NoiseSchedule linear(int T, double beta_start = 1e-4, double beta_end = 0.02);
  /// Layout signal level; alpha_bar(0) == 1. Throws ValidationError for t outside [0, T].
  double alpha_bar(int t) const;
  /// Discrete keep probability 1 - t/T.
  double discrete_alpha_bar(int t) const;
  friend bool operator==(const NoiseSchedule&, const NoiseSchedule&) = default;
};

using Rng = std::mt19937_64;

/// x_t = sqrt(abar) x0 + sqrt(1 - abar) eps on rows where `rows` is true, 0 elsewhere.
Eigen::MatrixXd q_sample_layout(const Eigen::MatrixXd& x0, int t, const Eigen::MatrixXd& eps,
                                const NoiseSchedule& schedule, const std::vector<bool>& rows);
/// Masks every live token independently with probability 1 - t/T.
DiscreteState q_sample_discrete(const DiscreteState& x0, int t, const NoiseSchedule& schedule,
                                const GraphVocab& vocab, Rng& rng);

/// Rows of `x0_logits` are real-value logits (K columns); `x_t` holds values in
/// [0, K] with K meaning MASK. Returns n x (K+1) probabilities of x_{t-1}.
Eigen::MatrixXd discrete_posterior(std::span<const int> x_t, const Eigen::MatrixXd& x0_logits, int t,
                                   const NoiseSchedule& schedule);

Eigen::VectorXd softmax(const Eigen::VectorXd& logits);

enum class DenoiserKind { Graph, Layout };

struct DenoiserConfig {
  DenoiserKind kind = DenoiserKind::Graph;
  GraphVocab vocab;
  int hidden = 64;
  int layers = 2;
  int heads = 4;
  int text_tokens = 8;
  int text_dim = 32;
  int steps = 100;  // T
  std::uint64_t text_seed = 0x7e47;
  /// Layout kind: the residual is multiplied by this before diffusion.
  double layout_scale = 1.0;

  void validate() const;
  friend bool operator==(const DenoiserConfig&, const DenoiserConfig&) = default;
};

/// Number of token-pair relation types seen by self-attention.
inline constexpr int kAttentionRelations = 28;

struct TensorInfo {
  std::string name;
  int rows = 0;
  int cols = 0;
  std::size_t offset = 0;
};

/// Trainable weights as one flat vector with named row-major views.
class DenoiserParams {
public:
  using RowMat = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
  using View = Eigen::Map<RowMat>;
  using ConstView = Eigen::Map<const RowMat>;

  DenoiserParams() = default;
  /// Gaussian init scaled by fan-in; LayerNorm gains 1, biases 0.
  static DenoiserParams init(const DenoiserConfig& config, std::uint64_t seed);

  const DenoiserConfig& config() const { return config_; }
  std::size_t size() const { return values.size(); }
  const std::vector<TensorInfo>& tensors() const { return tensors_; }
  const TensorInfo& info(const std::string& name) const;

  View view(const std::string& name) { return view(values, name); }
  ConstView view(const std::string& name) const { return view(values, name); }
  View view(std::vector<double>& storage, const std::string& name) const;
  ConstView view(const std::vector<double>& storage, const std::string& name) const;

  bool all_finite() const;

  std::vector<double> values;

  friend bool operator==(const DenoiserParams& a, const DenoiserParams& b) {
    return a.config_ == b.config_ && a.values == b.values;
  }

private:
  void add(const std::string& name, int rows, int cols);

  DenoiserConfig config_;
  std::vector<TensorInfo> tensors_;
};

/// One training record in slot-aligned form: target slot i holds the object of
/// source slot i (matched by id); added objects take the next free slots.
struct EditExample {
  DiscreteState source;
  DiscreteState target;
  Eigen::MatrixXd source_layout;    // M x 8
  Eigen::MatrixXd target_layout;    // M x 8, aligned
  std::vector<bool> target_rows;    // rows holding a real target object
  TextFeature text;
  EditType edit_type = EditType::Translate;

  /// Layout diffusion operates on the residual against the source.
  Eigen::MatrixXd layout_residual() const;
};

DiscreteState encode_graph(const SceneGraph& graph, const GraphVocab& vocab);
/// Drops EMPTY slots and returns a graph in extract_scene_graph form.
SceneGraph compact_graph(const DiscreteState& state, RoomType room, const GraphVocab& vocab);
EditExample make_example(const Scene& source, const Scene& target, const std::string& command,
                         const GraphVocab& vocab, const TextFeaturizer& text, EditType edit_type);
std::vector<EditExample> make_examples(const std::vector<EditPair>& pairs, const GraphVocab& vocab,
                                       const TextFeaturizer& text);

struct GraphLogits {
  Eigen::MatrixXd categories;            // M x (K_c + 1)
  std::vector<Eigen::MatrixXd> features; // n_f of M x (K_f + 1)
  Eigen::MatrixXd edges;                 // E x 11
};

GraphLogits denoise_graph(const DiscreteState& x_t, const DiscreteState& source, const TextFeature& text, int t,
                          const DenoiserParams& params);
/// Predicted noise for every slot (M x 8).
Eigen::MatrixXd denoise_layout(const Eigen::MatrixXd& x_t, const DiscreteState& target_graph,
                               const DiscreteState& source_graph, const Eigen::MatrixXd& source_layout,
                               const TextFeature& text, int t, const DenoiserParams& params);

enum class GraphObjective {
  CrossEntropy,  // x0 cross-entropy on masked tokens
  ExactKL,       // closed-form KL between true and model posteriors of x_{t-1}
};

struct LossResult {
  double loss = 0.0;
  std::vector<double> grad;
  /// Scored tokens (graph) or scalar entries (layout).
  long count = 0;
};

/// Per-token losses against x0 for given logits; rows where x_t is not MASK are skipped.
/// Returns (sum, count) and writes d(sum)/d(logits) when `dlogits` is non-null.
std::pair<double, long> token_loss(std::span<const int> x_t, std::span<const int> x0, const Eigen::MatrixXd& logits,
                                   int mask_value, int t, const NoiseSchedule& schedule, GraphObjective objective,
                                   Eigen::MatrixXd* dlogits);

/// Draws t and masks from `rng`; never modifies params.
LossResult loss_graph(std::span<const EditExample> batch, const DenoiserParams& params,
                      const NoiseSchedule& schedule, Rng& rng,
                      GraphObjective objective = GraphObjective::CrossEntropy, bool want_grad = true);
LossResult loss_layout(std::span<const EditExample> batch, const DenoiserParams& params,
                       const NoiseSchedule& schedule, Rng& rng, bool want_grad = true);

struct TrainConfig {
  int steps = 2000;
  int batch = 32;
  double lr = 1e-3;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double adam_eps = 1e-8;
  /// Global gradient-norm clip; <= 0 disables.
  double clip = 1.0;
  std::uint64_t seed = 0;

  void validate() const;
};

class TrainingDiverged : public Error {
public:
  TrainingDiverged(std::string message, int step) : Error(std::move(message)), step_(step) {}
  int step() const noexcept { return step_; }

private:
  int step_;
};

/// Single-writer Adam trainer over a fixed example set.
class Trainer {
public:
  Trainer(DenoiserParams params, TrainConfig config);

  /// One optimizer step on a random mini-batch. Throws TrainingDiverged.
  double step(std::span<const EditExample> examples);
  /// Runs until config().steps; `on_step(step, loss)` is called after each step.
  void run(std::span<const EditExample> examples, const std::function<void(int, double)>& on_step = {});

  const DenoiserParams& params() const { return params_; }
  const TrainConfig& config() const { return config_; }
  int steps_done() const { return step_; }
  const std::vector<double>& losses() const { return losses_; }
  const NoiseSchedule& schedule() const { return schedule_; }

  void save(const std::filesystem::path& path) const;
  static Trainer load(const std::filesystem::path& path);

private:
  DenoiserParams params_;
  TrainConfig config_;
  NoiseSchedule schedule_;
  std::vector<double> m_, v_;
  int step_ = 0;
  Rng rng_;
  std::vector<double> losses_;
};

/// Checkpoint without optimizer state.
void save_params(const std::filesystem::path& path, const DenoiserParams& params);
DenoiserParams load_params(const std::filesystem::path& path);
void write_loss_curve(const std::filesystem::path& path, const std::vector<double>& losses);

using GraphDenoiser = std::function<GraphLogits(const DiscreteState& x_t, int t)>;
using LayoutDenoiser = std::function<Eigen::MatrixXd(const Eigen::MatrixXd& x_t, int t)>;

/// Ancestral sampling from the all-MASK state of `shape` (whose `active` is used).
/// EMPTY nodes come out with EMPTY features and None edges.
DiscreteState sample_graph_with(const GraphDenoiser& denoiser, const DiscreteState& shape, const GraphVocab& vocab,
                                const NoiseSchedule& schedule, Rng& rng);
/// DDPM ancestral sampling of the residual on `rows`; returns x_0. When `trace`
/// is given it receives the T+1 states x_T ... x_0.
Eigen::MatrixXd sample_layout_with(const LayoutDenoiser& denoiser, const std::vector<bool>& rows,
                                   const NoiseSchedule& schedule, Rng& rng,
                                   std::vector<Eigen::MatrixXd>* trace = nullptr);

DiscreteState sample_target_graph(const DiscreteState& source, const TextFeature& text, const DenoiserParams& params,
                                  const NoiseSchedule& schedule, Rng& rng);
/// Returns the absolute target layout (source + residual) with unit rotation columns.
Eigen::MatrixXd sample_target_layout(const DiscreteState& target_graph, const DiscreteState& source_graph,
                                     const Eigen::MatrixXd& source_layout, const TextFeature& text,
                                     const DenoiserParams& params, const NoiseSchedule& schedule, Rng& rng,
                                     std::vector<Eigen::MatrixXd>* trace = nullptr);

/// Catalog prototype of `category` nearest in Hamming distance (lowest index on ties).
const Prototype& retrieve_prototype(const ObjectCatalog& catalog, int category, const std::vector<int>& features);

struct DiffusionEditor {
  DenoiserParams graph;
  DenoiserParams layout;

  /// Throws ValidationError when the two checkpoints disagree on vocab or text shape.
  void validate() const;
  TextFeaturizer featurizer() const;
};

struct DiffusionTrace {
  DiscreteState target_graph;
  std::vector<Eigen::MatrixXd> layouts;  // T+1 absolute layouts
};

/// Source scene + template command -> generated target scene.
Scene edit_with_diffusion(const Scene& scene, const std::string& template_command, const DiffusionEditor& editor,
                          const ObjectCatalog& catalog, Rng& rng, DiffusionTrace* trace = nullptr);

/// JSON lines {"step", "t", "layout"} for a trace, x_T first.
std::string trace_to_jsonl(const DiffusionTrace& trace);

}  // namespace editroom
