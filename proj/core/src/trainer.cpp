#include <cmath>
#include <fstream>
#include <sstream>

#include "editroom/diffusion.hpp"
#include "json_io.hpp"

namespace editroom {

using detail::json;

namespace {

constexpr const char* kFormat = "editroom-denoiser";
constexpr int kVersion = 1;

json config_to_json(const DenoiserConfig& c) {
  return {{"kind", c.kind == DenoiserKind::Graph ? "graph" : "layout"},
          {"max_nodes", c.vocab.max_nodes},
          {"categories", c.vocab.categories},
          {"feature_slots", c.vocab.feature_slots},
          {"codebook", c.vocab.codebook},
          {"hidden", c.hidden},
          {"layers", c.layers},
          {"heads", c.heads},
          {"text_tokens", c.text_tokens},
          {"text_dim", c.text_dim},
          {"steps", c.steps},
          {"text_seed", c.text_seed},
          {"layout_scale", c.layout_scale}};
}

DenoiserConfig config_from_json(const json& j) {
  detail::reject_unknown(j, {"kind", "max_nodes", "categories", "feature_slots", "codebook", "hidden", "layers",
                             "heads", "text_tokens", "text_dim", "steps", "text_seed", "layout_scale"},
                         "denoiser config");
  DenoiserConfig c;
  const std::string kind = j.at("kind").get<std::string>();
  if (kind != "graph" && kind != "layout") throw ValidationError("unknown denoiser kind '" + kind + "'");
  c.kind = kind == "graph" ? DenoiserKind::Graph : DenoiserKind::Layout;
  c.vocab.max_nodes = j.at("max_nodes").get<int>();
  c.vocab.categories = j.at("categories").get<int>();
  c.vocab.feature_slots = j.at("feature_slots").get<int>();
  c.vocab.codebook = j.at("codebook").get<int>();
  c.hidden = j.at("hidden").get<int>();
  c.layers = j.at("layers").get<int>();
  c.heads = j.at("heads").get<int>();
  c.text_tokens = j.at("text_tokens").get<int>();
  c.text_dim = j.at("text_dim").get<int>();
  c.steps = j.at("steps").get<int>();
  c.text_seed = j.at("text_seed").get<std::uint64_t>();
  c.layout_scale = j.at("layout_scale").get<double>();
  c.validate();
  return c;
}

json params_to_json(const DenoiserParams& p) {
  json tensors = json::array();
  for (const auto& t : p.tensors()) {
    const auto* begin = p.values.data() + t.offset;
    tensors.push_back({{"name", t.name},
                       {"shape", {t.rows, t.cols}},
                       {"data", std::vector<double>(begin, begin + static_cast<std::size_t>(t.rows) * t.cols)}});
  }
  const NoiseSchedule s = NoiseSchedule::linear(p.config().steps);
  return {{"format", kFormat},
          {"version", kVersion},
          {"config", config_to_json(p.config())},
          {"schedule",
           {{"T", s.T}, {"layout", "linear-scaled"}, {"beta_start", 1e-4}, {"beta_end", 0.02}, {"discrete", "absorbing"}}},
          {"tensors", std::move(tensors)}};
}

DenoiserParams params_from_json(const json& j) {
  if (j.value("format", std::string()) != kFormat || j.value("version", 0) != kVersion)
    throw ValidationError("not an editroom denoiser checkpoint (format/version mismatch)");
  DenoiserParams p = DenoiserParams::init(config_from_json(j.at("config")), 0);
  const auto& tensors = j.at("tensors");
  if (tensors.size() != p.tensors().size()) throw ValidationError("checkpoint tensor count mismatch");
  for (std::size_t k = 0; k < tensors.size(); ++k) {
    const auto& jt = tensors[k];
    const auto& info = p.tensors()[k];
    if (jt.at("name").get<std::string>() != info.name) throw ValidationError("checkpoint tensor order mismatch");
    const auto shape = jt.at("shape").get<std::vector<int>>();
    if (shape != std::vector<int>{info.rows, info.cols})
      throw ValidationError("checkpoint tensor '" + info.name + "' has the wrong shape");
    const auto data = jt.at("data").get<std::vector<double>>();
    if (data.size() != static_cast<std::size_t>(info.rows) * info.cols)
      throw ValidationError("checkpoint tensor '" + info.name + "' has the wrong size");
    std::copy(data.begin(), data.end(), p.values.begin() + static_cast<std::ptrdiff_t>(info.offset));
  }
  if (!p.all_finite()) throw ValidationError("checkpoint contains non-finite weights");
  return p;
}

json read_json_file(const std::filesystem::path& path) {
  return detail::parse_json(read_text_file(path), path.string());
}

}  // namespace

void TrainConfig::validate() const {
  if (steps < 0 || batch < 1) throw ValidationError("train steps must be >= 0 and batch >= 1");
  if (!(lr > 0.0) || !(beta1 >= 0.0 && beta1 < 1.0) || !(beta2 >= 0.0 && beta2 < 1.0) || !(adam_eps > 0.0))
    throw ValidationError("invalid optimizer hyperparameters");
}

Trainer::Trainer(DenoiserParams params, TrainConfig config)
    : params_(std::move(params)),
      config_(config),
      schedule_(NoiseSchedule::linear(params_.config().steps)),
      m_(params_.size(), 0.0),
      v_(params_.size(), 0.0),
      rng_(config.seed) {
  config_.validate();
}

double Trainer::step(std::span<const EditExample> examples) {
  if (examples.empty()) throw ValidationError("no training examples");
  std::uniform_int_distribution<std::size_t> pick(0, examples.size() - 1);
  std::vector<EditExample> batch;
  batch.reserve(static_cast<std::size_t>(config_.batch));
  for (int b = 0; b < config_.batch; ++b) batch.push_back(examples[pick(rng_)]);

  LossResult r = params_.config().kind == DenoiserKind::Graph ? loss_graph(batch, params_, schedule_, rng_)
                                                              : loss_layout(batch, params_, schedule_, rng_);
  double norm2 = 0.0;
  for (double g : r.grad) norm2 += g * g;
  if (!std::isfinite(r.loss) || !std::isfinite(norm2))
    throw TrainingDiverged("non-finite loss or gradient at step " + std::to_string(step_ + 1) +
                               " (last finite loss " +
                               (losses_.empty() ? std::string("n/a") : std::to_string(losses_.back())) + ")",
                           step_ + 1);
  const double norm = std::sqrt(norm2);
  const double scale = config_.clip > 0.0 && norm > config_.clip ? config_.clip / norm : 1.0;

  const int t = step_ + 1;
  const double c1 = 1.0 - std::pow(config_.beta1, t);
  const double c2 = 1.0 - std::pow(config_.beta2, t);
  for (std::size_t i = 0; i < params_.size(); ++i) {
    const double g = r.grad[i] * scale;
    m_[i] = config_.beta1 * m_[i] + (1.0 - config_.beta1) * g;
    v_[i] = config_.beta2 * v_[i] + (1.0 - config_.beta2) * g * g;
    params_.values[i] -= config_.lr * (m_[i] / c1) / (std::sqrt(v_[i] / c2) + config_.adam_eps);
  }
  ++step_;
  losses_.push_back(r.loss);
  return r.loss;
}

void Trainer::run(std::span<const EditExample> examples, const std::function<void(int, double)>& on_step) {
  while (step_ < config_.steps) {
    const double l = step(examples);
    if (on_step) on_step(step_, l);
  }
}

void Trainer::save(const std::filesystem::path& path) const {
  json j = params_to_json(params_);
  std::ostringstream rng;
  rng << rng_;
  j["train"] = {{"steps", config_.steps},   {"batch", config_.batch},       {"lr", config_.lr},
                {"beta1", config_.beta1},   {"beta2", config_.beta2},       {"adam_eps", config_.adam_eps},
                {"clip", config_.clip},     {"seed", config_.seed},         {"step", step_},
                {"rng", rng.str()},         {"losses", losses_},            {"m", m_},
                {"v", v_}};
  write_text_file(path, j.dump());
}

Trainer Trainer::load(const std::filesystem::path& path) {
  const json j = read_json_file(path);
  if (!j.contains("train")) throw ValidationError("checkpoint has no optimizer state: " + path.string());
  const auto& tr = j.at("train");
  TrainConfig c;
  c.steps = tr.at("steps").get<int>();
  c.batch = tr.at("batch").get<int>();
  c.lr = tr.at("lr").get<double>();
  c.beta1 = tr.at("beta1").get<double>();
  c.beta2 = tr.at("beta2").get<double>();
  c.adam_eps = tr.at("adam_eps").get<double>();
  c.clip = tr.at("clip").get<double>();
  c.seed = tr.at("seed").get<std::uint64_t>();
  Trainer t(params_from_json(j), c);
  t.step_ = tr.at("step").get<int>();
  std::istringstream rng(tr.at("rng").get<std::string>());
  rng >> t.rng_;
  t.losses_ = tr.at("losses").get<std::vector<double>>();
  t.m_ = tr.at("m").get<std::vector<double>>();
  t.v_ = tr.at("v").get<std::vector<double>>();
  if (t.m_.size() != t.params_.size() || t.v_.size() != t.params_.size())
    throw ValidationError("checkpoint optimizer state has the wrong size");
  return t;
}

void save_params(const std::filesystem::path& path, const DenoiserParams& params) {
  write_text_file(path, params_to_json(params).dump());
}

DenoiserParams load_params(const std::filesystem::path& path) {
  try {
    return params_from_json(read_json_file(path));
  } catch (const json::exception& e) {
    throw ValidationError("malformed checkpoint " + path.string() + ": " + e.what());
  }
}

void write_loss_curve(const std::filesystem::path& path, const std::vector<double>& losses) {
  std::string out = "step,loss\n";
  char buf[64];
  for (std::size_t i = 0; i < losses.size(); ++i) {
    std::snprintf(buf, sizeof buf, "%zu,%.17g\n", i + 1, losses[i]);
    out += buf;
  }
  write_text_file(path, out);
}

}  // namespace editroom
