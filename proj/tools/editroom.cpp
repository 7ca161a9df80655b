// editroom command-line front end.

#include <algorithm>
#include <csignal>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <map>
#include <optional>
#include <pthread.h>
#include <sstream>
#include <string>
#include <thread>
#include <vector>

#include <CLI11.hpp>

#include "editroom/datagen.hpp"
#include "editroom/diffusion.hpp"
#include "editroom/eval.hpp"
#include "editroom/executor.hpp"
#include "editroom/llm.hpp"
#include "editroom/parameterizer.hpp"
#include "editroom/service.hpp"

namespace fs = std::filesystem;
using namespace editroom;

namespace {

ObjectCatalog load_catalog(const std::string& path) {
  if (path.empty()) return builtin_catalog();
  return deserialize_catalog(read_text_file(path));
}

std::vector<std::string> split_list(const std::string& s) {
  std::vector<std::string> out;
  std::stringstream ss(s);
  for (std::string item; std::getline(ss, item, ',');)
    if (!item.empty()) out.push_back(item);
  return out;
}

std::vector<EditType> parse_types(const std::string& list) {
  std::vector<EditType> out;
  for (const auto& name : split_list(list)) out.push_back(edit_type_from_string(name));
  if (out.empty()) throw ValidationError("--types is empty");
  return out;
}

std::shared_ptr<LlmClient> llm_from_env() {
  auto cfg = LlmConfig::from_env();
  if (cfg.url.empty()) return nullptr;
  return std::make_shared<HttpLlmClient>(cfg);
}

/// Pairs file, or a dataset directory (uses its train split) or split directory.
fs::path pairs_path(const fs::path& p, const std::string& split) {
  if (fs::is_regular_file(p)) return p;
  if (fs::exists(p / split / "pairs.jsonl")) return p / split / "pairs.jsonl";
  if (fs::exists(p / "pairs.jsonl")) return p / "pairs.jsonl";
  throw Error("no pairs.jsonl under " + p.string());
}

std::vector<EditPair> filter_types(std::vector<EditPair> pairs, const std::string& types) {
  if (types.empty()) return pairs;
  const auto keep = parse_types(types);
  std::erase_if(pairs, [&](const EditPair& p) {
    return std::find(keep.begin(), keep.end(), p.edit_type) == keep.end();
  });
  return pairs;
}

// ---- datagen ----

struct DatagenArgs {
  std::string scenes;
  int toy = 0;
  std::string room = "toy";
  std::string out;
  std::string types = "rotate,translate,scale,replace,add,remove";
  int per_scene = 1;
  std::uint64_t seed = 0;
  int threads = 1;
  int test_every = 10;
  bool naturalize = false;
  std::string catalog;
};

void add_datagen(CLI::App& app, DatagenArgs& a) {
  auto* c = app.add_subcommand("datagen", "Generate an editing-pair dataset");
  auto* scenes = c->add_option("--scenes", a.scenes, "Directory of source scene JSON files");
  auto* toy = c->add_option("--toy", a.toy, "Sample N procedural scenes instead");
  scenes->excludes(toy);
  c->add_option("--room", a.room, "Room type for --toy (toy|bedroom|dining|living)");
  c->add_option("--out", a.out, "Output directory")->required();
  c->add_option("--types", a.types, "Comma-separated edit types");
  c->add_option("--per-scene", a.per_scene, "Pairs per scene and edit type");
  c->add_option("--seed", a.seed);
  c->add_option("--threads", a.threads);
  c->add_option("--test-every", a.test_every, "Every Nth scene goes to the test split");
  c->add_flag("--naturalize", a.naturalize, "Rewrite commands with the LLM named by EDITROOM_LLM_URL");
  c->add_option("--catalog", a.catalog, "Catalog JSON (default: built-in)");
  c->callback([&a] {
    const auto catalog = load_catalog(a.catalog);
    std::vector<Scene> scenes;
    if (!a.scenes.empty()) {
      scenes = load_scene_dir(a.scenes, catalog);
    } else if (a.toy > 0) {
      scenes = sample_scenes(room_type_from_string(a.room), a.toy, catalog, a.seed);
    } else {
      throw CLI::ValidationError("datagen", "one of --scenes or --toy N is required");
    }
    GenConfig cfg;
    cfg.types = parse_types(a.types);
    cfg.per_scene = a.per_scene;
    cfg.seed = a.seed;
    cfg.threads = a.threads;
    cfg.test_every = a.test_every;
    std::shared_ptr<LlmClient> llm;
    if (a.naturalize) {
      llm = llm_from_env();
      if (!llm) std::cerr << "warning: EDITROOM_LLM_URL unset; commands stay templated\n";
    }
    const auto stats = build_dataset(scenes, catalog, cfg, a.out, llm.get());
    std::cout << "scenes " << stats.scenes << " train " << stats.train << " test " << stats.test << "\n";
    for (const auto& [room, by_type] : stats.counts)
      for (const auto& [type, n] : by_type) std::cout << room << " " << type << " " << n << "\n";
  });
}

// ---- train ----

struct TrainArgs {
  std::string data;
  std::string types;
  std::string out;
  std::string state;
  std::string resume;
  std::string loss_csv;
  std::string catalog;
  int steps = 2000;
  int batch = 32;
  double lr = 1e-3;
  double clip = 1.0;
  int hidden = 64;
  int layers = 2;
  int heads = 4;
  int text_tokens = 8;
  int text_dim = 32;
  int diffusion_steps = 100;
  double layout_scale = 4.0;
  std::uint64_t seed = 0;
  int log_every = 100;
};

void add_train(CLI::App& app, const std::string& name, DenoiserKind kind, TrainArgs& a) {
  auto* c = app.add_subcommand(name, kind == DenoiserKind::Graph ? "Train the graph denoiser"
                                                                  : "Train the layout denoiser");
  c->add_option("--data", a.data, "Dataset directory or pairs.jsonl")->required();
  c->add_option("--types", a.types, "Only train on these edit types");
  c->add_option("--out", a.out, "Checkpoint to write")->required();
  c->add_option("--state", a.state, "Also write optimizer state here (for --resume)");
  c->add_option("--resume", a.resume, "Continue from a --state file");
  c->add_option("--loss-csv", a.loss_csv, "Write the loss curve (step,loss)");
  c->add_option("--catalog", a.catalog);
  c->add_option("--steps", a.steps, "Optimizer steps (total, including resumed ones)");
  c->add_option("--batch", a.batch);
  c->add_option("--lr", a.lr);
  c->add_option("--clip", a.clip, "Gradient-norm clip; <= 0 disables");
  c->add_option("--hidden", a.hidden);
  c->add_option("--layers", a.layers);
  c->add_option("--heads", a.heads);
  c->add_option("--text-tokens", a.text_tokens);
  c->add_option("--text-dim", a.text_dim);
  c->add_option("-T,--diffusion-steps", a.diffusion_steps);
  if (kind == DenoiserKind::Layout) c->add_option("--layout-scale", a.layout_scale, "Residual scale");
  c->add_option("--seed", a.seed);
  c->add_option("--log-every", a.log_every);
  c->callback([&a, kind] {
    const auto catalog = load_catalog(a.catalog);
    const auto pairs = filter_types(read_pairs(pairs_path(a.data, "train"), catalog), a.types);
    if (pairs.empty()) throw Error("no training pairs");
    const RoomType room = pairs.front().room_type;
    for (const auto& p : pairs)
      if (p.room_type != room) throw Error("training pairs mix room types");

    std::optional<Trainer> trainer;
    if (!a.resume.empty()) {
      trainer.emplace(Trainer::load(a.resume));
      if (trainer->params().config().kind != kind) throw Error("--resume state is for the other denoiser");
    } else {
      DenoiserConfig dc;
      dc.kind = kind;
      dc.vocab = GraphVocab::of(room, catalog);
      dc.hidden = a.hidden;
      dc.layers = a.layers;
      dc.heads = a.heads;
      dc.text_tokens = a.text_tokens;
      dc.text_dim = a.text_dim;
      dc.steps = a.diffusion_steps;
      if (kind == DenoiserKind::Layout) dc.layout_scale = a.layout_scale;
      dc.validate();
      TrainConfig tc;
      tc.steps = a.steps;
      tc.batch = a.batch;
      tc.lr = a.lr;
      tc.clip = a.clip;
      tc.seed = a.seed;
      trainer.emplace(DenoiserParams::init(dc, a.seed), tc);
    }
    const auto& dc = trainer->params().config();
    const TextFeaturizer text(dc.text_tokens, dc.text_dim, dc.text_seed);
    const auto examples = make_examples(pairs, dc.vocab, text);
    std::cerr << "training on " << examples.size() << " pairs, " << trainer->params().size() << " parameters\n";

    const int target = a.resume.empty() ? trainer->config().steps : a.steps;
    double window = 0.0;
    int in_window = 0;
    while (trainer->steps_done() < target) {
      window += trainer->step(examples);
      ++in_window;
      if (a.log_every > 0 && (trainer->steps_done() % a.log_every == 0 || trainer->steps_done() == target)) {
        std::cerr << "step " << trainer->steps_done() << " loss " << window / in_window << "\n";
        window = 0.0;
        in_window = 0;
      }
    }
    save_params(a.out, trainer->params());
    if (!a.state.empty()) trainer->save(a.state);
    if (!a.loss_csv.empty()) write_loss_curve(a.loss_csv, trainer->losses());
  });
}

// ---- sample / predict ----

DiffusionEditor load_editor(const std::string& graph, const std::string& layout) {
  DiffusionEditor e{load_params(graph), load_params(layout)};
  e.validate();
  return e;
}

struct SampleArgs {
  std::string source;
  std::string command;
  std::string graph_ckpt;
  std::string layout_ckpt;
  std::string trace;
  std::string out;
  std::string catalog;
  std::uint64_t seed = 0;
};

void add_sample(CLI::App& app, SampleArgs& a) {
  auto* c = app.add_subcommand("sample", "Edit one scene with the diffusion models");
  c->add_option("--source", a.source, "Source scene JSON")->required();
  c->add_option("--command", a.command, "Template command")->required();
  c->add_option("--graph-ckpt", a.graph_ckpt)->required();
  c->add_option("--layout-ckpt", a.layout_ckpt)->required();
  c->add_option("--trace", a.trace, "Write the layout denoising trajectory as JSON lines");
  c->add_option("--out", a.out, "Write the scene here instead of stdout");
  c->add_option("--catalog", a.catalog);
  c->add_option("--seed", a.seed);
  c->callback([&a] {
    const auto catalog = load_catalog(a.catalog);
    const auto editor = load_editor(a.graph_ckpt, a.layout_ckpt);
    const Scene source = deserialize_scene(read_text_file(a.source), catalog);
    Rng rng(a.seed);
    DiffusionTrace trace;
    const Scene out = edit_with_diffusion(source, a.command, editor, catalog, rng, a.trace.empty() ? nullptr : &trace);
    if (!a.trace.empty()) write_text_file(a.trace, trace_to_jsonl(trace));
    const auto text = serialize_scene(out, catalog);
    if (a.out.empty()) std::cout << text << "\n";
    else write_text_file(a.out, text);
  });
}

struct PredictArgs {
  std::string data;
  std::string split = "test";
  std::string types;
  std::string graph_ckpt;
  std::string layout_ckpt;
  std::string out;
  std::string catalog;
  bool copy_source = false;
  bool oracle = false;
  std::uint64_t seed = 0;
};

void add_predict(CLI::App& app, PredictArgs& a) {
  auto* c = app.add_subcommand("predict", "Write <pair_id>.json predictions for a dataset split");
  c->add_option("--data", a.data, "Dataset directory or pairs.jsonl")->required();
  c->add_option("--split", a.split);
  c->add_option("--types", a.types);
  c->add_option("--graph-ckpt", a.graph_ckpt);
  c->add_option("--layout-ckpt", a.layout_ckpt);
  c->add_option("--out", a.out, "Prediction directory")->required();
  c->add_option("--catalog", a.catalog);
  c->add_option("--seed", a.seed);
  auto* copy = c->add_flag("--copy-source", a.copy_source, "Baseline: predict the unedited source");
  auto* det = c->add_flag("--deterministic", a.oracle, "Apply the template with the rule executor");
  copy->excludes(det);
  c->callback([&a] {
    const auto catalog = load_catalog(a.catalog);
    const auto pairs = filter_types(read_pairs(pairs_path(a.data, a.split), catalog), a.types);
    std::optional<DiffusionEditor> editor;
    if (!a.copy_source && !a.oracle) {
      if (a.graph_ckpt.empty() || a.layout_ckpt.empty())
        throw CLI::ValidationError("predict", "--graph-ckpt and --layout-ckpt are required");
      editor = load_editor(a.graph_ckpt, a.layout_ckpt);
    }
    fs::create_directories(a.out);
    int failed = 0;
    for (std::size_t i = 0; i < pairs.size(); ++i) {
      const auto& p = pairs[i];
      Scene pred = p.source;
      try {
        if (a.oracle) {
          pred = apply_edit(p.source, parse_template_command(p.template_command), catalog);
        } else if (editor) {
          Rng rng(scene_seed(a.seed, i));
          pred = edit_with_diffusion(p.source, p.template_command, *editor, catalog, rng);
        }
      } catch (const Error& e) {
        ++failed;
        std::cerr << p.pair_id << ": " << e.what() << "\n";
        continue;
      }
      write_text_file(fs::path(a.out) / (p.pair_id + ".json"), serialize_scene(pred, catalog));
    }
    std::cout << "predicted " << pairs.size() - failed << " of " << pairs.size() << "\n";
  });
}

// ---- eval ----

struct EvalArgs {
  std::string pred;
  std::string target;
  std::string report;
  std::string table;
  std::string catalog;
  bool same_category = false;
};

void add_eval(CLI::App& app, EvalArgs& a) {
  auto* c = app.add_subcommand("eval", "Score predictions against dataset targets");
  c->add_option("--pred", a.pred, "Directory of <pair_id>.json scenes")->required();
  c->add_option("--target", a.target, "pairs.jsonl or a directory holding one")->required();
  c->add_option("--report", a.report, "JSON report path")->required();
  c->add_option("--table", a.table, "Markdown table path");
  c->add_option("--catalog", a.catalog);
  c->add_flag("--same-category", a.same_category, "Only match objects of the same category");
  c->callback([&a] {
    const auto catalog = load_catalog(a.catalog);
    MatchOptions opts;
    opts.same_category = a.same_category;
    fs::path target = a.target;
    if (fs::is_directory(target) && !fs::exists(target / "pairs.jsonl") && fs::exists(target / "test" / "pairs.jsonl"))
      target = target / "test" / "pairs.jsonl";
    const auto report = evaluate(a.pred, target, catalog, opts);
    write_text_file(a.report, report.to_json());
    const auto table = report.to_table();
    if (!a.table.empty()) write_text_file(a.table, table);
    std::cout << table;
    if (!report.missing.empty()) std::cerr << report.missing.size() << " predictions missing\n";
    if (!report.unknown.empty()) std::cerr << report.unknown.size() << " predictions match no pair\n";
  });
}

// ---- plan ----

struct PlanArgs {
  std::string scene;
  std::string command;
  std::string backend = "rules";
  std::string catalog;
};

void add_plan(CLI::App& app, PlanArgs& a) {
  auto* c = app.add_subcommand("plan", "Break a natural-language command into template commands");
  c->add_option("--scene", a.scene, "Scene JSON")->required();
  c->add_option("--command", a.command)->required();
  c->add_option("--backend", a.backend, "llm or rules")->check(CLI::IsMember({"llm", "rules"}));
  c->add_option("--catalog", a.catalog);
  c->callback([&a] {
    const auto catalog = load_catalog(a.catalog);
    const Scene scene = deserialize_scene(read_text_file(a.scene), catalog);
    const auto backend = plan_backend_from_string(a.backend);
    auto llm = backend == PlanBackend::Llm ? llm_from_env() : nullptr;
    if (backend == PlanBackend::Llm && !llm) throw Error("the llm backend needs EDITROOM_LLM_URL");
    const auto plan = parameterize(scene, a.command, backend, catalog, llm.get());
    for (const auto& w : plan.warnings) std::cerr << "warning: " << w << "\n";
    for (const auto& cmd : plan.commands) std::cout << format_template_command(cmd) << "\n";
  });
}

// ---- serve ----

struct ServeArgs {
  std::string host = "127.0.0.1";
  int port = 8080;
  std::string catalog;
  std::string graph_ckpt;
  std::string layout_ckpt;
  std::string snapshot_dir;
  std::size_t history = 50;
  bool lenient = false;
  std::uint64_t seed = 0;
};

void add_serve(CLI::App& app, ServeArgs& a) {
  auto* c = app.add_subcommand("serve", "Run the HTTP editing service");
  c->add_option("--host", a.host);
  c->add_option("--port", a.port);
  c->add_option("--catalog", a.catalog);
  auto* g = c->add_option("--graph-ckpt", a.graph_ckpt);
  auto* l = c->add_option("--layout-ckpt", a.layout_ckpt);
  g->needs(l);
  l->needs(g);
  c->add_option("--snapshot-dir", a.snapshot_dir, "Write every history entry to disk");
  c->add_option("--history", a.history, "Undo depth per session");
  c->add_flag("--lenient", a.lenient, "Allow edits that leave objects colliding");
  c->add_option("--seed", a.seed);
  c->callback([&a] {
    ServiceConfig cfg;
    cfg.catalog = load_catalog(a.catalog);
    if (!a.graph_ckpt.empty()) {
      cfg.graph_checkpoint = a.graph_ckpt;
      cfg.layout_checkpoint = a.layout_ckpt;
    }
    if (!a.snapshot_dir.empty()) cfg.snapshot_dir = a.snapshot_dir;
    cfg.history_limit = a.history;
    cfg.llm = llm_from_env();
    cfg.edit_options.strict = !a.lenient;
    cfg.seed = a.seed;

    // Signals go to a waiter thread so stop() never runs inside a handler.
    sigset_t set;
    sigemptyset(&set);
    sigaddset(&set, SIGINT);
    sigaddset(&set, SIGTERM);
    pthread_sigmask(SIG_BLOCK, &set, nullptr);

    EditService service(std::move(cfg));
    HttpServer server(service);
    const int port = server.bind(a.host, a.port);
    std::cout << "listening on " << a.host << ":" << port
              << (service.diffusion_enabled() ? " (diffusion enabled)" : "") << std::endl;
    std::thread waiter([&] {
      int sig = 0;
      sigwait(&set, &sig);
      server.stop();
    });
    server.listen();
    // listen() may also return on its own; wake the waiter so it can exit.
    pthread_kill(waiter.native_handle(), SIGTERM);
    waiter.join();
  });
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Language-guided 3D room layout editing"};
  app.require_subcommand(1);

  DatagenArgs datagen;
  TrainArgs train_graph, train_layout;
  SampleArgs sample;
  PredictArgs predict;
  EvalArgs eval;
  PlanArgs plan;
  ServeArgs serve;
  add_datagen(app, datagen);
  add_train(app, "train-graph", DenoiserKind::Graph, train_graph);
  add_train(app, "train-layout", DenoiserKind::Layout, train_layout);
  add_sample(app, sample);
  add_predict(app, predict);
  add_eval(app, eval);
  add_plan(app, plan);
  add_serve(app, serve);

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    return app.exit(e);
  } catch (const PlanError& e) {
    std::cerr << "error: " << to_string(e.kind());
    if (e.step()) std::cerr << " at step " << *e.step() + 1;
    std::cerr << ": " << e.what() << "\n";
    return 1;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  return 0;
}
