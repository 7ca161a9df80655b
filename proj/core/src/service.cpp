#include "editroom/service.hpp"

#include <deque>
#include <iomanip>
#include <sstream>

#include "editroom/datagen.hpp"

// Eigen (via json_io.hpp) must precede httplib: <resolv.h> defines a `_res` macro.
#include "json_io.hpp"
#include "httplib.h"

namespace editroom {

namespace fs = std::filesystem;
using detail::json;

std::string_view to_string(EditMode m) { return m == EditMode::Diffusion ? "diffusion" : "deterministic"; }

EditMode edit_mode_from_string(std::string_view name) {
  if (name == "deterministic") return EditMode::Deterministic;
  if (name == "diffusion") return EditMode::Diffusion;
  throw ValidationError("unknown mode '" + std::string(name) + "' (expected deterministic or diffusion)");
}

SceneDiff diff_scenes(const Scene& before, const Scene& after) {
  SceneDiff d;
  for (const auto& o : after.objects) {
    const auto i = before.find(o.id);
    if (!i) d.added.push_back(o.id);
    else if (!(before.objects[*i] == o)) d.changed.push_back({o.id, before.objects[*i], o});
  }
  for (const auto& o : before.objects)
    if (!after.find(o.id)) d.removed.push_back(o.id);
  return d;
}

struct EditService::Session {
  struct Entry {
    std::shared_ptr<const Scene> scene;
    std::uint64_t seq = 0;
  };

  std::string id;
  std::chrono::system_clock::time_point created_at;
  // Serializes commands and undo.
  std::mutex command_mu;
  // Guards `history` and `next_seq`; held only for short copies.
  mutable std::mutex state_mu;
  std::deque<Entry> history;
  std::uint64_t next_seq = 0;
  std::uint64_t commands_run = 0;

  std::shared_ptr<const Scene> current() const {
    std::lock_guard lock(state_mu);
    return history.back().scene;
  }
};

EditService::EditService(ServiceConfig config) : config_(std::move(config)) {
  config_.catalog.validate();
  if (config_.history_limit < 1) throw ValidationError("history limit must be at least 1");
  if (config_.graph_checkpoint && config_.layout_checkpoint) {
    DiffusionEditor e{load_params(*config_.graph_checkpoint), load_params(*config_.layout_checkpoint)};
    e.validate();
    editor_ = std::move(e);
  }
  if (config_.snapshot_dir) fs::create_directories(*config_.snapshot_dir);
}

EditService::~EditService() = default;

std::shared_ptr<EditService::Session> EditService::find(const std::string& id) const {
  std::shared_lock lock(sessions_mu_);
  const auto it = sessions_.find(id);
  if (it == sessions_.end()) throw ServiceError(404, "NotFound", "no session '" + id + "'");
  return it->second;
}

void EditService::write_snapshot(const Session& s, std::uint64_t seq, const Scene& scene) const {
  if (!config_.snapshot_dir) return;
  std::ostringstream name;
  name << std::setw(6) << std::setfill('0') << seq << ".json";
  const fs::path dir = *config_.snapshot_dir / s.id;
  fs::create_directories(dir);
  write_text_file(dir / name.str(), serialize_scene(scene, config_.catalog));
}

void EditService::drop_snapshot(const Session& s, std::uint64_t seq) const {
  if (!config_.snapshot_dir) return;
  std::ostringstream name;
  name << std::setw(6) << std::setfill('0') << seq << ".json";
  std::error_code ec;
  fs::remove(*config_.snapshot_dir / s.id / name.str(), ec);
}

std::string EditService::create_session(const Scene& scene) {
  try {
    validate_scene(scene, config_.catalog);
  } catch (const ValidationError& e) {
    throw ServiceError(400, "InvalidScene", e.what());
  }
  auto s = std::make_shared<Session>();
  s->created_at = std::chrono::system_clock::now();
  s->history.push_back({std::make_shared<const Scene>(scene), 0});
  s->next_seq = 1;
  {
    std::unique_lock lock(sessions_mu_);
    s->id = "s" + std::to_string(next_id_++);
    sessions_.emplace(s->id, s);
  }
  write_snapshot(*s, 0, scene);
  return s->id;
}

Scene EditService::scene(const std::string& id) const { return *find(id)->current(); }

SceneGraph EditService::graph(const std::string& id) const {
  return extract_scene_graph(*find(id)->current(), config_.catalog.feature_slots);
}

SessionInfo EditService::info(const std::string& id) const {
  const auto s = find(id);
  std::lock_guard lock(s->state_mu);
  return {s->id, s->history.size(), s->created_at};
}

CommandResult EditService::apply_command(const std::string& id, const std::string& text, EditMode mode,
                                         PlanBackend backend) {
  const auto s = find(id);
  if (mode == EditMode::Diffusion && !editor_)
    throw ServiceError(501, "DiffusionUnavailable", "diffusion mode needs graph and layout checkpoints");
  if (backend == PlanBackend::Llm && !config_.llm)
    throw ServiceError(503, "LlmUnavailable", "no LLM endpoint is configured (EDITROOM_LLM_URL)");

  std::lock_guard command_lock(s->command_mu);
  const auto start = s->current();

  BreakdownPlan plan;
  try {
    plan = parameterize(*start, text, backend, config_.catalog, config_.llm.get());
  } catch (const PlanError& e) {
    throw ServiceError(422, to_string(e.kind()), e.what(), e.step() ? std::optional<std::size_t>(*e.step() + 1) : std::nullopt);
  } catch (const LlmError& e) {
    throw ServiceError(502, "LlmTransport", e.what());
  }

  CommandResult result;
  result.warnings = plan.warnings;
  Scene cur = *start;
  Rng rng(config_.seed ^ (std::hash<std::string>{}(s->id) + 0x9e3779b97f4a7c15ULL * (s->commands_run + 1)));
  for (std::size_t i = 0; i < plan.commands.size(); ++i) {
    const std::string line = format_template_command(plan.commands[i]);
    try {
      cur = mode == EditMode::Deterministic ? apply_edit(cur, plan.commands[i], config_.catalog, config_.edit_options)
                                            : edit_with_diffusion(cur, line, *editor_, config_.catalog, rng);
      if (mode == EditMode::Diffusion) validate_scene(cur, config_.catalog);
    } catch (const EditError& e) {
      throw ServiceError(422, to_string(e.kind()), "step " + std::to_string(i + 1) + " (" + line + "): " + e.what(),
                         i + 1);
    } catch (const Error& e) {
      throw ServiceError(422, "EditFailed", "step " + std::to_string(i + 1) + " (" + line + "): " + e.what(),
                         i + 1);
    }
    result.applied.push_back(line);
  }

  std::uint64_t seq = 0, dropped = 0;
  bool drop = false;
  {
    std::lock_guard lock(s->state_mu);
    seq = s->next_seq++;
    s->history.push_back({std::make_shared<const Scene>(cur), seq});
    if (s->history.size() > config_.history_limit) {
      dropped = s->history.front().seq;
      drop = true;
      s->history.pop_front();
    }
    ++s->commands_run;
  }
  write_snapshot(*s, seq, cur);
  if (drop) drop_snapshot(*s, dropped);

  result.diff = diff_scenes(*start, cur);
  result.scene = std::move(cur);
  return result;
}

Scene EditService::undo(const std::string& id) {
  const auto s = find(id);
  std::lock_guard command_lock(s->command_mu);
  std::uint64_t popped = 0;
  std::shared_ptr<const Scene> top;
  {
    std::lock_guard lock(s->state_mu);
    if (s->history.size() <= 1) throw ServiceError(409, "AtInitialState", "nothing to undo");
    popped = s->history.back().seq;
    s->history.pop_back();
    top = s->history.back().scene;
  }
  drop_snapshot(*s, popped);
  return *top;
}

// ---- HTTP ----

namespace {

json pose_json(const SceneObject& o) {
  return {{"position", detail::vec3_to_json(o.position)},
          {"half_extents", detail::vec3_to_json(o.half_extents)},
          {"yaw_radians", o.yaw}};
}

json diff_json(const SceneDiff& d) {
  json changed = json::array();
  for (const auto& c : d.changed) {
    json entry = {{"id", c.id}, {"before", pose_json(c.before)}, {"after", pose_json(c.after)}};
    if (c.before.caption != c.after.caption) {
      entry["before"]["caption"] = c.before.caption;
      entry["after"]["caption"] = c.after.caption;
    }
    changed.push_back(std::move(entry));
  }
  return {{"added", d.added}, {"removed", d.removed}, {"changed", std::move(changed)}};
}

void send_json(httplib::Response& res, int status, const json& body) {
  res.status = status;
  res.set_content(body.dump(), "application/json");
}

void send_error(httplib::Response& res, const ServiceError& e) {
  json body = {{"code", e.code()}, {"message", e.what()}};
  if (e.step()) body["step"] = *e.step();
  send_json(res, e.status(), body);
}

json parse_body(const httplib::Request& req) {
  try {
    return detail::parse_json(req.body, "request body");
  } catch (const ValidationError& e) {
    throw ServiceError(400, "BadRequest", e.what());
  }
}

std::string string_or(const json& j, const char* key, std::string fallback) {
  if (!j.contains(key)) return fallback;
  if (!j[key].is_string()) throw ServiceError(400, "BadRequest", std::string("'") + key + "' must be a string");
  return j[key].get<std::string>();
}

}  // namespace

struct HttpServer::Impl {
  EditService& service;
  httplib::Server server;

  template <class F>
  auto guarded(F&& f) {
    return [f = std::forward<F>(f)](const httplib::Request& req, httplib::Response& res) {
      try {
        f(req, res);
      } catch (const ServiceError& e) {
        send_error(res, e);
      } catch (const ValidationError& e) {
        send_error(res, ServiceError(400, "BadRequest", e.what()));
      } catch (const std::exception& e) {
        send_error(res, ServiceError(500, "Internal", e.what()));
      }
    };
  }

  explicit Impl(EditService& s) : service(s) {
    const ObjectCatalog& catalog = service.catalog();
    server.Post("/api/sessions", guarded([this, &catalog](const httplib::Request& req, httplib::Response& res) {
                  const json body = parse_body(req);
                  if (!body.is_object() || !body.contains("scene"))
                    throw ServiceError(400, "BadRequest", "body must be {\"scene\": <scene document>}");
                  detail::reject_unknown(body, {"scene"}, "request body");
                  Scene scene;
                  try {
                    scene = detail::scene_from_json(body["scene"], catalog);
                  } catch (const ValidationError& e) {
                    throw ServiceError(400, "InvalidScene", e.what());
                  }
                  send_json(res, 200, {{"id", service.create_session(scene)}});
                }));
    server.Get(R"(/api/sessions/([^/]+))", guarded([this](const httplib::Request& req, httplib::Response& res) {
                 const auto info = service.info(req.matches[1]);
                 const auto secs =
                     std::chrono::duration_cast<std::chrono::seconds>(info.created_at.time_since_epoch()).count();
                 send_json(res, 200,
                           {{"id", info.id}, {"history_length", info.history_length}, {"created_at", secs}});
               }));
    server.Get(R"(/api/sessions/([^/]+)/scene)",
               guarded([this, &catalog](const httplib::Request& req, httplib::Response& res) {
                 send_json(res, 200, detail::scene_to_json(service.scene(req.matches[1]), catalog));
               }));
    server.Get(R"(/api/sessions/([^/]+)/graph)",
               guarded([this, &catalog](const httplib::Request& req, httplib::Response& res) {
                 send_json(res, 200, detail::graph_to_json(service.graph(req.matches[1]), catalog));
               }));
    server.Post(R"(/api/sessions/([^/]+)/command)",
                guarded([this, &catalog](const httplib::Request& req, httplib::Response& res) {
                  const std::string id = req.matches[1];
                  service.info(id);  // 404 before body errors
                  const json body = parse_body(req);
                  detail::reject_unknown(body, {"text", "mode", "backend"}, "command request");
                  const std::string text = string_or(body, "text", "");
                  if (text.empty()) throw ServiceError(400, "BadRequest", "'text' is required");
                  const auto mode = edit_mode_from_string(string_or(body, "mode", "deterministic"));
                  const auto backend = plan_backend_from_string(string_or(body, "backend", "rules"));
                  const auto r = service.apply_command(id, text, mode, backend);
                  send_json(res, 200,
                            {{"scene", detail::scene_to_json(r.scene, catalog)},
                             {"applied", r.applied},
                             {"diff", diff_json(r.diff)},
                             {"warnings", r.warnings}});
                }));
    server.Post(R"(/api/sessions/([^/]+)/undo)",
                guarded([this, &catalog](const httplib::Request& req, httplib::Response& res) {
                  send_json(res, 200, {{"scene", detail::scene_to_json(service.undo(req.matches[1]), catalog)}});
                }));
    server.Get("/api/catalog", guarded([&catalog](const httplib::Request&, httplib::Response& res) {
                 send_json(res, 200, detail::parse_json(serialize_catalog(catalog), "catalog"));
               }));
    server.set_error_handler([](const httplib::Request& req, httplib::Response& res) {
      if (res.status == 404 && res.body.empty())
        send_error(res, ServiceError(404, "NotFound", "no route for " + req.method + " " + req.path));
    });
  }
};

HttpServer::HttpServer(EditService& service) : impl_(std::make_unique<Impl>(service)) {}

HttpServer::~HttpServer() { stop(); }

int HttpServer::bind(const std::string& host, int port) {
  if (port == 0) port_ = impl_->server.bind_to_any_port(host);
  else port_ = impl_->server.bind_to_port(host, port) ? port : -1;
  if (port_ < 0) throw Error("cannot bind " + host + ":" + std::to_string(port));
  return port_;
}

void HttpServer::listen() {
  if (port_ < 0) throw Error("bind() must succeed before listen()");
  impl_->server.listen_after_bind();
}

void HttpServer::stop() {
  if (impl_) impl_->server.stop();
}

}  // namespace editroom
