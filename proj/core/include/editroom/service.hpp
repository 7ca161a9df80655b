#pragma once

#include <chrono>
#include <cstdint>
#include <filesystem>
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <shared_mutex>
#include <string>
#include <vector>

#include "editroom/diffusion.hpp"
#include "editroom/error.hpp"
#include "editroom/executor.hpp"
#include "editroom/llm.hpp"
#include "editroom/parameterizer.hpp"
#include "editroom/scene.hpp"

namespace editroom {

enum class EditMode { Deterministic, Diffusion };

std::string_view to_string(EditMode m);
/// "deterministic" or "diffusion". Throws ValidationError.
EditMode edit_mode_from_string(std::string_view name);

struct ServiceConfig {
  ObjectCatalog catalog = builtin_catalog();
  /// Diffusion mode needs both; either missing turns it off.
  std::optional<std::filesystem::path> graph_checkpoint;
  std::optional<std::filesystem::path> layout_checkpoint;
  /// Write-through copy of every history entry, one file each.
  std::optional<std::filesystem::path> snapshot_dir;
  std::size_t history_limit = 50;
  /// Null leaves the llm backend unavailable.
  std::shared_ptr<LlmClient> llm;
  EditOptions edit_options{.strict = true};
  std::uint64_t seed = 0;
};

struct ObjectChange {
  std::string id;
  SceneObject before;
  SceneObject after;
};

struct SceneDiff {
  std::vector<std::string> added;
  std::vector<std::string> removed;
  std::vector<ObjectChange> changed;
};

/// Objects are paired by id; scene order is kept within each list.
SceneDiff diff_scenes(const Scene& before, const Scene& after);

struct CommandResult {
  Scene scene;
  std::vector<std::string> applied;
  SceneDiff diff;
  std::vector<std::string> warnings;
};

/// Carries the HTTP status and the {code, message, step} error body.
class ServiceError : public Error {
public:
  ServiceError(int status, std::string code, std::string message, std::optional<std::size_t> step = std::nullopt)
      : Error(std::move(message)), status_(status), code_(std::move(code)), step_(step) {}

  int status() const noexcept { return status_; }
  const std::string& code() const noexcept { return code_; }
  /// One-based index of the failing breakdown step or clause.
  std::optional<std::size_t> step() const noexcept { return step_; }

private:
  int status_;
  std::string code_;
  std::optional<std::size_t> step_;
};

struct SessionInfo {
  std::string id;
  std::size_t history_length = 0;
  std::chrono::system_clock::time_point created_at;
};

/// Editing sessions. Commands on one session run one at a time; reads copy the
/// current snapshot. Every failure throws ServiceError.
class EditService {
public:
  explicit EditService(ServiceConfig config);
  ~EditService();

  EditService(const EditService&) = delete;
  EditService& operator=(const EditService&) = delete;

  std::string create_session(const Scene& scene);
  Scene scene(const std::string& id) const;
  SceneGraph graph(const std::string& id) const;
  SessionInfo info(const std::string& id) const;

  /// Plans, then runs every step on a copy; the session only changes when all succeed.
  CommandResult apply_command(const std::string& id, const std::string& text, EditMode mode, PlanBackend backend);
  /// Throws ServiceError(409) at the initial state.
  Scene undo(const std::string& id);

  bool diffusion_enabled() const { return editor_.has_value(); }
  const ObjectCatalog& catalog() const { return config_.catalog; }

private:
  struct Session;
  std::shared_ptr<Session> find(const std::string& id) const;
  void write_snapshot(const Session& s, std::uint64_t seq, const Scene& scene) const;
  void drop_snapshot(const Session& s, std::uint64_t seq) const;

  ServiceConfig config_;
  std::optional<DiffusionEditor> editor_;
  mutable std::shared_mutex sessions_mu_;
  std::map<std::string, std::shared_ptr<Session>> sessions_;
  std::uint64_t next_id_ = 1;
};

/// JSON-over-HTTP front end for an EditService (routes under /api).
class HttpServer {
public:
  explicit HttpServer(EditService& service);
  ~HttpServer();

  HttpServer(const HttpServer&) = delete;
  HttpServer& operator=(const HttpServer&) = delete;

  /// Port 0 picks a free port. Returns the bound port; throws Error on failure.
  int bind(const std::string& host, int port);
  /// Blocks until stop().
  void listen();
  void stop();
  int port() const { return port_; }

private:
  struct Impl;
  std::unique_ptr<Impl> impl_;
  int port_ = -1;
};

}  // namespace editroom
