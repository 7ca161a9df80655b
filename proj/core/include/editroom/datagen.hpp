#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <random>
#include <string>
#include <utility>
#include <vector>

#include "editroom/command.hpp"
#include "editroom/llm.hpp"
#include "editroom/scene.hpp"

namespace editroom {

using Rng = std::mt19937_64;

struct EditPair {
  std::string pair_id;
  RoomType room_type = RoomType::Toy;
  EditType edit_type = EditType::Translate;
  Scene source;
  Scene target;
  std::string template_command;
  std::optional<std::string> natural_command;
  std::string target_object_id;
  std::optional<std::string> reference_object_id;
  std::uint64_t seed = 0;

  friend bool operator==(const EditPair&, const EditPair&) = default;
};

struct GenConfig {
  /// Objects tried per requested pair before giving up on a scene.
  int attempts = 8;
  /// Pairs requested per scene and edit type.
  int per_scene = 1;
  std::vector<EditType> types = {EditType::Rotate, EditType::Translate, EditType::Scale,
                                 EditType::Replace, EditType::Add,       EditType::Remove};
  std::uint64_t seed = 0;
  double clearance = 1e-4;
  /// Worker threads over scenes; output order does not depend on it.
  int threads = 1;
  /// Scene index i goes to the test split when i % test_every == test_every - 1.
  int test_every = 10;

  bool enabled(EditType t) const;
  /// Throws ValidationError.
  void validate() const;
};

struct SamplerOptions {
  int min_objects = 3;
  int max_objects = 6;
  int placement_tries = 40;
  /// Never repeat a prototype inside one scene, so captions identify objects.
  bool unique_prototypes = true;
  double clearance = 1e-4;
};

AxisBounds default_room_bounds(RoomType room);
SamplerOptions default_sampler_options(RoomType room);

/// Rejection-samples a collision-free floor-standing room from the catalog.
Scene sample_scene(RoomType room, const ObjectCatalog& catalog, Rng& rng,
                   const SamplerOptions& options);
inline Scene sample_scene(RoomType room, const ObjectCatalog& catalog, Rng& rng) {
  return sample_scene(room, catalog, rng, default_sampler_options(room));
}

/// Per-scene stream seed derived from (seed, index).
std::uint64_t scene_seed(std::uint64_t seed, std::uint64_t index);

/// Nearest other object whose category occurs once in the scene.
/// Throws EditError(NoUniqueReference).
RelativeLocation describe_location(const Scene& scene, std::size_t index);
std::size_t describe_location_reference(const Scene& scene, std::size_t index);

/// Reference that resolve_object maps back to `index` (caption, plus a relative
/// location when the caption alone is ambiguous), or nullopt.
std::optional<ObjectRef> unique_reference(const Scene& scene, std::size_t index, const ObjectCatalog& catalog);

/// Every object inside the room and no pair closer than `clearance`.
bool scene_is_feasible(const Scene& scene, double clearance);

std::optional<EditPair> gen_translate(const Scene& scene, const ObjectCatalog& catalog, Rng& rng,
                                      const GenConfig& config);
std::optional<EditPair> gen_rotate(const Scene& scene, const ObjectCatalog& catalog, Rng& rng,
                                   const GenConfig& config);
/// `enlarge_samples`, when given, receives the enlarge factors drawn.
std::optional<EditPair> gen_scale(const Scene& scene, const ObjectCatalog& catalog, Rng& rng, const GenConfig& config,
                                  std::vector<double>* enlarge_samples = nullptr);
std::optional<EditPair> gen_replace(const Scene& scene, const ObjectCatalog& catalog, Rng& rng,
                                    const GenConfig& config);
std::optional<EditPair> gen_remove(const Scene& scene, const ObjectCatalog& catalog, Rng& rng,
                                   const GenConfig& config);
/// (add, remove) built from the same object.
std::optional<std::pair<EditPair, EditPair>> gen_add_remove(const Scene& scene, const ObjectCatalog& catalog,
                                                            Rng& rng, const GenConfig& config);

/// All pairs for one source scene, in a fixed type order.
std::vector<EditPair> generate_pairs(const Scene& scene, std::size_t scene_index, const ObjectCatalog& catalog,
                                     const GenConfig& config);

/// True when parsing the template and executing it on the source gives the target exactly.
bool replays_exactly(const EditPair& pair, const ObjectCatalog& catalog);

struct DatasetStats {
  std::map<std::string, std::map<std::string, int>> counts;  // room -> edit type -> pairs
  int train = 0;
  int test = 0;
  int scenes = 0;

  int total() const { return train + test; }
};

std::string naturalize_prompt(const EditPair& pair, const ObjectCatalog& catalog);
/// Offline (client == nullptr) returns the template unchanged; otherwise the
/// reply is returned verbatim. Throws LlmError.
std::string naturalize_command(const EditPair& pair, const ObjectCatalog& catalog, LlmClient* client);

/// Writes out/{train,test}/pairs.jsonl, out/stats.json and out/catalog.json.
DatasetStats build_dataset(const std::vector<Scene>& scenes, const ObjectCatalog& catalog, const GenConfig& config,
                           const std::filesystem::path& out_dir, LlmClient* naturalizer = nullptr);

std::vector<Scene> sample_scenes(RoomType room, int count, const ObjectCatalog& catalog, std::uint64_t seed);
/// Loads every *.json scene file in `dir`, sorted by file name.
std::vector<Scene> load_scene_dir(const std::filesystem::path& dir, const ObjectCatalog& catalog);

std::string serialize_pair(const EditPair& pair, const ObjectCatalog& catalog);
EditPair deserialize_pair(std::string_view line, const ObjectCatalog& catalog);
void write_pairs(const std::filesystem::path& path, const std::vector<EditPair>& pairs,
                 const ObjectCatalog& catalog);
std::vector<EditPair> read_pairs(const std::filesystem::path& path, const ObjectCatalog& catalog);
std::string serialize_stats(const DatasetStats& stats);

/// Reads a whole file. Throws Error.
std::string read_text_file(const std::filesystem::path& path);
void write_text_file(const std::filesystem::path& path, std::string_view text);

}  // namespace editroom
