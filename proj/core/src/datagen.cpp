#include "editroom/datagen.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <cstdio>
#include <exception>
#include <fstream>
#include <sstream>
#include <thread>

#include "editroom/error.hpp"
#include "editroom/executor.hpp"
#include "editroom/geometry.hpp"
#include "json_io.hpp"

namespace editroom {

namespace fs = std::filesystem;
using detail::json;
using geometry::OrientedBox;

bool GenConfig::enabled(EditType t) const { return std::find(types.begin(), types.end(), t) != types.end(); }

void GenConfig::validate() const {
  if (attempts < 1) throw ValidationError("attempts must be at least 1");
  if (per_scene < 1) throw ValidationError("per_scene must be at least 1");
  if (types.empty()) throw ValidationError("at least one edit type must be enabled");
  if (!(clearance >= 0.0)) throw ValidationError("clearance must be non-negative");
  if (threads < 1) throw ValidationError("threads must be at least 1");
  if (test_every < 1) throw ValidationError("test_every must be at least 1");
}

AxisBounds default_room_bounds(RoomType room) {
  switch (room) {
    case RoomType::Toy: return {{-2.5, 0.0, -2.5}, {2.5, 3.0, 2.5}};
    case RoomType::Bedroom: return {{-3.0, 0.0, -3.0}, {3.0, 3.0, 3.0}};
    case RoomType::Dining:
    case RoomType::Living: return {{-4.0, 0.0, -4.0}, {4.0, 3.0, 4.0}};
  }
  return {};
}

SamplerOptions default_sampler_options(RoomType room) {
  SamplerOptions o;
  switch (room) {
    case RoomType::Toy: o.min_objects = 3; o.max_objects = 6; break;
    case RoomType::Bedroom: o.min_objects = 4; o.max_objects = 10; break;
    case RoomType::Dining:
    case RoomType::Living: o.min_objects = 6; o.max_objects = 16; break;
  }
  return o;
}

namespace {

std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ull;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ull;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebull;
  return x ^ (x >> 31);
}

double round2(double x) { return std::round(x * 100.0) / 100.0; }

/// Formats, re-parses and executes so that the stored target is exactly what a
/// replay of the stored template produces.
std::optional<EditPair> try_command(const Scene& source, const EditCommand& cmd, const ObjectCatalog& catalog,
                                    const GenConfig& config) {
  std::string text;
  try {
    text = format_template_command(cmd);
  } catch (const ParseError&) {
    return std::nullopt;
  }
  EditOptions opt;
  opt.clearance = config.clearance;
  Scene target;
  try {
    target = apply_edit(source, parse_template_command(text), catalog, opt);
  } catch (const EditError&) {
    return std::nullopt;
  }
  if (!scene_is_feasible(target, config.clearance)) return std::nullopt;
  EditPair p;
  p.room_type = source.room_type;
  p.edit_type = edit_type(cmd);
  p.source = source;
  p.target = std::move(target);
  p.template_command = std::move(text);
  return p;
}

void set_ids(EditPair& p, const Scene& scene, std::size_t index, const ObjectRef& ref) {
  p.target_object_id = scene.objects[index].id;
  if (ref.relative) p.reference_object_id = scene.objects[describe_location_reference(scene, index)].id;
}

struct Target {
  std::size_t index;
  ObjectRef ref;
};

std::optional<Target> pick_target(const Scene& scene, const ObjectCatalog& catalog, Rng& rng) {
  if (scene.objects.empty()) return std::nullopt;
  std::uniform_int_distribution<std::size_t> pick(0, scene.objects.size() - 1);
  const std::size_t idx = pick(rng);
  auto ref = unique_reference(scene, idx, catalog);
  if (!ref) return std::nullopt;
  return Target{idx, std::move(*ref)};
}

}  // namespace

std::uint64_t scene_seed(std::uint64_t seed, std::uint64_t index) {
  return splitmix64(seed ^ splitmix64(index + 0x632be59bd9b4e019ull));
}

Scene sample_scene(RoomType room, const ObjectCatalog& catalog, Rng& rng, const SamplerOptions& options) {
  Scene s;
  s.room_type = room;
  s.room_bounds = default_room_bounds(room);
  std::vector<int> cats;
  for (const auto& name : room_categories(room))
    if (auto c = catalog.category_index(name)) cats.push_back(*c);
  if (cats.empty()) throw ValidationError("catalog has no categories for room type " + std::string(to_string(room)));

  const int limit = std::min(options.max_objects, max_nodes(room));
  std::uniform_int_distribution<int> count(std::min(options.min_objects, limit), limit);
  const int n = count(rng);
  std::uniform_int_distribution<std::size_t> pick_cat(0, cats.size() - 1);
  std::uniform_int_distribution<int> pick_turn(0, 3);
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  static constexpr double kTurns[] = {0.0, kPi / 2, -kPi / 2, -kPi};
  std::vector<std::size_t> used;

  for (int i = 0; i < n; ++i) {
    for (int t = 0; t < options.placement_tries; ++t) {
      const int c = cats[pick_cat(rng)];
      std::vector<std::size_t> protos;
      for (auto p : catalog.prototypes_of(c))
        if (!options.unique_prototypes || std::find(used.begin(), used.end(), p) == used.end()) protos.push_back(p);
      if (protos.empty()) continue;
      std::uniform_int_distribution<std::size_t> pick_proto(0, protos.size() - 1);
      const std::size_t pi = protos[pick_proto(rng)];
      const Prototype& proto = catalog.prototypes[pi];

      SceneObject o;
      o.category = proto.category;
      o.caption = proto.caption;
      o.feature_indices = proto.feature_indices;
      o.half_extents = proto.half_extents;
      o.yaw = kTurns[pick_turn(rng)];
      const auto w = geometry::footprint_half_widths(OrientedBox::of(o));
      const auto& b = s.room_bounds;
      const double span_x = (b.max.x - b.min.x) - 2.0 * w.x;
      const double span_z = (b.max.z - b.min.z) - 2.0 * w.z;
      if (span_x <= 0.0 || span_z <= 0.0) continue;
      o.position = {b.min.x + w.x + span_x * unit(rng), b.min.y + o.half_extents.y, b.min.z + w.z + span_z * unit(rng)};
      const OrientedBox box = OrientedBox::of(o);
      if (!geometry::inside_room(box, b)) continue;
      bool clash = false;
      for (const auto& other : s.objects)
        if (geometry::collides_with_clearance(box, OrientedBox::of(other), options.clearance)) {
          clash = true;
          break;
        }
      if (clash) continue;
      o.id = fresh_object_id(s, catalog, o.category);
      s.objects.push_back(std::move(o));
      used.push_back(pi);
      break;
    }
  }
  return s;
}

std::vector<Scene> sample_scenes(RoomType room, int count, const ObjectCatalog& catalog, std::uint64_t seed) {
  std::vector<Scene> out;
  out.reserve(static_cast<std::size_t>(std::max(count, 0)));
  for (int i = 0; i < count; ++i) {
    Rng rng(scene_seed(seed ^ 0x5ca1ab1e0ddba11ull, static_cast<std::uint64_t>(i)));
    out.push_back(sample_scene(room, catalog, rng));
  }
  return out;
}

std::size_t describe_location_reference(const Scene& scene, std::size_t index) {
  std::map<int, int> counts;
  for (const auto& o : scene.objects) ++counts[o.category];
  const auto& obj = scene.objects.at(index);
  std::optional<std::size_t> best;
  double best_d = 0.0;
  for (std::size_t j = 0; j < scene.objects.size(); ++j) {
    if (j == index || counts[scene.objects[j].category] != 1) continue;
    const double d = horizontal_distance(obj.position, scene.objects[j].position);
    if (!best || d < best_d) {
      best = j;
      best_d = d;
    }
  }
  if (!best) throw EditError(EditError::Kind::NoUniqueReference, "no uniquely categorized reference object");
  return *best;
}

RelativeLocation describe_location(const Scene& scene, std::size_t index) {
  const auto& ref = scene.objects[describe_location_reference(scene, index)];
  return {classify_relation(scene.objects[index], ref), ref.caption};
}

std::optional<ObjectRef> unique_reference(const Scene& scene, std::size_t index, const ObjectCatalog& catalog) {
  const auto& o = scene.objects.at(index);
  ObjectRef ref{o.caption, {}};
  if (match_candidates(scene, o.caption, catalog).size() > 1) {
    try {
      ref.relative = describe_location(scene, index);
    } catch (const EditError&) {
      return std::nullopt;
    }
  }
  try {
    if (resolve_object(scene, ref, catalog) == o.id) return ref;
  } catch (const EditError&) {
  }
  return std::nullopt;
}

bool scene_is_feasible(const Scene& scene, double clearance) {
  for (const auto& o : scene.objects)
    if (!geometry::inside_room(OrientedBox::of(o), scene.room_bounds)) return false;
  return geometry::scene_collisions(scene, {}, clearance).empty();
}

std::optional<EditPair> gen_translate(const Scene& scene, const ObjectCatalog& catalog, Rng& rng,
                                      const GenConfig& config) {
  const auto target = pick_target(scene, catalog, rng);
  if (!target) return std::nullopt;
  std::vector<std::pair<double, Direction>> grid;
  for (int k = 1; k <= 15; ++k)
    for (auto d : {Direction::Front, Direction::Back, Direction::Left, Direction::Right}) grid.emplace_back(k / 10.0, d);
  std::shuffle(grid.begin(), grid.end(), rng);
  for (const auto& [dist, dir] : grid) {
    if (auto p = try_command(scene, TranslateCmd{target->ref, dir, dist}, catalog, config)) {
      set_ids(*p, scene, target->index, target->ref);
      return p;
    }
  }
  return std::nullopt;
}

std::optional<EditPair> gen_rotate(const Scene& scene, const ObjectCatalog& catalog, Rng& rng,
                                   const GenConfig& config) {
  const auto target = pick_target(scene, catalog, rng);
  if (!target) return std::nullopt;
  std::vector<double> grid;
  for (int k = 1; k <= 12; ++k) {
    grid.push_back(15.0 * k);
    grid.push_back(-15.0 * k);
  }
  std::shuffle(grid.begin(), grid.end(), rng);
  for (double angle : grid) {
    if (auto p = try_command(scene, RotateCmd{target->ref, angle}, catalog, config)) {
      set_ids(*p, scene, target->index, target->ref);
      return p;
    }
  }
  return std::nullopt;
}

std::optional<EditPair> gen_scale(const Scene& scene, const ObjectCatalog& catalog, Rng& rng, const GenConfig& config,
                                  std::vector<double>* enlarge_samples) {
  const auto target = pick_target(scene, catalog, rng);
  if (!target) return std::nullopt;
  std::bernoulli_distribution shrink(0.5);
  if (shrink(rng)) {
    std::uniform_real_distribution<double> f(0.5, 0.8);
    auto p = try_command(scene, ScaleCmd{target->ref, round2(f(rng))}, catalog, config);
    if (p) set_ids(*p, scene, target->index, target->ref);
    return p;
  }
  std::uniform_real_distribution<double> f(1.2, 1.5);
  std::vector<double> factors;
  for (int i = 0; i < 10; ++i) factors.push_back(round2(f(rng)));
  if (enlarge_samples) *enlarge_samples = factors;
  std::sort(factors.begin(), factors.end(), std::greater<>());
  for (double factor : factors) {
    if (auto p = try_command(scene, ScaleCmd{target->ref, factor}, catalog, config)) {
      set_ids(*p, scene, target->index, target->ref);
      return p;
    }
  }
  return std::nullopt;
}

std::optional<EditPair> gen_replace(const Scene& scene, const ObjectCatalog& catalog, Rng& rng,
                                    const GenConfig& config) {
  const auto target = pick_target(scene, catalog, rng);
  if (!target) return std::nullopt;
  const auto& obj = scene.objects[target->index];
  std::vector<std::size_t> alternatives;
  for (auto p : catalog.prototypes_of(obj.category))
    if (catalog.prototypes[p].caption != obj.caption) alternatives.push_back(p);
  if (alternatives.empty()) return std::nullopt;
  std::shuffle(alternatives.begin(), alternatives.end(), rng);

  for (auto pi : alternatives) {
    const Prototype& proto = catalog.prototypes[pi];
    auto p = try_command(scene, ReplaceCmd{target->ref, proto.caption}, catalog, config);
    if (p && p->target.objects[target->index].half_extents == proto.half_extents) {
      set_ids(*p, scene, target->index, target->ref);
      return p;
    }
  }
  // Every candidate collides at its canonical size; the executor shrinks the first one.
  auto p = try_command(scene, ReplaceCmd{target->ref, catalog.prototypes[alternatives.front()].caption}, catalog,
                       config);
  if (p) set_ids(*p, scene, target->index, target->ref);
  return p;
}

std::optional<EditPair> gen_remove(const Scene& scene, const ObjectCatalog& catalog, Rng& rng,
                                   const GenConfig& config) {
  const auto target = pick_target(scene, catalog, rng);
  if (!target) return std::nullopt;
  auto p = try_command(scene, RemoveCmd{target->ref}, catalog, config);
  if (p) set_ids(*p, scene, target->index, target->ref);
  return p;
}

std::optional<std::pair<EditPair, EditPair>> gen_add_remove(const Scene& scene, const ObjectCatalog& catalog,
                                                            Rng& rng, const GenConfig& config) {
  if (scene.objects.size() < 2) return std::nullopt;
  const auto target = pick_target(scene, catalog, rng);
  if (!target) return std::nullopt;
  auto remove = try_command(scene, RemoveCmd{target->ref}, catalog, config);
  if (!remove) return std::nullopt;
  set_ids(*remove, scene, target->index, target->ref);

  std::size_t ref_index;
  try {
    ref_index = describe_location_reference(scene, target->index);
  } catch (const EditError&) {
    return std::nullopt;
  }
  const auto& obj = scene.objects[target->index];
  const auto& anchor = scene.objects[ref_index];
  const SpatialRelation rel = classify_relation(obj, anchor);
  if (rel == SpatialRelation::Above || rel == SpatialRelation::Below) return std::nullopt;

  const Scene& without = remove->target;
  try {
    if (resolve_object(without, ObjectRef{anchor.caption, {}}, catalog) != anchor.id) return std::nullopt;
  } catch (const EditError&) {
    return std::nullopt;
  }
  auto add = try_command(without, AddCmd{obj.caption, {rel, anchor.caption}}, catalog, config);
  if (!add) return std::nullopt;

  // The re-added object must restore the original scene graph (with the
  // object as the last node).
  Scene expected = without;
  expected.objects.push_back(obj);
  if (!(extract_scene_graph(add->target) == extract_scene_graph(expected))) return std::nullopt;
  add->target_object_id = add->target.objects.back().id;
  add->reference_object_id = anchor.id;
  return std::make_pair(std::move(*add), std::move(*remove));
}

std::vector<EditPair> generate_pairs(const Scene& scene, std::size_t scene_index, const ObjectCatalog& catalog,
                                     const GenConfig& config) {
  const std::uint64_t seed = scene_seed(config.seed, scene_index);
  Rng rng(seed);
  std::vector<EditPair> out;
  std::map<EditType, int> counters;
  auto push = [&](EditPair p) {
    char buf[32];
    std::snprintf(buf, sizeof buf, "%06zu", scene_index);
    p.pair_id = std::string(buf) + "-" + std::string(to_string(p.edit_type)) + "-" +
                std::to_string(counters[p.edit_type]++);
    p.seed = seed;
    out.push_back(std::move(p));
  };
  auto run = [&](EditType type, auto&& gen) {
    if (!config.enabled(type)) return;
    for (int k = 0; k < config.per_scene; ++k)
      for (int a = 0; a < config.attempts; ++a)
        if (auto p = gen()) {
          push(std::move(*p));
          break;
        }
  };
  run(EditType::Translate, [&] { return gen_translate(scene, catalog, rng, config); });
  run(EditType::Rotate, [&] { return gen_rotate(scene, catalog, rng, config); });
  run(EditType::Scale, [&] { return gen_scale(scene, catalog, rng, config); });
  run(EditType::Replace, [&] { return gen_replace(scene, catalog, rng, config); });

  if (config.enabled(EditType::Add)) {
    for (int k = 0; k < config.per_scene; ++k) {
      bool done = false;
      for (int a = 0; a < config.attempts && !done; ++a)
        if (auto ar = gen_add_remove(scene, catalog, rng, config)) {
          push(std::move(ar->first));
          if (config.enabled(EditType::Remove)) push(std::move(ar->second));
          done = true;
        }
      if (!done && config.enabled(EditType::Remove))
        for (int a = 0; a < config.attempts; ++a)
          if (auto p = gen_remove(scene, catalog, rng, config)) {
            push(std::move(*p));
            break;
          }
    }
  } else {
    run(EditType::Remove, [&] { return gen_remove(scene, catalog, rng, config); });
  }
  return out;
}

bool replays_exactly(const EditPair& pair, const ObjectCatalog& catalog) {
  try {
    return apply_edit(pair.source, parse_template_command(pair.template_command), catalog) == pair.target;
  } catch (const Error&) {
    return false;
  }
}

std::string naturalize_prompt(const EditPair& pair, const ObjectCatalog& catalog) {
  std::ostringstream os;
  os << "Room type: " << to_string(pair.room_type) << "\n";
  os << "Objects in the room:\n";
  for (const auto& o : pair.source.objects)
    os << "- " << o.caption << " (" << catalog.categories.at(static_cast<std::size_t>(o.category)) << ")\n";
  os << "Template command: " << pair.template_command << "\n";
  os << "Rewrite the template command as a single instruction a person might say. Keep the object descriptions "
        "recognizable and keep every number. Reply with the instruction only.";
  return os.str();
}

std::string naturalize_command(const EditPair& pair, const ObjectCatalog& catalog, LlmClient* client) {
  if (!client) return pair.template_command;
  return client->complete({{"system", "You rewrite templated room-layout editing commands as natural language."},
                           {"user", naturalize_prompt(pair, catalog)}});
}

std::string serialize_pair(const EditPair& p, const ObjectCatalog& catalog) {
  json j = {{"pair_id", p.pair_id},
            {"room_type", std::string(to_string(p.room_type))},
            {"edit_type", std::string(to_string(p.edit_type))},
            {"source", detail::scene_to_json(p.source, catalog)},
            {"target", detail::scene_to_json(p.target, catalog)},
            {"template_command", p.template_command},
            {"natural_command", p.natural_command ? json(*p.natural_command) : json(nullptr)},
            {"target_object_id", p.target_object_id},
            {"reference_object_id", p.reference_object_id ? json(*p.reference_object_id) : json(nullptr)},
            {"seed", p.seed}};
  return j.dump();
}

EditPair deserialize_pair(std::string_view line, const ObjectCatalog& catalog) {
  const json j = detail::parse_json(line, "edit pair");
  if (!j.is_object()) throw ValidationError("edit pair must be an object");
  static const char* allowed[] = {"pair_id",          "room_type",       "edit_type",        "source",
                                  "target",           "template_command", "natural_command", "target_object_id",
                                  "reference_object_id", "seed"};
  for (const auto& [key, _] : j.items())
    if (std::find_if(std::begin(allowed), std::end(allowed), [&](const char* a) { return key == a; }) ==
        std::end(allowed))
      throw ValidationError("unknown field '" + key + "' in edit pair");
  try {
    EditPair p;
    p.pair_id = j.at("pair_id").get<std::string>();
    p.room_type = room_type_from_string(j.at("room_type").get<std::string>());
    p.edit_type = edit_type_from_string(j.at("edit_type").get<std::string>());
    p.source = detail::scene_from_json(j.at("source"), catalog);
    p.target = detail::scene_from_json(j.at("target"), catalog);
    p.template_command = j.at("template_command").get<std::string>();
    if (j.contains("natural_command") && !j["natural_command"].is_null())
      p.natural_command = j["natural_command"].get<std::string>();
    p.target_object_id = j.at("target_object_id").get<std::string>();
    if (j.contains("reference_object_id") && !j["reference_object_id"].is_null())
      p.reference_object_id = j["reference_object_id"].get<std::string>();
    p.seed = j.at("seed").get<std::uint64_t>();
    return p;
  } catch (const json::exception& e) {
    throw ValidationError(std::string("malformed edit pair: ") + e.what());
  }
}

std::string read_text_file(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error("cannot open '" + path.string() + "'");
  std::ostringstream os;
  os << in.rdbuf();
  return os.str();
}

void write_text_file(const fs::path& path, std::string_view text) {
  if (path.has_parent_path()) fs::create_directories(path.parent_path());
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw Error("cannot write '" + path.string() + "'");
  out.write(text.data(), static_cast<std::streamsize>(text.size()));
  if (!out) throw Error("failed writing '" + path.string() + "'");
}

void write_pairs(const fs::path& path, const std::vector<EditPair>& pairs, const ObjectCatalog& catalog) {
  std::string text;
  for (const auto& p : pairs) {
    text += serialize_pair(p, catalog);
    text += '\n';
  }
  write_text_file(path, text);
}

std::vector<EditPair> read_pairs(const fs::path& path, const ObjectCatalog& catalog) {
  std::ifstream in(path);
  if (!in) throw Error("cannot open '" + path.string() + "'");
  std::vector<EditPair> out;
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    try {
      out.push_back(deserialize_pair(line, catalog));
    } catch (const ValidationError& e) {
      throw ValidationError(path.string() + ":" + std::to_string(lineno) + ": " + e.what());
    }
  }
  return out;
}

std::string serialize_stats(const DatasetStats& stats) {
  json counts = json::object();
  for (const auto& [room, per_type] : stats.counts) counts[room] = per_type;
  json j = {{"counts", counts},
            {"scenes", stats.scenes},
            {"splits", {{"train", stats.train}, {"test", stats.test}}},
            {"total", stats.total()}};
  return j.dump(2) + "\n";
}

std::vector<Scene> load_scene_dir(const fs::path& dir, const ObjectCatalog& catalog) {
  std::vector<fs::path> files;
  for (const auto& entry : fs::directory_iterator(dir))
    if (entry.is_regular_file() && entry.path().extension() == ".json") files.push_back(entry.path());
  std::sort(files.begin(), files.end());
  std::vector<Scene> out;
  for (const auto& f : files) {
    try {
      out.push_back(deserialize_scene(read_text_file(f), catalog));
    } catch (const ValidationError& e) {
      throw ValidationError(f.string() + ": " + e.what());
    }
  }
  return out;
}

DatasetStats build_dataset(const std::vector<Scene>& scenes, const ObjectCatalog& catalog, const GenConfig& config,
                           const fs::path& out_dir, LlmClient* naturalizer) {
  config.validate();
  std::vector<std::vector<EditPair>> per_scene(scenes.size());
  std::vector<std::exception_ptr> errors(scenes.size());
  std::atomic<std::size_t> next{0};
  auto worker = [&] {
    for (std::size_t i = next++; i < scenes.size(); i = next++) {
      try {
        per_scene[i] = generate_pairs(scenes[i], i, catalog, config);
      } catch (...) {
        errors[i] = std::current_exception();
      }
    }
  };
  const int n_threads = std::max(1, std::min<int>(config.threads, static_cast<int>(scenes.size())));
  if (n_threads == 1) {
    worker();
  } else {
    std::vector<std::thread> pool;
    for (int t = 0; t < n_threads; ++t) pool.emplace_back(worker);
    for (auto& t : pool) t.join();
  }
  for (const auto& e : errors)
    if (e) std::rethrow_exception(e);

  DatasetStats stats;
  stats.scenes = static_cast<int>(scenes.size());
  std::vector<EditPair> train, test;
  for (std::size_t i = 0; i < per_scene.size(); ++i) {
    const bool is_test = static_cast<int>(i % static_cast<std::size_t>(config.test_every)) == config.test_every - 1;
    for (auto& p : per_scene[i]) {
      if (naturalizer) p.natural_command = naturalize_command(p, catalog, naturalizer);
      ++stats.counts[std::string(to_string(p.room_type))][std::string(to_string(p.edit_type))];
      (is_test ? test : train).push_back(std::move(p));
    }
  }
  stats.train = static_cast<int>(train.size());
  stats.test = static_cast<int>(test.size());

  write_pairs(out_dir / "train" / "pairs.jsonl", train, catalog);
  write_pairs(out_dir / "test" / "pairs.jsonl", test, catalog);
  write_text_file(out_dir / "stats.json", serialize_stats(stats));
  write_text_file(out_dir / "catalog.json", serialize_catalog(catalog));
  return stats;
}

}  // namespace editroom
