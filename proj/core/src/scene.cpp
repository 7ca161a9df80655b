#include "editroom/scene.hpp"

#include <algorithm>
#include <cctype>
#include <set>
#include <unordered_set>

#include "editroom/error.hpp"
#include "json_io.hpp"

namespace editroom {

namespace {

constexpr std::array<std::string_view, kNumRelations> kRelationPhrases = {
    "in front of",         "behind",         "right of",         "left of",
    "closely in front of", "closely behind", "closely right of", "closely left of",
    "above",               "below",          "none",
};

constexpr std::array<std::string_view, kNumRelations> kRelationIds = {
    "in_front_of",         "behind",         "right_of",         "left_of",
    "closely_in_front_of", "closely_behind", "closely_right_of", "closely_left_of",
    "above",               "below",          "none",
};

bool finite(const Vec3& v) { return std::isfinite(v.x) && std::isfinite(v.y) && std::isfinite(v.z); }

}  // namespace

double normalize_yaw(double radians) {
  if (radians >= -kPi && radians < kPi) return radians;
  double r = std::fmod(radians + kPi, 2.0 * kPi);
  if (r < 0.0) r += 2.0 * kPi;
  r -= kPi;
  if (r >= kPi) r -= 2.0 * kPi;
  if (r < -kPi) r = -kPi;
  return r;
}

std::string_view to_string(RoomType room) {
  switch (room) {
    case RoomType::Bedroom: return "bedroom";
    case RoomType::Dining: return "dining";
    case RoomType::Living: return "living";
    case RoomType::Toy: return "toy";
  }
  return "toy";
}

RoomType room_type_from_string(std::string_view name) {
  if (name == "bedroom") return RoomType::Bedroom;
  if (name == "dining") return RoomType::Dining;
  if (name == "living") return RoomType::Living;
  if (name == "toy") return RoomType::Toy;
  throw ValidationError("unknown room_type '" + std::string(name) + "'");
}

int max_nodes(RoomType room) {
  switch (room) {
    case RoomType::Bedroom: return 12;
    case RoomType::Dining: return 21;
    case RoomType::Living: return 21;
    case RoomType::Toy: return 8;
  }
  return 8;
}

std::optional<std::size_t> Scene::find(std::string_view id) const {
  for (std::size_t i = 0; i < objects.size(); ++i)
    if (objects[i].id == id) return i;
  return std::nullopt;
}

std::string_view to_phrase(SpatialRelation r) { return kRelationPhrases[static_cast<int>(r)]; }

std::optional<SpatialRelation> relation_from_phrase(std::string_view phrase) {
  for (int i = 0; i < kNumRelations; ++i)
    if (kRelationPhrases[i] == phrase) return static_cast<SpatialRelation>(i);
  return std::nullopt;
}

std::string_view to_identifier(SpatialRelation r) { return kRelationIds[static_cast<int>(r)]; }

std::optional<SpatialRelation> relation_from_identifier(std::string_view id) {
  for (int i = 0; i < kNumRelations; ++i)
    if (kRelationIds[i] == id) return static_cast<SpatialRelation>(i);
  return std::nullopt;
}

double horizontal_distance(const Vec3& a, const Vec3& b) { return std::hypot(a.x - b.x, a.z - b.z); }

SpatialRelation classify_relation(const SceneObject& subject, const SceneObject& reference) {
  const Vec3 d = subject.position - reference.position;
  const double dist = std::hypot(d.x, d.z);

  const bool above = subject.min_y() > reference.max_y();
  const bool below = subject.max_y() < reference.min_y();
  if ((above || below) && dist < kStackDistance)
    return above ? SpatialRelation::Above : SpatialRelation::Below;

  // Ties |dx| == |dz| go to front/behind. Coincident centers count as front.
  SpatialRelation far;
  if (std::abs(d.z) >= std::abs(d.x))
    far = d.z >= 0.0 ? SpatialRelation::InFrontOf : SpatialRelation::Behind;
  else
    far = d.x > 0.0 ? SpatialRelation::RightOf : SpatialRelation::LeftOf;

  if (dist < kCloseDistance) return static_cast<SpatialRelation>(static_cast<int>(far) + 4);
  return far;
}

SpatialRelation invert_relation(SpatialRelation r) {
  switch (r) {
    case SpatialRelation::InFrontOf: return SpatialRelation::Behind;
    case SpatialRelation::Behind: return SpatialRelation::InFrontOf;
    case SpatialRelation::RightOf: return SpatialRelation::LeftOf;
    case SpatialRelation::LeftOf: return SpatialRelation::RightOf;
    case SpatialRelation::CloselyInFrontOf: return SpatialRelation::CloselyBehind;
    case SpatialRelation::CloselyBehind: return SpatialRelation::CloselyInFrontOf;
    case SpatialRelation::CloselyRightOf: return SpatialRelation::CloselyLeftOf;
    case SpatialRelation::CloselyLeftOf: return SpatialRelation::CloselyRightOf;
    case SpatialRelation::Above: return SpatialRelation::Below;
    case SpatialRelation::Below: return SpatialRelation::Above;
    case SpatialRelation::None: return SpatialRelation::None;
  }
  return SpatialRelation::None;
}

bool is_close(SpatialRelation r) {
  const int v = static_cast<int>(r);
  return v >= 4 && v <= 7;
}

std::size_t edge_index(int i, int j, int m) {
  return static_cast<std::size_t>(i) * m - static_cast<std::size_t>(i) * (i + 1) / 2 + (j - i - 1);
}

int SceneGraph::real_count() const {
  return static_cast<int>(std::count(node_mask.begin(), node_mask.end(), true));
}

SpatialRelation SceneGraph::edge(int i, int j) const {
  if (i < j) return edges[edge_index(i, j, size())];
  return invert_relation(edges[edge_index(j, i, size())]);
}

void SceneGraph::set_edge(int i, int j, SpatialRelation r) {
  if (i < j)
    edges[edge_index(i, j, size())] = r;
  else
    edges[edge_index(j, i, size())] = invert_relation(r);
}

SceneGraph empty_graph(RoomType room, int feature_slots) {
  const int m = max_nodes(room);
  SceneGraph g;
  g.room_type = room;
  g.feature_slots = feature_slots;
  g.node_categories.assign(m, SceneGraph::kEmpty);
  g.node_features.assign(m, std::vector<int>(feature_slots, 0));
  g.edges.assign(edge_count(m), SpatialRelation::None);
  g.node_mask.assign(m, false);
  return g;
}

SceneGraph extract_scene_graph(const Scene& scene, int feature_slots) {
  const int m = max_nodes(scene.room_type);
  const int n = static_cast<int>(scene.objects.size());
  if (n > m)
    throw ValidationError("scene has " + std::to_string(n) + " objects; " + std::string(to_string(scene.room_type)) +
                          " allows " + std::to_string(m));
  SceneGraph g = empty_graph(scene.room_type, feature_slots);
  for (int i = 0; i < n; ++i) {
    const auto& o = scene.objects[i];
    g.node_categories[i] = o.category;
    g.node_features[i] = o.feature_indices;
    g.node_features[i].resize(feature_slots, 0);
    g.node_mask[i] = true;
  }
  for (int i = 0; i < n; ++i)
    for (int j = i + 1; j < n; ++j)
      g.edges[edge_index(i, j, m)] = classify_relation(scene.objects[i], scene.objects[j]);
  return g;
}

Eigen::MatrixXd layout_matrix(const Scene& scene) {
  const int m = max_nodes(scene.room_type);
  if (static_cast<int>(scene.objects.size()) > m) throw ValidationError("scene exceeds max_nodes");
  Eigen::MatrixXd b = Eigen::MatrixXd::Zero(m, 8);
  for (std::size_t i = 0; i < scene.objects.size(); ++i) {
    const auto& o = scene.objects[i];
    b.row(i) << o.position.x, o.position.y, o.position.z, o.half_extents.x, o.half_extents.y, o.half_extents.z,
        std::cos(o.yaw), std::sin(o.yaw);
  }
  return b;
}

Scene scene_from_layout(const Scene& like, const Eigen::MatrixXd& layout) {
  Scene out = like;
  for (std::size_t i = 0; i < out.objects.size(); ++i) {
    auto& o = out.objects[i];
    const auto r = layout.row(static_cast<Eigen::Index>(i));
    o.position = {r(0), r(1), r(2)};
    o.half_extents = {r(3), r(4), r(5)};
    const double norm = std::hypot(r(6), r(7));
    const double c = norm > 0.0 ? r(6) / norm : 1.0;
    const double s = norm > 0.0 ? r(7) / norm : 0.0;
    o.yaw = normalize_yaw(std::atan2(s, c));
  }
  return out;
}

std::optional<int> ObjectCatalog::category_index(std::string_view name) const {
  for (std::size_t i = 0; i < categories.size(); ++i)
    if (categories[i] == name) return static_cast<int>(i);
  return std::nullopt;
}

std::vector<std::size_t> ObjectCatalog::prototypes_of(int category) const {
  std::vector<std::size_t> out;
  for (std::size_t i = 0; i < prototypes.size(); ++i)
    if (prototypes[i].category == category) out.push_back(i);
  return out;
}

void ObjectCatalog::validate() const {
  if (feature_slots <= 0) throw ValidationError("catalog n_f must be positive");
  if (codebook_size <= 0) throw ValidationError("catalog K_f must be positive");
  if (categories.empty()) throw ValidationError("catalog has no categories");
  std::set<std::string> names(categories.begin(), categories.end());
  if (names.size() != categories.size()) throw ValidationError("catalog category names must be unique");
  std::set<std::vector<int>> features;
  std::set<std::string> captions;
  std::vector<int> per_category(categories.size(), 0);
  for (const auto& p : prototypes) {
    if (p.category < 0 || p.category >= category_count())
      throw ValidationError("prototype '" + p.caption + "' has an out-of-range category");
    if (static_cast<int>(p.feature_indices.size()) != feature_slots)
      throw ValidationError("prototype '" + p.caption + "' has the wrong number of feature indices");
    for (int f : p.feature_indices)
      if (f < 0 || f >= codebook_size) throw ValidationError("prototype '" + p.caption + "' feature index out of range");
    if (!(p.half_extents.x > 0 && p.half_extents.y > 0 && p.half_extents.z > 0) || !finite(p.half_extents))
      throw ValidationError("prototype '" + p.caption + "' has non-positive extents");
    if (!features.insert(p.feature_indices).second)
      throw ValidationError("prototype '" + p.caption + "' duplicates another prototype's feature indices");
    if (!captions.insert(p.caption).second) throw ValidationError("duplicate prototype caption '" + p.caption + "'");
    ++per_category[p.category];
  }
  for (std::size_t c = 0; c < categories.size(); ++c)
    if (per_category[c] < 2) throw ValidationError("category '" + categories[c] + "' needs at least two prototypes");
}

const ObjectCatalog& builtin_catalog() {
  static const ObjectCatalog catalog = [] {
    struct Row {
      const char* category;
      const char* caption;
      Vec3 half;
    };
    // clang-format off
    static const Row rows[] = {
        {"bed", "a wooden double bed", {0.80, 0.25, 1.00}},
        {"bed", "a white single bed", {0.50, 0.25, 1.00}},
        {"bed", "a grey upholstered king bed", {1.00, 0.30, 1.05}},
        {"nightstand", "a small oak nightstand", {0.25, 0.28, 0.20}},
        {"nightstand", "a white nightstand with drawers", {0.28, 0.30, 0.22}},
        {"nightstand", "a black metal nightstand", {0.22, 0.27, 0.20}},
        {"wardrobe", "a tall white wardrobe", {0.60, 1.00, 0.30}},
        {"wardrobe", "a walnut wardrobe with mirror", {0.75, 1.05, 0.30}},
        {"wardrobe", "a compact pine wardrobe", {0.45, 0.90, 0.28}},
        {"desk", "a wooden writing desk", {0.60, 0.38, 0.30}},
        {"desk", "a white computer desk", {0.70, 0.37, 0.35}},
        {"desk", "a glass corner desk", {0.50, 0.38, 0.50}},
        {"chair", "a red office chair", {0.28, 0.45, 0.28}},
        {"chair", "a black dining chair", {0.22, 0.45, 0.25}},
        {"chair", "a wooden folding chair", {0.20, 0.42, 0.22}},
        {"armchair", "a red leather armchair", {0.42, 0.42, 0.40}},
        {"armchair", "a blue fabric armchair", {0.40, 0.40, 0.38}},
        {"armchair", "a green velvet armchair", {0.45, 0.43, 0.42}},
        {"sofa", "a grey three-seat sofa", {1.00, 0.40, 0.45}},
        {"sofa", "a brown leather sofa", {0.90, 0.42, 0.45}},
        {"sofa", "a beige corner sofa", {1.20, 0.40, 0.50}},
        {"coffee_table", "a round coffee table", {0.45, 0.22, 0.45}},
        {"coffee_table", "a rectangular glass coffee table", {0.60, 0.20, 0.35}},
        {"coffee_table", "a wooden coffee table", {0.55, 0.23, 0.30}},
        {"dining_table", "a long oak dining table", {1.00, 0.38, 0.45}},
        {"dining_table", "a round marble dining table", {0.60, 0.38, 0.60}},
        {"dining_table", "a white square dining table", {0.50, 0.38, 0.50}},
        {"tv_stand", "a low black tv stand", {0.80, 0.25, 0.22}},
        {"tv_stand", "a wooden tv stand", {0.70, 0.28, 0.22}},
        {"tv_stand", "a white media console", {0.90, 0.25, 0.20}},
        {"bookshelf", "a tall wooden bookshelf", {0.45, 0.90, 0.15}},
        {"bookshelf", "a white cube bookshelf", {0.40, 0.60, 0.17}},
        {"bookshelf", "a metal ladder bookshelf", {0.35, 0.85, 0.20}},
        {"floor_lamp", "a brass floor lamp", {0.15, 0.80, 0.15}},
        {"floor_lamp", "a white arc floor lamp", {0.20, 0.85, 0.20}},
        {"floor_lamp", "a black tripod floor lamp", {0.18, 0.75, 0.18}},
        {"cabinet", "a white storage cabinet", {0.45, 0.45, 0.22}},
        {"cabinet", "an oak sideboard cabinet", {0.80, 0.40, 0.22}},
        {"cabinet", "a glass display cabinet", {0.40, 0.90, 0.20}},
        {"stool", "a round bar stool", {0.18, 0.35, 0.18}},
        {"stool", "a wooden step stool", {0.20, 0.22, 0.15}},
        {"stool", "a padded ottoman stool", {0.25, 0.20, 0.25}},
    };
    // clang-format on
    ObjectCatalog c;
    for (const auto& r : rows)
      if (!c.category_index(r.category)) c.categories.emplace_back(r.category);

    // Fixed pseudo-random codebook indices; uniqueness is checked by validate().
    std::uint64_t state = 0x5eedc0debull;
    auto next = [&state] {
      state += 0x9e3779b97f4a7c15ull;
      std::uint64_t z = state;
      z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ull;
      z = (z ^ (z >> 27)) * 0x94d049bb133111ebull;
      return z ^ (z >> 31);
    };
    for (const auto& r : rows) {
      Prototype p;
      p.category = *c.category_index(r.category);
      p.caption = r.caption;
      p.half_extents = r.half;
      for (int s = 0; s < c.feature_slots; ++s) p.feature_indices.push_back(static_cast<int>(next() % c.codebook_size));
      c.prototypes.push_back(std::move(p));
    }
    c.validate();
    return c;
  }();
  return catalog;
}

std::vector<std::string> room_categories(RoomType room) {
  switch (room) {
    case RoomType::Toy:
      return {"bed", "nightstand", "wardrobe", "desk", "chair", "armchair", "bookshelf", "floor_lamp"};
    case RoomType::Bedroom:
      return {"bed",      "nightstand", "wardrobe",   "desk",    "chair",
              "armchair", "bookshelf",  "floor_lamp", "cabinet", "stool"};
    case RoomType::Dining:
      return {"dining_table", "chair", "cabinet", "floor_lamp", "stool", "bookshelf", "armchair"};
    case RoomType::Living:
      return {"sofa", "armchair", "coffee_table", "tv_stand", "bookshelf", "floor_lamp", "cabinet", "chair", "stool"};
  }
  return {};
}

void validate_scene(const Scene& scene, const ObjectCatalog& catalog) {
  const auto& b = scene.room_bounds;
  if (!finite(b.min) || !finite(b.max) || !(b.min.x < b.max.x && b.min.y < b.max.y && b.min.z < b.max.z))
    throw ValidationError("room_bounds must be finite with min < max");
  const int limit = max_nodes(scene.room_type);
  if (static_cast<int>(scene.objects.size()) > limit)
    throw ValidationError("scene has " + std::to_string(scene.objects.size()) + " objects; limit is " +
                          std::to_string(limit));
  std::unordered_set<std::string> ids;
  for (const auto& o : scene.objects) {
    if (o.id.empty()) throw ValidationError("object id must be non-empty");
    if (!ids.insert(o.id).second) throw ValidationError("duplicate object id '" + o.id + "'");
    if (o.category < 0 || o.category >= catalog.category_count())
      throw ValidationError("object '" + o.id + "' has an out-of-range category");
    if (static_cast<int>(o.feature_indices.size()) != catalog.feature_slots)
      throw ValidationError("object '" + o.id + "' must have " + std::to_string(catalog.feature_slots) +
                            " feature indices");
    for (int f : o.feature_indices)
      if (f < 0 || f >= catalog.codebook_size)
        throw ValidationError("object '" + o.id + "' has a feature index out of range");
    if (!finite(o.position) || !finite(o.half_extents) || !std::isfinite(o.yaw))
      throw ValidationError("object '" + o.id + "' has non-finite values");
    if (!(o.half_extents.x > 0 && o.half_extents.y > 0 && o.half_extents.z > 0))
      throw ValidationError("object '" + o.id + "' half_extents must be strictly positive");
    if (!(o.yaw >= -kPi && o.yaw < kPi)) throw ValidationError("object '" + o.id + "' yaw must lie in [-pi, pi)");
    if (o.position.x < b.min.x || o.position.x > b.max.x || o.position.z < b.min.z || o.position.z > b.max.z)
      throw ValidationError("object '" + o.id + "' center lies outside the room bounds");
  }
}

std::vector<std::string> tokenize(std::string_view text) {
  std::vector<std::string> out;
  std::string cur;
  auto flush = [&] {
    if (!cur.empty()) out.push_back(std::move(cur));
    cur.clear();
  };
  for (std::size_t i = 0; i < text.size(); ++i) {
    const unsigned char ch = static_cast<unsigned char>(text[i]);
    const bool digit_next = i + 1 < text.size() && std::isdigit(static_cast<unsigned char>(text[i + 1]));
    if (std::isalnum(ch)) {
      cur.push_back(static_cast<char>(std::tolower(ch)));
    } else if (ch == '.' && !cur.empty() && std::isdigit(static_cast<unsigned char>(cur.back())) && digit_next) {
      cur.push_back('.');
    } else if (ch == '-' && cur.empty() && digit_next) {
      cur.push_back('-');
    } else {
      flush();
    }
  }
  flush();
  return out;
}

// ---------------------------------------------------------------------------
// JSON documents

namespace detail {

void reject_unknown(const json& j, std::initializer_list<std::string_view> allowed, std::string_view what) {
  if (!j.is_object()) throw ValidationError(std::string(what) + " must be an object");
  for (const auto& [key, _] : j.items()) {
    if (std::find(allowed.begin(), allowed.end(), key) == allowed.end())
      throw ValidationError("unknown field '" + key + "' in " + std::string(what));
  }
}

namespace {


const json& require(const json& j, const char* key, std::string_view what) {
  auto it = j.find(key);
  if (it == j.end()) throw ValidationError(std::string(what) + " is missing '" + key + "'");
  return *it;
}

double number(const json& j, std::string_view what) {
  if (!j.is_number()) throw ValidationError(std::string(what) + " must be a number");
  return j.get<double>();
}

std::string string_field(const json& j, std::string_view what) {
  if (!j.is_string()) throw ValidationError(std::string(what) + " must be a string");
  return j.get<std::string>();
}

}  // namespace

json vec3_to_json(const Vec3& v) { return json::array({v.x, v.y, v.z}); }

Vec3 vec3_from_json(const json& j, std::string_view what) {
  if (!j.is_array() || j.size() != 3) throw ValidationError(std::string(what) + " must be an array of 3 numbers");
  return {number(j[0], what), number(j[1], what), number(j[2], what)};
}

json parse_json(std::string_view text, std::string_view what) {
  try {
    return json::parse(text.begin(), text.end());
  } catch (const json::exception& e) {
    throw ValidationError("malformed " + std::string(what) + ": " + e.what());
  }
}

json scene_to_json(const Scene& scene, const ObjectCatalog& catalog) {
  json objects = json::array();
  for (const auto& o : scene.objects) {
    if (o.category < 0 || o.category >= catalog.category_count())
      throw ValidationError("object '" + o.id + "' has an out-of-range category");
    objects.push_back({{"id", o.id},
                       {"category", catalog.categories[o.category]},
                       {"caption", o.caption},
                       {"feature_indices", o.feature_indices},
                       {"position", vec3_to_json(o.position)},
                       {"half_extents", vec3_to_json(o.half_extents)},
                       {"yaw_radians", o.yaw}});
  }
  return {{"room_type", std::string(to_string(scene.room_type))},
          {"room_bounds", {{"min", vec3_to_json(scene.room_bounds.min)}, {"max", vec3_to_json(scene.room_bounds.max)}}},
          {"objects", std::move(objects)}};
}

Scene scene_from_json(const json& j, const ObjectCatalog& catalog) {
  reject_unknown(j, {"room_type", "room_bounds", "objects"}, "scene");
  Scene s;
  s.room_type = room_type_from_string(string_field(require(j, "room_type", "scene"), "room_type"));
  const auto& bounds = require(j, "room_bounds", "scene");
  reject_unknown(bounds, {"min", "max"}, "room_bounds");
  s.room_bounds.min = vec3_from_json(require(bounds, "min", "room_bounds"), "room_bounds.min");
  s.room_bounds.max = vec3_from_json(require(bounds, "max", "room_bounds"), "room_bounds.max");
  const auto& objects = require(j, "objects", "scene");
  if (!objects.is_array()) throw ValidationError("objects must be an array");
  for (const auto& jo : objects) {
    reject_unknown(jo, {"id", "category", "caption", "feature_indices", "position", "half_extents", "yaw_radians"},
                   "object");
    SceneObject o;
    o.id = string_field(require(jo, "id", "object"), "id");
    const auto name = string_field(require(jo, "category", "object"), "category");
    const auto idx = catalog.category_index(name);
    if (!idx) throw ValidationError("object '" + o.id + "' has unknown category '" + name + "'");
    o.category = *idx;
    o.caption = string_field(require(jo, "caption", "object"), "caption");
    const auto& feats = require(jo, "feature_indices", "object");
    if (!feats.is_array()) throw ValidationError("feature_indices must be an array");
    for (const auto& f : feats) {
      if (!f.is_number_integer()) throw ValidationError("feature_indices must be integers");
      o.feature_indices.push_back(f.get<int>());
    }
    o.position = vec3_from_json(require(jo, "position", "object"), "position");
    o.half_extents = vec3_from_json(require(jo, "half_extents", "object"), "half_extents");
    const double yaw = number(require(jo, "yaw_radians", "object"), "yaw_radians");
    if (!std::isfinite(yaw)) throw ValidationError("object '" + o.id + "' yaw must be finite");
    o.yaw = normalize_yaw(yaw);
    s.objects.push_back(std::move(o));
  }
  validate_scene(s, catalog);
  return s;
}

json graph_to_json(const SceneGraph& graph, const ObjectCatalog& catalog) {
  json nodes = json::array();
  for (int i = 0; i < graph.size(); ++i) {
    if (!graph.node_mask[i]) continue;
    const int c = graph.node_categories[i];
    nodes.push_back({{"index", i},
                     {"category", c >= 0 && c < catalog.category_count() ? catalog.categories[c] : std::string("?")},
                     {"feature_indices", graph.node_features[i]}});
  }
  json edges = json::array();
  for (int i = 0; i < graph.size(); ++i)
    for (int j = i + 1; j < graph.size(); ++j) {
      const auto r = graph.edge(i, j);
      if (r == SpatialRelation::None) continue;
      edges.push_back({{"subject", i}, {"reference", j}, {"relation", std::string(to_identifier(r))}});
    }
  return {{"room_type", std::string(to_string(graph.room_type))},
          {"max_nodes", graph.size()},
          {"nodes", std::move(nodes)},
          {"edges", std::move(edges)}};
}

}  // namespace detail

std::string serialize_scene(const Scene& scene, const ObjectCatalog& catalog) {
  return detail::scene_to_json(scene, catalog).dump(2) + "\n";
}

Scene deserialize_scene(std::string_view text, const ObjectCatalog& catalog) {
  return detail::scene_from_json(detail::parse_json(text, "scene document"), catalog);
}

std::string serialize_catalog(const ObjectCatalog& catalog) {
  using detail::json;
  json protos = json::array();
  for (const auto& p : catalog.prototypes)
    protos.push_back({{"category", catalog.categories.at(p.category)},
                      {"caption", p.caption},
                      {"half_extents", detail::vec3_to_json(p.half_extents)},
                      {"feature_indices", p.feature_indices}});
  json j = {{"n_f", catalog.feature_slots},
            {"K_f", catalog.codebook_size},
            {"categories", catalog.categories},
            {"prototypes", std::move(protos)}};
  return j.dump(2) + "\n";
}

ObjectCatalog deserialize_catalog(std::string_view text) {
  using detail::json;
  const json j = detail::parse_json(text, "catalog document");
  detail::reject_unknown(j, {"n_f", "K_f", "categories", "prototypes"}, "catalog");
  ObjectCatalog c;
  try {
    c.feature_slots = j.at("n_f").get<int>();
    c.codebook_size = j.at("K_f").get<int>();
    c.categories = j.at("categories").get<std::vector<std::string>>();
    for (const auto& jp : j.at("prototypes")) {
      detail::reject_unknown(jp, {"category", "caption", "half_extents", "feature_indices"}, "prototype");
      Prototype p;
      const auto name = jp.at("category").get<std::string>();
      const auto idx = c.category_index(name);
      if (!idx) throw ValidationError("prototype references unknown category '" + name + "'");
      p.category = *idx;
      p.caption = jp.at("caption").get<std::string>();
      p.half_extents = detail::vec3_from_json(jp.at("half_extents"), "half_extents");
      p.feature_indices = jp.at("feature_indices").get<std::vector<int>>();
      c.prototypes.push_back(std::move(p));
    }
  } catch (const json::exception& e) {
    throw ValidationError(std::string("malformed catalog document: ") + e.what());
  }
  c.validate();
  return c;
}

const char* to_string(ParseError::Kind kind) noexcept {
  switch (kind) {
    case ParseError::Kind::UnknownTemplate: return "UnknownTemplate";
    case ParseError::Kind::MalformedField: return "MalformedField";
    case ParseError::Kind::OutOfRangeValue: return "OutOfRangeValue";
  }
  return "ParseError";
}

const char* to_string(EditError::Kind kind) noexcept {
  switch (kind) {
    case EditError::Kind::NoMatch: return "NoMatch";
    case EditError::Kind::PlacementFailed: return "PlacementFailed";
    case EditError::Kind::RoomFull: return "RoomFull";
    case EditError::Kind::Collision: return "Collision";
    case EditError::Kind::NoUniqueReference: return "NoUniqueReference";
  }
  return "EditError";
}

}  // namespace editroom
