#pragma once

#include <array>
#include <cmath>
#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include <Eigen/Core>

namespace editroom {

/// World frame: x right, y up, z front. Meters.
struct Vec3 {
  double x = 0.0;
  double y = 0.0;
  double z = 0.0;

  friend bool operator==(const Vec3&, const Vec3&) = default;
  Vec3 operator+(const Vec3& o) const { return {x + o.x, y + o.y, z + o.z}; }
  Vec3 operator-(const Vec3& o) const { return {x - o.x, y - o.y, z - o.z}; }
  Vec3 operator*(double s) const { return {x * s, y * s, z * s}; }
};

constexpr double kPi = 3.14159265358979323846;

/// Maps any finite angle into [-pi, pi).
double normalize_yaw(double radians);

enum class RoomType { Bedroom, Dining, Living, Toy };

std::string_view to_string(RoomType room);
RoomType room_type_from_string(std::string_view name);
/// Node budget per room type; graphs are padded to this size.
int max_nodes(RoomType room);

inline constexpr int kDefaultFeatureSlots = 4;      // n_f
inline constexpr int kDefaultCodebookSize = 64;     // K_f

struct SceneObject {
  std::string id;
  int category = 0;
  std::string caption;
  std::vector<int> feature_indices;
  Vec3 position;
  Vec3 half_extents{0.5, 0.5, 0.5};
  double yaw = 0.0;

  double min_y() const { return position.y - half_extents.y; }
  double max_y() const { return position.y + half_extents.y; }

  friend bool operator==(const SceneObject&, const SceneObject&) = default;
};

struct AxisBounds {
  Vec3 min{-2.0, 0.0, -2.0};
  Vec3 max{2.0, 3.0, 2.0};

  friend bool operator==(const AxisBounds&, const AxisBounds&) = default;
};

struct Scene {
  RoomType room_type = RoomType::Toy;
  AxisBounds room_bounds;
  std::vector<SceneObject> objects;

  /// Index of the object with `id`, or nullopt.
  std::optional<std::size_t> find(std::string_view id) const;

  friend bool operator==(const Scene&, const Scene&) = default;
};

/// Spatial relation of a subject object to a reference object. Enumerator
/// values are the token indices used by the graph diffusion model.
enum class SpatialRelation : std::uint8_t {
  InFrontOf = 0,
  Behind,
  RightOf,
  LeftOf,
  CloselyInFrontOf,
  CloselyBehind,
  CloselyRightOf,
  CloselyLeftOf,
  Above,
  Below,
  None,
};

inline constexpr int kNumRelations = 11;  // including None
inline constexpr double kCloseDistance = 1.0;
inline constexpr double kStackDistance = 0.8;

/// Human-readable phrase ("closely left of"), also used by the template grammar.
std::string_view to_phrase(SpatialRelation r);
std::optional<SpatialRelation> relation_from_phrase(std::string_view phrase);
/// snake_case identifier ("closely_left_of") for JSON documents.
std::string_view to_identifier(SpatialRelation r);
std::optional<SpatialRelation> relation_from_identifier(std::string_view id);

SpatialRelation classify_relation(const SceneObject& subject, const SceneObject& reference);
SpatialRelation invert_relation(SpatialRelation r);
bool is_close(SpatialRelation r);
/// Horizontal (x-z) center distance.
double horizontal_distance(const Vec3& a, const Vec3& b);

/// Node/edge view of a scene padded to max_nodes(room_type).
struct SceneGraph {
  static constexpr int kEmpty = -1;

  RoomType room_type = RoomType::Toy;
  int feature_slots = kDefaultFeatureSlots;
  std::vector<int> node_categories;               // M, kEmpty for padding
  std::vector<std::vector<int>> node_features;    // M x n_f, 0-filled padding
  std::vector<SpatialRelation> edges;             // upper triangle, row-major over i<j
  std::vector<bool> node_mask;                    // M

  int size() const { return static_cast<int>(node_categories.size()); }
  int real_count() const;

  SpatialRelation edge(int i, int j) const;       // any i != j, inverted when i > j
  void set_edge(int i, int j, SpatialRelation r); // any i != j

  friend bool operator==(const SceneGraph&, const SceneGraph&) = default;
};

/// Position of edge (i, j), i < j, in the row-major upper-triangle ordering.
std::size_t edge_index(int i, int j, int m);
inline std::size_t edge_count(int m) { return static_cast<std::size_t>(m) * (m - 1) / 2; }

SceneGraph empty_graph(RoomType room, int feature_slots);
SceneGraph extract_scene_graph(const Scene& scene, int feature_slots = kDefaultFeatureSlots);

/// M x 8 rows of [position, half_extents, cos yaw, sin yaw]; padded rows zero.
Eigen::MatrixXd layout_matrix(const Scene& scene);

/// Rebuilds poses of `like.objects` from a layout matrix; other fields kept.
Scene scene_from_layout(const Scene& like, const Eigen::MatrixXd& layout);

struct Prototype {
  int category = 0;
  std::string caption;
  Vec3 half_extents;
  std::vector<int> feature_indices;

  friend bool operator==(const Prototype&, const Prototype&) = default;
};

struct ObjectCatalog {
  int feature_slots = kDefaultFeatureSlots;
  int codebook_size = kDefaultCodebookSize;
  std::vector<std::string> categories;
  std::vector<Prototype> prototypes;

  int category_count() const { return static_cast<int>(categories.size()); }
  std::optional<int> category_index(std::string_view name) const;
  std::vector<std::size_t> prototypes_of(int category) const;
  /// Throws ValidationError when an invariant is violated.
  void validate() const;

  friend bool operator==(const ObjectCatalog&, const ObjectCatalog&) = default;
};

/// Built-in synthetic catalog (furniture categories, three prototypes each).
const ObjectCatalog& builtin_catalog();

/// Category names the procedural sampler draws from for each room type.
std::vector<std::string> room_categories(RoomType room);

/// Throws ValidationError when the scene violates a data-model invariant.
void validate_scene(const Scene& scene, const ObjectCatalog& catalog);

std::string serialize_scene(const Scene& scene, const ObjectCatalog& catalog);
Scene deserialize_scene(std::string_view text, const ObjectCatalog& catalog);

std::string serialize_catalog(const ObjectCatalog& catalog);
ObjectCatalog deserialize_catalog(std::string_view text);

/// Lowercased alphanumeric tokens ("A wooden-bed." -> {"a", "wooden", "bed"}).
std::vector<std::string> tokenize(std::string_view text);

}  // namespace editroom
