#include "editroom/executor.hpp"

#include <algorithm>
#include <cctype>
#include <set>

#include "editroom/error.hpp"
#include "editroom/geometry.hpp"

namespace editroom {

bool is_stopword(std::string_view token) {
  static const std::set<std::string_view> words = {"a", "an", "the", "of", "object", "one", "some"};
  return words.count(token) > 0;
}

namespace {

using geometry::OrientedBox;

std::set<std::string> content_tokens(std::string_view text) {
  std::set<std::string> out;
  for (auto& t : tokenize(text))
    if (!is_stopword(t)) out.insert(std::move(t));
  return out;
}

std::set<std::string> category_tokens(const ObjectCatalog& catalog, int category) {
  std::string name = catalog.categories.at(static_cast<std::size_t>(category));
  std::replace(name.begin(), name.end(), '_', ' ');
  return content_tokens(name);
}

struct Score {
  int overlap = 0;
  int extra = 0;
  bool operator<(const Score& o) const {
    if (overlap != o.overlap) return overlap < o.overlap;
    return extra > o.extra;
  }
  bool operator==(const Score& o) const { return overlap == o.overlap && extra == o.extra; }
};

Score score_tokens(const std::set<std::string>& query, const std::set<std::string>& cand) {
  Score s;
  for (const auto& t : cand) {
    if (query.count(t)) ++s.overlap;
    else ++s.extra;
  }
  return s;
}

std::string lower_collapsed(std::string_view s) {
  std::string out = collapse_whitespace(s);
  for (auto& ch : out) ch = static_cast<char>(std::tolower(static_cast<unsigned char>(ch)));
  return out;
}

bool collides_any(const Scene& scene, const OrientedBox& box, std::string_view skip_id, double clearance) {
  for (const auto& o : scene.objects) {
    if (o.id == skip_id) continue;
    if (geometry::collides_with_clearance(box, OrientedBox::of(o), clearance)) return true;
  }
  return false;
}

std::size_t index_of(const Scene& scene, const std::string& id) { return *scene.find(id); }

SceneObject from_prototype(const Prototype& p) {
  SceneObject o;
  o.category = p.category;
  o.caption = p.caption;
  o.feature_indices = p.feature_indices;
  o.half_extents = p.half_extents;
  return o;
}

Vec3 relation_axis(SpatialRelation r) {
  switch (r) {
    case SpatialRelation::InFrontOf:
    case SpatialRelation::CloselyInFrontOf: return {0.0, 0.0, 1.0};
    case SpatialRelation::Behind:
    case SpatialRelation::CloselyBehind: return {0.0, 0.0, -1.0};
    case SpatialRelation::RightOf:
    case SpatialRelation::CloselyRightOf: return {1.0, 0.0, 0.0};
    case SpatialRelation::LeftOf:
    case SpatialRelation::CloselyLeftOf: return {-1.0, 0.0, 0.0};
    default: break;
  }
  throw EditError(EditError::Kind::PlacementFailed, "added objects need a horizontal relation");
}

void check_strict(const Scene& scene, const std::string& id, const EditOptions& opt) {
  if (!opt.strict) return;
  const auto& o = scene.objects[index_of(scene, id)];
  const OrientedBox box = OrientedBox::of(o);
  if (!geometry::inside_room(box, scene.room_bounds))
    throw EditError(EditError::Kind::Collision, "edited object '" + id + "' leaves the room bounds");
  for (const auto& other : scene.objects) {
    if (other.id == id) continue;
    if (geometry::collides(box, OrientedBox::of(other)))
      throw EditError(EditError::Kind::Collision, "edited object '" + id + "' collides with '" + other.id + "'");
  }
}

Scene apply_add(const Scene& scene, const AddCmd& c, const ObjectCatalog& catalog, const EditOptions& opt) {
  if (static_cast<int>(scene.objects.size()) >= max_nodes(scene.room_type))
    throw EditError(EditError::Kind::RoomFull, "room already holds the maximum number of objects");
  const Vec3 axis = relation_axis(c.location.relation);
  const auto& ref = scene.objects[index_of(scene, resolve_object(scene, ObjectRef{c.location.reference_desc, {}},
                                                                 catalog))];
  const Prototype& proto = best_prototype(catalog, c.target_desc);
  SceneObject obj = from_prototype(proto);
  obj.id = fresh_object_id(scene, catalog, proto.category);
  obj.yaw = 0.0;
  obj.position.y = scene.room_bounds.min.y + obj.half_extents.y;

  const auto ref_w = geometry::footprint_half_widths(OrientedBox::of(ref));
  const bool along_x = axis.x != 0.0;
  double offset = (along_x ? ref_w.x + obj.half_extents.x : ref_w.z + obj.half_extents.z) + opt.add_gap;
  if (!is_close(c.location.relation)) offset = std::max(offset, opt.far_min_distance);

  for (int step = 0; step <= opt.add_steps; ++step) {
    const double d = offset + opt.add_gap * step;
    obj.position.x = ref.position.x + axis.x * d;
    obj.position.z = ref.position.z + axis.z * d;
    const OrientedBox box = OrientedBox::of(obj);
    if (geometry::inside_room(box, scene.room_bounds) && !collides_any(scene, box, {}, opt.clearance)) {
      Scene out = scene;
      out.objects.push_back(std::move(obj));
      return out;
    }
  }
  throw EditError(EditError::Kind::PlacementFailed,
                  "no collision-free spot " + std::string(to_phrase(c.location.relation)) + " '" + ref.id + "'");
}

Scene apply_replace(const Scene& scene, const ReplaceCmd& c, const ObjectCatalog& catalog, const EditOptions& opt) {
  const std::string id = resolve_object(scene, c.source, catalog);
  Scene out = scene;
  SceneObject& slot = out.objects[index_of(out, id)];
  const SceneObject old = slot;
  const Prototype& proto = best_prototype(catalog, c.target_desc, old.category);

  SceneObject obj = from_prototype(proto);
  obj.id = old.id;
  obj.yaw = old.yaw;
  obj.position = old.position;
  const double floor_y = old.min_y();
  auto place = [&] { obj.position.y = floor_y + obj.half_extents.y; };
  place();

  auto blocked = [&] {
    const OrientedBox box = OrientedBox::of(obj);
    return !geometry::inside_room(box, scene.room_bounds) || collides_any(scene, box, old.id, opt.clearance);
  };
  if (blocked()) {
    const double max_area = OrientedBox::of(old).footprint_area();
    int iter = 0;
    while ((blocked() || OrientedBox::of(obj).footprint_area() > max_area) && iter < opt.replace_max_shrinks) {
      obj.half_extents = obj.half_extents * opt.replace_shrink;
      place();
      ++iter;
    }
  }
  slot = std::move(obj);
  check_strict(out, id, opt);
  return out;
}

}  // namespace

std::vector<std::size_t> match_candidates(const Scene& scene, std::string_view description,
                                          const ObjectCatalog& catalog) {
  const auto query = content_tokens(description);
  std::vector<std::size_t> best;
  Score best_score;
  for (std::size_t i = 0; i < scene.objects.size(); ++i) {
    const auto& o = scene.objects[i];
    auto toks = content_tokens(o.caption);
    if (o.category >= 0 && o.category < catalog.category_count()) toks.merge(category_tokens(catalog, o.category));
    const Score s = score_tokens(query, toks);
    if (s.overlap == 0) continue;
    if (best.empty() || best_score < s) {
      best = {i};
      best_score = s;
    } else if (s == best_score) {
      best.push_back(i);
    }
  }
  return best;
}

std::string resolve_object(const Scene& scene, const ObjectRef& ref, const ObjectCatalog& catalog) {
  auto top = match_candidates(scene, ref.description, catalog);
  if (top.empty()) throw EditError(EditError::Kind::NoMatch, "no object matches '" + ref.description + "'");
  if (top.size() > 1 && ref.relative) {
    const std::string ref_id = resolve_object(scene, ObjectRef{ref.relative->reference_desc, {}}, catalog);
    const auto& anchor = scene.objects[*scene.find(ref_id)];
    std::vector<std::size_t> kept;
    for (auto i : top)
      if (scene.objects[i].id != ref_id && classify_relation(scene.objects[i], anchor) == ref.relative->relation)
        kept.push_back(i);
    if (!kept.empty()) top = std::move(kept);
  }
  return scene.objects[top.front()].id;
}

const Prototype& best_prototype(const ObjectCatalog& catalog, std::string_view description,
                                std::optional<int> category) {
  const std::string wanted = lower_collapsed(description);
  const auto query = content_tokens(description);
  const Prototype* best = nullptr;
  Score best_score;
  for (const auto& p : catalog.prototypes) {
    if (category && p.category != *category) continue;
    if (lower_collapsed(p.caption) == wanted) return p;
    auto toks = content_tokens(p.caption);
    toks.merge(category_tokens(catalog, p.category));
    const Score s = score_tokens(query, toks);
    if (s.overlap == 0) continue;
    if (!best || best_score < s) {
      best = &p;
      best_score = s;
    }
  }
  if (!best) throw EditError(EditError::Kind::NoMatch, "no catalog prototype matches '" + std::string(description) + "'");
  return *best;
}

std::string fresh_object_id(const Scene& scene, const ObjectCatalog& catalog, int category) {
  const std::string& base = catalog.categories.at(static_cast<std::size_t>(category));
  for (int k = 0;; ++k) {
    std::string id = base + "_" + std::to_string(k);
    if (!scene.find(id)) return id;
  }
}

Scene apply_edit(const Scene& scene, const EditCommand& cmd, const ObjectCatalog& catalog, const EditOptions& opt) {
  switch (edit_type(cmd)) {
    case EditType::Translate: {
      const auto& c = std::get<TranslateCmd>(cmd);
      const std::string id = resolve_object(scene, c.target, catalog);
      Scene out = scene;
      auto& o = out.objects[index_of(out, id)];
      const Vec3 d = direction_vector(c.direction);
      o.position.x += d.x * c.distance_m;
      o.position.z += d.z * c.distance_m;
      check_strict(out, id, opt);
      return out;
    }
    case EditType::Rotate: {
      const auto& c = std::get<RotateCmd>(cmd);
      const std::string id = resolve_object(scene, c.target, catalog);
      Scene out = scene;
      auto& o = out.objects[index_of(out, id)];
      o.yaw = normalize_yaw(o.yaw + c.angle_degrees * kPi / 180.0);
      check_strict(out, id, opt);
      return out;
    }
    case EditType::Scale: {
      const auto& c = std::get<ScaleCmd>(cmd);
      const std::string id = resolve_object(scene, c.target, catalog);
      Scene out = scene;
      auto& o = out.objects[index_of(out, id)];
      const double floor_y = o.min_y();
      o.half_extents = o.half_extents * c.factor;
      o.position.y = floor_y + o.half_extents.y;
      check_strict(out, id, opt);
      return out;
    }
    case EditType::Remove: {
      const auto& c = std::get<RemoveCmd>(cmd);
      const std::string id = resolve_object(scene, c.target, catalog);
      Scene out = scene;
      out.objects.erase(out.objects.begin() + static_cast<std::ptrdiff_t>(index_of(out, id)));
      return out;
    }
    case EditType::Add: return apply_add(scene, std::get<AddCmd>(cmd), catalog, opt);
    case EditType::Replace: return apply_replace(scene, std::get<ReplaceCmd>(cmd), catalog, opt);
  }
  return scene;
}

}  // namespace editroom
