#pragma once

#include <string>
#include <vector>

#include "editroom/command.hpp"
#include "editroom/scene.hpp"

namespace editroom {

struct EditOptions {
  /// Minimum footprint gap the executor enforces when it places objects itself.
  double clearance = 1e-4;
  /// Reject results that collide or leave the room (interactive use).
  bool strict = false;
  double add_gap = 0.1;
  int add_steps = 10;
  /// Non-close Add relations start at least this far from the reference center.
  double far_min_distance = 1.1;
  double replace_shrink = 0.95;
  int replace_max_shrinks = 200;
};

/// Objects tied for the best overlap score, in scene order. Empty when nothing
/// shares a token with the description.
std::vector<std::size_t> match_candidates(const Scene& scene, std::string_view description,
                                          const ObjectCatalog& catalog);

/// Throws EditError(NoMatch).
std::string resolve_object(const Scene& scene, const ObjectRef& ref, const ObjectCatalog& catalog);

/// Best prototype for `description`, optionally restricted to one category.
/// Exact caption matches win; otherwise token overlap. Throws EditError(NoMatch).
const Prototype& best_prototype(const ObjectCatalog& catalog, std::string_view description,
                                std::optional<int> category = std::nullopt);

/// Smallest "<category>_<k>" id not present in the scene.
std::string fresh_object_id(const Scene& scene, const ObjectCatalog& catalog, int category);

/// Throws EditError on NoMatch, PlacementFailed, RoomFull, and (strict mode) Collision.
Scene apply_edit(const Scene& scene, const EditCommand& cmd, const ObjectCatalog& catalog,
                 const EditOptions& options = {});

/// Words ignored when matching descriptions.
bool is_stopword(std::string_view token);

}  // namespace editroom
