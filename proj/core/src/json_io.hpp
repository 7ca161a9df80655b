// Internal JSON conversions shared by the serializers, dataset I/O and the
// HTTP service. Not installed.
#pragma once

#include <initializer_list>
#include <string_view>

#include "json.hpp"

#include "editroom/scene.hpp"

namespace editroom::detail {

using json = nlohmann::json;

json vec3_to_json(const Vec3& v);
Vec3 vec3_from_json(const json& j, std::string_view what);

json scene_to_json(const Scene& scene, const ObjectCatalog& catalog);
/// Validates shape, unknown fields and invariants. Throws ValidationError.
Scene scene_from_json(const json& j, const ObjectCatalog& catalog);

json graph_to_json(const SceneGraph& graph, const ObjectCatalog& catalog);

/// Throws ValidationError for non-objects and keys outside `allowed`.
void reject_unknown(const json& j, std::initializer_list<std::string_view> allowed, std::string_view what);

/// Parses text, rethrowing nlohmann errors as ValidationError.
json parse_json(std::string_view text, std::string_view what);

}  // namespace editroom::detail
