#pragma once

#include <array>
#include <set>
#include <string>
#include <utility>
#include <vector>

#include "editroom/scene.hpp"

namespace editroom::geometry {

/// Point in the horizontal x-z plane.
struct Point2 {
  double x = 0.0;
  double z = 0.0;
};

/// Box that may only rotate about the vertical axis.
struct OrientedBox {
  Vec3 center;
  Vec3 half_extents{0.5, 0.5, 0.5};
  double yaw = 0.0;

  static OrientedBox of(const SceneObject& o) { return {o.position, o.half_extents, o.yaw}; }
  double volume() const { return 8.0 * half_extents.x * half_extents.y * half_extents.z; }
  double footprint_area() const { return 4.0 * half_extents.x * half_extents.z; }
};

inline constexpr double kTouchTolerance = 1e-9;

/// Local +x axis maps to (cos yaw, -sin yaw) and local +z to (sin yaw, cos yaw),
/// so positive yaw turns counter-clockwise seen from +y.
Point2 rotate_to_world(double local_x, double local_z, double yaw);

/// Counter-clockwise (seen from +y) footprint corners.
std::array<Point2, 4> footprint_corners(const OrientedBox& b);

/// Half-width of the footprint projected onto world x and world z.
Point2 footprint_half_widths(const OrientedBox& b);

/// SAT on the four face normals; touching within kTouchTolerance counts as overlap.
bool overlap_2d(const OrientedBox& a, const OrientedBox& b);
bool vertical_overlap(const OrientedBox& a, const OrientedBox& b);
bool collides(const OrientedBox& a, const OrientedBox& b);

/// Collision test with both footprints inflated by `clearance` meters.
bool collides_with_clearance(const OrientedBox& a, const OrientedBox& b, double clearance);

/// Signed SAT separation of footprints: > 0 is the largest gap along a
/// candidate axis, < 0 is minus the smallest overlap (penetration depth).
double footprint_separation(const OrientedBox& a, const OrientedBox& b);

using Polygon = std::vector<Point2>;

/// Sutherland-Hodgman clip of convex `subject` by convex CCW `clip`.
Polygon clip_convex(const Polygon& subject, const Polygon& clip);
/// Signed shoelace area (positive for CCW in the x-z plane seen from +y).
double polygon_area(const Polygon& poly);
double footprint_intersection_area(const OrientedBox& a, const OrientedBox& b);
double intersection_volume(const OrientedBox& a, const OrientedBox& b);
double iou_3d(const OrientedBox& a, const OrientedBox& b);

/// Footprint fully inside the room's horizontal bounds and box inside the vertical bounds.
bool inside_room(const OrientedBox& b, const AxisBounds& bounds, double tolerance = 1e-9);

using IdPair = std::pair<std::string, std::string>;

/// Colliding unordered pairs in scene order (i < j), skipping `ignore`.
/// Pairs in `ignore` match in either orientation.
std::vector<IdPair> scene_collisions(const Scene& scene, const std::set<IdPair>& ignore = {},
                                     double clearance = 0.0);

}  // namespace editroom::geometry
