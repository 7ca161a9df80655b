#include "editroom/geometry.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

namespace editroom::geometry {

namespace {

Point2 local_x_axis(double yaw) { return {std::cos(yaw), -std::sin(yaw)}; }
Point2 local_z_axis(double yaw) { return {std::sin(yaw), std::cos(yaw)}; }

double dot(const Point2& a, const Point2& b) { return a.x * b.x + a.z * b.z; }

// y component of (u x v) for u, v in the x-z plane.
double cross_y(const Point2& u, const Point2& v) { return u.z * v.x - u.x * v.z; }

Point2 sub(const Point2& a, const Point2& b) { return {a.x - b.x, a.z - b.z}; }

double projected_radius(const OrientedBox& b, const Point2& axis) {
  return b.half_extents.x * std::abs(dot(axis, local_x_axis(b.yaw))) +
         b.half_extents.z * std::abs(dot(axis, local_z_axis(b.yaw)));
}

}  // namespace

Point2 rotate_to_world(double local_x, double local_z, double yaw) {
  const double c = std::cos(yaw);
  const double s = std::sin(yaw);
  return {local_x * c + local_z * s, -local_x * s + local_z * c};
}

std::array<Point2, 4> footprint_corners(const OrientedBox& b) {
  const double hx = b.half_extents.x;
  const double hz = b.half_extents.z;
  // Order follows the positive-yaw turning direction.
  const std::array<Point2, 4> local = {{{hx, hz}, {hx, -hz}, {-hx, -hz}, {-hx, hz}}};
  std::array<Point2, 4> out;
  for (std::size_t i = 0; i < 4; ++i) {
    const Point2 w = rotate_to_world(local[i].x, local[i].z, b.yaw);
    out[i] = {b.center.x + w.x, b.center.z + w.z};
  }
  return out;
}

Point2 footprint_half_widths(const OrientedBox& b) {
  return {projected_radius(b, {1.0, 0.0}), projected_radius(b, {0.0, 1.0})};
}

double footprint_separation(const OrientedBox& a, const OrientedBox& b) {
  const Point2 d{b.center.x - a.center.x, b.center.z - a.center.z};
  const std::array<Point2, 4> axes = {local_x_axis(a.yaw), local_z_axis(a.yaw), local_x_axis(b.yaw),
                                      local_z_axis(b.yaw)};
  double best = -std::numeric_limits<double>::infinity();
  for (const auto& n : axes) {
    const double gap = std::abs(dot(n, d)) - projected_radius(a, n) - projected_radius(b, n);
    best = std::max(best, gap);
  }
  return best;
}

bool overlap_2d(const OrientedBox& a, const OrientedBox& b) { return footprint_separation(a, b) <= kTouchTolerance; }

bool vertical_overlap(const OrientedBox& a, const OrientedBox& b) {
  const double a_lo = a.center.y - a.half_extents.y, a_hi = a.center.y + a.half_extents.y;
  const double b_lo = b.center.y - b.half_extents.y, b_hi = b.center.y + b.half_extents.y;
  return a_lo <= b_hi + kTouchTolerance && b_lo <= a_hi + kTouchTolerance;
}

bool collides(const OrientedBox& a, const OrientedBox& b) { return vertical_overlap(a, b) && overlap_2d(a, b); }

bool collides_with_clearance(const OrientedBox& a, const OrientedBox& b, double clearance) {
  return vertical_overlap(a, b) && footprint_separation(a, b) <= clearance + kTouchTolerance;
}

Polygon clip_convex(const Polygon& subject, const Polygon& clip) {
  Polygon out = subject;
  const std::size_t m = clip.size();
  for (std::size_t e = 0; e < m && !out.empty(); ++e) {
    const Point2 a = clip[e];
    const Point2 b = clip[(e + 1) % m];
    const Point2 edge = sub(b, a);
    auto side = [&](const Point2& p) { return cross_y(edge, sub(p, a)); };

    Polygon in = std::move(out);
    out.clear();
    const std::size_t n = in.size();
    for (std::size_t i = 0; i < n; ++i) {
      const Point2& cur = in[i];
      const Point2& prev = in[(i + n - 1) % n];
      const double s_cur = side(cur);
      const double s_prev = side(prev);
      if (s_cur >= 0.0) {
        if (s_prev < 0.0) {
          const double t = s_prev / (s_prev - s_cur);
          out.push_back({prev.x + t * (cur.x - prev.x), prev.z + t * (cur.z - prev.z)});
        }
        out.push_back(cur);
      } else if (s_prev >= 0.0) {
        const double t = s_prev / (s_prev - s_cur);
        out.push_back({prev.x + t * (cur.x - prev.x), prev.z + t * (cur.z - prev.z)});
      }
    }
  }
  return out;
}

double polygon_area(const Polygon& poly) {
  if (poly.size() < 3) return 0.0;
  double acc = 0.0;
  for (std::size_t i = 0; i < poly.size(); ++i) {
    const Point2& p = poly[i];
    const Point2& q = poly[(i + 1) % poly.size()];
    acc += p.z * q.x - q.z * p.x;
  }
  return 0.5 * acc;
}

double footprint_intersection_area(const OrientedBox& a, const OrientedBox& b) {
  const auto ca = footprint_corners(a);
  const auto cb = footprint_corners(b);
  const Polygon pa(ca.begin(), ca.end());
  const Polygon pb(cb.begin(), cb.end());
  return std::max(0.0, polygon_area(clip_convex(pa, pb)));
}

double intersection_volume(const OrientedBox& a, const OrientedBox& b) {
  const double lo = std::max(a.center.y - a.half_extents.y, b.center.y - b.half_extents.y);
  const double hi = std::min(a.center.y + a.half_extents.y, b.center.y + b.half_extents.y);
  const double height = hi - lo;
  if (height <= 0.0) return 0.0;
  return footprint_intersection_area(a, b) * height;
}

double iou_3d(const OrientedBox& a, const OrientedBox& b) {
  if (a.center == b.center && a.half_extents == b.half_extents && a.yaw == b.yaw && a.volume() > 0.0) return 1.0;
  const double inter = intersection_volume(a, b);
  if (inter <= 0.0) return 0.0;
  const double uni = a.volume() + b.volume() - inter;
  if (uni <= 0.0) return 0.0;
  return std::clamp(inter / uni, 0.0, 1.0);
}

bool inside_room(const OrientedBox& b, const AxisBounds& bounds, double tolerance) {
  for (const auto& p : footprint_corners(b)) {
    if (p.x < bounds.min.x - tolerance || p.x > bounds.max.x + tolerance) return false;
    if (p.z < bounds.min.z - tolerance || p.z > bounds.max.z + tolerance) return false;
  }
  return b.center.y - b.half_extents.y >= bounds.min.y - tolerance &&
         b.center.y + b.half_extents.y <= bounds.max.y + tolerance;
}

std::vector<IdPair> scene_collisions(const Scene& scene, const std::set<IdPair>& ignore, double clearance) {
  std::vector<IdPair> out;
  const auto& objs = scene.objects;
  for (std::size_t i = 0; i < objs.size(); ++i) {
    const OrientedBox bi = OrientedBox::of(objs[i]);
    for (std::size_t j = i + 1; j < objs.size(); ++j) {
      if (ignore.count({objs[i].id, objs[j].id}) || ignore.count({objs[j].id, objs[i].id})) continue;
      if (collides_with_clearance(bi, OrientedBox::of(objs[j]), clearance)) out.emplace_back(objs[i].id, objs[j].id);
    }
  }
  return out;
}

}  // namespace editroom::geometry
