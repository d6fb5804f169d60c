#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <string>

#include "grazing/dataset/types.hpp"

namespace grazing {

inline double signed_area(const FieldPolygon& poly) {
  const auto& v = poly.vertices;
  double a = 0.0;
  for (std::size_t i = 0, j = v.size() - 1; i < v.size(); j = i++) a += v[j].x * v[i].y - v[i].x * v[j].y;
  return 0.5 * a;
}

namespace detail {

inline double cross(const Point& o, const Point& a, const Point& b) {
  return (a.x - o.x) * (b.y - o.y) - (a.y - o.y) * (b.x - o.x);
}

inline bool on_segment(const Point& p, const Point& a, const Point& b) {
  return std::min(a.x, b.x) <= p.x && p.x <= std::max(a.x, b.x) && std::min(a.y, b.y) <= p.y &&
         p.y <= std::max(a.y, b.y);
}

inline bool segments_intersect(const Point& p1, const Point& p2, const Point& q1, const Point& q2) {
  const double d1 = cross(q1, q2, p1), d2 = cross(q1, q2, p2);
  const double d3 = cross(p1, p2, q1), d4 = cross(p1, p2, q2);
  if (((d1 > 0 && d2 < 0) || (d1 < 0 && d2 > 0)) && ((d3 > 0 && d4 < 0) || (d3 < 0 && d4 > 0))) return true;
  if (d1 == 0 && on_segment(p1, q1, q2)) return true;
  if (d2 == 0 && on_segment(p2, q1, q2)) return true;
  if (d3 == 0 && on_segment(q1, p1, p2)) return true;
  if (d4 == 0 && on_segment(q2, p1, p2)) return true;
  return false;
}

}  // namespace detail

/// True when no two non-adjacent edges of the ring touch.
inline bool is_simple(const FieldPolygon& poly) {
  const auto& v = poly.vertices;
  const std::size_t n = v.size();
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = i + 1; j < n; ++j) {
      const bool adjacent = j == i + 1 || (i == 0 && j == n - 1);
      if (adjacent) continue;
      if (detail::segments_intersect(v[i], v[(i + 1) % n], v[j], v[(j + 1) % n])) return false;
    }
  }
  return true;
}

inline void validate_polygon(const FieldPolygon& poly) {
  if (poly.vertices.size() < 3)
    throw DataError("polygon '" + poly.site_id + "' needs at least 3 vertices");
  if (std::abs(signed_area(poly)) == 0.0)
    throw DataError("polygon '" + poly.site_id + "' is degenerate (zero area)");
  if (!is_simple(poly)) throw DataError("polygon '" + poly.site_id + "' self-intersects");
}

/// Even-odd test of a point against the ring.
inline bool contains(const FieldPolygon& poly, double px, double py) {
  const auto& v = poly.vertices;
  bool inside = false;
  for (std::size_t i = 0, j = v.size() - 1; i < v.size(); j = i++) {
    if ((v[i].y > py) != (v[j].y > py)) {
      const double x_cross = v[j].x + (py - v[j].y) * (v[i].x - v[j].x) / (v[i].y - v[j].y);
      if (px < x_cross) inside = !inside;
    }
  }
  return inside;
}

/// A pixel is set iff its center lies inside the ring.
inline Mask rasterize_polygon(const FieldPolygon& poly, std::size_t height, std::size_t width) {
  validate_polygon(poly);
  Mask m(height, width);
  for (std::size_t r = 0; r < height; ++r)
    for (std::size_t c = 0; c < width; ++c)
      m.at(r, c) = contains(poly, static_cast<double>(c) + 0.5, static_cast<double>(r) + 0.5) ? 1 : 0;
  return m;
}

}  // namespace grazing
