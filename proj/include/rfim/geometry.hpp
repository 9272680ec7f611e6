#pragma once

#include <vector>

#include <Eigen/Geometry>

#include "rfim/common.hpp"

namespace rfim {

using Polygon = std::vector<Point>;
using Box = Eigen::AlignedBox2d;

double polygon_area(const Polygon& poly);
Box bounding_box(const Polygon& poly);
double diameter(const Polygon& poly);

/// True if p lies within `tol` of the polygon boundary.
bool on_boundary(const Polygon& poly, const Point& p, double tol = 1e-12);

/// Strict interior test: points on the boundary are outside.
bool strictly_inside(const Polygon& poly, const Point& p, double tol = 1e-12);

bool segments_intersect(const Point& a, const Point& b, const Point& c, const Point& d);

/// Simple closed polygon: at least 3 vertices, non-adjacent edges disjoint.
bool is_simple(const Polygon& poly);

/// Area of poly ∩ box.
double clipped_area(const Polygon& poly, const Box& box);

bool is_axis_rectangle(const Polygon& poly);

Polygon rectangle(const Point& lo, const Point& hi);

/// Quadratic Koch island (Minkowski sausage) of the given generator level on
/// the square [lo, lo+side]^2.
Polygon quadratic_koch_island(const Point& lo, double side, int level);

}  // namespace rfim
