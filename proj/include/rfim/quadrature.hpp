#pragma once

#include <functional>

#include "rfim/common.hpp"
#include "rfim/geometry.hpp"

namespace rfim {

struct QuadratureRule {
  VectorX nodes;
  VectorX weights;
};

/// Gauss-Legendre rule on [-1, 1].
QuadratureRule gauss_legendre(int n);

/// Gauss-Hermite rule for the standard normal weight (weights sum to 1).
QuadratureRule gauss_hermite_normal(int n);

using Field2D = std::function<double(const Point&)>;

/// Tensor Gauss-Legendre over an axis-aligned box, `order` points per axis.
double integrate_box(const Field2D& f, const Box& box, int order = 2);

/// ∫_Ω f: tensor Gauss-Legendre on rectangles, otherwise composite midpoint on
/// `resolution`^2 cells of the bounding box with cell ∩ Ω weights.
double integrate_domain(const Field2D& f, const Polygon& domain, int resolution = 256);

}  // namespace rfim
