#include "rfim/quadrature.hpp"

#include <cmath>

#include <Eigen/Eigenvalues>

namespace rfim {

namespace {

QuadratureRule golub_welsch(const VectorX& diag, const VectorX& off, double mass) {
  const Index n = diag.size();
  MatrixX J = MatrixX::Zero(n, n);
  J.diagonal() = diag;
  for (Index i = 0; i + 1 < n; ++i) J(i, i + 1) = J(i + 1, i) = off(i);
  Eigen::SelfAdjointEigenSolver<MatrixX> es(J);
  QuadratureRule r;
  r.nodes = es.eigenvalues();
  r.weights = mass * es.eigenvectors().row(0).transpose().array().square();
  return r;
}

}  // namespace

QuadratureRule gauss_legendre(int n) {
  require(n >= 1, Errc::InvalidArgument, "quadrature order must be positive");
  VectorX off(std::max(n - 1, 0));
  for (int k = 1; k < n; ++k) off(k - 1) = k / std::sqrt(4.0 * k * k - 1.0);
  return golub_welsch(VectorX::Zero(n), off, 2.0);
}

QuadratureRule gauss_hermite_normal(int n) {
  require(n >= 1, Errc::InvalidArgument, "quadrature order must be positive");
  VectorX off(std::max(n - 1, 0));
  for (int k = 1; k < n; ++k) off(k - 1) = std::sqrt(double(k));
  return golub_welsch(VectorX::Zero(n), off, 1.0);
}

double integrate_box(const Field2D& f, const Box& box, int order) {
  const QuadratureRule q = gauss_legendre(order);
  const Point c = box.center();
  const Point h = box.sizes() / 2;
  double s = 0.0;
  for (int i = 0; i < order; ++i)
    for (int j = 0; j < order; ++j)
      s += q.weights(i) * q.weights(j) * f(Point(c.x() + h.x() * q.nodes(i), c.y() + h.y() * q.nodes(j)));
  return s * h.x() * h.y();
}

double integrate_domain(const Field2D& f, const Polygon& domain, int resolution) {
  const Box bb = bounding_box(domain);
  if (is_axis_rectangle(domain)) {
    double s = 0.0;
    const Point step = bb.sizes() / 16.0;
    for (int i = 0; i < 16; ++i)
      for (int j = 0; j < 16; ++j) {
        const Point lo = bb.min() + Point(i * step.x(), j * step.y());
        s += integrate_box(f, Box(lo, lo + step), 8);
      }
    return s;
  }
  const Point step = bb.sizes() / double(resolution);
  double s = 0.0;
  for (int i = 0; i < resolution; ++i)
    for (int j = 0; j < resolution; ++j) {
      const Point lo = bb.min() + Point(i * step.x(), j * step.y());
      const Box cell(lo, lo + step);
      const double area = clipped_area(domain, cell);
      if (area > 0) s += area * f(cell.center());
    }
  return s;
}

}  // namespace rfim
