#include "rfim/geometry.hpp"

#include <algorithm>
#include <cmath>
#include <unordered_map>

namespace rfim {

namespace {

double cross(const Point& o, const Point& a, const Point& b) {
  return (a.x() - o.x()) * (b.y() - o.y()) - (a.y() - o.y()) * (b.x() - o.x());
}

int sign_tol(double v, double tol) { return v > tol ? 1 : (v < -tol ? -1 : 0); }

bool within_segment_box(const Point& a, const Point& b, const Point& p, double tol) {
  return p.x() >= std::min(a.x(), b.x()) - tol && p.x() <= std::max(a.x(), b.x()) + tol &&
         p.y() >= std::min(a.y(), b.y()) - tol && p.y() <= std::max(a.y(), b.y()) + tol;
}

double point_segment_distance(const Point& p, const Point& a, const Point& b) {
  const Point d = b - a;
  const double l2 = d.squaredNorm();
  if (l2 == 0.0) return (p - a).norm();
  const double t = std::clamp((p - a).dot(d) / l2, 0.0, 1.0);
  return (p - (a + t * d)).norm();
}

}  // namespace

double polygon_area(const Polygon& poly) {
  double s = 0.0;
  const std::size_t n = poly.size();
  for (std::size_t i = 0; i < n; ++i) {
    const Point& p = poly[i];
    const Point& q = poly[(i + 1) % n];
    s += p.x() * q.y() - q.x() * p.y();
  }
  return 0.5 * std::abs(s);
}

Box bounding_box(const Polygon& poly) {
  Box b;
  for (const auto& p : poly) b.extend(p);
  return b;
}

double diameter(const Polygon& poly) {
  double d = 0.0;
  for (std::size_t i = 0; i < poly.size(); ++i)
    for (std::size_t j = i + 1; j < poly.size(); ++j) d = std::max(d, (poly[i] - poly[j]).norm());
  return d;
}

bool on_boundary(const Polygon& poly, const Point& p, double tol) {
  const std::size_t n = poly.size();
  for (std::size_t i = 0; i < n; ++i)
    if (point_segment_distance(p, poly[i], poly[(i + 1) % n]) <= tol) return true;
  return false;
}

bool strictly_inside(const Polygon& poly, const Point& p, double tol) {
  if (on_boundary(poly, p, tol)) return false;
  bool in = false;
  const std::size_t n = poly.size();
  for (std::size_t i = 0, j = n - 1; i < n; j = i++) {
    const Point& a = poly[i];
    const Point& b = poly[j];
    if ((a.y() > p.y()) != (b.y() > p.y())) {
      const double x = a.x() + (p.y() - a.y()) * (b.x() - a.x()) / (b.y() - a.y());
      if (p.x() < x) in = !in;
    }
  }
  return in;
}

bool segments_intersect(const Point& a, const Point& b, const Point& c, const Point& d) {
  const double scale = std::max({a.cwiseAbs().maxCoeff(), b.cwiseAbs().maxCoeff(),
                                 c.cwiseAbs().maxCoeff(), d.cwiseAbs().maxCoeff(), 1.0});
  const double tol = 1e-14 * scale * scale;
  const int d1 = sign_tol(cross(c, d, a), tol);
  const int d2 = sign_tol(cross(c, d, b), tol);
  const int d3 = sign_tol(cross(a, b, c), tol);
  const int d4 = sign_tol(cross(a, b, d), tol);
  if (d1 * d2 < 0 && d3 * d4 < 0) return true;
  const double t = 1e-12 * scale;
  if (d1 == 0 && within_segment_box(c, d, a, t)) return true;
  if (d2 == 0 && within_segment_box(c, d, b, t)) return true;
  if (d3 == 0 && within_segment_box(a, b, c, t)) return true;
  if (d4 == 0 && within_segment_box(a, b, d, t)) return true;
  return false;
}

bool is_simple(const Polygon& poly) {
  const std::size_t n = poly.size();
  if (n < 3) return false;
  for (std::size_t i = 0; i < n; ++i)
    if ((poly[i] - poly[(i + 1) % n]).norm() == 0.0) return false;
  if (polygon_area(poly) == 0.0) return false;

  // Bucket edges on a uniform grid so that only nearby pairs are tested.
  const Box bb = bounding_box(poly);
  const double w = std::max(bb.sizes().maxCoeff(), 1e-300);
  const int g = std::max(1, static_cast<int>(std::sqrt(static_cast<double>(n))));
  const double cell = w / g;
  std::unordered_map<long long, std::vector<std::size_t>> buckets;
  auto key = [&](int ix, int iy) { return static_cast<long long>(ix) * 1000003LL + iy; };
  auto cell_of = [&](double v, double lo) {
    return std::clamp(static_cast<int>((v - lo) / cell), 0, g);
  };
  for (std::size_t i = 0; i < n; ++i) {
    const Point& a = poly[i];
    const Point& b = poly[(i + 1) % n];
    const int x0 = cell_of(std::min(a.x(), b.x()), bb.min().x());
    const int x1 = cell_of(std::max(a.x(), b.x()), bb.min().x());
    const int y0 = cell_of(std::min(a.y(), b.y()), bb.min().y());
    const int y1 = cell_of(std::max(a.y(), b.y()), bb.min().y());
    for (int ix = x0; ix <= x1; ++ix)
      for (int iy = y0; iy <= y1; ++iy) buckets[key(ix, iy)].push_back(i);
  }
  for (const auto& [k, edges] : buckets) {
    for (std::size_t u = 0; u < edges.size(); ++u) {
      for (std::size_t v = u + 1; v < edges.size(); ++v) {
        const std::size_t i = std::min(edges[u], edges[v]);
        const std::size_t j = std::max(edges[u], edges[v]);
        const Point& a = poly[i];
        const Point& b = poly[(i + 1) % n];
        const Point& c = poly[j];
        const Point& d = poly[(j + 1) % n];
        const bool adjacent = (j == i + 1) || (i == 0 && j == n - 1);
        if (!adjacent) {
          if (segments_intersect(a, b, c, d)) return false;
          continue;
        }
        // Adjacent edges share one vertex; reject a fold-back onto each other.
        const Point& shared = (j == i + 1) ? b : a;
        const Point& p = (j == i + 1) ? a : b;
        const Point& q = (j == i + 1) ? d : c;
        const Point u1 = p - shared;
        const Point u2 = q - shared;
        if (std::abs(u1.x() * u2.y() - u1.y() * u2.x()) <= 1e-14 * u1.norm() * u2.norm() &&
            u1.dot(u2) > 0)
          return false;
      }
    }
  }
  return true;
}

double clipped_area(const Polygon& poly, const Box& box) {
  Polygon out = poly;
  auto clip = [&out](auto inside, auto intersect) {
    Polygon in = std::move(out);
    out.clear();
    const std::size_t n = in.size();
    for (std::size_t i = 0; i < n; ++i) {
      const Point& cur = in[i];
      const Point& prev = in[(i + n - 1) % n];
      const bool ci = inside(cur);
      const bool pi = inside(prev);
      if (ci) {
        if (!pi) out.push_back(intersect(prev, cur));
        out.push_back(cur);
      } else if (pi) {
        out.push_back(intersect(prev, cur));
      }
    }
  };
  for (int axis = 0; axis < 2; ++axis) {
    for (int side = 0; side < 2; ++side) {
      if (out.empty()) return 0.0;
      const double c = side == 0 ? box.min()[axis] : box.max()[axis];
      auto inside = [=](const Point& p) { return side == 0 ? p[axis] >= c : p[axis] <= c; };
      auto intersect = [=](const Point& p, const Point& q) {
        const double t = (c - p[axis]) / (q[axis] - p[axis]);
        Point r = p + t * (q - p);
        r[axis] = c;
        return r;
      };
      clip(inside, intersect);
    }
  }
  return out.size() < 3 ? 0.0 : polygon_area(out);
}

bool is_axis_rectangle(const Polygon& poly) {
  if (poly.size() != 4) return false;
  const Box b = bounding_box(poly);
  for (const auto& p : poly) {
    const bool xcorner = p.x() == b.min().x() || p.x() == b.max().x();
    const bool ycorner = p.y() == b.min().y() || p.y() == b.max().y();
    if (!xcorner || !ycorner) return false;
  }
  return std::abs(polygon_area(poly) - b.volume()) <= 1e-14 * b.volume();
}

Polygon rectangle(const Point& lo, const Point& hi) {
  return {lo, Point(hi.x(), lo.y()), hi, Point(lo.x(), hi.y())};
}

Polygon quadratic_koch_island(const Point& lo, double side, int level) {
  Polygon poly = rectangle(lo, lo + Point(side, side));
  for (int l = 0; l < level; ++l) {
    Polygon next;
    next.reserve(poly.size() * 8);
    const std::size_t n = poly.size();
    for (std::size_t i = 0; i < n; ++i) {
      const Point p = poly[i];
      const Point d = (poly[(i + 1) % n] - p) / 4.0;
      const Point nrm(-d.y(), d.x());
      // Eight quarter-length moves: forward, left, forward, right, right, forward, left, forward.
      const Point steps[7] = {d, nrm, d, -nrm, -nrm, d, nrm};
      Point cur = p;
      next.push_back(cur);
      for (const auto& s : steps) {
        cur += s;
        next.push_back(cur);
      }
    }
    poly = std::move(next);
  }
  return poly;
}

}  // namespace rfim
