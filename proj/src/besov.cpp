#include "rfim/besov.hpp"

#include <Eigen/Sparse>
#include <algorithm>
#include <cmath>
#include <json.hpp>
#include <ostream>
#include <unordered_set>

#include "rfim/quadrature.hpp"
#include "rfim/stats.hpp"

namespace rfim {

namespace {

Index ifloor(double x) { return static_cast<Index>(std::floor(x)); }
Index iceil(double x) { return static_cast<Index>(std::ceil(x)); }
Index span_of(const DyadicTable& u) { return static_cast<Index>(std::lround(u.support())); }

struct Window {
  Index lo = 0, count = 0;
};

// Translates k with supp u(2ⁿ· - k) = [k, k+L]/2ⁿ meeting [a, b].
Window window(double a, double b, int n, Index L) {
  const double s = std::ldexp(1.0, n);
  const Index lo = iceil(s * a - static_cast<double>(L)), hi = ifloor(s * b);
  return {lo, std::max<Index>(hi - lo + 1, 0)};
}

// A(k - w.lo, i) = ⟨μ_i, 2^{n/2} u(2ⁿ· - k)⟩.
MatrixX pair_axis(const Axis& ax, const DyadicTable& u, int n, const Window& w) {
  const Index L = span_of(u);
  const double s = std::ldexp(1.0, n), half = std::ldexp(1.0, -n) * std::sqrt(s);  // 2^{-n/2}
  MatrixX A = MatrixX::Zero(w.count, ax.count());
  auto clamp_range = [&](Index k0, Index k1, auto&& f) {
    for (Index k = std::max(k0, w.lo); k <= std::min(k1, w.lo + w.count - 1); ++k) f(k);
  };
  switch (ax.kind) {
    case Axis::Kind::intervals:
      for (Index i = 0; i + 1 < ax.nodes.size(); ++i) {
        const double e0 = s * ax.nodes(i), e1 = s * ax.nodes(i + 1);
        clamp_range(ifloor(e0) - L, iceil(e1), [&](Index k) {
          const double kd = static_cast<double>(k);
          A(k - w.lo, i) = half * (u.antiderivative(e1 - kd) - u.antiderivative(e0 - kd));
        });
      }
      break;
    case Axis::Kind::points:
      for (Index i = 0; i < ax.nodes.size(); ++i) {
        const double p = s * ax.nodes(i);
        clamp_range(ifloor(p) - L, ifloor(p), [&](Index k) { A(k - w.lo, i) = std::sqrt(s) * u(p - static_cast<double>(k)); });
      }
      break;
    case Axis::Kind::function: {
      const int Q = std::max(0, std::min(u.depth() - 1, std::max(4, 20 - n)));
      const Index per = Index(1) << Q;
      VectorX cells(L * per);
      for (Index j = 0; j < cells.size(); ++j) cells(j) = u.cell_integral(Q, j);
      const double sc = std::ldexp(1.0, n + Q);
      const Index c0 = ifloor(ax.lo * sc), c1 = iceil(ax.hi * sc);
      VectorX f(c1 - c0);
      for (Index c = c0; c < c1; ++c) f(c - c0) = ax.fn((static_cast<double>(c) + 0.5) / sc);
      for (Index k = w.lo; k < w.lo + w.count; ++k) {
        const Index a = std::max(k * per, c0), b = std::min((k + L) * per, c1);
        if (a >= b) continue;
        A(k - w.lo, 0) = half * f.segment(a - c0, b - a).dot(cells.segment(a - k * per, b - a));
      }
      break;
    }
  }
  return A;
}

// D(k - coarse.lo, m - fine.lo) = filter(m - 2k).
MatrixX filter_matrix(const VectorX& filt, const Window& coarse, const Window& fine) {
  MatrixX D = MatrixX::Zero(coarse.count, fine.count);
  for (Index k = coarse.lo; k < coarse.lo + coarse.count; ++k)
    for (Index j = 0; j < filt.size(); ++j) {
      const Index m = 2 * k + j;
      if (m >= fine.lo && m < fine.lo + fine.count) D(k - coarse.lo, m - fine.lo) = filt(j);
    }
  return D;
}

using SparseRow = Eigen::SparseMatrix<double, Eigen::RowMajor>;

// E(p, k) = 2^{n/2} u((p - k·pts)/pts) on the grid y = (k_lo + p/pts) 2^{-n}.
SparseRow evaluation_matrix(const DyadicTable& u, int n, Index K, int pts) {
  const Index L = span_of(u);
  const Index P = (K + L) * pts + 1;
  const Index stride = (Index(1) << u.depth()) / pts;
  const double s = std::sqrt(std::ldexp(1.0, n));
  std::vector<Eigen::Triplet<double>> trip;
  for (Index p = 0; p < P; ++p)
    for (Index k = std::max<Index>(0, (p - L * pts + pts - 1) / pts); k < K && k * pts <= p; ++k) {
      const double v = u.value_at((p - k * pts) * stride);
      if (v != 0.0) trip.emplace_back(p, k, s * v);
    }
  SparseRow E(P, K);
  E.setFromTriplets(trip.begin(), trip.end());
  return E;
}

struct Atom {
  Point p;
  double m;
};

std::vector<Atom> atoms_of(const GridField& f) {
  auto axis_nodes = [](const Axis& ax, std::vector<double>& pos, std::vector<double>& wt, std::vector<Index>& owner) {
    switch (ax.kind) {
      case Axis::Kind::intervals: {
        const QuadratureRule q = gauss_legendre(3);
        for (Index i = 0; i + 1 < ax.nodes.size(); ++i) {
          const double c = 0.5 * (ax.nodes(i) + ax.nodes(i + 1)), r = 0.5 * (ax.nodes(i + 1) - ax.nodes(i));
          for (Index j = 0; j < q.nodes.size(); ++j) {
            pos.push_back(c + r * q.nodes(j));
            wt.push_back(r * q.weights(j));
            owner.push_back(i);
          }
        }
        break;
      }
      case Axis::Kind::points:
        for (Index i = 0; i < ax.nodes.size(); ++i) {
          pos.push_back(ax.nodes(i));
          wt.push_back(1.0);
          owner.push_back(i);
        }
        break;
      case Axis::Kind::function: {
        const int M = 512;
        const double h = (ax.hi - ax.lo) / M;
        for (int j = 0; j < M; ++j) {
          const double x = ax.lo + (j + 0.5) * h;
          pos.push_back(x);
          wt.push_back(h * ax.fn(x));
          owner.push_back(0);
        }
        break;
      }
    }
  };
  std::vector<double> px, wx, py, wy;
  std::vector<Index> ox, oy;
  axis_nodes(f.x, px, wx, ox);
  axis_nodes(f.y, py, wy, oy);
  std::vector<Atom> out;
  for (std::size_t j = 0; j < py.size(); ++j)
    for (std::size_t i = 0; i < px.size(); ++i) {
      const double v = f.values(oy[j], ox[i]);
      if (v != 0.0 && wx[i] != 0.0 && wy[j] != 0.0) out.push_back({Point(px[i], py[j]), v * wx[i] * wy[j]});
    }
  return out;
}

void add_window(MatrixX& into, const Window& wx, const Window& wy, const MatrixX& m, const Window& mx,
                const Window& my) {
  const Index x0 = std::max(wx.lo, mx.lo), x1 = std::min(wx.lo + wx.count, mx.lo + mx.count);
  const Index y0 = std::max(wy.lo, my.lo), y1 = std::min(wy.lo + wy.count, my.lo + my.count);
  if (x0 >= x1 || y0 >= y1) return;
  into.block(y0 - wy.lo, x0 - wx.lo, y1 - y0, x1 - x0) += m.block(y0 - my.lo, x0 - mx.lo, y1 - y0, x1 - x0);
}

}  // namespace

Axis Axis::intervals(VectorX edges) {
  require(edges.size() >= 2, Errc::InvalidArgument, "interval axis needs two or more edges");
  for (Index i = 0; i + 1 < edges.size(); ++i)
    require(edges(i) < edges(i + 1), Errc::InvalidArgument, "interval edges must increase");
  Axis a;
  a.kind = Kind::intervals;
  a.nodes = std::move(edges);
  return a;
}

Axis Axis::points(VectorX pos) {
  require(pos.size() >= 1, Errc::InvalidArgument, "point axis needs a point");
  Axis a;
  a.kind = Kind::points;
  a.nodes = std::move(pos);
  return a;
}

Axis Axis::function(std::function<double(double)> f, double lo, double hi) {
  require(lo < hi, Errc::InvalidArgument, "function support must be non-empty");
  Axis a;
  a.kind = Kind::function;
  a.fn = std::move(f);
  a.lo = lo;
  a.hi = hi;
  return a;
}

Index Axis::count() const {
  switch (kind) {
    case Kind::intervals: return nodes.size() - 1;
    case Kind::points: return nodes.size();
    case Kind::function: return 1;
  }
  return 0;
}

double Axis::min() const { return kind == Kind::function ? lo : nodes.minCoeff(); }
double Axis::max() const { return kind == Kind::function ? hi : nodes.maxCoeff(); }

Box GridField::support() const { return Box(Point(x.min(), y.min()), Point(x.max(), y.max())); }

GridField grid_field(const MagnetisationField& m) {
  const Lattice& lat = *m.lattice;
  const double a = lat.mesh;
  const int W = lat.width(), H = lat.height();
  GridField f;
  if (m.rep == Representation::atomic) {
    f.x = Axis::points(VectorX::LinSpaced(W, a * lat.lo[0], a * lat.hi[0]));
    f.y = Axis::points(VectorX::LinSpaced(H, a * lat.lo[1], a * lat.hi[1]));
  } else {
    f.x = Axis::intervals(VectorX::LinSpaced(W + 1, a * (lat.lo[0] - 0.5), a * (lat.hi[0] + 0.5)));
    f.y = Axis::intervals(VectorX::LinSpaced(H + 1, a * (lat.lo[1] - 0.5), a * (lat.hi[1] + 0.5)));
  }
  f.values = MatrixX::Zero(H, W);
  const VectorX w = m.weights();
  for (Index s = 0; s < lat.size(); ++s)
    f.values(lat.coords[s][1] - lat.lo[1], lat.coords[s][0] - lat.lo[0]) = w(s);
  return f;
}

GridField box_indicator(const Point& lo, const Point& hi) {
  GridField f;
  f.x = Axis::intervals((VectorX(2) << lo.x(), hi.x()).finished());
  f.y = Axis::intervals((VectorX(2) << lo.y(), hi.y()).finished());
  f.values = MatrixX::Ones(1, 1);
  return f;
}

GridField separable_field(std::function<double(double)> f1, std::function<double(double)> f2, const Box& box) {
  GridField f;
  f.x = Axis::function(std::move(f1), box.min().x(), box.max().x());
  f.y = Axis::function(std::move(f2), box.min().y(), box.max().y());
  f.values = MatrixX::Ones(1, 1);
  return f;
}

GridField quadrature_field(const Field2D& fn, const Box& box, int panels, int order) {
  const QuadratureRule q = gauss_legendre(order);
  auto nodes = [&](double a, double b, VectorX& pos, VectorX& wt) {
    pos.resize(panels * order);
    wt.resize(panels * order);
    const double h = (b - a) / panels;
    for (int p = 0; p < panels; ++p)
      for (int j = 0; j < order; ++j) {
        pos(p * order + j) = a + h * (p + 0.5 + 0.5 * q.nodes(j));
        wt(p * order + j) = 0.5 * h * q.weights(j);
      }
  };
  VectorX px, wx, py, wy;
  nodes(box.min().x(), box.max().x(), px, wx);
  nodes(box.min().y(), box.max().y(), py, wy);
  GridField f;
  f.x = Axis::points(px);
  f.y = Axis::points(py);
  f.values.resize(py.size(), px.size());
  for (Index j = 0; j < py.size(); ++j)
    for (Index i = 0; i < px.size(); ++i) f.values(j, i) = fn(Point(px(i), py(j))) * wx(i) * wy(j);
  return f;
}

LevelCoefficients mra_project(const GridField& f, int n, const WaveletBasis& b, bool scaling, bool wavelets) {
  require(f.values.rows() == f.y.count() && f.values.cols() == f.x.count(), Errc::InvalidArgument,
          "field values do not match its axes");
  const Index L = b.span();
  const Window wx = window(f.x.min(), f.x.max(), n, L), wy = window(f.y.min(), f.y.max(), n, L);
  LevelCoefficients lc;
  lc.level = n;
  lc.k1_lo = wx.lo;
  lc.k2_lo = wy.lo;
  const MatrixX ax_phi = pair_axis(f.x, b.phi, n, wx), ay_phi = pair_axis(f.y, b.phi, n, wy);
  const MatrixX vx_phi = f.values * ax_phi.transpose();
  if (scaling) lc.c[0] = ay_phi * vx_phi;
  if (wavelets) {
    const MatrixX ax_psi = pair_axis(f.x, b.psi, n, wx), ay_psi = pair_axis(f.y, b.psi, n, wy);
    const MatrixX vx_psi = f.values * ax_psi.transpose();
    lc.c[1] = ay_psi * vx_phi;
    lc.c[2] = ay_phi * vx_psi;
    lc.c[3] = ay_psi * vx_psi;
  }
  return lc;
}

LevelCoefficients decompose(const LevelCoefficients& fine, const WaveletBasis& b) {
  const MatrixX& s = fine.c[0];
  require(s.size() > 0, Errc::InvalidArgument, "decomposition needs scaling coefficients");
  const Index L = b.span();
  const Window fx{fine.k1_lo, s.cols()}, fy{fine.k2_lo, s.rows()};
  auto coarse = [&](const Window& w) {
    const Index lo = iceil(static_cast<double>(w.lo - L) / 2.0), hi = ifloor(static_cast<double>(w.lo + w.count - 1) / 2.0);
    return Window{lo, hi - lo + 1};
  };
  const Window cx = coarse(fx), cy = coarse(fy);
  const MatrixX hx = filter_matrix(b.h, cx, fx), gx = filter_matrix(b.g, cx, fx);
  const MatrixX hy = filter_matrix(b.h, cy, fy), gy = filter_matrix(b.g, cy, fy);
  LevelCoefficients out;
  out.level = fine.level - 1;
  out.k1_lo = cx.lo;
  out.k2_lo = cy.lo;
  const MatrixX sh = s * hx.transpose(), sg = s * gx.transpose();
  out.c[0] = hy * sh;
  out.c[1] = gy * sh;
  out.c[2] = hy * sg;
  out.c[3] = gy * sg;
  return out;
}

LevelCoefficients reconstruct(const LevelCoefficients& coarse, const WaveletBasis& b) {
  const Index L = b.span();
  const Window cx{coarse.k1_lo, coarse.cols()}, cy{coarse.k2_lo, coarse.rows()};
  const Window fx{2 * cx.lo, 2 * cx.count + L - 1}, fy{2 * cy.lo, 2 * cy.count + L - 1};
  const MatrixX hx = filter_matrix(b.h, cx, fx), gx = filter_matrix(b.g, cx, fx);
  const MatrixX hy = filter_matrix(b.h, cy, fy), gy = filter_matrix(b.g, cy, fy);
  LevelCoefficients out;
  out.level = coarse.level + 1;
  out.k1_lo = fx.lo;
  out.k2_lo = fy.lo;
  out.c[0] = MatrixX::Zero(fy.count, fx.count);
  const std::array<const MatrixX*, 4> yf = {&hy, &gy, &hy, &gy}, xf = {&hx, &hx, &gx, &gx};
  for (int t = 0; t < 4; ++t)
    if (coarse.c[t].size()) out.c[0] += yf[t]->transpose() * coarse.c[t] * *xf[t];
  return out;
}

double level_sup_norm(const LevelCoefficients& lc, const WaveletBasis& b, int pts, bool scaling) {
  require(pts >= 1 && (pts & (pts - 1)) == 0 && pts <= (1 << b.phi.depth()), Errc::InvalidArgument,
          "sampling points per translate must be a power of two within the table depth");
  const Index K2 = lc.rows(), K1 = lc.cols();
  if (K1 == 0 || K2 == 0) return 0.0;
  const int n = lc.level;
  const SparseRow ex_phi = evaluation_matrix(b.phi, n, K1, pts), ey_phi = evaluation_matrix(b.phi, n, K2, pts);
  SparseRow ex_psi, ey_psi;
  if (!scaling) {
    ex_psi = evaluation_matrix(b.psi, n, K1, pts);
    ey_psi = evaluation_matrix(b.psi, n, K2, pts);
  }
  std::vector<int> types = scaling ? std::vector<int>{0} : std::vector<int>{1, 2, 3};
  std::vector<MatrixX> right;  // C_t E_x^T, K2 × P1
  std::vector<const SparseRow*> left;
  for (int t : types) {
    const SparseRow& ex = (t == 2 || t == 3) ? ex_psi : ex_phi;
    const SparseRow& ey = (t == 1 || t == 3) ? ey_psi : ey_phi;
    right.push_back((ex * lc.c[t].transpose()).transpose());
    left.push_back(&ey);
  }
  const Index P2 = ey_phi.rows(), P1 = ex_phi.rows();
  double sup = 0.0;
  const Index chunk = 256;
  MatrixX w(chunk, P1);
  for (Index r0 = 0; r0 < P2; r0 += chunk) {
    const Index r = std::min(chunk, P2 - r0);
    w.topRows(r).setZero();
    for (std::size_t t = 0; t < types.size(); ++t) w.topRows(r) += left[t]->middleRows(r0, r) * right[t];
    sup = std::max(sup, w.topRows(r).cwiseAbs().maxCoeff());
  }
  return sup;
}

BesovNorm besov_norm_from_coefficients(const LevelCoefficients& level0, const std::vector<LevelCoefficients>& levels,
                                       double alpha, const WaveletBasis& b, int pts) {
  if (b.regularity < required_regularity(alpha))
    fail(Errc::InsufficientRegularity, b.name() + " lacks the regularity needed for this alpha");
  BesovNorm out;
  out.alpha = alpha;
  out.points_per_translate = pts;
  out.scaling_sup = level0.c[0].size() ? level_sup_norm(level0, b, pts, true) : 0.0;
  double best = -1.0;
  for (const auto& lc : levels) {
    const double t = std::pow(2.0, alpha * lc.level) * level_sup_norm(lc, b, pts, false);
    out.level_term.push_back(t);
    if (t > best) {
      best = t;
      out.argsup_level = lc.level;
    }
  }
  out.value = out.scaling_sup + std::max(best, 0.0);
  return out;
}

BesovNorm besov_holder_norm(const GridField& f, double alpha, int n_max, const WaveletBasis& b, int pts) {
  require(alpha < 0, Errc::InvalidArgument, "alpha must be negative");
  require(n_max >= 1, Errc::InvalidArgument, "n_max must be at least 1");
  if (b.regularity < required_regularity(alpha))
    fail(Errc::InsufficientRegularity, b.name() + " lacks the regularity needed for this alpha");
  std::vector<LevelCoefficients> levels;
  for (int n = 1; n <= n_max; ++n) levels.push_back(mra_project(f, n, b, false, true));
  return besov_norm_from_coefficients(mra_project(f, 0, b, true, false), levels, alpha, b, pts);
}

std::string besov_norm_json(const BesovNorm& n) {
  nlohmann::json j;
  j["value"] = n.value;
  j["alpha"] = n.alpha;
  j["scaling_sup"] = n.scaling_sup;
  j["level_term"] = n.level_term;
  j["argsup_level"] = n.argsup_level;
  j["points_per_translate"] = n.points_per_translate;
  return j.dump(2);
}

void write_coefficients_csv(std::ostream& os, const LevelCoefficients& lc) {
  os.precision(17);
  const double s = std::ldexp(1.0, -lc.level);
  for (int t = 0; t < 4; ++t) {
    const MatrixX& m = lc.c[t];
    for (Index r = 0; r < m.rows(); ++r)
      for (Index c = 0; c < m.cols(); ++c)
        if (m(r, c) != 0.0)
          os << lc.level << ',' << t << ',' << s * static_cast<double>(lc.k1_lo + c) << ','
             << s * static_cast<double>(lc.k2_lo + r) << ',' << m(r, c) << '\n';
  }
}

std::vector<Field2D> bump_library() {
  auto bump = [](double r2) { return r2 < 1.0 ? std::exp(1.0 - 1.0 / (1.0 - r2)) : 0.0; };
  // sup_r r·bump(r²)
  double smax = 0.0;
  for (int i = 1; i < 20000; ++i) {
    const double r = i / 20000.0;
    smax = std::max(smax, r * bump(r * r));
  }
  return {
      [bump](const Point& y) { return bump(y.squaredNorm()); },
      [bump, smax](const Point& y) { return y.x() * bump(y.squaredNorm()) / smax; },
      [bump](const Point& y) { return (1.0 - 2.0 * y.squaredNorm()) * bump(y.squaredNorm()); },
  };
}

double test_function_norm(const GridField& f, double alpha, int j_max, const std::vector<Field2D>& library) {
  const std::vector<Atom> atoms = atoms_of(f);
  if (atoms.empty()) return 0.0;
  const Box box = f.support();
  double best = 0.0;
  for (int j = 0; j <= j_max; ++j) {
    const double theta = std::ldexp(1.0, -j), step = theta / 2;
    const Index i0 = ifloor((box.min().x() - theta) / step), i1 = iceil((box.max().x() + theta) / step);
    const Index j0 = ifloor((box.min().y() - theta) / step), j1 = iceil((box.max().y() + theta) / step);
    const Index nx = i1 - i0 + 1, ny = j1 - j0 + 1;
    std::vector<MatrixX> acc(library.size(), MatrixX::Zero(ny, nx));
    for (const Atom& at : atoms) {
      const Index a0 = std::max(i0, iceil((at.p.x() - theta) / step)), a1 = std::min(i1, ifloor((at.p.x() + theta) / step));
      const Index b0 = std::max(j0, iceil((at.p.y() - theta) / step)), b1 = std::min(j1, ifloor((at.p.y() + theta) / step));
      for (Index q = b0; q <= b1; ++q)
        for (Index p = a0; p <= a1; ++p) {
          const Point u = (at.p - Point(step * static_cast<double>(p), step * static_cast<double>(q))) / theta;
          if (u.squaredNorm() >= 1.0) continue;
          for (std::size_t g = 0; g < library.size(); ++g) acc[g](q - j0, p - i0) += at.m * library[g](u);
        }
    }
    const double w = std::pow(theta, -alpha - 2.0);
    for (const auto& m : acc) best = std::max(best, w * m.cwiseAbs().maxCoeff());
  }
  return best;
}

Region Region::from_box(const Point& lo, const Point& hi) {
  Region r;
  r.rects.emplace_back(lo, hi);
  r.outline = rectangle(lo, hi);
  return r;
}

Region Region::from_polygon(const Polygon& p, int pixel_depth) {
  require(p.size() >= 3 && is_simple(p), Errc::InvalidPolygon, "region outline must be a simple polygon");
  Region r;
  r.outline = p;
  const std::size_t n = p.size();
  bool rectilinear = true;
  for (std::size_t i = 0; i < n && rectilinear; ++i) {
    const Point d = p[(i + 1) % n] - p[i];
    rectilinear = d.x() == 0.0 || d.y() == 0.0;
  }
  if (rectilinear) {
    std::vector<double> ys;
    for (const Point& v : p) ys.push_back(v.y());
    std::sort(ys.begin(), ys.end());
    ys.erase(std::unique(ys.begin(), ys.end()), ys.end());
    std::vector<double> xs;
    for (std::size_t s = 0; s + 1 < ys.size(); ++s) {
      const double ym = 0.5 * (ys[s] + ys[s + 1]);
      xs.clear();
      for (std::size_t i = 0; i < n; ++i) {
        const Point& a = p[i];
        const Point& b = p[(i + 1) % n];
        if (a.x() == b.x() && std::min(a.y(), b.y()) < ym && std::max(a.y(), b.y()) > ym) xs.push_back(a.x());
      }
      std::sort(xs.begin(), xs.end());
      for (std::size_t k = 0; k + 1 < xs.size(); k += 2)
        r.rects.emplace_back(Point(xs[k], ys[s]), Point(xs[k + 1], ys[s + 1]));
    }
    return r;
  }
  const Box bb = bounding_box(p);
  const double h = std::ldexp(1.0, -pixel_depth);
  const Index i0 = ifloor(bb.min().x() / h), i1 = iceil(bb.max().x() / h);
  const Index j0 = ifloor(bb.min().y() / h), j1 = iceil(bb.max().y() / h);
  for (Index j = j0; j < j1; ++j) {
    Index run = -1;
    for (Index i = i0; i <= i1; ++i) {
      const bool in = i < i1 && strictly_inside(p, Point((i + 0.5) * h, (j + 0.5) * h), 0.0);
      if (in && run < 0) run = i;
      if (!in && run >= 0) {
        r.rects.emplace_back(Point(run * h, j * h), Point(i * h, (j + 1) * h));
        run = -1;
      }
    }
  }
  const BoxDimension bd = box_dimension(p, {pixel_depth});
  r.pixel_error_area = bd.counts[0] * h * h;
  return r;
}

double Region::area() const {
  double a = 0;
  for (const Box& b : rects) a += b.volume();
  return a;
}

BoxDimension box_dimension(const Polygon& pts, const std::vector<int>& levels, bool closed) {
  require(!pts.empty(), Errc::InvalidArgument, "box dimension of an empty set");
  require(!levels.empty(), Errc::InvalidArgument, "box dimension needs levels");
  BoxDimension out;
  out.levels = levels;
  std::vector<double> xs, ys;
  for (int n : levels) {
    const double eps = std::ldexp(1.0, -n);
    std::unordered_set<std::uint64_t> boxes;
    auto mark = [&](const Point& q) {
      const auto bx = static_cast<std::int64_t>(std::floor(q.x() / eps)), by = static_cast<std::int64_t>(std::floor(q.y() / eps));
      boxes.insert((static_cast<std::uint64_t>(bx) << 32) ^ static_cast<std::uint32_t>(by));
    };
    const std::size_t m = pts.size();
    const std::size_t segs = (closed && m > 2) ? m : (m > 1 ? m - 1 : 0);
    if (segs == 0) mark(pts[0]);
    for (std::size_t i = 0; i < segs; ++i) {
      const Point& a = pts[i];
      const Point& b = pts[(i + 1) % m];
      const Index steps = std::max<Index>(1, iceil(4.0 * (b - a).norm() / eps));
      for (Index s = 0; s <= steps; ++s) mark(a + (b - a) * (static_cast<double>(s) / static_cast<double>(steps)));
    }
    out.counts.push_back(static_cast<double>(boxes.size()));
    xs.push_back(n * std::log(2.0));
    ys.push_back(std::log(static_cast<double>(boxes.size())));
  }
  out.dimension = levels.size() >= 2 ? fit_line(xs, ys).slope : 0.0;
  return out;
}

BoxDimension box_dimension(const Region& region, const std::vector<int>& levels) {
  require(!region.outline.empty(), Errc::InvalidArgument, "region has no outline");
  return box_dimension(region.outline, levels, true);
}

SubdomainIntegral integrate_over_subdomain(const GridField& f, const Region& B, double alpha, const WaveletBasis& b,
                                           int n_cut, const SubdomainOptions& opt) {
  require(alpha > -1 && alpha < 0, Errc::InvalidArgument, "alpha must lie in (-1, 0)");
  require(n_cut >= opt.n0, Errc::InvalidArgument, "n_cut below n0");
  SubdomainIntegral out;
  std::vector<int> levels;
  for (int n = 2; n <= std::max(3, n_cut); ++n) levels.push_back(n);
  out.dimension = opt.dimension ? *opt.dimension : box_dimension(B, levels).dimension;
  if (out.dimension >= 2 + alpha)
    fail(Errc::DimensionTooLarge, "boundary dimension " + std::to_string(out.dimension) + " is not below 2+alpha");

  auto region_level = [&](const LevelCoefficients& field, bool scaling) {
    LevelCoefficients g;
    g.level = field.level;
    g.k1_lo = field.k1_lo;
    g.k2_lo = field.k2_lo;
    const Window wx{field.k1_lo, field.cols()}, wy{field.k2_lo, field.rows()};
    for (int t = scaling ? 0 : 1; t <= (scaling ? 0 : 3); ++t) g.c[t] = MatrixX::Zero(wy.count, wx.count);
    for (const Box& r : B.rects) {
      const LevelCoefficients lr = mra_project(box_indicator(r.min(), r.max()), g.level, b, scaling, !scaling);
      const Window rx{lr.k1_lo, lr.cols()}, ry{lr.k2_lo, lr.rows()};
      for (int t = 0; t < 4; ++t)
        if (g.c[t].size()) add_window(g.c[t], wx, wy, lr.c[t], rx, ry);
    }
    return g;
  };
  auto dot = [](const LevelCoefficients& a, const LevelCoefficients& c, int t) {
    return a.c[t].size() ? a.c[t].cwiseProduct(c.c[t]).sum() : 0.0;
  };

  const LevelCoefficients s0 = mra_project(f, opt.n0, b, true, false);
  out.level_contribution.push_back(dot(s0, region_level(s0, true), 0));
  double value = out.level_contribution.back();
  std::vector<LevelCoefficients> norm_levels;
  for (int n = opt.n0; n <= n_cut; ++n) {
    const LevelCoefficients fw = mra_project(f, n, b, false, true);
    const LevelCoefficients gw = region_level(fw, false);
    const double c = dot(fw, gw, 1) + dot(fw, gw, 2) + dot(fw, gw, 3);
    out.level_contribution.push_back(c);
    value += c;
    if (!opt.field_norm && n >= 1 && n <= opt.norm_levels) norm_levels.push_back(fw);
  }
  out.value = value;
  if (opt.field_norm) {
    out.field_norm = *opt.field_norm;
  } else {
    for (int n = 1; n < std::min(opt.n0, opt.norm_levels + 1); ++n) norm_levels.push_back(mra_project(f, n, b, false, true));
    out.field_norm = besov_norm_from_coefficients(mra_project(f, 0, b, true, false), norm_levels, alpha, b).value;
  }
  const double nc = box_dimension(B, {n_cut}).counts[0];
  const double d = std::max(out.dimension, 1.0);
  const double ratio = std::pow(2.0, d - 2.0 - alpha);
  const double l1 = std::max(b.phi.l1() * b.psi.l1(), b.psi.l1() * b.psi.l1());
  const double per_box = std::pow(static_cast<double>(b.span() + 1), 2);
  out.tail_bound = 3.0 * per_box * nc * out.field_norm * l1 * l1 * std::pow(2.0, -(2.0 + alpha) * n_cut) * ratio /
                   (1.0 - ratio);
  if (B.pixel_error_area > 0) {
    double fmax = 0;
    if (f.x.kind == Axis::Kind::intervals && f.y.kind == Axis::Kind::intervals) fmax = f.values.cwiseAbs().maxCoeff();
    out.tail_bound += fmax * B.pixel_error_area;
  }
  return out;
}

}  // namespace rfim
