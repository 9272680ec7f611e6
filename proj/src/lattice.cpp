#include "rfim/lattice.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <ostream>

namespace rfim {

DomainSpec DomainSpec::unit_square(double a) { return {rectangle(Point(0, 0), Point(1, 1)), a}; }

DomainSpec DomainSpec::strip(int width, int height, double a) {
  return {rectangle(Point(0, 0), Point((width + 1) * a, (height + 1) * a)), a};
}

Box Lattice::cell(Index i) const {
  const Point h(mesh / 2, mesh / 2);
  return Box(sites[i] - h, sites[i] + h);
}

int Lattice::site_at(int i, int j) const {
  if (i < lo[0] || i > hi[0] || j < lo[1] || j > hi[1]) return -1;
  return index_grid_[static_cast<std::size_t>(j - lo[1]) * width() + (i - lo[0])];
}

Lattice discretize_domain(const DomainSpec& spec) {
  require(spec.mesh > 0 && std::isfinite(spec.mesh), Errc::InvalidArgument, "mesh must be positive");
  require(is_simple(spec.shape), Errc::InvalidPolygon, "domain polygon is not simple");
  const double a = spec.mesh;
  const Box bb = bounding_box(spec.shape);
  const double tol = 1e-10 * std::max(1.0, bb.sizes().maxCoeff());

  Lattice lat;
  lat.domain = spec;
  lat.mesh = a;
  const int i0 = static_cast<int>(std::ceil(bb.min().x() / a - 1e-9));
  const int i1 = static_cast<int>(std::floor(bb.max().x() / a + 1e-9));
  const int j0 = static_cast<int>(std::ceil(bb.min().y() / a - 1e-9));
  const int j1 = static_cast<int>(std::floor(bb.max().y() / a + 1e-9));
  for (int j = j0; j <= j1; ++j) {
    for (int i = i0; i <= i1; ++i) {
      const Point p(i * a, j * a);
      if (strictly_inside(spec.shape, p, tol)) {
        lat.sites.push_back(p);
        lat.coords.push_back({i, j});
      }
    }
  }
  require(!lat.sites.empty(), Errc::EmptyLattice, "no lattice point inside the domain");

  lat.lo = lat.coords.front();
  lat.hi = lat.coords.front();
  for (const auto& c : lat.coords) {
    lat.lo = {std::min(lat.lo[0], c[0]), std::min(lat.lo[1], c[1])};
    lat.hi = {std::max(lat.hi[0], c[0]), std::max(lat.hi[1], c[1])};
  }
  lat.index_grid_.assign(static_cast<std::size_t>(lat.width()) * lat.height(), -1);
  for (std::size_t s = 0; s < lat.coords.size(); ++s) {
    const auto& c = lat.coords[s];
    lat.index_grid_[static_cast<std::size_t>(c[1] - lat.lo[1]) * lat.width() + (c[0] - lat.lo[0])] =
        static_cast<int>(s);
  }

  // Boundary sites in row-major order.
  std::map<std::array<int, 2>, int> bmap;
  static constexpr int dx[4] = {1, 0, -1, 0};
  static constexpr int dy[4] = {0, 1, 0, -1};
  for (const auto& c : lat.coords)
    for (int d = 0; d < 4; ++d) {
      const std::array<int, 2> q{c[0] + dx[d], c[1] + dy[d]};
      if (lat.site_at(q[0], q[1]) < 0) bmap.emplace(std::array<int, 2>{q[1], q[0]}, 0);
    }
  for (auto& [yx, idx] : bmap) {
    idx = static_cast<int>(lat.boundary.size());
    lat.boundary_coords.push_back({yx[1], yx[0]});
    lat.boundary.push_back(Point(yx[1] * a, yx[0] * a));
  }

  lat.nbr.resize(lat.sites.size());
  lat.boundary_bonds.resize(lat.sites.size());
  for (std::size_t s = 0; s < lat.coords.size(); ++s) {
    const auto& c = lat.coords[s];
    for (int d = 0; d < 4; ++d) {
      const int q = lat.site_at(c[0] + dx[d], c[1] + dy[d]);
      if (q >= 0) {
        lat.nbr[s][d] = q;
        if (static_cast<int>(s) < q) lat.bonds.push_back({static_cast<int>(s), q});
      } else {
        const int b = bmap.at({c[1] + dy[d], c[0] + dx[d]});
        lat.nbr[s][d] = -(b + 1);
        lat.boundary_bonds[s].push_back(b);
      }
    }
  }
  return lat;
}

Box BlockGrid::block_cell(int i, int j) const {
  return Box(Point(double(i - 1) / N, double(j - 1) / N), Point(double(i) / N, double(j) / N));
}

BlockGrid build_block_grid(const Lattice& lat, int N) {
  require(N >= 1 && (N & (N - 1)) == 0, Errc::InvalidArgument, "block count must be a power of two");
  const Box bb = bounding_box(lat.domain.shape);
  require(bb.min().isZero(1e-12) && (bb.max() - Point(1, 1)).isZero(1e-12), Errc::InvalidArgument,
          "block grid requires the unit square domain");
  BlockGrid g;
  g.N = N;
  g.assignment.resize(lat.sites.size());
  g.block_sites.assign(static_cast<std::size_t>(N) * N, {});
  for (std::size_t s = 0; s < lat.sites.size(); ++s) {
    // Integer arithmetic avoids rounding at block edges: x = c*a, block = floor(N*c*a).
    auto block = [&](int c) {
      const double v = N * c * lat.mesh;
      int k = static_cast<int>(std::floor(v + 1e-9));
      return std::clamp(k + 1, 1, N);
    };
    const int i = block(lat.coords[s][0]);
    const int j = block(lat.coords[s][1]);
    g.assignment[s] = {i, j};
    g.block_sites[g.flat(i, j)].push_back(static_cast<int>(s));
  }
  return g;
}

void write_lattice_csv(std::ostream& os, const Lattice& lat, const BlockGrid* grid) {
  os << "index,x,y,is_boundary,block_i,block_j\n";
  os.precision(17);
  for (std::size_t s = 0; s < lat.sites.size(); ++s) {
    os << s << ',' << lat.sites[s].x() << ',' << lat.sites[s].y() << ",0,";
    if (grid)
      os << grid->assignment[s][0] << ',' << grid->assignment[s][1] << '\n';
    else
      os << "0,0\n";
  }
  for (std::size_t b = 0; b < lat.boundary.size(); ++b)
    os << b << ',' << lat.boundary[b].x() << ',' << lat.boundary[b].y() << ",1,0,0\n";
}

}  // namespace rfim
