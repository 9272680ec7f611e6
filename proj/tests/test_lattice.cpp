#include <doctest.h>

#include <sstream>

#include "rfim/lattice.hpp"

using namespace rfim;

TEST_CASE("unit square discretization matches hand counts") {
  const Lattice l2 = discretize_domain(DomainSpec::unit_square(0.5));
  CHECK(l2.size() == 1);
  CHECK(l2.sites[0].isApprox(Point(0.5, 0.5)));
  CHECK(l2.boundary.size() == 4);

  const Lattice l3 = discretize_domain(DomainSpec::unit_square(1.0 / 3));
  CHECK(l3.size() == 4);
  CHECK(l3.boundary.size() == 8);

  const Lattice l4 = discretize_domain(DomainSpec::unit_square(0.25));
  CHECK(l4.size() == 9);
  CHECK(l4.boundary.size() == 12);
  CHECK(l4.is_full_rectangle());
}

TEST_CASE("discretization errors") {
  CHECK_THROWS_AS(discretize_domain(DomainSpec::unit_square(2.0)), Error);
  try {
    discretize_domain(DomainSpec::unit_square(2.0));
  } catch (const Error& e) {
    CHECK(e.code() == Errc::EmptyLattice);
  }
  DomainSpec bow{{Point(0, 0), Point(1, 1), Point(1, 0), Point(0, 1)}, 0.1};
  try {
    discretize_domain(bow);
    FAIL("expected InvalidPolygon");
  } catch (const Error& e) {
    CHECK(e.code() == Errc::InvalidPolygon);
  }
}

TEST_CASE("row-major ordering and neighbour structure") {
  const Lattice lat = discretize_domain(DomainSpec::unit_square(0.25));
  for (Index s = 1; s < lat.size(); ++s) {
    const auto& p = lat.sites[s - 1];
    const auto& q = lat.sites[s];
    CHECK((p.y() < q.y() || (p.y() == q.y() && p.x() < q.x())));
  }
  CHECK(lat.bonds.size() == 12);
  // The center has four interior neighbours, corners two boundary neighbours.
  const int center = lat.site_at(2, 2);
  for (int c : lat.nbr[center]) CHECK(c >= 0);
  CHECK(lat.boundary_bonds[lat.site_at(1, 1)].size() == 2);
  for (const auto& bc : lat.boundary_coords) {
    int interior = 0;
    for (int d = 0; d < 4; ++d) {
      static const int dx[4] = {1, 0, -1, 0}, dy[4] = {0, 1, 0, -1};
      if (lat.site_at(bc[0] + dx[d], bc[1] + dy[d]) >= 0) ++interior;
    }
    CHECK(interior >= 1);
  }
}

TEST_CASE("boundary count on the unit square is four times the side count") {
  for (int k : {2, 3, 4, 8}) {
    const Lattice lat = discretize_domain(DomainSpec::unit_square(1.0 / k));
    CHECK(lat.boundary.size() == static_cast<std::size_t>(4 * (k - 1)));
  }
}

TEST_CASE("non-rectangular polygon") {
  DomainSpec tri{{Point(0, 0), Point(1, 0), Point(0, 1)}, 0.25};
  const Lattice lat = discretize_domain(tri);
  // (1,1),(2,1),(1,2) in units of a lie strictly inside x + y < 1.
  CHECK(lat.size() == 3);
  CHECK_FALSE(lat.is_full_rectangle());
}

TEST_CASE("block grid assignment") {
  const Lattice lat = discretize_domain(DomainSpec::unit_square(0.1));
  const BlockGrid g2 = build_block_grid(lat, 2);
  const int s = lat.site_at(3, 7);
  CHECK(g2.assignment[s][0] == 1);
  CHECK(g2.assignment[s][1] == 2);
  const BlockGrid g1 = build_block_grid(lat, 1);
  CHECK(g1.block_sites[0].size() == lat.sites.size());

  const Lattice l8 = discretize_domain(DomainSpec::unit_square(0.125));
  const BlockGrid g4 = build_block_grid(l8, 4);
  // Columns 1..7: block 1 holds column 1, blocks 2..4 hold two columns each.
  for (int i = 1; i <= 4; ++i)
    for (int j = 1; j <= 4; ++j) {
      const std::size_t w = i == 1 ? 1 : 2, h = j == 1 ? 1 : 2;
      CHECK(g4.block_sites[g4.flat(i, j)].size() == w * h);
    }
}

TEST_CASE("block partition and nesting") {
  const Lattice lat = discretize_domain(DomainSpec::unit_square(1.0 / 37));
  for (int N : {1, 2, 4, 8, 16}) {
    const BlockGrid g = build_block_grid(lat, N);
    std::size_t total = 0;
    for (const auto& b : g.block_sites) total += b.size();
    CHECK(total == lat.sites.size());
    if (N > 1) {
      const BlockGrid parent = build_block_grid(lat, N / 2);
      for (Index s = 0; s < lat.size(); ++s) {
        const auto c = g.assignment[s];
        const auto p = parent.assignment[s];
        CHECK((c[0] + 1) / 2 == p[0]);
        CHECK((c[1] + 1) / 2 == p[1]);
      }
    }
  }
}

TEST_CASE("lattice csv dump") {
  const Lattice lat = discretize_domain(DomainSpec::unit_square(1.0 / 3));
  const BlockGrid g = build_block_grid(lat, 2);
  std::ostringstream os;
  write_lattice_csv(os, lat, &g);
  const std::string out = os.str();
  CHECK(out.rfind("index,x,y,is_boundary,block_i,block_j\n", 0) == 0);
  CHECK(std::count(out.begin(), out.end(), '\n') == 1 + 4 + 8);
}
