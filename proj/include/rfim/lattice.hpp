#pragma once

#include <array>
#include <iosfwd>
#include <string>
#include <vector>

#include "rfim/common.hpp"
#include "rfim/geometry.hpp"

namespace rfim {

struct DomainSpec {
  Polygon shape = rectangle(Point(0, 0), Point(1, 1));
  double mesh = 0.25;

  static DomainSpec unit_square(double a);
  /// Rectangle holding exactly W x H interior sites at mesh a.
  static DomainSpec strip(int width, int height, double a);
};

/// Ω_a = Ω ∩ aZ² with its outer boundary. Sites are ordered row-major by
/// coordinates (y major, x minor).
struct Lattice {
  /// Neighbour code: >= 0 interior index, < 0 boundary index -(b+1).
  using Neighbours = std::array<int, 4>;

  DomainSpec domain;
  double mesh = 0.0;
  std::vector<Point> sites;
  std::vector<Point> boundary;
  std::vector<std::array<int, 2>> coords;  ///< integer coordinates, x = mesh * coords
  std::vector<std::array<int, 2>> boundary_coords;
  std::vector<Neighbours> nbr;             ///< order: +x, +y, -x, -y
  std::vector<std::array<int, 2>> bonds;   ///< interior pairs i < j
  std::vector<std::vector<int>> boundary_bonds;  ///< per site: boundary indices adjacent

  Index size() const { return static_cast<Index>(sites.size()); }
  Box cell(Index i) const;

  /// Bounding box of the interior in integer coordinates.
  std::array<int, 2> lo{0, 0};
  std::array<int, 2> hi{0, 0};
  int width() const { return hi[0] - lo[0] + 1; }
  int height() const { return hi[1] - lo[1] + 1; }
  bool is_full_rectangle() const { return size() == Index(width()) * height(); }
  /// Site index at integer coordinates or -1.
  int site_at(int i, int j) const;

  static bool is_boundary_code(int code) { return code < 0; }
  static int boundary_index(int code) { return -code - 1; }

 private:
  friend Lattice discretize_domain(const DomainSpec& spec);
  std::vector<int> index_grid_;
};

Lattice discretize_domain(const DomainSpec& spec);

/// Dyadic blocks B^N_{i,j} of the unit square, i indexing x and j indexing y,
/// both 1-based. Flat block index is (i-1)*N + (j-1).
struct BlockGrid {
  int N = 1;
  std::vector<std::array<int, 2>> assignment;  ///< site -> (i, j)
  std::vector<std::vector<int>> block_sites;   ///< flat block -> site list

  int flat(int i, int j) const { return (i - 1) * N + (j - 1); }
  int block_of(Index site) const { return flat(assignment[site][0], assignment[site][1]); }
  Box block_cell(int i, int j) const;
  int block_count() const { return N * N; }
};

BlockGrid build_block_grid(const Lattice& lat, int N);

void write_lattice_csv(std::ostream& os, const Lattice& lat, const BlockGrid* grid = nullptr);

}  // namespace rfim
