#include "rfim/magnetisation.hpp"

#include <cmath>

namespace rfim {

VectorX MagnetisationField::weights() const {
  const double a = lattice->mesh;
  const double scale = rep == Representation::atomic ? std::pow(a, 15.0 / 8) : std::pow(a, -1.0 / 8);
  return scale * spins.cast<double>();
}

double MagnetisationField::pair(const Profile& phi) const {
  const VectorX w = weights();
  if (rep == Representation::atomic) {
    double s = 0.0;
    for (Index i = 0; i < w.size(); ++i) s += w(i) * phi(lattice->sites[i]);
    return s;
  }
  return w.dot(cell_integrals(*lattice, phi));
}

MagnetisationObservables magnetisation_observables(const Lattice& lat, const SpinVector& spins,
                                                   const BlockGrid& grid, const Profile& lambda,
                                                   const std::vector<Profile>& tests) {
  MagnetisationObservables out;
  out.blocks = MatrixX::Zero(grid.N, grid.N);
  const double m = std::pow(lat.mesh, 15.0 / 8);
  for (Index s = 0; s < lat.size(); ++s) {
    const double l = lambda(lat.sites[s]);
    const auto& b = grid.assignment[s];
    out.blocks(b[0] - 1, b[1] - 1) += m * l * l * spins(s);
  }
  const MagnetisationField field{&lat, spins, Representation::piecewise_constant};
  for (const auto& t : tests) out.pairings.push_back(field.pair(t));
  return out;
}

}  // namespace rfim
