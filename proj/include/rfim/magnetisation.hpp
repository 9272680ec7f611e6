#pragma once

#include <vector>

#include "rfim/disorder.hpp"
#include "rfim/lattice.hpp"
#include "rfim/sampler.hpp"

namespace rfim {

enum class Representation { piecewise_constant, atomic };

/// Φ^a (density a^{-1/8}σ_x on S_a(x)) or Φ̃^a (mass a^{15/8}σ_x at x).
struct MagnetisationField {
  const Lattice* lattice = nullptr;
  SpinVector spins;
  Representation rep = Representation::piecewise_constant;

  double pair(const Profile& phi) const;
  /// Per-site weight: density a^{-1/8}σ or mass a^{15/8}σ.
  VectorX weights() const;
};

struct MagnetisationObservables {
  MatrixX blocks;                ///< (i-1, j-1) -> Σ_{x∈B} a^{15/8} λ(x)² σ_x
  std::vector<double> pairings;  ///< ⟨Φ^a, φ_k⟩
};

MagnetisationObservables magnetisation_observables(const Lattice& lat, const SpinVector& spins,
                                                   const BlockGrid& grid, const Profile& lambda,
                                                   const std::vector<Profile>& tests = {});

}  // namespace rfim
