#pragma once

#include <functional>
#include <string>
#include <vector>

#include "rfim/common.hpp"
#include "rfim/lattice.hpp"
#include "rfim/rng.hpp"

namespace rfim {

enum class LawFamily { gaussian, rademacher, uniform };

const char* law_name(LawFamily f);
LawFamily parse_law(const std::string& name);

/// Mean 0, variance 1 disorder law.
struct DisorderLaw {
  LawFamily family = LawFamily::gaussian;

  double draw(std::uint64_t key, std::uint64_t counter) const;
  double draw(CounterRng& rng) const;
  double third_abs_moment() const;
  /// E f(ω): Gauss-Hermite (60 nodes), exact two-point sum, or Gauss-Legendre (64 nodes).
  double expect(const std::function<double(double)>& f) const;
};

using Profile = std::function<double(const Point&)>;

namespace profiles {
Profile constant(double c);
/// c * exp(-|y-center|^2 / width^2)
Profile gaussian_bump(const Point& center, double width, double c = 1.0);
/// c0 + g.y
Profile linear(double c0, const Point& g);
}  // namespace profiles

/// ω^a, one value per interior site, keyed by (seed, Disorder, replica, site).
VectorX sample_disorder(const Lattice& lat, const DisorderLaw& law, std::uint64_t seed,
                        std::uint64_t replica = 0);

/// Cell averages ϑ^a_x = a^{-1} W(S_a(x)) over disjoint square cells.
struct WhiteNoiseGrid {
  double mesh = 0.0;
  std::vector<Point> centers;
  VectorX values;
  std::uint64_t parent_seed = 0;
  int depth = 0;  ///< number of refinements applied to the lattice-level grid

  /// ⟨W^a, 1_{S_a(x)}⟩ = a ϑ_x.
  double cell_mass(Index i) const { return mesh * values(i); }
};

WhiteNoiseGrid sample_white_noise_grid(const Lattice& lat, std::uint64_t seed, std::uint64_t replica = 0);

/// Splits every cell in four (children stored parent-major, order
/// (-,-), (+,-), (-,+), (+,+)); parent value is half the children's sum.
WhiteNoiseGrid refine(const WhiteNoiseGrid& g, std::uint64_t seed);
WhiteNoiseGrid coarsen(const WhiteNoiseGrid& g);

/// ∫_{S_a(x)} φ per interior site by 2x2 Gauss-Legendre.
VectorX cell_integrals(const Lattice& lat, const Profile& phi);

struct ExternalField {
  double mesh = 0.0;
  VectorX omega;       ///< disorder ω^a_x
  VectorX lambda_a;    ///< a^{7/8} λ(x)
  VectorX h_a;         ///< a^{15/8} h(x)
  VectorX phi_tilde;   ///< a^{-1/8} ∫_{S_a(x)} φ, zero without φ
  bool has_phi = false;
  double lambda_l2_sq = 0.0;  ///< ‖λ‖²_{L²(Ω)}

  Index size() const { return omega.size(); }
  VectorX xi_real() const { return lambda_a.cwiseProduct(omega) + h_a; }
  VectorXc xi() const;
  /// θ_a = exp(-½ a^{-1/4} ‖λ‖²).
  double log_theta() const { return -0.5 * std::pow(mesh, -0.25) * lambda_l2_sq; }
  double theta() const { return std::exp(log_theta()); }
};

struct FieldOptions {
  const Profile* phi = nullptr;
  bool chaos_normalized = false;  ///< require inf λ > 0
  int l2_resolution = 256;
};

ExternalField build_external_field(const Lattice& lat, const Profile& lambda, const Profile& h,
                                   const VectorX& omega, const FieldOptions& opt = {});

/// a^{-1} Σ_x ω_x ∫_{S_a(x)} φ.
double pair_white_noise(const Lattice& lat, const VectorX& omega, const Profile& phi);
/// Σ_x a^{-2} (∫_{S_a(x)} φ)², the variance of the pairing for i.i.d. unit noise.
double white_noise_pairing_variance(const Lattice& lat, const Profile& phi);

}  // namespace rfim
