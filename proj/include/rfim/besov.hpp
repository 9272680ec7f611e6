#pragma once

#include <array>
#include <functional>
#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

#include "rfim/geometry.hpp"
#include "rfim/magnetisation.hpp"
#include "rfim/quadrature.hpp"

namespace rfim {

/// Tabulated 1D function on the dyadic grid k 2^{-depth} over [0, support].
class DyadicTable {
 public:
  DyadicTable() = default;
  DyadicTable(int depth, VectorX values, VectorX cell_integrals);

  int depth() const { return depth_; }
  double support() const { return support_; }
  /// Linear interpolation, zero outside the support.
  double operator()(double x) const;
  /// ∫_0^x, exact at grid points.
  double antiderivative(double x) const;
  double integral(double lo, double hi) const { return antiderivative(hi) - antiderivative(lo); }
  /// ∫ over the depth-d cell [k 2^{-d}, (k+1) 2^{-d}], d ≤ depth, exact.
  double cell_integral(int d, Index k) const;
  double value_at(Index k) const { return values_(k); }
  /// Max |value| over grid points spaced 2^{-d}.
  double sup(int d) const;
  double l1() const;

 private:
  int depth_ = 0;
  double support_ = 0.0;
  VectorX values_;
  VectorX cumulative_;  ///< ∫_0^{k 2^{-depth}}
};

enum class WaveletFamily { haar, daubechies };

/// 2D tensor MRA: φ⊗φ, ψ^{(1)} = φ⊗ψ, ψ^{(2)} = ψ⊗φ, ψ^{(3)} = ψ⊗ψ, where the
/// first factor acts on x₁. Elements at level n are 2ⁿ u(2ⁿ y - k).
struct WaveletBasis {
  WaveletFamily family = WaveletFamily::daubechies;
  int order = 0;               ///< vanishing moments of ψ
  int regularity = 0;          ///< integer r with φ, ψ ∈ C^r
  VectorX h;                   ///< scaling filter, Σ h = √2
  VectorX g;                   ///< g_k = (-1)^k h_{L-1-k}
  DyadicTable phi, psi;
  int taps() const { return static_cast<int>(h.size()); }
  /// Translates per unit width of the support, 2·order - 1.
  int span() const { return taps() - 1; }
  std::string name() const;
};

/// Integer r_α with α + r_α > 0.
int required_regularity(double alpha);

/// Daubechies filters by spectral factorization; tables by the cascade
/// algorithm. Throws InsufficientRegularity when alpha is given and r < r_α.
WaveletBasis build_wavelet_basis(WaveletFamily family, int order, std::optional<double> alpha = {},
                                 int depth = 14);
WaveletBasis build_wavelet_basis(const std::string& name, std::optional<double> alpha = {}, int depth = 14);

/// Family of 1D measures along one axis.
struct Axis {
  enum class Kind { intervals, points, function };
  Kind kind = Kind::intervals;
  VectorX nodes;                        ///< interval edges or point positions
  std::function<double(double)> fn;     ///< density of the single function entry
  double lo = 0.0, hi = 0.0;            ///< support of fn

  static Axis intervals(VectorX edges);
  static Axis points(VectorX pos);
  static Axis function(std::function<double(double)> f, double lo, double hi);

  Index count() const;
  double min() const;
  double max() const;
};

/// f = Σ_{i,j} values(j, i) μ_i(x₁) ν_j(x₂): piecewise-constant (densities),
/// atomic (masses) or separable smooth fields.
struct GridField {
  Axis x, y;
  MatrixX values;  ///< rows index y, columns index x
  Box support() const;
};

GridField grid_field(const MagnetisationField& m);
/// Indicator of the rectangle [lo, hi].
GridField box_indicator(const Point& lo, const Point& hi);
/// Separable product f₁(x₁) f₂(x₂) supported on box.
GridField separable_field(std::function<double(double)> f1, std::function<double(double)> f2, const Box& box);
/// Tensor Gauss-Legendre atoms for a general field on a box.
GridField quadrature_field(const Field2D& f, const Box& box, int panels, int order = 8);

struct LevelCoefficients {
  int level = 0;
  Index k1_lo = 0, k2_lo = 0;
  /// [0] φ⊗φ, [1..3] ψ^{(1..3)}; entry (k₂ - k2_lo, k₁ - k1_lo). Empty when not computed.
  std::array<MatrixX, 4> c;
  Index rows() const { return c[0].size() ? c[0].rows() : c[1].rows(); }
  Index cols() const { return c[0].size() ? c[0].cols() : c[1].cols(); }
};

/// Pairings of f with φ_{n,k} and ψ^{(i)}_{n,k} over every k whose support meets supp f.
LevelCoefficients mra_project(const GridField& f, int n, const WaveletBasis& b, bool scaling = true,
                              bool wavelets = true);

/// One filter-bank step: scaling coefficients at level n → scaling and wavelets at n-1.
LevelCoefficients decompose(const LevelCoefficients& fine, const WaveletBasis& b);
/// Inverse step: level n-1 scaling and wavelets → level n scaling coefficients.
LevelCoefficients reconstruct(const LevelCoefficients& coarse, const WaveletBasis& b);

/// Sup over grid points spaced 2^{-n}/pts of |Σ_{i∈types} Σ_k c^{(i)}_{n,k} u^{(i)}_{n,k}|.
double level_sup_norm(const LevelCoefficients& lc, const WaveletBasis& b, int pts, bool scaling);

struct BesovNorm {
  double value = 0.0;
  double scaling_sup = 0.0;            ///< ‖𝒱_0 f‖_∞
  std::vector<double> level_term;      ///< 2^{αn} ‖𝒲_n f‖_∞ for n = 1..n_max
  int argsup_level = 0;
  double alpha = 0.0;
  int points_per_translate = 4;
};

/// ‖𝒱_0 f‖_∞ + max_{1≤n≤n_max} 2^{αn} ‖𝒲_n f‖_∞ on the sampling grid.
BesovNorm besov_holder_norm(const GridField& f, double alpha, int n_max, const WaveletBasis& b, int pts = 4);
BesovNorm besov_norm_from_coefficients(const LevelCoefficients& level0, const std::vector<LevelCoefficients>& levels,
                                       double alpha, const WaveletBasis& b, int pts = 4);

std::string besov_norm_json(const BesovNorm& n);
void write_coefficients_csv(std::ostream& os, const LevelCoefficients& lc);

/// Smooth test functions supported in the unit ball with sup ≤ 1.
std::vector<Field2D> bump_library();

/// sup over θ = 2^{-j} (j = 0..j_max), x on a θ/2 grid and g in the library
/// of θ^{-α-2} |⟨f, g((· - x)/θ)⟩|.
double test_function_norm(const GridField& f, double alpha, int j_max, const std::vector<Field2D>& library);

/// Rectilinear region as disjoint rectangles; polygon regions are pixelized on a 2^{-pixel_depth} grid.
struct Region {
  std::vector<Box> rects;
  Polygon outline;
  double pixel_error_area = 0.0;  ///< upper bound on |B Δ B_J| from pixelization
  static Region from_polygon(const Polygon& p, int pixel_depth = 10);
  static Region from_box(const Point& lo, const Point& hi);
  double area() const;
};

struct BoxDimension {
  double dimension = 0.0;
  std::vector<int> levels;
  std::vector<double> counts;
};

/// Slope of log N(2^{-n}) against n log 2 for boxes meeting the point set or segments.
BoxDimension box_dimension(const Polygon& boundary, const std::vector<int>& levels, bool closed = true);
BoxDimension box_dimension(const Region& region, const std::vector<int>& levels);

struct SubdomainIntegral {
  double value = 0.0;
  double tail_bound = 0.0;
  double dimension = 0.0;      ///< d̄ used in the bound
  double field_norm = 0.0;     ///< ‖f‖_{C^α} used in the bound
  std::vector<double> level_contribution;  ///< [0] scaling part, then levels n0..n_cut
};

struct SubdomainOptions {
  int n0 = 0;
  std::optional<double> dimension;   ///< otherwise measured over levels 2..n_cut
  std::optional<double> field_norm;  ///< otherwise besov_holder_norm up to min(n_cut, norm_levels)
  int norm_levels = 8;
};

/// ⟨f, 1_B⟩ through the level-n0 scaling part and wavelets n0..n_cut near ∂B,
/// with a bound on the omitted levels. Throws DimensionTooLarge if d̄ ≥ 2+α.
SubdomainIntegral integrate_over_subdomain(const GridField& f, const Region& B, double alpha,
                                           const WaveletBasis& b, int n_cut, const SubdomainOptions& opt = {});

}  // namespace rfim
