#pragma once

#include <functional>
#include <iosfwd>
#include <map>
#include <string>
#include <vector>

#include "rfim/disorder.hpp"
#include "rfim/ising.hpp"

namespace rfim {

/// Multilinear polynomial Ψ(u) = Σ_I ψ(I) u^I over sorted site subsets.
class ChaosKernel {
 public:
  using Subset = std::vector<int>;

  ChaosKernel() = default;
  ChaosKernel(Index n_vars, std::vector<Subset> subsets, VectorX coeffs, double mesh = 0.0,
              std::string origin = {});

  Index variables() const { return n_; }
  Index terms() const { return static_cast<Index>(subsets_.size()); }
  int degree() const { return degree_; }
  double mesh() const { return mesh_; }
  const std::string& origin() const { return origin_; }
  const std::vector<Subset>& subsets() const { return subsets_; }
  const VectorX& coefficients() const { return coeffs_; }
  double coefficient(const Subset& I) const;

  /// Σ_{I≠∅} ψ(I)².
  double variance() const;
  /// Inf_x = Σ_{I∋x} ψ(I)².
  VectorX influences() const;
  double max_influence() const { return influences().maxCoeff(); }
  /// Σ_{|I|>l} ψ(I)².
  double tail_norm(int l) const;

  ChaosKernel truncated(int l) const;
  /// ψ(I) -> s^{|I|} ψ(I).
  ChaosKernel scaled_by_degree(double s) const;

  template <class Derived>
  typename Derived::Scalar operator()(const Eigen::MatrixBase<Derived>& u) const {
    using Scalar = typename Derived::Scalar;
    std::vector<Scalar> prod(subsets_.size());
    Scalar total(0);
    for (std::size_t k = 0; k < subsets_.size(); ++k) {
      const Subset& I = subsets_[k];
      if (I.empty()) {
        prod[k] = Scalar(1);
      } else if (parent_[k] >= 0) {
        prod[k] = prod[parent_[k]] * u(I.back());
      } else {
        Scalar p(1);
        for (int x : I) p *= u(x);
        prod[k] = p;
      }
      total += coeffs_(static_cast<Index>(k)) * prod[k];
    }
    return total;
  }

  /// Real values for a batch of assignments, one per row of U.
  VectorX evaluate_batch(const MatrixX& U) const;

 private:
  void index();

  Index n_ = 0;
  int degree_ = 0;
  double mesh_ = 0.0;
  std::string origin_;
  std::vector<Subset> subsets_;
  VectorX coeffs_;
  std::vector<Index> parent_;  ///< term holding I without its last element, or -1
  std::map<Subset, Index> lookup_;
};

/// ψ^a(I) = Π_{x∈I} λ^a_x E[σ^I] for |I| ≤ l.
ChaosKernel build_chaos_kernel(const CorrelationTable& corr, const VectorX& lambda_a, int l);

/// Degree-1 kernel ψ({x}) = a φ(x).
ChaosKernel white_noise_kernel(const Lattice& lat, const Profile& phi);

void write_kernel_csv(std::ostream& os, const ChaosKernel& k);

/// θ_a Π cosh(ξ) Σ_I E[σ^I] Π tanh(ξ) over all subsets, for at most 16 sites.
cplx evaluate_high_temperature_expansion(const Lattice& lat, const ModelParams& p, const ExternalField& f);

enum class ChaosMode { truncate, linearize, gaussianize };

/// Evaluates Υ^{≤l}, Ξ^{≤l} or Θ^{≤l} for a driver vector (ω, or ϑ when gaussianized).
class ChaosEvaluator {
 public:
  ChaosEvaluator(ChaosKernel kernel, ChaosMode mode, const ExternalField& f);

  cplx operator()(const VectorX& driver) const;
  /// Variables u_x fed to the kernel.
  VectorXc variables(const VectorX& driver) const;
  /// θ_a Π cosh(ξ + iφ̃), the factor turning Υ into Z̃ (uses f.omega).
  cplx prefactor() const;
  const ChaosKernel& kernel() const { return kernel_; }
  ChaosMode mode() const { return mode_; }

 private:
  ChaosKernel kernel_;
  ChaosMode mode_;
  ExternalField field_;
};

ChaosEvaluator transform_chaos(const ChaosKernel& k, const ExternalField& f, ChaosMode mode, int l);

struct LindebergReport {
  std::vector<double> variance;
  std::vector<double> max_influence;
  double third_moment = 0.0;  ///< M = max of third absolute moments
  int degree = 0;
  double structural = 0.0;    ///< M^l Σ_i Var(Ψ_i) (max_x Inf_x[ψ_i])^{1/2}
  double gap = 0.0;           ///< |E g(Ψ(ω)) - E g(Ψ(ϑ))|
  double gap_signed = 0.0;
  double gap_se = 0.0;
  Index replicas = 0;
};

using Functional = std::function<double(const VectorX&)>;

/// Paired replicas: ω_x = F_ω^{-1}(Φ(ϑ_x)) from the same Gaussian ϑ_x.
LindebergReport influence_and_lindeberg_bound(const std::vector<ChaosKernel>& kernels, const DisorderLaw& law_omega,
                                              const DisorderLaw& law_theta, const Functional& g, Index replicas,
                                              std::uint64_t seed);

std::string lindeberg_report_json(const LindebergReport& r);

struct TanhMomentTable {
  /// Order: E[Re], E[Re²], E[Im], E[Im²], E[Re·Im].
  std::array<double, 5> estimate{};
  std::array<double, 5> se{};
  std::array<double, 5> leading{};
  double mesh = 0.0;
  Index samples = 0;
};

/// Moments of tanh(ξ^a + iφ̃^a) at one site with values λ(x), h(x) and a
/// constant test function φ(x). Re, Re² and Re·Im use ξ, ξ², ξφ̃ as control
/// variates with exactly known means.
TanhMomentTable tanh_moment_table(const DisorderLaw& law, double lambda, double h, double phi, double a,
                                  Index n_samples, std::uint64_t seed);

/// Σ_{|I|≤l} E^{a₀}[σ^I] Π_{x∈I} (a₀^{7/8} λ(x) ϑ_x + a₀^{15/8} h(x)).
class WienerChaos {
 public:
  WienerChaos(const CorrelationTable& corr, const Lattice& lat, const Profile& lambda, const Profile& h, int l);
  double operator()(const VectorX& theta) const;
  /// One grid per row.
  VectorX batch(const MatrixX& theta) const;
  const ChaosKernel& kernel() const { return kernel_; }

 private:
  ChaosKernel kernel_;
  VectorX scale_, shift_;
};

double wiener_chaos_partition(const CorrelationTable& corr, const Lattice& lat, const Profile& lambda,
                              const Profile& h, const VectorX& theta, int l);

}  // namespace rfim
