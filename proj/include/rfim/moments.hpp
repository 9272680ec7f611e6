#pragma once

#include <cstdint>
#include <iosfwd>
#include <string>
#include <vector>

#include "rfim/disorder.hpp"
#include "rfim/ising.hpp"
#include "rfim/sampler.hpp"
#include "rfim/stats.hpp"

namespace rfim {

/// log E[exp(Σ ξ σ)] under the field-free measure for many fields at once,
/// from the table of configuration probabilities (≤ 22 sites).
class ExactLogPartition {
 public:
  ExactLogPartition(const Lattice& lat, const ModelParams& p);

  Index sites() const { return n_; }
  /// One value per column of `xi` (sites x replicas).
  VectorX operator()(const MatrixX& xi) const;
  /// E^ξ[σ_x] per site.
  VectorX spin_means(const VectorX& xi) const;

 private:
  Index n_ = 0;
  MatrixX spins_;   ///< configurations x sites, ±1
  VectorX log_q_;   ///< log probability per configuration, -inf allowed
};

/// Exact log Z̃ = log θ_a + log E[exp Σ ξ σ] for every replica ω_r (columns):
/// ξ = λ^a ω + h^a with the counterterm θ_a = exp(-½ a^{-1/4} ‖λ‖²).
struct PartitionSamples {
  double mesh = 0.0;
  double log_theta = 0.0;
  std::vector<double> log_z;
  MatrixX omega;  ///< sites x replicas
};

PartitionSamples sample_partition_functions(const Lattice& lat, const ModelParams& p, const Profile& lambda,
                                            const Profile& h, const DisorderLaw& law, Index replicas,
                                            std::uint64_t seed);

struct MomentReport {
  double p = 2.0;
  double empirical = 0.0;      ///< E[|Ψ|^p]^{2/p}
  double ci_lo = 0.0;          ///< bootstrap 95%
  double ci_hi = 0.0;
  double bound = 0.0;          ///< Σ_J c_p^{2|J|} ψ(J)²
  double c_p = 1.0;
  double z_moment = 0.0;       ///< E[Z̃^p]^{1/p}
  double z_moment_2p = 0.0;    ///< E[Z̃^p]^{2/p}
  double z_bound = 0.0;        ///< E[P^{2p}]^{1/p} Σ_J c_{2p}^{2|J|} ψ(J)², P = θ_a Π cosh ξ
  double third_moment = 0.0;   ///< max_x E|η_x|³
  Index replicas = 0;
  double mesh = 0.0;
  bool holds = false;          ///< empirical ≤ bound (1 + tol) and z_moment_2p ≤ z_bound (1 + tol)
};

/// Kernel ψ_a(J) of Ψ_a(η) = Σ_I E[σ^I] Π_{x∈I}(ϑ_x η_x + μ_x), indexed by
/// bitmask, where μ_x = E tanh ξ_x and ϑ_x² = Var tanh ξ_x.
struct TanhChaos {
  VectorX kernel;
  VectorX mu;
  VectorX vartheta;
};

TanhChaos tanh_chaos_kernel(const Lattice& lat, const ModelParams& p, const Profile& lambda, const Profile& h,
                            const DisorderLaw& law);

/// c_p = √(p - 1), the Gaussian hypercontractivity constant.
double hypercontractivity_constant(double p);

MomentReport positive_moment_bound_check(const Lattice& lat, const Profile& lambda, const Profile& h, double p,
                                         Index replicas, std::uint64_t seed = 1,
                                         const DisorderLaw& law = {}, double tolerance = 0.02);

struct TailPoint {
  double t = 0.0;
  double prob = 0.0;   ///< P(log Z̃ ≤ -t)
  double ci_lo = 0.0;  ///< Wilson 95%
  double ci_hi = 0.0;
  Index count = 0;
};

struct TailReport {
  std::vector<TailPoint> curve;
  LineFit fit;          ///< log(-log P) against log t over points with count ≥ min_count
  Index fit_points = 0;
  double gamma = 2.0;   ///< exponent of the concentration class
  bool asserted = false;  ///< Gaussian disorder only
  bool holds = false;     ///< fit.slope ≥ 1.5 when asserted
  double mean_log_z = 0.0;
  double log_mean_z = 0.0;
  bool jensen_ok = false;
  double inverse_moment = 0.0;  ///< E[1/Z̃]
  double inverse_moment_se = 0.0;
  Index replicas = 0;
};

/// Empty `t_grid` selects t at the survival levels 0.3, 0.1, ..., 0.001 of
/// -log Z̃, keeping t > 0. Throws InsufficientTail when fewer than 100
/// samples lie beyond the first grid point.
TailReport negative_tail_check(const Lattice& lat, const Profile& lambda, const Profile& h, Index replicas,
                               std::vector<double> t_grid = {}, std::uint64_t seed = 1,
                               const DisorderLaw& law = {}, Index min_count = 10);
TailReport negative_tail_from_samples(const std::vector<double>& log_z, std::vector<double> t_grid,
                                      bool gaussian, Index min_count = 10);

struct PaleyZygmundReport {
  double c1 = 0.0;      ///< E[Z̃]
  double c2 = 0.0;      ///< E[Z̃²]
  double prob = 0.0;    ///< P(Z̃ ≥ c1/2)
  double prob_ci_lo = 0.0;
  double prob_ci_hi = 0.0;
  double bound = 0.0;   ///< c1²/(5 c2)
  double bound_ci_lo = 0.0;
  double bound_ci_hi = 0.0;
  bool holds = false;   ///< prob_ci_hi ≥ bound_ci_lo
  Index replicas = 0;
};

PaleyZygmundReport paley_zygmund_from_values(const std::vector<double>& z, Index resamples = 200,
                                             std::uint64_t seed = 1);
PaleyZygmundReport paley_zygmund_check(const Lattice& lat, const Profile& lambda, const Profile& h,
                                       Index replicas, std::uint64_t seed = 1, const DisorderLaw& law = {});

/// L_λ(σ, σ') = Σ (λ^a_x)² σ_x σ'_x.
double overlap(const VectorX& lambda_a, const SpinVector& s, const SpinVector& t);

struct OverlapEstimate {
  double value = 0.0;   ///< MC estimate of E^{ω,⊗2}[L_λ]
  double se = 0.0;
  double exact = -1.0;  ///< Σ_x (λ^a_x E^ω[σ_x])² when enumerable, else -1
  double upper = 0.0;   ///< Σ (λ^a_x)²
};

/// Paired heat-bath chains that share ω and differ in spin seeds.
OverlapEstimate overlap_gradient_estimate(const Lattice& lat, const Profile& lambda, const Profile& h,
                                          const VectorX& omega, Index chains, Index samples_per_chain,
                                          std::uint64_t seed = 1);

struct SecondMomentRow {
  double mesh = 0.0;
  double value = 0.0;  ///< E[Z̃²] = θ_a² e^{Σ(λ^a)²} E^{⊗2}[exp(L_λ + Σ h^a (σ + σ'))]
  double se = 0.0;
  Index samples = 0;
};

/// Replica route for Gaussian disorder with two independent Wolff chains
/// (h = 0) or heat-bath chains.
SecondMomentRow second_moment_replica(const Lattice& lat, const Profile& lambda, const Profile& h,
                                      Index samples, std::uint64_t seed = 1);

void write_tail_csv(std::ostream& os, const TailReport& r);
void write_moment_csv(std::ostream& os, const std::vector<MomentReport>& rows);

}  // namespace rfim
