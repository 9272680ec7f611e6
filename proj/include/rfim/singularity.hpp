#pragma once

#include <cstdint>
#include <iosfwd>
#include <limits>
#include <optional>
#include <string>
#include <unordered_map>
#include <vector>

#include "rfim/disorder.hpp"
#include "rfim/lattice.hpp"
#include "rfim/magnetisation.hpp"
#include "rfim/sampler.hpp"

namespace rfim {

enum class Provenance { pure, disordered, tilted };

const char* provenance_name(Provenance p);

/// Block observables indexed (i-1, j-1): Phi = Σ_{x∈B} a^{15/8} λ(x)² σ_x,
/// W = Σ_{x∈B} a λ(x) ω_x, Lambda = a² Σ_{x∈B} λ(x)².
struct BlockObservables {
  int N = 1;
  double mesh = 0.0;
  MatrixX Phi;
  MatrixX W;
  MatrixX Lambda;
  Provenance tag = Provenance::pure;
};

BlockObservables block_observables(const Lattice& lat, const BlockGrid& grid, const SpinVector& spins,
                                   const VectorX& omega, const Profile& lambda,
                                   Provenance tag = Provenance::pure);
/// Uses the atomic field Φ̃^a whatever the representation of `field`; ω is
/// the noise grid's cell average.
BlockObservables block_observables(const MagnetisationField& field, const WhiteNoiseGrid& noise,
                                   const Profile& lambda, int N, Provenance tag = Provenance::pure);

/// Sums 2^k x 2^k groups of blocks into an N_target grid.
BlockObservables coarse_blocks(const BlockObservables& obs, int N_target);

struct SmearingGap {
  double max_gap = 0.0;  ///< max over blocks of |Φ̃^{a,N} - Φ^{a,N}|
  double bound = 0.0;    ///< 2 a^{7/8} N^{-2} ‖λ‖∞ ‖λ'‖∞
};

/// Compares atomic blocks with a^{-1/8} Σ σ_x ∫_{S_a(x)} λ²; ‖λ'‖∞ by central
/// differences on the lattice sites.
SmearingGap smeared_atomic_gap(const Lattice& lat, const BlockGrid& grid, const SpinVector& spins,
                               const Profile& lambda);

/// 2^{-m} ⌊2^m x⌋ componentwise.
MatrixX dyadic_discretize(const MatrixX& x, int m);
double dyadic_discretize(double x, int m);
std::int64_t dyadic_bin(double x, int m);

/// Sparse histogram over (2^{-m}Z)^{2N²}. A key lists ⌊2^m W⌋ then ⌊2^m Φ⌋,
/// both in flat block order (i-1)*N + (j-1).
class EmpiricalJointLaw {
 public:
  using Key = std::vector<std::int64_t>;
  struct KeyHash {
    std::size_t operator()(const Key& k) const noexcept;
  };

  EmpiricalJointLaw() = default;
  EmpiricalJointLaw(int N, int m) : N_(N), m_(m) {}

  int N() const { return N_; }
  int m() const { return m_; }
  Index total() const { return total_; }
  std::size_t bins() const { return counts_.size(); }

  static Key key_of(const BlockObservables& obs, int m);
  void add(const BlockObservables& obs);
  void add_key(const Key& k, Index count = 1);
  void merge(const EmpiricalJointLaw& other);

  Index count(const Key& k) const;
  double probability(const Key& k) const;

  /// m -> m-1 by ⌊k/2⌋.
  EmpiricalJointLaw coarsen() const;
  /// N -> N/2 by summing the bin indices of the four children.
  EmpiricalJointLaw merge_blocks() const;

  std::vector<std::pair<Key, Index>> sorted() const;
  const std::unordered_map<Key, Index, KeyHash>& counts() const { return counts_; }

  void write_binary(std::ostream& os) const;
  static EmpiricalJointLaw read_binary(std::istream& is);

 private:
  int N_ = 1;
  int m_ = 0;
  Index total_ = 0;
  std::unordered_map<Key, Index, KeyHash> counts_;
};

/// Σ_bins √(p q).
double bhattacharyya(const EmpiricalJointLaw& p, const EmpiricalJointLaw& q);

struct BhattacharyyaEstimate {
  double value = 0.0;
  double ci_lo = 0.0;  ///< basic bootstrap, 95%, clipped to [0, 1]
  double ci_hi = 0.0;
  double se = 0.0;     ///< bootstrap standard deviation
  Index n_pure = 0;
  Index n_disordered = 0;
  std::size_t bins = 0;  ///< occupied bins of the union
  double top_decile_occupancy = 0.0;  ///< mean count of the 10% most populated bins of the pooled law
};

struct BootstrapOptions {
  Index resamples = 200;
  std::uint64_t seed = 0;
  double level = 0.95;
};

/// Both sample sets are reduced to N = obs.N (the caller coarsens first).
BhattacharyyaEstimate bhattacharyya_fractional_moment(const std::vector<BlockObservables>& pure,
                                                      const std::vector<BlockObservables>& disordered,
                                                      int m, const BootstrapOptions& opt = {});

struct ConditionalGaussian {
  VectorX mean;
  MatrixX covariance;
};

/// Law of (X_1..X_L) given Σ X_k = M for independent centred X_k with
/// variances ς_k. The covariance is singular along (1,..,1).
ConditionalGaussian conditional_gaussian_law(const VectorX& variances, double M);
/// One draw by conditioning an unconstrained sample on its sum.
VectorX sample_conditional_gaussian(const VectorX& variances, double M, CounterRng& rng);

/// X_{N,m} = a^{-1/8} Σ ρ_{ij} W^{N,m}_{ij} with ρ the sign of the Φ block
/// (+1 at zero); no rounding of W when m is empty.
double tilt_statistic(const BlockObservables& obs, std::optional<int> m, Eigen::VectorXi* rho = nullptr);

/// Π exp(Φ̃W/Λ - ½Φ̃²/Λ).
double conditional_rn_factor(const BlockObservables& blocks);
double log_conditional_rn_factor(const BlockObservables& blocks);

/// ω_x = λ^a_x σ_x + Z_x, keyed by (seed, Tilt, replica, site).
VectorX tilted_disorder_sampler(const SpinVector& spins, const VectorX& lambda_a, const DisorderLaw& law,
                                std::uint64_t seed, std::uint64_t replica = 0);

/// log Z̃(ω) = log θ + log mean_k exp(Σ λ^a_x ω_x σ^k_x) over a bank of
/// pure configurations (columns of ±1). With log θ = -½ Σ (λ^a_x)² the tilt
/// is normalized exactly for every σ.
class PartitionBank {
 public:
  PartitionBank() = default;
  PartitionBank(MatrixX spins, VectorX lambda_a, double log_theta);

  Index size() const { return spins_.cols(); }
  double log_partition(const VectorX& omega) const;
  /// One value per column of `omegas`.
  VectorX log_partition_batch(const MatrixX& omegas) const;

 private:
  MatrixX spins_;  ///< sites x bank
  VectorX lambda_a_;
  double log_theta_ = 0.0;
};

struct CertificateSettings {
  std::optional<double> S;  ///< default log log(1/a) + log N
  double epsilon_quantile = 0.05;
};

struct TiltCertificate {
  int N = 1;
  int m = 0;
  double mesh = 0.0;
  double S = 0.0;
  double M = 0.0;
  double s2 = 0.0;             ///< s²_{N,a} = Σ (λ^a_x)²
  double rounding = 0.0;       ///< C_{N,m} a^{-1/8} = 2^{-m} N² a^{-1/8}
  std::vector<Eigen::VectorXi> rho;  ///< per pure replica, flat block order
  std::vector<double> X;             ///< X_{N,m} per pure replica
  double inv_f_gaussian = 0.0;  ///< 1 + (e^S - 1) P(X_N ≥ M - C a^{-1/8}), exact Gaussian survival
  double inv_f_mills = 0.0;     ///< same with the Mills-ratio tail bound (infinite when M ≤ C a^{-1/8})
  double inv_f_mc = 0.0;        ///< E_μ[1/f] from pure samples
  double inv_f_mc_se = 0.0;
  double tilt_f_over_z = 0.0;   ///< Ẽ[f/Z̃] = 1 - Ẽ[(1-f)/Z̃] from pure σ and tilted ω
  double tilt_f_over_z_se = 0.0;
  double tilt_f_over_z_raw = 0.0;  ///< plain average of f/Z̃
  double direct_f = 0.0;        ///< E_ν[f] from coupled disordered samples
  double direct_f_se = 0.0;
  double epsilon = 0.0;         ///< quantile of Z̃ under P
  double tilt_main = 0.0;       ///< ε^{-1} Ẽ[f 1{Z̃ ≥ ε}]
  double tilt_rest = 0.0;       ///< Ẽ[1{Z̃ < ε}/Z̃]
  double p_tilt_below_eps = 0.0;
  double m_over_s = 0.0;        ///< mean of m_{N,a}/s_{N,a} over pure replicas
  double product = 0.0;         ///< √Ẽ[f/Z̃] √E[1/f] (MC route for E[1/f])
  double product_se = 0.0;
  double product_gaussian = 0.0;  ///< √Ẽ[f/Z̃] √(Gaussian route)
};

/// Pure replicas drawn with fresh noise, tilted replicas with their Z̃ bank
/// estimate, and coupled disordered replicas, all at the finest N.
struct SingularitySamples {
  int N = 1;
  double mesh = 0.0;
  VectorX lambda_a;
  double log_theta = 0.0;
  std::vector<BlockObservables> pure;
  std::vector<BlockObservables> pure_null;
  std::vector<BlockObservables> disordered;
  std::vector<BlockObservables> tilted;
  std::vector<double> tilted_log_z;
  std::vector<double> disordered_log_z;  ///< first min(#disordered, #tilted) replicas
};

struct SingularityOptions {
  Profile lambda = profiles::constant(1.0);
  int N = 4;
  Index replicas = 20000;
  Index null_replicas = 20000;
  Index tilt_replicas = 4000;
  Index bank_size = 4000;
  Index pure_spacing = 4;       ///< Wolff sweeps between pure samples
  Index disorder_sweeps = 30;   ///< SW sweeps from a fresh pure start
  Index burn_in = 400;
  std::uint64_t seed = 1;
};

SingularitySamples sample_singularity(const Lattice& lat, const SingularityOptions& opt);

/// Certificate on one (N, m) cell from shared samples.
TiltCertificate certificate_from_samples(const SingularitySamples& s, int N, int m,
                                         const CertificateSettings& cfg = {});

/// Samples its own replicas (tilt and bank counts from `opt`) and evaluates
/// one cell.
TiltCertificate fractional_moment_certificate(const Lattice& lat, const Profile& lambda, int N, int m,
                                              std::optional<double> S, Index replicas,
                                              std::uint64_t seed = 1);

struct SingularityCell {
  int N = 1;
  int m = 0;
  BhattacharyyaEstimate bc;
  BhattacharyyaEstimate null_bc;
  TiltCertificate certificate;
  /// Plug-in BC after coarsen() and merge_blocks(); NaN when not applicable.
  double bc_coarsened = std::numeric_limits<double>::quiet_NaN();
  double bc_merged = std::numeric_limits<double>::quiet_NaN();
  bool data_processing_ok = true;
};

std::vector<SingularityCell> singularity_grid(const SingularitySamples& s, const std::vector<int>& Ns,
                                              const std::vector<int>& ms, const BootstrapOptions& boot = {},
                                              const CertificateSettings& cfg = {});

void write_singularity_csv(std::ostream& os, double lambda0, const std::vector<SingularityCell>& cells);

struct DivergenceRow {
  int N = 1;
  double mean = 0.0;
  double se = 0.0;
};

/// Σ_{i,j} |Φ̃_{λ,i,j}| per N over a stream of pure configurations.
std::vector<DivergenceRow> coarse_magnetisation_divergence(const Lattice& lat,
                                                           const std::vector<SpinVector>& stream,
                                                           const Profile& lambda, const std::vector<int>& Ns);

/// True iff no minus path (4-connectivity) inside D \ B joins a site next to B
/// to a site next to the outside of D, where D is the 3x3 block square centred
/// on block (i, j).
bool annulus_plus_circuit(const Lattice& lat, const BlockGrid& grid, const SpinVector& spins, int i, int j);

}  // namespace rfim
