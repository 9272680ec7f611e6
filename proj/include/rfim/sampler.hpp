#pragma once

#include <functional>
#include <string>
#include <vector>

#include "rfim/ising.hpp"
#include "rfim/rng.hpp"

namespace rfim {

using SpinVector = Eigen::VectorXi;

/// heatbath: sequential single-site sweeps, any real field.
/// wolff: single clusters with a ghost spin for a uniform boundary, zero field.
/// swendsen_wang: all clusters with a ghost spin carrying boundary and field couplings.
enum class Algorithm { heatbath, wolff, swendsen_wang };

const char* algorithm_name(Algorithm a);
Algorithm parse_algorithm(const std::string& s);

class GibbsSampler {
 public:
  GibbsSampler(const Lattice& lat, const ModelParams& p, Algorithm algo, std::uint64_t seed,
               std::uint64_t replica = 0);

  /// Replaces the real site field (heatbath and swendsen_wang only).
  void set_field(const VectorX& xi);
  /// One sweep: N site updates, clusters covering ≥ N sites, or one SW update.
  void sweep();
  void sweeps(Index k) {
    for (Index i = 0; i < k; ++i) sweep();
  }

  const SpinVector& spins() const { return spins_; }
  void set_spins(const SpinVector& s);
  double magnetisation() const { return spins_.cast<double>().sum(); }
  Algorithm algorithm() const { return algo_; }
  const Lattice& lattice() const { return lat_; }

 private:
  void heatbath_sweep();
  void wolff_sweep();
  void sw_sweep();

  const Lattice& lat_;
  ModelParams params_;
  Algorithm algo_;
  CounterRng rng_;
  SpinVector spins_;
  Eigen::VectorXi drive_;
  VectorX field_;
  int boundary_sign_ = 1;
  // wolff state
  Index clusters_per_sweep_ = 0;
  std::vector<int> stack_;
  std::vector<char> in_cluster_;
  std::vector<int> ghost_sites_;
  // union-find for swendsen_wang
  std::vector<int> parent_;
  std::vector<int> rank_;
  std::vector<signed char> flip_;
};

/// Windowed integrated autocorrelation time (window grows until M ≥ c τ(M)).
double integrated_autocorrelation_time(const std::vector<double>& series, double c = 6.0);

struct SamplingOptions {
  Algorithm algorithm = Algorithm::heatbath;
  Index pilot_sweeps = 256;
  double burn_factor = 20.0;
  Index spacing = 1;  ///< sweeps between recorded samples
};

struct SamplingReport {
  double tau_pilot = 0.0;
  double tau_int = 0.0;  ///< on the recorded magnetisation series, in samples
  Index burn_in = 0;
  Index samples = 0;
  double effective_samples() const { return samples / std::max(1.0, 2.0 * tau_int); }
};

/// Starts from all +, equilibrates for burn_factor × τ, then calls
/// visit(spins, k) for k = 0..n_samples-1.
SamplingReport sample_gibbs(const Lattice& lat, const ModelParams& p, Index n_samples, std::uint64_t seed,
                            const SamplingOptions& opt,
                            const std::function<void(const SpinVector&, Index)>& visit,
                            std::uint64_t replica = 0);

/// E[σ_x | neighbours] = tanh(β Σ_{y∼x} σ_y + ξ_x), an improved estimator of E[σ_x].
double conditional_spin_mean(const Lattice& lat, const ModelParams& p, const SpinVector& s, Index x);

/// Running first and second spin moments for MC correlation tables (k ≤ 2).
class CorrelationAccumulator {
 public:
  explicit CorrelationAccumulator(Index n);
  void add(const SpinVector& s);
  Index count() const { return count_; }
  CorrelationTable table(double mesh, int k_max) const;

 private:
  void flush() const;

  Index n_;
  Index count_ = 0;
  mutable Index pending_ = 0;
  mutable MatrixX buffer_;  ///< pending samples, one per column
  mutable VectorX first_;
  mutable MatrixX second_;
};

}  // namespace rfim
