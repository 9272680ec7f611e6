#include "rfim/sampler.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

namespace rfim {

const char* algorithm_name(Algorithm a) {
  switch (a) {
    case Algorithm::heatbath: return "heatbath";
    case Algorithm::wolff: return "wolff";
    case Algorithm::swendsen_wang: return "swendsen_wang";
  }
  return "?";
}

Algorithm parse_algorithm(const std::string& s) {
  if (s == "heatbath") return Algorithm::heatbath;
  if (s == "wolff") return Algorithm::wolff;
  if (s == "swendsen_wang" || s == "sw") return Algorithm::swendsen_wang;
  fail(Errc::InvalidArgument, "unknown algorithm '" + s + "'");
}

GibbsSampler::GibbsSampler(const Lattice& lat, const ModelParams& p, Algorithm algo, std::uint64_t seed,
                           std::uint64_t replica)
    : lat_(lat), params_(p), algo_(algo), rng_(seed, Purpose::Spins, replica) {
  require(p.real_field(), Errc::InvalidArgument, "complex fields cannot be sampled");
  spins_ = SpinVector::Ones(lat.size());
  drive_ = boundary_drive(lat, p);
  field_ = p.real_xi(lat.size());
  if (algo == Algorithm::wolff) {
    require(!p.has_field(), Errc::WolffWithField, "wolff sampler needs zero site field");
    require(p.uniform_boundary(&boundary_sign_), Errc::InvalidArgument,
            "wolff ghost spin needs a uniform boundary");
    in_cluster_.assign(lat.sites.size() + 1, 0);
    for (Index s = 0; s < lat.size(); ++s)
      if (!lat.boundary_bonds[s].empty()) ghost_sites_.push_back(static_cast<int>(s));
  }
  if (algo == Algorithm::swendsen_wang) {
    parent_.resize(lat.sites.size() + 1);
    rank_.resize(lat.sites.size() + 1);
    flip_.resize(lat.sites.size() + 1);
  }
}

void GibbsSampler::set_field(const VectorX& xi) {
  require(algo_ != Algorithm::wolff || xi.cwiseAbs().maxCoeff() == 0.0, Errc::WolffWithField,
          "wolff sampler needs zero site field");
  require(xi.size() == lat_.size(), Errc::InvalidArgument, "field length mismatch");
  field_ = xi;
}

void GibbsSampler::set_spins(const SpinVector& s) {
  require(s.size() == lat_.size(), Errc::InvalidArgument, "spin length mismatch");
  spins_ = s;
}

void GibbsSampler::sweep() {
  switch (algo_) {
    case Algorithm::heatbath: heatbath_sweep(); break;
    case Algorithm::wolff: wolff_sweep(); break;
    case Algorithm::swendsen_wang: sw_sweep(); break;
  }
}

void GibbsSampler::heatbath_sweep() {
  const Index n = lat_.size();
  const double beta = params_.beta;
  for (Index s = 0; s < n; ++s) {
    int local = drive_(s);
    for (int c : lat_.nbr[s])
      if (c >= 0) local += spins_(c);
    const double h = beta * local + field_(s);
    const double p_plus = 1.0 / (1.0 + std::exp(-2.0 * h));
    spins_(s) = rng_.uniform() < p_plus ? 1 : -1;
  }
}

// The ghost spin stands for the whole boundary; spins are kept gauge-fixed
// so that the boundary always reads boundary_sign_.
void GibbsSampler::wolff_sweep() {
  const Index n = lat_.size();
  const int ghost_node = static_cast<int>(n);
  const double beta = params_.beta;
  const double p_bond = 1.0 - std::exp(-2.0 * beta);
  // The cluster count per sweep is calibrated once (n / mean cluster size over
  // the first 64 clusters) and then frozen, so samples are not taken at a
  // state-dependent stopping time.
  const bool calibrating = clusters_per_sweep_ == 0;
  Index clusters = calibrating ? 64 : clusters_per_sweep_;
  Index flipped = 0;
  for (Index k = 0; k < clusters; ++k) {
    const int seed = static_cast<int>(rng_.below(static_cast<std::uint64_t>(n)));
    const int sign = spins_(seed);
    std::vector<int> members;
    stack_.clear();
    stack_.push_back(seed);
    in_cluster_[seed] = 1;
    bool ghost_in = false;
    const int bval = boundary_sign_;
    while (!stack_.empty()) {
      const int x = stack_.back();
      stack_.pop_back();
      if (x == ghost_node) {
        for (int y : ghost_sites_) {
          if (in_cluster_[y] || spins_(y) != sign) continue;
          const double p = 1.0 - std::exp(-2.0 * beta * double(lat_.boundary_bonds[y].size()));
          if (rng_.uniform() < p) {
            in_cluster_[y] = 1;
            stack_.push_back(y);
          }
        }
        continue;
      }
      members.push_back(x);
      for (int c : lat_.nbr[x]) {
        if (c < 0 || in_cluster_[c] || spins_(c) != sign) continue;
        if (rng_.uniform() < p_bond) {
          in_cluster_[c] = 1;
          stack_.push_back(c);
        }
      }
      const auto nb = lat_.boundary_bonds[x].size();
      if (nb && !ghost_in && bval == sign) {
        const double p = 1.0 - std::exp(-2.0 * beta * double(nb));
        if (rng_.uniform() < p) {
          ghost_in = true;
          in_cluster_[ghost_node] = 1;
          stack_.push_back(ghost_node);
        }
      }
    }
    for (int x : members) {
      spins_(x) = -spins_(x);
      in_cluster_[x] = 0;
    }
    in_cluster_[ghost_node] = 0;
    flipped += static_cast<Index>(members.size());
    if (ghost_in) {
      // Flipping the ghost cluster and then the whole system leaves the boundary
      // fixed and flips the complement instead.
      spins_ = -spins_;
    }
  }
  if (calibrating)
    clusters_per_sweep_ = std::max<Index>(1, static_cast<Index>(std::ceil(double(n) * 64 / double(flipped))));
}

void GibbsSampler::sw_sweep() {
  const Index n = lat_.size();
  const int ghost = static_cast<int>(n);
  std::iota(parent_.begin(), parent_.end(), 0);
  std::fill(rank_.begin(), rank_.end(), 0);
  auto find = [this](int x) {
    while (parent_[x] != x) {
      parent_[x] = parent_[parent_[x]];
      x = parent_[x];
    }
    return x;
  };
  auto unite = [&](int x, int y) {
    x = find(x);
    y = find(y);
    if (x == y) return;
    if (rank_[x] < rank_[y]) std::swap(x, y);
    parent_[y] = x;
    if (rank_[x] == rank_[y]) ++rank_[x];
  };
  const double beta = params_.beta;
  const double p_bond = 1.0 - std::exp(-2.0 * beta);
  for (const auto& b : lat_.bonds)
    if (spins_(b[0]) == spins_(b[1]) && rng_.uniform() < p_bond) unite(b[0], b[1]);
  for (Index s = 0; s < n; ++s) {
    const double k = beta * drive_(s) + field_(s);
    if (k == 0.0 || (k > 0) != (spins_(s) > 0)) continue;
    if (rng_.uniform() < 1.0 - std::exp(-2.0 * std::abs(k))) unite(static_cast<int>(s), ghost);
  }
  std::fill(flip_.begin(), flip_.end(), 0);
  const int g = find(ghost);
  flip_[g] = 1;
  for (Index s = 0; s < n; ++s) {
    const int r = find(static_cast<int>(s));
    if (!flip_[r]) flip_[r] = (rng_() >> 63) ? 2 : 1;  // 2 = flip
    if (flip_[r] == 2) spins_(s) = -spins_(s);
  }
}

double integrated_autocorrelation_time(const std::vector<double>& series, double c) {
  const std::size_t n = series.size();
  if (n < 4) return 0.5;
  const double mean = std::accumulate(series.begin(), series.end(), 0.0) / double(n);
  std::vector<double> d(n);
  for (std::size_t i = 0; i < n; ++i) d[i] = series[i] - mean;
  double c0 = 0.0;
  for (double v : d) c0 += v * v;
  c0 /= double(n);
  if (c0 <= 0.0) return 0.5;
  double tau = 0.5;
  for (std::size_t t = 1; t < n / 2; ++t) {
    double ct = 0.0;
    for (std::size_t i = 0; i + t < n; ++i) ct += d[i] * d[i + t];
    ct /= double(n - t);
    tau += ct / c0;
    if (double(t) >= c * tau) break;
  }
  return std::max(tau, 0.5);
}

SamplingReport sample_gibbs(const Lattice& lat, const ModelParams& p, Index n_samples, std::uint64_t seed,
                            const SamplingOptions& opt,
                            const std::function<void(const SpinVector&, Index)>& visit,
                            std::uint64_t replica) {
  GibbsSampler g(lat, p, opt.algorithm, seed, replica);
  SamplingReport rep;
  std::vector<double> pilot;
  pilot.reserve(opt.pilot_sweeps);
  for (Index i = 0; i < opt.pilot_sweeps; ++i) {
    g.sweep();
    pilot.push_back(g.magnetisation());
  }
  rep.tau_pilot = integrated_autocorrelation_time(pilot);
  const Index burn = static_cast<Index>(std::ceil(opt.burn_factor * rep.tau_pilot));
  if (burn > opt.pilot_sweeps) g.sweeps(burn - opt.pilot_sweeps);
  rep.burn_in = std::max(burn, opt.pilot_sweeps);
  std::vector<double> series;
  series.reserve(n_samples);
  for (Index k = 0; k < n_samples; ++k) {
    g.sweeps(opt.spacing);
    series.push_back(g.magnetisation());
    visit(g.spins(), k);
  }
  rep.samples = n_samples;
  rep.tau_int = integrated_autocorrelation_time(series);
  return rep;
}

double conditional_spin_mean(const Lattice& lat, const ModelParams& p, const SpinVector& s, Index x) {
  double local = 0.0;
  for (int c : lat.nbr[x]) local += c >= 0 ? s(c) : p.boundary_value(Lattice::boundary_index(c));
  const double xi = p.xi.size() ? p.xi(x).real() : 0.0;
  return std::tanh(p.beta * local + xi);
}

CorrelationAccumulator::CorrelationAccumulator(Index n)
    : n_(n), buffer_(n, 64), first_(VectorX::Zero(n)), second_(MatrixX::Zero(n, n)) {}

void CorrelationAccumulator::add(const SpinVector& s) {
  buffer_.col(pending_++) = s.cast<double>();
  ++count_;
  if (pending_ == buffer_.cols()) flush();
}

void CorrelationAccumulator::flush() const {
  if (!pending_) return;
  const auto b = buffer_.leftCols(pending_);
  first_ += b.rowwise().sum();
  second_.selfadjointView<Eigen::Lower>().rankUpdate(b);
  pending_ = 0;
}

CorrelationTable CorrelationAccumulator::table(double mesh, int k_max) const {
  require(k_max <= 2, Errc::DegreeExceeded, "MC tables hold degree ≤ 2");
  require(count_ > 0, Errc::EmptySamples, "no samples accumulated");
  flush();
  CorrelationTable t(n_, k_max, mesh, "mc");
  const double inv = 1.0 / double(count_);
  for (Index i = 0; i < n_; ++i) {
    if (k_max >= 1) t.set({static_cast<int>(i)}, first_(i) * inv);
    if (k_max >= 2)
      for (Index j = i + 1; j < n_; ++j) t.set({static_cast<int>(i), static_cast<int>(j)}, second_(j, i) * inv);
  }
  return t;
}

}  // namespace rfim
