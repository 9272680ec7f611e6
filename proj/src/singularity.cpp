#include "rfim/singularity.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>
#include <istream>
#include <numeric>
#include <ostream>

#include "rfim/stats.hpp"

namespace rfim {

const char* provenance_name(Provenance p) {
  switch (p) {
    case Provenance::pure: return "pure";
    case Provenance::disordered: return "disordered";
    case Provenance::tilted: return "tilted";
  }
  return "?";
}

BlockObservables block_observables(const Lattice& lat, const BlockGrid& grid, const SpinVector& spins,
                                   const VectorX& omega, const Profile& lambda, Provenance tag) {
  require(spins.size() == lat.size() && omega.size() == lat.size(), Errc::InvalidArgument,
          "spins and noise must match the lattice");
  const double a = lat.mesh;
  const double mass = std::pow(a, 15.0 / 8);
  BlockObservables o;
  o.N = grid.N;
  o.mesh = a;
  o.tag = tag;
  o.Phi = MatrixX::Zero(grid.N, grid.N);
  o.W = MatrixX::Zero(grid.N, grid.N);
  o.Lambda = MatrixX::Zero(grid.N, grid.N);
  for (Index s = 0; s < lat.size(); ++s) {
    const double l = lambda(lat.sites[s]);
    const int i = grid.assignment[s][0] - 1;
    const int j = grid.assignment[s][1] - 1;
    o.Phi(i, j) += mass * l * l * spins(s);
    o.W(i, j) += a * l * omega(s);
    o.Lambda(i, j) += a * a * l * l;
  }
  return o;
}

BlockObservables block_observables(const MagnetisationField& field, const WhiteNoiseGrid& noise,
                                   const Profile& lambda, int N, Provenance tag) {
  require(field.lattice != nullptr, Errc::InvalidArgument, "field without lattice");
  const Lattice& lat = *field.lattice;
  require(noise.values.size() == lat.size() && std::abs(noise.mesh - lat.mesh) < 1e-12, Errc::InvalidArgument,
          "noise grid must be the lattice-level grid");
  return block_observables(lat, build_block_grid(lat, N), field.spins, noise.values, lambda, tag);
}

BlockObservables coarse_blocks(const BlockObservables& obs, int N_target) {
  require(N_target >= 1 && obs.N % N_target == 0, Errc::InvalidArgument, "target N must divide N");
  if (N_target == obs.N) return obs;
  const int f = obs.N / N_target;
  BlockObservables o;
  o.N = N_target;
  o.mesh = obs.mesh;
  o.tag = obs.tag;
  o.Phi = MatrixX::Zero(N_target, N_target);
  o.W = MatrixX::Zero(N_target, N_target);
  o.Lambda = MatrixX::Zero(N_target, N_target);
  for (int i = 0; i < obs.N; ++i)
    for (int j = 0; j < obs.N; ++j) {
      o.Phi(i / f, j / f) += obs.Phi(i, j);
      o.W(i / f, j / f) += obs.W(i, j);
      o.Lambda(i / f, j / f) += obs.Lambda(i, j);
    }
  return o;
}

SmearingGap smeared_atomic_gap(const Lattice& lat, const BlockGrid& grid, const SpinVector& spins,
                               const Profile& lambda) {
  const double a = lat.mesh;
  const Profile lambda2 = [&](const Point& p) {
    const double l = lambda(p);
    return l * l;
  };
  const VectorX cells = cell_integrals(lat, lambda2);
  MatrixX gap = MatrixX::Zero(grid.N, grid.N);
  double sup = 0.0, sup_grad = 0.0;
  const double step = 1e-5;
  for (Index s = 0; s < lat.size(); ++s) {
    const Point& x = lat.sites[s];
    const double l = lambda(x);
    gap(grid.assignment[s][0] - 1, grid.assignment[s][1] - 1) +=
        std::pow(a, 15.0 / 8) * spins(s) * (l * l - cells(s) / (a * a));
    sup = std::max(sup, std::abs(l));
    const double gx = (lambda(x + Point(step, 0)) - lambda(x - Point(step, 0))) / (2 * step);
    const double gy = (lambda(x + Point(0, step)) - lambda(x - Point(0, step))) / (2 * step);
    sup_grad = std::max(sup_grad, std::hypot(gx, gy));
  }
  SmearingGap g;
  g.max_gap = gap.cwiseAbs().maxCoeff();
  g.bound = 2.0 * std::pow(a, 7.0 / 8) / (double(grid.N) * grid.N) * sup * sup_grad;
  return g;
}

std::int64_t dyadic_bin(double x, int m) {
  require(m >= 0, Errc::InvalidArgument, "resolution must be nonnegative");
  return static_cast<std::int64_t>(std::floor(std::ldexp(x, m)));
}

double dyadic_discretize(double x, int m) { return std::ldexp(static_cast<double>(dyadic_bin(x, m)), -m); }

MatrixX dyadic_discretize(const MatrixX& x, int m) {
  return x.unaryExpr([m](double v) { return dyadic_discretize(v, m); });
}

// ---------------------------------------------------------------------------
// Empirical joint laws

std::size_t EmpiricalJointLaw::KeyHash::operator()(const Key& k) const noexcept {
  std::uint64_t h = golden;
  for (auto v : k) h = mix64(h ^ static_cast<std::uint64_t>(v));
  return static_cast<std::size_t>(h);
}

EmpiricalJointLaw::Key EmpiricalJointLaw::key_of(const BlockObservables& obs, int m) {
  const int N = obs.N;
  Key k(static_cast<std::size_t>(2 * N * N));
  for (int i = 0; i < N; ++i)
    for (int j = 0; j < N; ++j) {
      k[static_cast<std::size_t>(i * N + j)] = dyadic_bin(obs.W(i, j), m);
      k[static_cast<std::size_t>(N * N + i * N + j)] = dyadic_bin(obs.Phi(i, j), m);
    }
  return k;
}

void EmpiricalJointLaw::add(const BlockObservables& obs) {
  require(obs.N == N_, Errc::InvalidArgument, "block count mismatch");
  add_key(key_of(obs, m_));
}

void EmpiricalJointLaw::add_key(const Key& k, Index count) {
  require(k.size() == static_cast<std::size_t>(2 * N_ * N_), Errc::InvalidArgument, "key length mismatch");
  require(count >= 0, Errc::InvalidArgument, "negative count");
  if (count == 0) return;
  counts_[k] += count;
  total_ += count;
}

void EmpiricalJointLaw::merge(const EmpiricalJointLaw& other) {
  require(other.N_ == N_ && other.m_ == m_, Errc::InvalidArgument, "merging laws on different grids");
  for (const auto& [k, c] : other.counts_) add_key(k, c);
}

Index EmpiricalJointLaw::count(const Key& k) const {
  const auto it = counts_.find(k);
  return it == counts_.end() ? 0 : it->second;
}

double EmpiricalJointLaw::probability(const Key& k) const {
  return total_ ? static_cast<double>(count(k)) / static_cast<double>(total_) : 0.0;
}

EmpiricalJointLaw EmpiricalJointLaw::coarsen() const {
  require(m_ >= 1, Errc::InvalidArgument, "cannot coarsen below m = 0");
  EmpiricalJointLaw out(N_, m_ - 1);
  for (const auto& [k, c] : counts_) {
    Key q = k;
    for (auto& v : q) v >>= 1;  // arithmetic shift is floor division by 2
    out.add_key(q, c);
  }
  return out;
}

EmpiricalJointLaw EmpiricalJointLaw::merge_blocks() const {
  require(N_ >= 2, Errc::InvalidArgument, "cannot merge a single block");
  const int n = N_ / 2;
  EmpiricalJointLaw out(n, m_);
  const std::size_t half = static_cast<std::size_t>(N_) * N_;
  for (const auto& [k, c] : counts_) {
    Key q(static_cast<std::size_t>(2 * n * n), 0);
    for (int i = 0; i < N_; ++i)
      for (int j = 0; j < N_; ++j) {
        const std::size_t src = static_cast<std::size_t>(i * N_ + j);
        const std::size_t dst = static_cast<std::size_t>((i / 2) * n + j / 2);
        q[dst] += k[src];
        q[static_cast<std::size_t>(n * n) + dst] += k[half + src];
      }
    out.add_key(q, c);
  }
  return out;
}

std::vector<std::pair<EmpiricalJointLaw::Key, Index>> EmpiricalJointLaw::sorted() const {
  std::vector<std::pair<Key, Index>> v(counts_.begin(), counts_.end());
  std::sort(v.begin(), v.end());
  return v;
}

namespace {

constexpr char hist_magic[8] = {'R', 'F', 'I', 'M', 'H', 'I', 'S', 'T'};

template <class T>
void put(std::ostream& os, T v) {
  os.write(reinterpret_cast<const char*>(&v), sizeof(T));
}

template <class T>
T get(std::istream& is) {
  T v{};
  is.read(reinterpret_cast<char*>(&v), sizeof(T));
  require(static_cast<bool>(is), Errc::IoError, "truncated histogram file");
  return v;
}

}  // namespace

void EmpiricalJointLaw::write_binary(std::ostream& os) const {
  os.write(hist_magic, sizeof hist_magic);
  put<std::int32_t>(os, N_);
  put<std::int32_t>(os, m_);
  put<std::int64_t>(os, total_);
  put<std::uint64_t>(os, counts_.size());
  for (const auto& [k, c] : sorted()) {
    for (auto v : k) put<std::int64_t>(os, v);
    put<std::int64_t>(os, c);
  }
  require(static_cast<bool>(os), Errc::IoError, "histogram write failed");
}

EmpiricalJointLaw EmpiricalJointLaw::read_binary(std::istream& is) {
  char magic[8];
  is.read(magic, sizeof magic);
  require(is && std::memcmp(magic, hist_magic, sizeof magic) == 0, Errc::IoError, "not a histogram file");
  const int N = get<std::int32_t>(is);
  const int m = get<std::int32_t>(is);
  const auto total = get<std::int64_t>(is);
  const auto bins = get<std::uint64_t>(is);
  EmpiricalJointLaw law(N, m);
  Key k(static_cast<std::size_t>(2 * N * N));
  for (std::uint64_t b = 0; b < bins; ++b) {
    for (auto& v : k) v = get<std::int64_t>(is);
    law.add_key(k, get<std::int64_t>(is));
  }
  require(law.total() == total, Errc::IoError, "histogram total mismatch");
  return law;
}

double bhattacharyya(const EmpiricalJointLaw& p, const EmpiricalJointLaw& q) {
  require(p.total() > 0 && q.total() > 0, Errc::EmptySamples, "empty histogram");
  require(p.N() == q.N() && p.m() == q.m(), Errc::InvalidArgument, "laws on different grids");
  const auto& small = p.bins() <= q.bins() ? p : q;
  const auto& large = p.bins() <= q.bins() ? q : p;
  double s = 0.0;
  for (const auto& [k, c] : small.counts()) {
    const Index d = large.count(k);
    if (d) s += std::sqrt(static_cast<double>(c) * static_cast<double>(d));
  }
  return std::min(1.0, s / std::sqrt(static_cast<double>(p.total()) * static_cast<double>(q.total())));
}

BhattacharyyaEstimate bhattacharyya_fractional_moment(const std::vector<BlockObservables>& pure,
                                                      const std::vector<BlockObservables>& disordered,
                                                      int m, const BootstrapOptions& opt) {
  require(!pure.empty() && !disordered.empty(), Errc::EmptySamples, "both sample sets must be nonempty");
  const int N = pure.front().N;
  std::unordered_map<EmpiricalJointLaw::Key, int, EmpiricalJointLaw::KeyHash> ids;
  auto label = [&](const std::vector<BlockObservables>& set) {
    std::vector<int> out;
    out.reserve(set.size());
    for (const auto& o : set) {
      require(o.N == N, Errc::InvalidArgument, "mixed block counts");
      const auto [it, fresh] = ids.emplace(EmpiricalJointLaw::key_of(o, m), static_cast<int>(ids.size()));
      out.push_back(it->second);
    }
    return out;
  };
  const std::vector<int> lp = label(pure);
  const std::vector<int> lq = label(disordered);
  const std::size_t K = ids.size();
  const double np = static_cast<double>(lp.size()), nq = static_cast<double>(lq.size());

  std::vector<double> cp(K, 0.0), cq(K, 0.0);
  auto bc_of = [&]() {
    double s = 0.0;
    for (std::size_t k = 0; k < K; ++k)
      if (cp[k] > 0 && cq[k] > 0) s += std::sqrt(cp[k] * cq[k]);
    return std::min(1.0, s / std::sqrt(np * nq));
  };

  BhattacharyyaEstimate e;
  for (int v : lp) cp[v] += 1;
  for (int v : lq) cq[v] += 1;
  e.value = bc_of();
  e.n_pure = static_cast<Index>(lp.size());
  e.n_disordered = static_cast<Index>(lq.size());
  e.bins = K;
  {
    std::vector<double> pooled(K);
    for (std::size_t k = 0; k < K; ++k) pooled[k] = cp[k] + cq[k];
    std::sort(pooled.begin(), pooled.end(), std::greater<>());
    const std::size_t top = std::max<std::size_t>(1, (K + 9) / 10);
    e.top_decile_occupancy = std::accumulate(pooled.begin(), pooled.begin() + top, 0.0) / top;
  }

  std::vector<double> boot;
  boot.reserve(static_cast<std::size_t>(opt.resamples));
  for (Index b = 0; b < opt.resamples; ++b) {
    CounterRng rng(opt.seed, Purpose::Bootstrap, static_cast<std::uint64_t>(b));
    std::fill(cp.begin(), cp.end(), 0.0);
    std::fill(cq.begin(), cq.end(), 0.0);
    for (std::size_t r = 0; r < lp.size(); ++r) cp[lp[rng.below(lp.size())]] += 1;
    for (std::size_t r = 0; r < lq.size(); ++r) cq[lq[rng.below(lq.size())]] += 1;
    boot.push_back(bc_of());
  }
  if (boot.empty()) {
    e.ci_lo = e.ci_hi = e.value;
    return e;
  }
  std::sort(boot.begin(), boot.end());
  auto pct = [&](double q) {
    const double pos = q * (boot.size() - 1);
    const std::size_t lo = static_cast<std::size_t>(std::floor(pos));
    const std::size_t hi = std::min(lo + 1, boot.size() - 1);
    return boot[lo] + (pos - lo) * (boot[hi] - boot[lo]);
  };
  // Basic bootstrap: the plug-in BC is biased low on sparse bins and the
  // percentile interval inherits that bias twice.
  const double tail = 0.5 * (1.0 - opt.level);
  e.ci_lo = std::clamp(2 * e.value - pct(1.0 - tail), 0.0, 1.0);
  e.ci_hi = std::clamp(2 * e.value - pct(tail), 0.0, 1.0);
  e.se = mean_se(boot).sd;
  return e;
}

// ---------------------------------------------------------------------------
// Conditional Gaussian and Radon-Nikodym factors

ConditionalGaussian conditional_gaussian_law(const VectorX& variances, double M) {
  require(variances.size() > 0 && variances.minCoeff() > 0, Errc::InvalidArgument, "variances must be positive");
  const double total = variances.sum();
  ConditionalGaussian g;
  g.mean = variances * (M / total);
  g.covariance = -variances * variances.transpose() / total;
  g.covariance.diagonal() += variances;
  return g;
}

VectorX sample_conditional_gaussian(const VectorX& variances, double M, CounterRng& rng) {
  require(variances.size() > 0 && variances.minCoeff() > 0, Errc::InvalidArgument, "variances must be positive");
  VectorX x(variances.size());
  for (Index k = 0; k < x.size(); ++k) x(k) = std::sqrt(variances(k)) * rng.normal();
  return x - variances * ((x.sum() - M) / variances.sum());
}

double tilt_statistic(const BlockObservables& obs, std::optional<int> m, Eigen::VectorXi* rho) {
  const int N = obs.N;
  double x = 0.0;
  if (rho) rho->resize(N * N);
  for (int i = 0; i < N; ++i)
    for (int j = 0; j < N; ++j) {
      const int r = obs.Phi(i, j) >= 0 ? 1 : -1;
      if (rho) (*rho)(i * N + j) = r;
      x += r * (m ? dyadic_discretize(obs.W(i, j), *m) : obs.W(i, j));
    }
  return std::pow(obs.mesh, -1.0 / 8) * x;
}

double log_conditional_rn_factor(const BlockObservables& b) {
  double s = 0.0;
  for (Index i = 0; i < b.Phi.size(); ++i) {
    const double L = b.Lambda.data()[i];
    require(L > 0, Errc::ZeroBlockMass, "block without sites or with λ = 0");
    const double p = b.Phi.data()[i];
    s += p * b.W.data()[i] / L - 0.5 * p * p / L;
  }
  return s;
}

double conditional_rn_factor(const BlockObservables& b) { return std::exp(log_conditional_rn_factor(b)); }

VectorX tilted_disorder_sampler(const SpinVector& spins, const VectorX& lambda_a, const DisorderLaw& law,
                                std::uint64_t seed, std::uint64_t replica) {
  require(law.family == LawFamily::gaussian, Errc::NonGaussianLaw, "the tilt is Gaussian only");
  require(spins.size() == lambda_a.size(), Errc::InvalidArgument, "size mismatch");
  const std::uint64_t key = derive_key(seed, Purpose::Tilt, replica);
  VectorX w(spins.size());
  for (Index x = 0; x < w.size(); ++x) w(x) = lambda_a(x) * spins(x) + normal_at(key, static_cast<std::uint64_t>(x));
  return w;
}

PartitionBank::PartitionBank(MatrixX spins, VectorX lambda_a, double log_theta)
    : spins_(std::move(spins)), lambda_a_(std::move(lambda_a)), log_theta_(log_theta) {
  require(spins_.rows() == lambda_a_.size() && spins_.cols() > 0, Errc::InvalidArgument, "empty or mismatched bank");
}

VectorX PartitionBank::log_partition_batch(const MatrixX& omegas) const {
  require(omegas.rows() == spins_.rows(), Errc::InvalidArgument, "noise size mismatch");
  VectorX out(omegas.cols());
  const double logB = std::log(static_cast<double>(spins_.cols()));
  constexpr Index chunk = 256;
  for (Index c0 = 0; c0 < omegas.cols(); c0 += chunk) {
    const Index nc = std::min(chunk, omegas.cols() - c0);
    const MatrixX xi = lambda_a_.asDiagonal() * omegas.middleCols(c0, nc);
    const MatrixX e = spins_.transpose() * xi;  // bank x nc
    for (Index c = 0; c < nc; ++c) {
      const double mx = e.col(c).maxCoeff();
      out(c0 + c) = log_theta_ + mx + std::log((e.col(c).array() - mx).exp().sum()) - logB;
    }
  }
  return out;
}

double PartitionBank::log_partition(const VectorX& omega) const { return log_partition_batch(omega)(0); }

// ---------------------------------------------------------------------------
// Sampling

SingularitySamples sample_singularity(const Lattice& lat, const SingularityOptions& opt) {
  const BlockGrid grid = build_block_grid(lat, opt.N);
  const double a = lat.mesh;
  SingularitySamples s;
  s.N = opt.N;
  s.mesh = a;
  s.lambda_a.resize(lat.size());
  for (Index x = 0; x < lat.size(); ++x) s.lambda_a(x) = std::pow(a, 7.0 / 8) * opt.lambda(lat.sites[x]);
  s.log_theta = -0.5 * s.lambda_a.squaredNorm();
  const ModelParams plus = ModelParams::plus(lat);
  const std::uint64_t seed = opt.seed;

  auto chain = [&](std::uint64_t stream) {
    GibbsSampler g(lat, plus, Algorithm::wolff, seed, stream);
    g.sweeps(opt.burn_in);
    return g;
  };
  auto noise = [&](std::uint64_t stream, Index r) {
    return sample_white_noise_grid(lat, derive_key(seed, Purpose::Replica, stream), static_cast<std::uint64_t>(r))
        .values;
  };

  const bool zero_lambda = s.lambda_a.cwiseAbs().maxCoeff() == 0.0;
  PartitionBank bank;
  if (opt.bank_size > 0 && (opt.tilt_replicas > 0 || opt.replicas > 0)) {
    GibbsSampler g = chain(10);
    MatrixX spins(lat.size(), opt.bank_size);
    for (Index k = 0; k < opt.bank_size; ++k) {
      g.sweeps(opt.pure_spacing);
      spins.col(k) = g.spins().cast<double>();
    }
    bank = PartitionBank(std::move(spins), s.lambda_a, s.log_theta);
  }

  // Pure replicas; the first tilt_replicas configurations also carry tilted noise.
  {
    GibbsSampler g = chain(1);
    MatrixX pending(lat.size(), 0);
    std::vector<Index> pending_idx;
    const Index n_tilt = bank.size() ? opt.tilt_replicas : 0;
    s.tilted_log_z.resize(static_cast<std::size_t>(n_tilt));
    auto flush = [&]() {
      if (pending_idx.empty()) return;
      const VectorX lz = zero_lambda ? VectorX::Zero(pending.cols()) : bank.log_partition_batch(pending);
      for (std::size_t c = 0; c < pending_idx.size(); ++c) s.tilted_log_z[pending_idx[c]] = lz(Index(c));
      pending.resize(lat.size(), 0);
      pending_idx.clear();
    };
    const Index total = std::max(opt.replicas, n_tilt);
    for (Index r = 0; r < total; ++r) {
      g.sweeps(opt.pure_spacing);
      if (r < opt.replicas)
        s.pure.push_back(block_observables(lat, grid, g.spins(), noise(1, r), opt.lambda, Provenance::pure));
      if (r < n_tilt) {
        const VectorX w = tilted_disorder_sampler(g.spins(), s.lambda_a, DisorderLaw{}, seed,
                                                  static_cast<std::uint64_t>(r));
        s.tilted.push_back(block_observables(lat, grid, g.spins(), w, opt.lambda, Provenance::tilted));
        pending.conservativeResize(Eigen::NoChange, pending.cols() + 1);
        pending.col(pending.cols() - 1) = w;
        pending_idx.push_back(r);
        if (pending.cols() == 256) flush();
      }
    }
    flush();
  }

  if (opt.null_replicas > 0) {
    GibbsSampler g = chain(2);
    for (Index r = 0; r < opt.null_replicas; ++r) {
      g.sweeps(opt.pure_spacing);
      s.pure_null.push_back(block_observables(lat, grid, g.spins(), noise(2, r), opt.lambda, Provenance::pure));
    }
  }

  // Coupled disordered replicas: ω from the same noise grid as the W blocks.
  {
    GibbsSampler start = chain(3);
    GibbsSampler sw(lat, plus, Algorithm::swendsen_wang, seed, 4);
    const Index n_z = bank.size() ? std::min(opt.replicas, opt.tilt_replicas) : 0;
    MatrixX omegas(lat.size(), n_z);
    for (Index r = 0; r < opt.replicas; ++r) {
      start.sweeps(opt.pure_spacing);
      const VectorX w = noise(3, r);
      sw.set_spins(start.spins());
      sw.set_field(s.lambda_a.cwiseProduct(w));
      sw.sweeps(opt.disorder_sweeps);
      s.disordered.push_back(block_observables(lat, grid, sw.spins(), w, opt.lambda, Provenance::disordered));
      if (r < n_z) omegas.col(r) = w;
    }
    if (n_z > 0) {
      const VectorX lz = zero_lambda ? VectorX::Zero(n_z) : bank.log_partition_batch(omegas);
      s.disordered_log_z.assign(lz.data(), lz.data() + lz.size());
    }
  }
  return s;
}

// ---------------------------------------------------------------------------
// Certificate

namespace {

std::vector<BlockObservables> coarse_all(const std::vector<BlockObservables>& v, int N) {
  std::vector<BlockObservables> out;
  out.reserve(v.size());
  for (const auto& o : v) out.push_back(coarse_blocks(o, N));
  return out;
}

double quantile(std::vector<double> v, double q) {
  std::sort(v.begin(), v.end());
  const double pos = q * (v.size() - 1);
  const std::size_t lo = static_cast<std::size_t>(std::floor(pos));
  const std::size_t hi = std::min(lo + 1, v.size() - 1);
  return v[lo] + (pos - lo) * (v[hi] - v[lo]);
}

TiltCertificate certificate_on(const SingularitySamples& s, const std::vector<BlockObservables>& pure,
                               const std::vector<BlockObservables>& tilted,
                               const std::vector<BlockObservables>& disordered, int N, int m,
                               const CertificateSettings& cfg) {
  require(!pure.empty(), Errc::EmptySamples, "certificate needs pure replicas");
  const double a = s.mesh;
  TiltCertificate c;
  c.N = N;
  c.m = m;
  c.mesh = a;
  c.S = cfg.S ? *cfg.S : std::log(std::log(1.0 / a)) + std::log(double(N));
  require(c.S > 0, Errc::InvalidArgument, "S must be positive");
  c.s2 = s.lambda_a.squaredNorm();
  c.M = std::sqrt(4.0 * c.S * c.s2);
  c.rounding = std::ldexp(double(N) * N, -m) * std::pow(a, -1.0 / 8);
  const double eS = std::exp(c.S);
  // M = 0 only for λ ≡ 0, where the tilt is switched off.
  auto f_of = [&](double x) { return c.M > 0 && x >= c.M ? std::exp(-c.S) : 1.0; };

  RunningStats inv_f, ratio;
  for (const auto& o : pure) {
    Eigen::VectorXi rho;
    const double x = tilt_statistic(o, m, &rho);
    c.rho.push_back(rho);
    c.X.push_back(x);
    inv_f.add(1.0 / f_of(x));
    ratio.add(std::pow(a, -1.0 / 8) * o.Phi.cwiseAbs().sum() / std::sqrt(c.s2));
  }
  c.inv_f_mc = inv_f.mean();
  c.inv_f_mc_se = inv_f.se();
  c.m_over_s = ratio.mean();

  const double sd = std::sqrt(c.s2);
  if (sd > 0) {
    const double t = (c.M - c.rounding) / sd;
    c.inv_f_gaussian = 1.0 + (eS - 1.0) * (1.0 - normal_cdf(t));
    c.inv_f_mills = t > 0 ? 1.0 + (eS - 1.0) * std::exp(-0.5 * t * t) / (t * std::sqrt(2 * M_PI))
                          : std::numeric_limits<double>::infinity();
  } else {
    c.inv_f_gaussian = c.inv_f_mills = 1.0;
  }

  std::vector<double> z_under_p;
  for (double lz : s.disordered_log_z) z_under_p.push_back(std::exp(lz));
  if (z_under_p.empty())
    for (double lz : s.tilted_log_z) z_under_p.push_back(std::exp(lz));
  c.epsilon = z_under_p.empty() ? 0.0 : quantile(z_under_p, cfg.epsilon_quantile);

  if (!tilted.empty()) {
    RunningStats t, raw, main, rest, below;
    for (std::size_t r = 0; r < tilted.size(); ++r) {
      const double f = f_of(tilt_statistic(tilted[r], m));
      const double z = std::exp(s.tilted_log_z[r]);
      // Ẽ[1/Z̃] = 1, so only the event {f < 1} carries variance.
      t.add(1.0 - (1.0 - f) / z);
      raw.add(f / z);
      main.add(z >= c.epsilon ? f : 0.0);
      rest.add(z < c.epsilon ? 1.0 / z : 0.0);
      below.add(z < c.epsilon ? 1.0 : 0.0);
    }
    c.tilt_f_over_z = t.mean();
    c.tilt_f_over_z_se = t.se();
    c.tilt_f_over_z_raw = raw.mean();
    c.tilt_main = c.epsilon > 0 ? main.mean() / c.epsilon : 0.0;
    c.tilt_rest = rest.mean();
    c.p_tilt_below_eps = below.mean();
  }
  if (!disordered.empty()) {
    RunningStats d;
    for (const auto& o : disordered) d.add(f_of(tilt_statistic(o, m)));
    c.direct_f = d.mean();
    c.direct_f_se = d.se();
  }
  const double ef = tilted.empty() ? c.direct_f : c.tilt_f_over_z;
  const double ef_se = tilted.empty() ? c.direct_f_se : c.tilt_f_over_z_se;
  c.product = std::sqrt(ef * c.inv_f_mc);
  c.product_gaussian = std::sqrt(ef * c.inv_f_gaussian);
  c.product_se = ef > 0 ? 0.5 * c.product * std::hypot(ef_se / ef, c.inv_f_mc_se / c.inv_f_mc) : 0.0;
  return c;
}

}  // namespace

TiltCertificate certificate_from_samples(const SingularitySamples& s, int N, int m, const CertificateSettings& cfg) {
  return certificate_on(s, coarse_all(s.pure, N), coarse_all(s.tilted, N), coarse_all(s.disordered, N), N, m, cfg);
}

TiltCertificate fractional_moment_certificate(const Lattice& lat, const Profile& lambda, int N, int m,
                                              std::optional<double> S, Index replicas, std::uint64_t seed) {
  require(replicas > 0, Errc::EmptySamples, "no replicas");
  SingularityOptions o;
  o.lambda = lambda;
  o.N = N;
  o.replicas = replicas;
  o.null_replicas = 0;
  o.tilt_replicas = replicas;
  o.bank_size = std::min<Index>(replicas, 2000);
  o.seed = seed;
  CertificateSettings cfg;
  cfg.S = S;
  return certificate_from_samples(sample_singularity(lat, o), N, m, cfg);
}

std::vector<SingularityCell> singularity_grid(const SingularitySamples& s, const std::vector<int>& Ns,
                                              const std::vector<int>& ms, const BootstrapOptions& boot,
                                              const CertificateSettings& cfg) {
  std::vector<SingularityCell> cells;
  for (int N : Ns) {
    const auto pure = coarse_all(s.pure, N);
    const auto null = coarse_all(s.pure_null, N);
    const auto dis = coarse_all(s.disordered, N);
    const auto tilt = coarse_all(s.tilted, N);
    for (int m : ms) {
      SingularityCell cell;
      cell.N = N;
      cell.m = m;
      BootstrapOptions b = boot;
      b.seed = derive_key(boot.seed, Purpose::Bootstrap, static_cast<std::uint64_t>(N), static_cast<std::uint64_t>(m));
      cell.bc = bhattacharyya_fractional_moment(pure, dis, m, b);
      if (!null.empty()) {
        b.seed = mix64(b.seed);
        cell.null_bc = bhattacharyya_fractional_moment(pure, null, m, b);
      }
      cell.certificate = certificate_on(s, pure, tilt, dis, N, m, cfg);
      EmpiricalJointLaw lp(N, m), lq(N, m);
      for (const auto& o : pure) lp.add(o);
      for (const auto& o : dis) lq.add(o);
      const double base = bhattacharyya(lp, lq);
      if (m >= 1) cell.bc_coarsened = bhattacharyya(lp.coarsen(), lq.coarsen());
      if (N >= 2) cell.bc_merged = bhattacharyya(lp.merge_blocks(), lq.merge_blocks());
      cell.data_processing_ok = !(cell.bc_coarsened < base - 1e-12) && !(cell.bc_merged < base - 1e-12);
      cells.push_back(std::move(cell));
    }
  }
  return cells;
}

void write_singularity_csv(std::ostream& os, double lambda0, const std::vector<SingularityCell>& cells) {
  os << "lambda0,N,m,mesh,bc,bc_ci_lo,bc_ci_hi,bc_se,n_pure,n_disordered,bins,top_decile_occupancy,"
        "null_bc,null_ci_lo,null_ci_hi,S,M,inv_f_mc,inv_f_gaussian,tilt_f_over_z,direct_f,product,product_se,"
        "product_gaussian,m_over_s,epsilon,p_tilt_below_eps,bc_coarsened,bc_merged,data_processing_ok\n";
  os.precision(10);
  for (const auto& c : cells) {
    const auto& t = c.certificate;
    os << lambda0 << ',' << c.N << ',' << c.m << ',' << t.mesh << ',' << c.bc.value << ',' << c.bc.ci_lo << ','
       << c.bc.ci_hi << ',' << c.bc.se << ',' << c.bc.n_pure << ',' << c.bc.n_disordered << ',' << c.bc.bins << ','
       << c.bc.top_decile_occupancy << ',' << c.null_bc.value << ',' << c.null_bc.ci_lo << ',' << c.null_bc.ci_hi
       << ',' << t.S << ',' << t.M << ',' << t.inv_f_mc << ',' << t.inv_f_gaussian << ',' << t.tilt_f_over_z << ','
       << t.direct_f << ',' << t.product << ',' << t.product_se << ',' << t.product_gaussian << ',' << t.m_over_s
       << ',' << t.epsilon << ',' << t.p_tilt_below_eps << ',' << c.bc_coarsened << ',' << c.bc_merged << ','
       << (c.data_processing_ok ? 1 : 0) << '\n';
  }
}

// ---------------------------------------------------------------------------
// Coarse magnetisation and circuits

std::vector<DivergenceRow> coarse_magnetisation_divergence(const Lattice& lat,
                                                           const std::vector<SpinVector>& stream,
                                                           const Profile& lambda, const std::vector<int>& Ns) {
  VectorX w(lat.size());
  for (Index x = 0; x < lat.size(); ++x) {
    const double l = lambda(lat.sites[x]);
    w(x) = std::pow(lat.mesh, 15.0 / 8) * l * l;
  }
  std::vector<DivergenceRow> rows;
  for (int N : Ns) {
    const BlockGrid grid = build_block_grid(lat, N);
    RunningStats st;
    VectorX blocks(grid.block_count());
    for (const auto& s : stream) {
      blocks.setZero();
      for (Index x = 0; x < lat.size(); ++x) blocks(grid.block_of(x)) += w(x) * s(x);
      st.add(blocks.cwiseAbs().sum());
    }
    rows.push_back({N, st.mean(), st.se()});
  }
  return rows;
}

namespace {

int find_root(std::vector<int>& parent, int x) {
  while (parent[x] != x) {
    parent[x] = parent[parent[x]];
    x = parent[x];
  }
  return x;
}

}  // namespace

bool annulus_plus_circuit(const Lattice& lat, const BlockGrid& grid, const SpinVector& spins, int i, int j) {
  const int N = grid.N;
  require(i >= 2 && i <= N - 1 && j >= 2 && j <= N - 1, Errc::AnnulusOutsideDomain,
          "the 3x3 block square around (i, j) must lie inside the domain");
  auto in_outer = [&](Index s) {
    const auto& b = grid.assignment[s];
    return std::abs(b[0] - i) <= 1 && std::abs(b[1] - j) <= 1;
  };
  auto in_inner = [&](Index s) { return grid.assignment[s][0] == i && grid.assignment[s][1] == j; };
  auto in_annulus = [&](Index s) { return in_outer(s) && !in_inner(s); };

  std::vector<int> parent(static_cast<std::size_t>(lat.size()));
  std::iota(parent.begin(), parent.end(), 0);
  std::vector<char> touches_inner(parent.size(), 0), touches_outer(parent.size(), 0);
  for (Index s = 0; s < lat.size(); ++s) {
    if (!in_annulus(s) || spins(s) != -1) continue;
    for (int code : lat.nbr[s]) {
      if (Lattice::is_boundary_code(code) || !in_outer(code)) {
        touches_outer[s] = 1;
      } else if (in_inner(code)) {
        touches_inner[s] = 1;
      } else if (spins(code) == -1) {
        const int ra = find_root(parent, static_cast<int>(s)), rb = find_root(parent, code);
        if (ra != rb) parent[ra] = rb;
      }
    }
  }
  std::vector<char> root_inner(parent.size(), 0), root_outer(parent.size(), 0);
  for (Index s = 0; s < lat.size(); ++s) {
    if (!in_annulus(s) || spins(s) != -1) continue;
    const int r = find_root(parent, static_cast<int>(s));
    root_inner[r] |= touches_inner[s];
    root_outer[r] |= touches_outer[s];
    if (root_inner[r] && root_outer[r]) return false;
  }
  return true;
}

}  // namespace rfim
