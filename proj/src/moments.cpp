#include "rfim/moments.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <ostream>

namespace rfim {

namespace {

constexpr Index exact_site_cap = 20;
constexpr Index kernel_site_cap = 16;

double log_sum_exp(const Eigen::Ref<const VectorX>& v) {
  const double m = v.maxCoeff();
  if (!std::isfinite(m)) return m;
  return m + std::log((v.array() - m).exp().sum());
}

double log_cosh(double x) {
  const double ax = std::abs(x);
  return ax + std::log1p(std::exp(-2.0 * ax)) - std::log(2.0);
}

double percentile(std::vector<double> v, double q) {
  if (v.empty()) return 0.0;
  std::sort(v.begin(), v.end());
  const double pos = q * double(v.size() - 1);
  const std::size_t lo = static_cast<std::size_t>(std::floor(pos));
  const std::size_t hi = std::min(lo + 1, v.size() - 1);
  return v[lo] + (pos - double(lo)) * (v[hi] - v[lo]);
}

void wilson(Index k, Index n, double& lo, double& hi) {
  const double z = 1.959963984540054;
  const double nn = double(n);
  const double p = double(k) / nn;
  const double den = 1.0 + z * z / nn;
  const double c = (p + z * z / (2 * nn)) / den;
  const double h = z * std::sqrt(p * (1 - p) / nn + z * z / (4 * nn * nn)) / den;
  lo = std::max(0.0, c - h);
  hi = std::min(1.0, c + h);
}

struct FieldParts {
  VectorX lambda_a;
  VectorX h_a;
  double log_theta = 0.0;
  double mesh = 0.0;
};

FieldParts field_parts(const Lattice& lat, const Profile& lambda, const Profile& h) {
  const ExternalField f = build_external_field(lat, lambda, h, VectorX::Zero(lat.size()));
  return {f.lambda_a, f.h_a, f.log_theta(), f.mesh};
}

}  // namespace

ExactLogPartition::ExactLogPartition(const Lattice& lat, const ModelParams& p) : n_(lat.size()) {
  require(n_ <= exact_site_cap, Errc::TooLarge, "exact log partition needs at most 20 sites");
  const VectorX q = configuration_probabilities(lat, p);
  const Index states = q.size();
  spins_.resize(states, n_);
  log_q_.resize(states);
  for (Index b = 0; b < states; ++b) {
    for (Index x = 0; x < n_; ++x) spins_(b, x) = ((b >> x) & 1) ? -1.0 : 1.0;
    log_q_(b) = q(b) > 0 ? std::log(q(b)) : -std::numeric_limits<double>::infinity();
  }
}

VectorX ExactLogPartition::operator()(const MatrixX& xi) const {
  require(xi.rows() == n_, Errc::InvalidArgument, "field rows must match the lattice");
  VectorX out(xi.cols());
  const Index chunk = std::max<Index>(1, (Index(1) << 22) / std::max<Index>(1, spins_.rows()));
  for (Index c0 = 0; c0 < xi.cols(); c0 += chunk) {
    const Index w = std::min(chunk, xi.cols() - c0);
    MatrixX e = spins_ * xi.middleCols(c0, w);
    e.colwise() += log_q_;
    for (Index r = 0; r < w; ++r) out(c0 + r) = log_sum_exp(e.col(r));
  }
  return out;
}

VectorX ExactLogPartition::spin_means(const VectorX& xi) const {
  VectorX e = spins_ * xi + log_q_;
  const double m = e.maxCoeff();
  const VectorX w = (e.array() - m).exp().matrix();
  return spins_.transpose() * w / w.sum();
}

PartitionSamples sample_partition_functions(const Lattice& lat, const ModelParams& p, const Profile& lambda,
                                            const Profile& h, const DisorderLaw& law, Index replicas,
                                            std::uint64_t seed) {
  require(replicas > 0, Errc::InvalidArgument, "replicas must be positive");
  const ExactLogPartition exact(lat, p);
  const FieldParts f = field_parts(lat, lambda, h);
  PartitionSamples s;
  s.mesh = f.mesh;
  s.log_theta = f.log_theta;
  s.omega.resize(lat.size(), replicas);
  for (Index r = 0; r < replicas; ++r) s.omega.col(r) = sample_disorder(lat, law, seed, std::uint64_t(r));
  MatrixX xi = f.lambda_a.asDiagonal() * s.omega;
  xi.colwise() += f.h_a;
  const VectorX lz = exact(xi);
  s.log_z.resize(replicas);
  for (Index r = 0; r < replicas; ++r) s.log_z[r] = f.log_theta + lz(r);
  return s;
}

double hypercontractivity_constant(double p) { return std::sqrt(std::max(0.0, p - 1.0)); }

TanhChaos tanh_chaos_kernel(const Lattice& lat, const ModelParams& p, const Profile& lambda, const Profile& h,
                            const DisorderLaw& law) {
  const Index n = lat.size();
  require(n <= kernel_site_cap, Errc::TooLarge, "tanh kernel needs at most 16 sites");
  const FieldParts f = field_parts(lat, lambda, h);
  TanhChaos t;
  t.mu.resize(n);
  t.vartheta.resize(n);
  for (Index x = 0; x < n; ++x) {
    const double la = f.lambda_a(x), ha = f.h_a(x);
    const double m1 = law.expect([&](double w) { return std::tanh(la * w + ha); });
    const double m2 = law.expect([&](double w) { return std::pow(std::tanh(la * w + ha), 2); });
    t.mu(x) = m1;
    t.vartheta(x) = std::sqrt(std::max(0.0, m2 - m1 * m1));
  }
  t.kernel = exact_correlations(lat, p, int(n)).dense_values();
  const Index states = t.kernel.size();
  for (Index x = 0; x < n; ++x) {
    const Index bit = Index(1) << x;
    for (Index m = 0; m < states; ++m) {
      if (m & bit) continue;
      const double hi = t.kernel(m | bit);
      t.kernel(m) += t.mu(x) * hi;
      t.kernel(m | bit) = t.vartheta(x) * hi;
    }
  }
  return t;
}

MomentReport positive_moment_bound_check(const Lattice& lat, const Profile& lambda, const Profile& h, double p,
                                         Index replicas, std::uint64_t seed, const DisorderLaw& law,
                                         double tolerance) {
  require(p >= 1.0, Errc::InvalidArgument, "moment order must be at least 1");
  const ModelParams mp = ModelParams::plus(lat);
  const TanhChaos chaos = tanh_chaos_kernel(lat, mp, lambda, h, law);
  const FieldParts f = field_parts(lat, lambda, h);
  const PartitionSamples s = sample_partition_functions(lat, mp, lambda, h, law, replicas, seed);
  const Index n = lat.size();

  MomentReport r;
  r.p = p;
  r.replicas = replicas;
  r.mesh = f.mesh;
  r.c_p = hypercontractivity_constant(p);
  const double c2p = hypercontractivity_constant(2 * p);

  // Ψ = Z̃ / (θ Π cosh ξ); both moments computed in log space relative to the max.
  std::vector<double> log_psi(replicas), log_z(s.log_z);
  for (Index k = 0; k < replicas; ++k) {
    double lc = 0.0;
    for (Index x = 0; x < n; ++x) lc += log_cosh(f.lambda_a(x) * s.omega(x, k) + f.h_a(x));
    log_psi[k] = s.log_z[k] - s.log_theta - lc;
  }
  auto moment = [&](const std::vector<double>& lv, const std::vector<Index>* idx) {
    double mx = -std::numeric_limits<double>::infinity();
    const Index m = idx ? Index(idx->size()) : Index(lv.size());
    for (Index k = 0; k < m; ++k) mx = std::max(mx, lv[idx ? (*idx)[k] : k]);
    double acc = 0.0;
    for (Index k = 0; k < m; ++k) acc += std::exp(p * (lv[idx ? (*idx)[k] : k] - mx));
    return mx + std::log(acc / double(m)) / p;  // log E[X^p]^{1/p}
  };
  r.empirical = std::exp(2.0 * moment(log_psi, nullptr));
  r.z_moment = std::exp(moment(log_z, nullptr));
  r.z_moment_2p = r.z_moment * r.z_moment;

  std::vector<double> boot;
  boot.reserve(200);
  std::vector<Index> idx(replicas);
  for (Index b = 0; b < 200; ++b) {
    CounterRng rng(seed, Purpose::Bootstrap, std::uint64_t(b));
    for (Index k = 0; k < replicas; ++k) idx[k] = Index(rng.below(std::uint64_t(replicas)));
    boot.push_back(std::exp(2.0 * moment(log_psi, &idx)));
  }
  r.ci_lo = percentile(boot, 0.025);
  r.ci_hi = percentile(boot, 0.975);

  auto kernel_sum = [&](double c) {
    double acc = 0.0;
    for (Index J = 0; J < chaos.kernel.size(); ++J) {
      const int deg = __builtin_popcountll(static_cast<unsigned long long>(J));
      acc += std::pow(c, 2.0 * deg) * chaos.kernel(J) * chaos.kernel(J);
    }
    return acc;
  };
  r.bound = kernel_sum(r.c_p);
  // E[P^{2p}] for P = θ Π cosh ξ, then Hölder: E[Z̃^p]^{2/p} ≤ E[P^{2p}]^{1/p} E[Ψ^{2p}]^{1/p}.
  double log_p2p = 2 * p * s.log_theta;
  for (Index x = 0; x < n; ++x) {
    const double la = f.lambda_a(x), ha = f.h_a(x);
    log_p2p += std::log(law.expect([&](double w) { return std::exp(2 * p * log_cosh(la * w + ha)); }));
  }
  r.z_bound = std::exp(log_p2p / p) * kernel_sum(c2p);

  for (Index x = 0; x < n; ++x) {
    if (chaos.vartheta(x) <= 0) continue;
    const double la = f.lambda_a(x), ha = f.h_a(x), mu = chaos.mu(x), th = chaos.vartheta(x);
    r.third_moment = std::max(
        r.third_moment, law.expect([&](double w) { return std::pow(std::abs((std::tanh(la * w + ha) - mu) / th), 3); }));
  }
  r.holds = r.empirical <= r.bound * (1 + tolerance) && r.z_moment_2p <= r.z_bound * (1 + tolerance);
  return r;
}

TailReport negative_tail_from_samples(const std::vector<double>& log_z, std::vector<double> t_grid,
                                      bool gaussian, Index min_count) {
  require(!log_z.empty(), Errc::EmptySamples, "no partition samples");
  const Index n = Index(log_z.size());
  TailReport r;
  r.replicas = n;
  r.asserted = gaussian;

  const double mean_log = std::accumulate(log_z.begin(), log_z.end(), 0.0) / double(n);
  const double mx = *std::max_element(log_z.begin(), log_z.end());
  double acc = 0.0;
  RunningStats inv;
  for (double v : log_z) {
    acc += std::exp(v - mx);
    inv.add(std::exp(-v));
  }
  r.mean_log_z = mean_log;
  r.log_mean_z = mx + std::log(acc / double(n));
  r.jensen_ok = r.mean_log_z <= r.log_mean_z + 1e-12 * (1 + std::abs(r.log_mean_z));
  r.inverse_moment = inv.mean();
  r.inverse_moment_se = inv.se();

  std::vector<double> x(log_z.size());
  std::transform(log_z.begin(), log_z.end(), x.begin(), [](double v) { return -v; });
  std::vector<double> sorted = x;
  std::sort(sorted.begin(), sorted.end());
  if (sorted.front() == sorted.back()) {
    TailPoint pt;
    pt.t = std::max(0.0, sorted.front());
    pt.count = n;
    pt.prob = 1.0;
    pt.ci_lo = pt.ci_hi = 1.0;
    r.curve.push_back(pt);
    r.asserted = false;
    return r;
  }
  if (t_grid.empty()) {
    const double lo = std::max(1e-3, double(min_count) / double(n));
    const int levels = 12;
    for (int k = 0; k < levels; ++k) {
      const double level = 0.3 * std::pow(lo / 0.3, double(k) / (levels - 1));
      if (level < lo * (1 - 1e-12)) break;
      const double t = percentile(sorted, 1.0 - level);
      if (t > 0 && (t_grid.empty() || t > t_grid.back())) t_grid.push_back(t);
    }
  }
  require(!t_grid.empty(), Errc::InsufficientTail, "no positive t in the observable range");
  auto beyond = [&](double t) {
    return Index(sorted.end() - std::lower_bound(sorted.begin(), sorted.end(), t));
  };
  require(beyond(t_grid.front()) >= 100, Errc::InsufficientTail,
          "fewer than 100 samples beyond the first grid point");

  std::vector<double> fx, fy;
  for (double t : t_grid) {
    TailPoint pt;
    pt.t = t;
    pt.count = beyond(t);
    pt.prob = double(pt.count) / double(n);
    wilson(pt.count, n, pt.ci_lo, pt.ci_hi);
    r.curve.push_back(pt);
    if (pt.count >= min_count && pt.prob < 1 && t > 0) {
      fx.push_back(std::log(t));
      fy.push_back(std::log(-std::log(pt.prob)));
    }
  }
  r.fit_points = Index(fx.size());
  if (fx.size() >= 2) r.fit = fit_line(fx, fy);
  r.holds = r.asserted && r.fit_points >= 2 && r.fit.slope >= 1.5;
  return r;
}

TailReport negative_tail_check(const Lattice& lat, const Profile& lambda, const Profile& h, Index replicas,
                               std::vector<double> t_grid, std::uint64_t seed, const DisorderLaw& law,
                               Index min_count) {
  const PartitionSamples s =
      sample_partition_functions(lat, ModelParams::plus(lat), lambda, h, law, replicas, seed);
  return negative_tail_from_samples(s.log_z, std::move(t_grid), law.family == LawFamily::gaussian, min_count);
}

PaleyZygmundReport paley_zygmund_from_values(const std::vector<double>& z, Index resamples, std::uint64_t seed) {
  require(!z.empty(), Errc::EmptySamples, "no partition samples");
  const Index n = Index(z.size());
  auto eval = [&](const std::vector<Index>* idx, double& prob, double& bound, double& c1, double& c2) {
    double s1 = 0, s2 = 0;
    for (Index k = 0; k < n; ++k) {
      const double v = z[idx ? (*idx)[k] : k];
      s1 += v;
      s2 += v * v;
    }
    c1 = s1 / double(n);
    c2 = s2 / double(n);
    Index hit = 0;
    for (Index k = 0; k < n; ++k) hit += z[idx ? (*idx)[k] : k] >= c1 / 2;
    prob = double(hit) / double(n);
    bound = c2 > 0 ? c1 * c1 / (5 * c2) : 0.0;
  };
  PaleyZygmundReport r;
  r.replicas = n;
  eval(nullptr, r.prob, r.bound, r.c1, r.c2);
  std::vector<double> bp, bb;
  std::vector<Index> idx(n);
  for (Index b = 0; b < resamples; ++b) {
    CounterRng rng(seed, Purpose::Bootstrap, std::uint64_t(b));
    for (Index k = 0; k < n; ++k) idx[k] = Index(rng.below(std::uint64_t(n)));
    double pr, bd, c1, c2;
    eval(&idx, pr, bd, c1, c2);
    bp.push_back(pr);
    bb.push_back(bd);
  }
  r.prob_ci_lo = resamples ? percentile(bp, 0.025) : r.prob;
  r.prob_ci_hi = resamples ? percentile(bp, 0.975) : r.prob;
  r.bound_ci_lo = resamples ? percentile(bb, 0.025) : r.bound;
  r.bound_ci_hi = resamples ? percentile(bb, 0.975) : r.bound;
  r.holds = r.prob_ci_hi >= r.bound_ci_lo;
  return r;
}

PaleyZygmundReport paley_zygmund_check(const Lattice& lat, const Profile& lambda, const Profile& h,
                                       Index replicas, std::uint64_t seed, const DisorderLaw& law) {
  const PartitionSamples s =
      sample_partition_functions(lat, ModelParams::plus(lat), lambda, h, law, replicas, seed);
  std::vector<double> z(s.log_z.size());
  std::transform(s.log_z.begin(), s.log_z.end(), z.begin(), [](double v) { return std::exp(v); });
  return paley_zygmund_from_values(z, 200, seed);
}

double overlap(const VectorX& lambda_a, const SpinVector& s, const SpinVector& t) {
  double acc = 0.0;
  for (Index x = 0; x < lambda_a.size(); ++x) acc += lambda_a(x) * lambda_a(x) * double(s(x) * t(x));
  return acc;
}

OverlapEstimate overlap_gradient_estimate(const Lattice& lat, const Profile& lambda, const Profile& h,
                                          const VectorX& omega, Index chains, Index samples_per_chain,
                                          std::uint64_t seed) {
  require(chains > 0 && samples_per_chain > 0, Errc::InvalidArgument, "need chains and samples");
  const ExternalField f = build_external_field(lat, lambda, h, omega);
  const VectorX xi = f.xi_real();
  const ModelParams mp = ModelParams::plus(lat);
  OverlapEstimate e;
  e.upper = f.lambda_a.squaredNorm();
  if (lat.size() <= kernel_site_cap) {
    const VectorX m = ExactLogPartition(lat, mp).spin_means(xi);
    e.exact = f.lambda_a.cwiseProduct(m).squaredNorm();
  }
  if (e.upper == 0.0) return e;

  const Index burn = std::max<Index>(100, samples_per_chain / 10);
  std::vector<double> chain_means;
  std::vector<double> series;
  for (Index c = 0; c < chains; ++c) {
    GibbsSampler A(lat, mp, Algorithm::heatbath, seed, std::uint64_t(2 * c));
    GibbsSampler B(lat, mp, Algorithm::heatbath, seed, std::uint64_t(2 * c + 1));
    A.set_field(xi);
    B.set_field(xi);
    A.sweeps(burn);
    B.sweeps(burn);
    double acc = 0.0;
    for (Index k = 0; k < samples_per_chain; ++k) {
      A.sweep();
      B.sweep();
      const double L = overlap(f.lambda_a, A.spins(), B.spins());
      acc += L;
      if (chains == 1) series.push_back(L);
    }
    chain_means.push_back(acc / double(samples_per_chain));
  }
  const MeanSe ms = mean_se(chain_means);
  e.value = ms.mean;
  if (chains > 1) {
    e.se = ms.se;
  } else {
    const MeanSe s1 = mean_se(series);
    e.se = s1.se * std::sqrt(std::max(1.0, 2.0 * integrated_autocorrelation_time(series)));
  }
  return e;
}

SecondMomentRow second_moment_replica(const Lattice& lat, const Profile& lambda, const Profile& h,
                                      Index samples, std::uint64_t seed) {
  require(samples > 1, Errc::InvalidArgument, "need at least two samples");
  const FieldParts f = field_parts(lat, lambda, h);
  const ModelParams mp = ModelParams::plus(lat);
  GibbsSampler A(lat, mp, Algorithm::wolff, seed, 0);
  GibbsSampler B(lat, mp, Algorithm::wolff, seed, 1);
  A.sweeps(200);
  B.sweeps(200);
  const double log_pref = 2 * f.log_theta + f.lambda_a.squaredNorm();
  std::vector<double> series(samples);
  for (Index k = 0; k < samples; ++k) {
    A.sweeps(2);
    B.sweeps(2);
    const VectorX sa = A.spins().cast<double>(), sb = B.spins().cast<double>();
    const double L = overlap(f.lambda_a, A.spins(), B.spins());
    series[k] = std::exp(log_pref + L + f.h_a.dot(sa + sb));
  }
  const MeanSe ms = mean_se(series);
  SecondMomentRow r;
  r.mesh = f.mesh;
  r.samples = samples;
  r.value = ms.mean;
  r.se = ms.se * std::sqrt(std::max(1.0, 2.0 * integrated_autocorrelation_time(series)));
  return r;
}

void write_tail_csv(std::ostream& os, const TailReport& r) {
  os << "t,prob,ci_lo,ci_hi,count\n";
  os.precision(12);
  for (const TailPoint& p : r.curve) os << p.t << ',' << p.prob << ',' << p.ci_lo << ',' << p.ci_hi << ',' << p.count << '\n';
}

void write_moment_csv(std::ostream& os, const std::vector<MomentReport>& rows) {
  os << "p,mesh,replicas,empirical,ci_lo,ci_hi,bound,c_p,z_moment,z_moment_2p,z_bound,third_moment,holds\n";
  os.precision(12);
  for (const MomentReport& r : rows)
    os << r.p << ',' << r.mesh << ',' << r.replicas << ',' << r.empirical << ',' << r.ci_lo << ',' << r.ci_hi
       << ',' << r.bound << ',' << r.c_p << ',' << r.z_moment << ',' << r.z_moment_2p << ',' << r.z_bound << ','
       << r.third_moment << ',' << (r.holds ? 1 : 0) << '\n';
}

}  // namespace rfim
