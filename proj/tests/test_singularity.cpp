#include <doctest.h>

#include <cmath>
#include <sstream>

#include "helpers.hpp"
#include "rfim/singularity.hpp"
#include "rfim/stats.hpp"

using namespace rfim;

namespace {

BlockObservables single_block(double a, const SpinVector& s, double w) {
  BlockObservables b;
  b.N = 1;
  b.mesh = a;
  b.Phi = MatrixX::Constant(1, 1, std::pow(a, 15.0 / 8) * s.cast<double>().sum());
  b.W = MatrixX::Constant(1, 1, w);
  b.Lambda = MatrixX::Constant(1, 1, a * a * double(s.size()));
  return b;
}

// Conditional MC oracle: average of exp(Σ σ λ^a ω - ½ Σ (λ^a)²) with ω drawn
// given a Σ ω = W.
rfim::test::MeanSe conditional_oracle(double a, const SpinVector& s, double w, Index draws, std::uint64_t seed) {
  const double la = std::pow(a, 7.0 / 8);
  const VectorX var = VectorX::Ones(s.size());
  CounterRng rng(seed, Purpose::Test);
  RunningStats st;
  for (Index d = 0; d < draws; ++d) {
    const VectorX om = sample_conditional_gaussian(var, w / a, rng);
    st.add(std::exp(la * s.cast<double>().dot(om) - 0.5 * la * la * double(s.size())));
  }
  return {st.mean(), st.se()};
}

EmpiricalJointLaw random_law(int N, int m, double shift, Index n, std::uint64_t seed) {
  CounterRng rng(seed, Purpose::Test);
  EmpiricalJointLaw law(N, m);
  BlockObservables o;
  o.N = N;
  o.mesh = 0.1;
  o.Phi.resize(N, N);
  o.W.resize(N, N);
  for (Index r = 0; r < n; ++r) {
    const double common = rng.normal();
    for (int i = 0; i < N; ++i)
      for (int j = 0; j < N; ++j) {
        o.W(i, j) = 0.6 * rng.normal() + shift * common;
        o.Phi(i, j) = 0.4 * rng.normal() + shift * o.W(i, j);
      }
    law.add(o);
  }
  return law;
}

}  // namespace

TEST_CASE("block observables") {
  const double a = 0.25;
  const Lattice lat = discretize_domain(DomainSpec::unit_square(a));
  const BlockGrid grid = build_block_grid(lat, 2);
  const SpinVector plus = SpinVector::Ones(lat.size());
  const VectorX zero = VectorX::Zero(lat.size());
  const BlockObservables o = block_observables(lat, grid, plus, zero, profiles::constant(1.0));
  // Direct count: x = 0.25 lies in the first half, 0.5 and 0.75 in the second.
  for (int i = 0; i < 2; ++i)
    for (int j = 0; j < 2; ++j) {
      int count = 0;
      for (Index s = 0; s < lat.size(); ++s) {
        const bool in_i = (lat.sites[s].x() < 0.5) == (i == 0);
        const bool in_j = (lat.sites[s].y() < 0.5) == (j == 0);
        count += in_i && in_j;
      }
      CHECK(o.Phi(i, j) == doctest::Approx(count * std::pow(a, 15.0 / 8)).epsilon(1e-14));
      CHECK(o.Lambda(i, j) == doctest::Approx(count * a * a).epsilon(1e-14));
    }
  CHECK(o.Phi.sum() == doctest::Approx(9 * std::pow(a, 15.0 / 8)));

  const BlockObservables z = block_observables(lat, grid, plus, zero, profiles::constant(0.0));
  CHECK(z.Phi.isZero(0));
  CHECK(z.W.isZero(0));

  const MagnetisationField f{&lat, plus, Representation::piecewise_constant};
  const WhiteNoiseGrid g = sample_white_noise_grid(lat, 5);
  const BlockObservables viaField = block_observables(f, g, profiles::constant(1.0), 2);
  CHECK(viaField.W(1, 1) == doctest::Approx(a * (g.values(4) + g.values(5) + g.values(7) + g.values(8))));

  const BlockObservables c = coarse_blocks(o, 1);
  CHECK(c.Phi(0, 0) == doctest::Approx(o.Phi.sum()));
  CHECK_THROWS_AS(coarse_blocks(o, 3), Error);
}

TEST_CASE("noise block variance") {
  const double a = 0.125;
  const Lattice lat = discretize_domain(DomainSpec::unit_square(a));
  const BlockGrid grid = build_block_grid(lat, 2);
  const Profile lam = profiles::linear(0.5, Point(1.0, 0.5));
  const SpinVector plus = SpinVector::Ones(lat.size());
  const Index n = 100000;
  std::vector<RunningStats> st(4);
  std::vector<double> m4(4, 0.0);
  MatrixX Lambda;
  for (Index r = 0; r < n; ++r) {
    const VectorX om = sample_white_noise_grid(lat, 11, static_cast<std::uint64_t>(r)).values;
    const BlockObservables o = block_observables(lat, grid, plus, om, lam);
    Lambda = o.Lambda;
    for (int k = 0; k < 4; ++k) {
      const double w = o.W.data()[k];
      st[k].add(w * w);
    }
  }
  for (int k = 0; k < 4; ++k) {
    // Mean of W² estimates the variance of a centred Gaussian.
    CHECK(std::abs(st[k].mean() - Lambda.data()[k]) < 3 * st[k].se());
  }
}

TEST_CASE("smeared versus atomic blocks") {
  const double a = 1.0 / 32;
  const Lattice lat = discretize_domain(DomainSpec::unit_square(a));
  const SpinVector plus = SpinVector::Ones(lat.size());
  for (int N : {1, 2, 4}) {
    const BlockGrid grid = build_block_grid(lat, N);
    const SmearingGap bump = smeared_atomic_gap(lat, grid, plus, profiles::gaussian_bump(Point(0.4, 0.6), 0.3, 1.5));
    CHECK(bump.max_gap <= bump.bound);
    CHECK(bump.max_gap > 0);
    const SmearingGap flat = smeared_atomic_gap(lat, grid, plus, profiles::constant(1.0));
    CHECK(flat.max_gap < 1e-12);
  }
}

TEST_CASE("dyadic discretization") {
  CHECK(dyadic_discretize(0.3, 2) == 0.25);
  CHECK(dyadic_discretize(-0.3, 2) == -0.5);
  CHECK(dyadic_discretize(0.75, 2) == 0.75);
  CHECK(dyadic_discretize(3.0, 0) == 3.0);
  CHECK_THROWS_AS(dyadic_discretize(1.0, -1), Error);
  CounterRng rng(3, Purpose::Test);
  for (int k = 0; k < 1000; ++k) {
    const double x = 5 * rng.normal();
    const int m = static_cast<int>(rng.below(8));
    const double d = dyadic_discretize(x, m);
    CHECK(d <= x);
    CHECK(x < d + std::ldexp(1.0, -m));
  }
  MatrixX M(1, 2);
  M << 0.3, -0.3;
  CHECK(dyadic_discretize(M, 1)(1) == -0.5);
}

TEST_CASE("bhattacharyya examples") {
  EmpiricalJointLaw p(1, 0), q(1, 0), r(1, 0);
  p.add_key({0, 0}, 5);
  p.add_key({1, 0}, 5);
  q.add_key({0, 0}, 7);
  r.add_key({4, 4}, 2);
  CHECK(bhattacharyya(p, p) == doctest::Approx(1.0).epsilon(1e-15));
  CHECK(bhattacharyya(p, q) == doctest::Approx(std::sqrt(0.5)).epsilon(1e-15));
  CHECK(bhattacharyya(p, r) == 0.0);
  CHECK(p.probability({1, 0}) == 0.5);
  CHECK_THROWS_AS(bhattacharyya(p, EmpiricalJointLaw(1, 0)), Error);

  std::vector<BlockObservables> a, b;
  for (int k = 0; k < 50; ++k) {
    BlockObservables o;
    o.N = 1;
    o.mesh = 0.1;
    o.Phi = MatrixX::Constant(1, 1, 0.1 * k);
    o.W = MatrixX::Constant(1, 1, -0.05 * k);
    a.push_back(o);
    o.W(0, 0) += 100.0;
    b.push_back(o);
  }
  const BhattacharyyaEstimate same = bhattacharyya_fractional_moment(a, a, 3);
  CHECK(same.value == doctest::Approx(1.0));
  CHECK(same.ci_hi <= 1.0);
  CHECK(bhattacharyya_fractional_moment(a, b, 3).value == 0.0);
  try {
    bhattacharyya_fractional_moment({}, a, 2);
    FAIL("expected EmptySamples");
  } catch (const Error& e) {
    CHECK(e.code() == Errc::EmptySamples);
  }
}

TEST_CASE("bhattacharyya data processing") {
  for (std::uint64_t seed = 1; seed <= 12; ++seed) {
    const int N = seed % 2 ? 2 : 4;
    const int m = 1 + static_cast<int>(seed % 3);
    const EmpiricalJointLaw p = random_law(N, m, 0.0, 400, seed);
    const EmpiricalJointLaw q = random_law(N, m, 0.4, 400, seed + 100);
    const double bc = bhattacharyya(p, q);
    CHECK(bc >= 0.0);
    CHECK(bc <= 1.0);
    CHECK(bhattacharyya(p.coarsen(), q.coarsen()) >= bc - 1e-12);
    CHECK(bhattacharyya(p.merge_blocks(), q.merge_blocks()) >= bc - 1e-12);
    CHECK(p.coarsen().total() == p.total());
    CHECK(p.merge_blocks().N() == N / 2);
  }
  EmpiricalJointLaw s(2, 1);
  s.add_key({1, 2, 3, 4, -1, -2, 0, 5});
  const auto mb = s.merge_blocks().sorted();
  REQUIRE(mb.size() == 1);
  CHECK(mb[0].first == EmpiricalJointLaw::Key{10, 2});
  const auto cs = s.coarsen().sorted();
  CHECK(cs[0].first == EmpiricalJointLaw::Key{0, 1, 1, 2, -1, -1, 0, 2});
}

TEST_CASE("histogram persistence") {
  const EmpiricalJointLaw p = random_law(2, 2, 0.2, 300, 9);
  std::stringstream ss;
  p.write_binary(ss);
  const EmpiricalJointLaw q = EmpiricalJointLaw::read_binary(ss);
  CHECK(q.N() == 2);
  CHECK(q.m() == 2);
  CHECK(q.total() == p.total());
  CHECK(q.sorted() == p.sorted());
  std::stringstream bad("nothing here");
  CHECK_THROWS_AS(EmpiricalJointLaw::read_binary(bad), Error);
}

TEST_CASE("conditional gaussian law") {
  const ConditionalGaussian g = conditional_gaussian_law((VectorX(2) << 1, 3).finished(), 4.0);
  CHECK(g.mean(0) == doctest::Approx(1.0));
  CHECK(g.mean(1) == doctest::Approx(3.0));
  CHECK(g.covariance(0, 0) == doctest::Approx(0.75));
  CHECK(g.covariance(0, 1) == doctest::Approx(-0.75));
  CHECK((g.covariance * VectorX::Ones(2)).isZero(1e-14));
  const ConditionalGaussian e = conditional_gaussian_law(VectorX::Constant(4, 2.0), 0.0);
  CHECK(e.mean.isZero(0));
  CHECK_THROWS_AS(conditional_gaussian_law((VectorX(2) << 1, 0).finished(), 1.0), Error);

  const VectorX var = (VectorX(3) << 0.5, 1.0, 2.5).finished();
  const ConditionalGaussian ref = conditional_gaussian_law(var, 1.5);
  CounterRng rng(4, Purpose::Test);
  const Index n = 100000;
  VectorX mean = VectorX::Zero(3);
  MatrixX second = MatrixX::Zero(3, 3);
  for (Index k = 0; k < n; ++k) {
    const VectorX x = sample_conditional_gaussian(var, 1.5, rng);
    CHECK(std::abs(x.sum() - 1.5) < 1e-12);
    mean += x;
    second += x * x.transpose();
  }
  mean /= n;
  const MatrixX cov = second / n - mean * mean.transpose();
  for (int j = 0; j < 3; ++j) {
    CHECK(std::abs(mean(j) - ref.mean(j)) < 3 * std::sqrt(ref.covariance(j, j) / n) + 1e-12);
    for (int l = 0; l < 3; ++l) CHECK(cov(j, l) == doctest::Approx(ref.covariance(j, l)).epsilon(0.03).scale(1.0));
  }
}

TEST_CASE("conditional radon-nikodym factor") {
  const double a = 0.25;
  CHECK(conditional_rn_factor(single_block(a, (SpinVector(2) << 1, -1).finished(), 0.7)) == 1.0);
  for (const SpinVector& s : {SpinVector((SpinVector(2) << 1, 1).finished()),
                              SpinVector((SpinVector(2) << 1, -1).finished())}) {
    for (double w : {-0.4, 0.3}) {
      const double exact = conditional_rn_factor(single_block(a, s, w));
      const auto mc = conditional_oracle(a, s, w, 1000000, 17);
      CHECK(std::abs(mc.mean - exact) < 3 * mc.se + 1e-12);
    }
  }
  // E over W ~ N(0, Λ) of the factor is 1 for a fixed Φ̃.
  const BlockObservables fixed = single_block(a, (SpinVector(3) << 1, 1, -1).finished(), 0.0);
  CounterRng rng(21, Purpose::Test);
  RunningStats st;
  for (int k = 0; k < 100000; ++k) {
    BlockObservables b = fixed;
    b.W(0, 0) = std::sqrt(b.Lambda(0, 0)) * rng.normal();
    st.add(conditional_rn_factor(b));
  }
  CHECK(std::abs(st.mean() - 1.0) < 3 * st.se());

  BlockObservables empty = fixed;
  empty.Lambda(0, 0) = 0.0;
  try {
    conditional_rn_factor(empty);
    FAIL("expected ZeroBlockMass");
  } catch (const Error& e) {
    CHECK(e.code() == Errc::ZeroBlockMass);
  }
}

TEST_CASE("tilted disorder sampler") {
  const SpinVector s = (SpinVector(2) << 1, -1).finished();
  const VectorX none = tilted_disorder_sampler(s, VectorX::Zero(2), DisorderLaw{}, 3, 0);
  CHECK(none(0) == doctest::Approx(normal_at(derive_key(3, Purpose::Tilt, 0), 0)));

  RunningStats m0;
  const VectorX la = VectorX::Constant(2, 0.1);
  for (int r = 0; r < 100000; ++r) m0.add(tilted_disorder_sampler(s, la, DisorderLaw{}, 5, r)(0));
  CHECK(std::abs(m0.mean() - 0.1) < 3 * m0.se());

  try {
    tilted_disorder_sampler(s, la, DisorderLaw{LawFamily::rademacher}, 1);
    FAIL("expected NonGaussianLaw");
  } catch (const Error& e) {
    CHECK(e.code() == Errc::NonGaussianLaw);
  }

  // Importance sampling from P with weight θ e^{⟨Φ̃, W_λ⟩} against direct tilted draws.
  const VectorX lb = (VectorX(2) << 0.3, 0.5).finished();
  const double log_theta = -0.5 * lb.squaredNorm();
  CounterRng rng(8, Purpose::Test);
  RunningStats num, den, tilt;
  const Index n = 200000;
  std::vector<double> gw, ww;
  for (Index r = 0; r < n; ++r) {
    const VectorX om = (VectorX(2) << rng.normal(), rng.normal()).finished();
    const double w = std::exp(log_theta + (lb.array() * s.cast<double>().array() * om.array()).sum());
    num.add(om(0) * w);
    den.add(w);
    gw.push_back(om(0) * w);
    ww.push_back(w);
    tilt.add(tilted_disorder_sampler(s, lb, DisorderLaw{}, 6, static_cast<std::uint64_t>(r))(0));
  }
  CHECK(den.mean() == doctest::Approx(1.0).epsilon(0.01));
  const double ratio = num.mean() / den.mean();
  double v = 0.0;
  for (Index r = 0; r < n; ++r) {
    const double d = gw[r] - ratio * ww[r];
    v += d * d;
  }
  const double ratio_se = std::sqrt(v / (n - 1) / n) / den.mean();
  CHECK(std::abs(ratio - tilt.mean()) < 3 * std::hypot(ratio_se, tilt.se()));
}

TEST_CASE("tilt statistic") {
  const double a = 0.125;
  const Lattice lat = discretize_domain(DomainSpec::unit_square(a));
  const Profile lam = profiles::linear(1.0, Point(0.3, -0.2));
  const SpinVector plus = SpinVector::Ones(lat.size());
  VectorX la(lat.size());
  for (Index x = 0; x < lat.size(); ++x) la(x) = std::pow(a, 7.0 / 8) * lam(lat.sites[x]);
  for (int N : {1, 2, 4}) {
    const BlockGrid grid = build_block_grid(lat, N);
    RunningStats sq;
    std::vector<double> fourth;
    const Index n = N == 2 ? 100000 : 1000;
    for (Index r = 0; r < n; ++r) {
      const VectorX om = sample_white_noise_grid(lat, 13 + N, static_cast<std::uint64_t>(r)).values;
      const BlockObservables o = block_observables(lat, grid, plus, om, lam);
      Eigen::VectorXi rho;
      const double xN = tilt_statistic(o, std::nullopt, &rho);
      CHECK(rho.minCoeff() == 1);
      CHECK(xN == doctest::Approx(la.dot(om)).epsilon(1e-10));
      for (int m : {0, 2, 5}) {
        const double xm = tilt_statistic(o, m);
        CHECK(std::abs(xm - xN) <= std::ldexp(double(N) * N, -m) * std::pow(a, -1.0 / 8) + 1e-12);
      }
      sq.add(xN * xN);
    }
    if (N == 2) CHECK(std::abs(sq.mean() - la.squaredNorm()) < 3 * sq.se());
  }
}

TEST_CASE("certificate with zero lambda") {
  const Lattice lat = discretize_domain(DomainSpec::unit_square(0.125));
  const TiltCertificate c = fractional_moment_certificate(lat, profiles::constant(0.0), 2, 2, std::nullopt, 100, 3);
  CHECK(c.M == 0.0);
  for (double x : c.X) CHECK(x == 0.0);
  CHECK(c.inv_f_mc == 1.0);
  CHECK(c.tilt_f_over_z == doctest::Approx(1.0));
  CHECK(c.product == doctest::Approx(1.0));
}

TEST_CASE("singularity pipeline small") {
  const Lattice lat = discretize_domain(DomainSpec::unit_square(1.0 / 16));
  SingularityOptions o;
  o.N = 4;
  o.replicas = 3000;
  o.null_replicas = 3000;
  o.tilt_replicas = 1000;
  o.bank_size = 1000;
  o.disorder_sweeps = 20;
  o.burn_in = 100;
  o.seed = 7;
  const SingularitySamples s = sample_singularity(lat, o);
  CHECK(s.pure.size() == 3000);
  CHECK(s.tilted_log_z.size() == 1000);
  CHECK(s.disordered_log_z.size() == 1000);
  // E[Z̃] = 1 under P with the lattice counterterm.
  RunningStats z;
  for (double lz : s.disordered_log_z) z.add(std::exp(lz));
  CHECK(std::abs(z.mean() - 1.0) < 4 * z.se() + 0.02);

  BootstrapOptions b;
  b.resamples = 50;
  const auto cells = singularity_grid(s, {1, 2}, {1, 2}, b);
  REQUIRE(cells.size() == 4);
  for (const auto& c : cells) {
    CHECK(c.bc.value >= 0.0);
    CHECK(c.bc.value <= 1.0);
    CHECK(c.bc.ci_lo <= c.bc.ci_hi);
    CHECK(c.data_processing_ok);
    CHECK(c.certificate.S > 0);
    CHECK(c.certificate.M > 0);
    for (const auto& r : c.certificate.rho) CHECK(r.cwiseAbs().minCoeff() == 1);
    // Tilt route and coupled route estimate the same E_ν[f].
    CHECK(std::abs(c.certificate.tilt_f_over_z - c.certificate.direct_f) <
          4 * std::hypot(c.certificate.tilt_f_over_z_se, c.certificate.direct_f_se) + 0.02);
    CHECK(c.certificate.product + 3 * c.certificate.product_se >= c.bc.value - 2 * c.bc.se);
  }
  std::ostringstream os;
  write_singularity_csv(os, 1.0, cells);
  CHECK(os.str().rfind("lambda0,N,m,mesh,bc,", 0) == 0);

  o.lambda = profiles::constant(0.0);
  o.replicas = o.null_replicas = 500;
  o.tilt_replicas = o.bank_size = 100;
  const SingularitySamples zero = sample_singularity(lat, o);
  const auto zc = singularity_grid(zero, {2}, {2}, b);
  CHECK(zc[0].bc.value == doctest::Approx(1.0));
  CHECK(zc[0].bc.ci_lo == doctest::Approx(1.0));
}

TEST_CASE("coarse magnetisation divergence") {
  const double a = 1.0 / 64;
  const Lattice lat = discretize_domain(DomainSpec::unit_square(a));
  const SpinVector plus = SpinVector::Ones(lat.size());
  const auto frozen = coarse_magnetisation_divergence(lat, {plus}, profiles::constant(1.0), {1, 2, 4, 8});
  for (const auto& r : frozen) CHECK(r.mean == doctest::Approx(lat.size() * std::pow(a, 15.0 / 8)));

  GibbsSampler g(lat, ModelParams::plus(lat), Algorithm::wolff, 31);
  g.sweeps(200);
  std::vector<SpinVector> stream;
  for (int k = 0; k < 1500; ++k) {
    g.sweeps(3);
    stream.push_back(g.spins());
  }
  const auto rows = coarse_magnetisation_divergence(lat, stream, profiles::constant(1.0), {1, 2, 8});
  RunningStats total;
  for (const auto& s : stream) total.add(std::abs(std::pow(a, 15.0 / 8) * s.cast<double>().sum()));
  CHECK(rows[0].mean == doctest::Approx(total.mean()).epsilon(1e-12));
  CHECK(rows[2].mean - rows[1].mean > 3 * std::hypot(rows[1].se, rows[2].se));
}

TEST_CASE("annulus plus circuit") {
  const Lattice lat = discretize_domain(DomainSpec::unit_square(1.0 / 16));
  const BlockGrid grid = build_block_grid(lat, 4);
  SpinVector s = SpinVector::Ones(lat.size());
  CHECK(annulus_plus_circuit(lat, grid, s, 2, 2));
  // Minus row at y = 6a from x = 0 into block (2, 2).
  for (int c = 1; c <= 5; ++c) s(lat.site_at(c, 6)) = -1;
  CHECK_FALSE(annulus_plus_circuit(lat, grid, s, 2, 2));
  try {
    annulus_plus_circuit(lat, grid, s, 1, 2);
    FAIL("expected AnnulusOutsideDomain");
  } catch (const Error& e) {
    CHECK(e.code() == Errc::AnnulusOutsideDomain);
  }

  std::vector<double> p;
  for (int L : {24, 48}) {
    const Lattice l = discretize_domain(DomainSpec::unit_square(1.0 / (L + 1)));
    const BlockGrid gr = build_block_grid(l, 4);
    GibbsSampler g(l, ModelParams::plus(l), Algorithm::wolff, 41);
    g.sweeps(200);
    RunningStats hit;
    for (int k = 0; k < 1000; ++k) {
      g.sweeps(3);
      hit.add(annulus_plus_circuit(l, gr, g.spins(), 2, 2) ? 1.0 : 0.0);
    }
    p.push_back(hit.mean());
    CHECK(hit.mean() > 0.2);
  }
  CHECK(std::abs(p[0] - p[1]) < 0.1);
}
