#include <doctest.h>

#include <cmath>
#include <sstream>

#include "helpers.hpp"
#include "rfim/chaos.hpp"
#include "rfim/sampler.hpp"
#include "rfim/stats.hpp"

using namespace rfim;
using rfim::test::rel_err;

namespace {

ExternalField field_for(const Lattice& lat, double lam, double h, const VectorX& omega, const Profile* phi = nullptr) {
  FieldOptions opt;
  opt.phi = phi;
  return build_external_field(lat, profiles::constant(lam), profiles::constant(h), omega, opt);
}

}  // namespace

TEST_CASE("kernel coefficients") {
  const Lattice lat = discretize_domain(DomainSpec::unit_square(0.25));
  const ModelParams p = ModelParams::plus(lat);
  const CorrelationTable corr = exact_correlations(lat, p, 3);
  const VectorX lam = VectorX::Constant(lat.size(), std::pow(0.25, 7.0 / 8.0));
  const ChaosKernel k = build_chaos_kernel(corr, lam, 3);
  CHECK(k.coefficient({}) == 1.0);
  CHECK(k.terms() == 1 + 9 + 36 + 84);
  CHECK(k.coefficient({2, 0}) == doctest::Approx(lam(0) * lam(2) * corr.at({0, 2})).epsilon(1e-15));
  const ChaosKernel zero = build_chaos_kernel(corr, VectorX::Zero(lat.size()), 3);
  CHECK(zero.variance() == 0.0);
  CHECK_THROWS_AS(build_chaos_kernel(corr, lam, 4), Error);

  const Lattice one = discretize_domain(DomainSpec::unit_square(0.5));
  const ChaosKernel k1 =
      build_chaos_kernel(exact_correlations(one, ModelParams::plus(one), 1), VectorX::Constant(1, std::pow(0.25, 7.0 / 8.0)), 1);
  CHECK(k1.coefficient({0}) == doctest::Approx(std::pow(0.25, 7.0 / 8.0) * std::tanh(4 * beta_c)).epsilon(1e-14));

  CorrelationTable sparse(3, 2, 0.25, "partial");
  sparse.set({0}, 0.5);
  try {
    build_chaos_kernel(sparse, VectorX::Ones(3), 1);
    CHECK(false);
  } catch (const Error& e) {
    CHECK(e.code() == Errc::MissingCorrelation);
  }

  std::ostringstream os;
  write_kernel_csv(os, k.truncated(1));
  CHECK(os.str().substr(0, 4) == "0,1\n");
}

TEST_CASE("multilinearity") {
  const Lattice lat = discretize_domain(DomainSpec::unit_square(0.25));
  const CorrelationTable corr = exact_correlations(lat, ModelParams::plus(lat), 9);
  const ChaosKernel k = build_chaos_kernel(corr, VectorX::Constant(9, 0.7), 9);
  const VectorXc u = test::random_complex_field(9, 3, 1.0);
  for (Index x = 0; x < 9; ++x) {
    VectorXc u0 = u, u1 = u, u2 = u;
    u0(x) = 0.0;
    u1(x) = 1.0;
    u2(x) = cplx(2.5, -1.0);
    const cplx f0 = k(u0), f1 = k(u1);
    CHECK(std::abs(k(u2) - (f0 + u2(x) * (f1 - f0))) < 1e-12 * (1 + std::abs(k(u2))));
  }
  MatrixX U(3, 9);
  for (Index r = 0; r < 3; ++r) U.row(r) = test::random_real_field(9, 40 + r, 1.0).transpose();
  for (int l : {2, 9}) {
    const ChaosKernel kl = k.truncated(l);
    const VectorX b = kl.evaluate_batch(U);
    for (Index r = 0; r < 3; ++r) CHECK(b(r) == doctest::Approx(kl(VectorX(U.row(r).transpose()))).epsilon(1e-12));
  }
}

TEST_CASE("variance equals coefficient norm") {
  const Lattice lat = discretize_domain(DomainSpec::unit_square(0.25));
  const CorrelationTable corr = exact_correlations(lat, ModelParams::plus(lat), 2);
  const ChaosKernel k = build_chaos_kernel(corr, VectorX::Constant(9, 0.3), 2);
  for (LawFamily fam : {LawFamily::gaussian, LawFamily::rademacher, LawFamily::uniform}) {
    const DisorderLaw law{fam};
    std::vector<double> v, v2;
    for (Index r = 0; r < 40000; ++r) {
      const VectorX w = sample_disorder(lat, law, 17, static_cast<std::uint64_t>(r));
      const double y = k(w) - 1.0;
      v2.push_back(y * y);
    }
    const auto m = test::mean_se(v2);
    CHECK(std::abs(m.mean - k.variance()) < 3 * m.se + 1e-12);
  }
}

TEST_CASE("high temperature expansion") {
  SUBCASE("zero field") {
    const Lattice lat = discretize_domain(DomainSpec::unit_square(0.25));
    const ExternalField f = field_for(lat, 0.0, 0.0, VectorX::Zero(9));
    CHECK(std::abs(evaluate_high_temperature_expansion(lat, ModelParams::plus(lat), f) - 1.0) < 1e-14);
  }
  SUBCASE("real and complex fields against the exact solver") {
    for (double a : {1.0 / 3.0, 0.25, 0.2}) {
      const Lattice lat = discretize_domain(DomainSpec::unit_square(a));
      ModelParams p = ModelParams::plus(lat);
      const VectorX w = test::random_real_field(lat.size(), 5, 1.0);
      const Profile phi = profiles::gaussian_bump({0.5, 0.5}, 0.4, 3.0);
      for (const Profile* ph : {static_cast<const Profile*>(nullptr), &phi}) {
        const ExternalField f = field_for(lat, 1.3, 0.7, w, ph);
        CHECK(rel_err(evaluate_high_temperature_expansion(lat, p, f), rescaled_partition(lat, p, f)) < 1e-10);
      }
      p.boundary = Eigen::VectorXi::Constant(lat.boundary.size(), 1);
      for (Index b = 0; b < p.boundary.size(); b += 2) p.boundary(b) = -1;
      const ExternalField f = field_for(lat, 1.0, -0.2, w, &phi);
      CHECK(rel_err(evaluate_high_temperature_expansion(lat, p, f), rescaled_partition(lat, p, f)) < 1e-10);
    }
  }
  SUBCASE("imaginary single site") {
    const Lattice lat = discretize_domain(DomainSpec::unit_square(0.5));
    const Profile phi = profiles::constant(5.0);
    const ExternalField f = field_for(lat, 0.0, 0.0, VectorX::Zero(1), &phi);
    const double t = f.phi_tilde(0);
    const cplx expect(std::cos(t), std::tanh(4 * beta_c) * std::sin(t));
    const ModelParams p = ModelParams::plus(lat);
    CHECK(std::abs(evaluate_high_temperature_expansion(lat, p, f) - expect) < 1e-14);
    CHECK(std::abs(characteristic_function(lat, p, f) - expect) < 1e-14);
  }
  SUBCASE("size cap") {
    const Lattice lat = discretize_domain(DomainSpec::strip(17, 1, 0.05));
    CHECK_THROWS_AS(evaluate_high_temperature_expansion(lat, ModelParams::plus(lat),
                                                        field_for(lat, 1.0, 0.0, VectorX::Zero(17))),
                    Error);
  }
}

TEST_CASE("chaos ladder") {
  const Lattice lat = discretize_domain(DomainSpec::unit_square(0.25));
  const ModelParams p = ModelParams::plus(lat);
  const CorrelationTable corr = exact_correlations(lat, p, 9);
  const Profile phi = profiles::gaussian_bump({0.5, 0.5}, 0.5, 2.0);
  const ExternalField f0 = field_for(lat, 1.0, 0.5, sample_disorder(lat, {}, 9), &phi);
  const ChaosKernel full = build_chaos_kernel(corr, f0.lambda_a, 9);

  SUBCASE("full truncation reproduces the partition function") {
    const ChaosEvaluator ev = transform_chaos(full, f0, ChaosMode::truncate, 9);
    CHECK(rel_err(ev.prefactor() * ev(f0.omega), rescaled_partition(lat, p, f0)) < 1e-12);
  }
  SUBCASE("linearize at zero disorder") {
    const ExternalField z = field_for(lat, 1.0, 0.0, VectorX::Zero(9));
    const ChaosEvaluator ev = transform_chaos(full, z, ChaosMode::linearize, 4);
    CHECK(std::abs(ev(z.omega) - 1.0) < 1e-15);
  }
  SUBCASE("gaussianize matches wiener chaos at degree one") {
    const ExternalField f = field_for(lat, 1.0, 0.5, VectorX::Zero(9));
    const VectorX th = test::random_real_field(9, 21, 1.0);
    const ChaosEvaluator ev = transform_chaos(full, f, ChaosMode::gaussianize, 1);
    const double w = wiener_chaos_partition(corr, lat, profiles::constant(1.0), profiles::constant(0.5), th, 1);
    CHECK(std::abs(ev(th) - w) < 1e-13);
  }
  SUBCASE("degree cap") {
    const ChaosKernel k3 = full.truncated(3);
    CHECK_THROWS_AS(transform_chaos(k3, f0, ChaosMode::truncate, 4), Error);
    CHECK_THROWS_AS(wiener_chaos_partition(exact_correlations(lat, p, 2), lat, profiles::constant(1.0),
                                           profiles::constant(0.0), VectorX::Zero(9), 3),
                    Error);
  }
  SUBCASE("truncation error decreases in the degree") {
    double prev_kernel = full.tail_norm(0);
    for (int l = 1; l <= 9; ++l) {
      CHECK(full.tail_norm(l) <= prev_kernel);
      prev_kernel = full.tail_norm(l);
    }
    CHECK(full.tail_norm(9) == 0.0);
    const ChaosEvaluator ev_full = transform_chaos(full, f0, ChaosMode::truncate, 9);
    std::vector<ChaosEvaluator> evs;
    for (int l = 0; l <= 9; ++l) evs.push_back(transform_chaos(full, f0, ChaosMode::truncate, l));
    std::vector<RunningStats> err(10);
    for (Index r = 0; r < 10000; ++r) {
      const VectorX w = sample_disorder(lat, {}, 31, static_cast<std::uint64_t>(r));
      const cplx y = ev_full(w);
      for (int l = 0; l <= 9; ++l) err[l].add(std::norm(y - evs[l](w)));
    }
    for (int l = 1; l <= 9; ++l) CHECK(err[l].mean() <= err[l - 1].mean());
    CHECK(err[9].mean() < 1e-24);
  }
}

TEST_CASE("influences and lindeberg report") {
  const Lattice lat = discretize_domain(DomainSpec::unit_square(0.125));
  const Profile phi = profiles::gaussian_bump({0.3, 0.6}, 0.3, 2.0);
  const ChaosKernel wn = white_noise_kernel(lat, phi);
  const VectorX inf = wn.influences();
  for (Index x = 0; x < lat.size(); ++x)
    CHECK(inf(x) == doctest::Approx(0.125 * 0.125 * phi(lat.sites[x]) * phi(lat.sites[x])).epsilon(1e-14));

  const Functional g = [](const VectorX& y) { return std::cos(y.sum()); };
  const LindebergReport same = influence_and_lindeberg_bound({wn}, {}, {}, g, 20000, 3);
  CHECK(same.gap <= 3 * same.gap_se + 1e-15);
  CHECK(same.third_moment == doctest::Approx(2 * std::sqrt(2 / M_PI)));
  CHECK(same.structural == doctest::Approx(same.third_moment * wn.variance() * std::sqrt(wn.max_influence())));

  const LindebergReport rad = influence_and_lindeberg_bound({wn}, {LawFamily::rademacher}, {}, g, 20000, 3);
  CHECK(rad.gap >= 0.0);
  CHECK(rad.gap_se > 0.0);
  CHECK(lindeberg_report_json(rad).find("\"structural\"") != std::string::npos);
}

TEST_CASE("tanh moment table") {
  const TanhMomentTable z = tanh_moment_table({}, 0.0, 0.0, 0.0, 0.125, 1000, 1);
  for (int q = 0; q < 5; ++q) CHECK(z.estimate[q] == 0.0);

  std::vector<double> as, re2, im;
  const DisorderLaw law{};
  for (int k = 3; k <= 6; ++k) {
    const double a = std::ldexp(1.0, -k);
    const TanhMomentTable t = tanh_moment_table(law, 1.0, 0.0, 0.0, a, 1000000, 7);
    as.push_back(a);
    re2.push_back(t.estimate[1] - t.leading[1]);
    const TanhMomentTable ti = tanh_moment_table(law, 1.0, 0.0, 1.0, a, 200000, 8);
    CHECK(std::abs(ti.estimate[2] - ti.leading[2]) < 0.1 * ti.leading[2]);
    im.push_back(std::abs(ti.estimate[2] - ti.leading[2]) / ti.leading[2]);
  }
  const LineFit fit = fit_power_law(as, re2);
  CHECK(fit.slope == doctest::Approx(3.5).epsilon(0.04));
  for (std::size_t i = 1; i < im.size(); ++i) CHECK(im[i] < im[i - 1]);
}

TEST_CASE("wiener chaos partition") {
  const Lattice lat = discretize_domain(DomainSpec::unit_square(0.25));
  const CorrelationTable corr = exact_correlations(lat, ModelParams::plus(lat), 2);
  CHECK(wiener_chaos_partition(corr, lat, profiles::constant(0.0), profiles::constant(0.0),
                               test::random_real_field(9, 1, 1.0), 2) == 1.0);
}

TEST_CASE("wiener chaos variance across meshes") {
  const Profile lam = profiles::gaussian_bump({0.5, 0.5}, 0.25);
  std::vector<double> var;
  for (double a0 : {1.0 / 16, 1.0 / 32}) {
    const Lattice lat = discretize_domain(DomainSpec::unit_square(a0));
    CorrelationAccumulator acc(lat.size());
    SamplingOptions opt;
    opt.algorithm = Algorithm::wolff;
    sample_gibbs(lat, ModelParams::plus(lat), 4000, 5, opt, [&](const SpinVector& s, Index) { acc.add(s); });
    const WienerChaos wc(acc.table(a0, 2), lat, lam, profiles::constant(0.0), 2);
    MatrixX th(10000, lat.size());
    for (Index r = 0; r < th.rows(); ++r) th.row(r) = sample_white_noise_grid(lat, 11, r).values.transpose();
    const VectorX v = wc.batch(th);
    CHECK(std::abs(v(0) - wc(th.row(0).transpose())) < 1e-12);
    const double m = v.mean();
    var.push_back((v.array() - m).square().sum() / double(v.size() - 1));
  }
  CHECK(std::isfinite(var[0]));
  CHECK(std::abs(var[1] / var[0] - 1) < 0.1);
}
