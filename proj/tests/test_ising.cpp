#include <doctest.h>

#include <cmath>

#include "helpers.hpp"
#include "rfim/ising.hpp"

using namespace rfim;
using rfim::test::rel_err;

namespace {

/// Brute-force ratio of Boltzmann sums, used as an independent oracle.
cplx brute_partition(const Lattice& lat, const ModelParams& p, const VectorXc& xi) {
  const int n = static_cast<int>(lat.size());
  cplx num = 0;
  double den = 0;
  for (long g = 0; g < (1L << n); ++g) {
    auto s = [&](int x) { return ((g >> x) & 1) ? -1 : 1; };
    double e = 0;
    for (const auto& b : lat.bonds) e += s(b[0]) * s(b[1]);
    for (int x = 0; x < n; ++x)
      for (int b : lat.boundary_bonds[x]) e += s(x) * p.boundary_value(b);
    cplx f = 0;
    for (int x = 0; x < n; ++x) f += double(s(x)) * xi(x);
    const double w = std::exp(p.beta * e);
    den += w;
    num += w * std::exp(f);
  }
  return num / den;
}

}  // namespace

TEST_CASE("single site closed forms") {
  const Lattice lat = discretize_domain(DomainSpec::unit_square(0.5));
  const ModelParams p = ModelParams::plus(lat);
  CHECK(std::abs(exact_partition(lat, p) - 1.0) < 1e-15);
  for (double xi : {0.3, -1.2, 2.0}) {
    VectorX f(1);
    f << xi;
    const double z = (std::exp(4 * beta_c + xi) + std::exp(-4 * beta_c - xi)) /
                     (std::exp(4 * beta_c) + std::exp(-4 * beta_c));
    CHECK(exact_partition<double>(lat, p, f) == doctest::Approx(z).epsilon(1e-14));
  }
  const CorrelationTable t = exact_correlations(lat, p, 1);
  CHECK(t.at({0}) == doctest::Approx(std::tanh(4 * beta_c)).epsilon(1e-14));
  CHECK(std::tanh(4 * beta_c) == doctest::Approx(0.943).epsilon(1e-3));
}

TEST_CASE("complex conjugation symmetry") {
  const Lattice lat = discretize_domain(DomainSpec::unit_square(0.25));
  const ModelParams p = ModelParams::plus(lat);
  VectorXc f = VectorXc::Zero(lat.size());
  for (Index i = 0; i < f.size(); ++i) f(i) = cplx(0, 1e-3 * (i + 1));
  const cplx zp = exact_partition<cplx>(lat, p, f);
  const cplx zm = exact_partition<cplx>(lat, p, VectorXc(-f));
  CHECK(std::abs(zm - std::conj(zp)) < 1e-15);
  CHECK(std::abs(zp) <= 1.0 + 1e-12);
}

TEST_CASE("enumeration agrees with a brute-force oracle, any boundary") {
  const Lattice lat = discretize_domain(DomainSpec::strip(3, 3, 0.25));
  ModelParams p = ModelParams::plus(lat);
  CounterRng r(5, Purpose::Test);
  for (Index b = 0; b < p.boundary.size(); ++b) p.boundary(b) = (r() >> 63) ? 1 : -1;
  const VectorXc xi = test::random_complex_field(lat.size(), 3, 0.4);
  CHECK(rel_err(exact_partition<cplx>(lat, p, xi), brute_partition(lat, p, xi)) < 1e-12);
}

TEST_CASE("transfer matrix matches enumeration") {
  for (int w = 1; w <= 4; ++w)
    for (int h = 1; h <= 5; ++h) {
      const Lattice lat = discretize_domain(DomainSpec::strip(w, h, 0.1));
      const ModelParams p = ModelParams::plus(lat);
      const VectorXc xi = test::random_complex_field(lat.size(), 100 * w + h, 0.5);
      CHECK(rel_err(transfer_matrix_partition<cplx>(lat, p, xi), exact_partition<cplx>(lat, p, xi)) < 1e-12);
      const VectorX xr = test::random_real_field(lat.size(), 7 * w + h, 0.5);
      CHECK(std::abs(transfer_matrix_partition<double>(lat, p, xr) / exact_partition<double>(lat, p, xr) - 1) <
            1e-12);
    }
}

TEST_CASE("transfer matrix on a 1 x H chain matches a 2x2 matrix product") {
  const int H = 7;
  const Lattice lat = discretize_domain(DomainSpec::strip(1, H, 0.1));
  const ModelParams p = ModelParams::plus(lat);
  const VectorX xi = test::random_real_field(H, 9, 0.3);
  // Boundary fields: two side neighbours everywhere, one more at each end.
  auto chain = [&](const VectorX& field) {
    Eigen::RowVector2d v;
    auto site = [&](int k) {
      const double b = p.beta * (2 + (k == 0) + (k == H - 1)) + field(k);
      return Eigen::Vector2d(std::exp(b), std::exp(-b));
    };
    v = site(0).transpose();
    Eigen::Matrix2d T;
    T << std::exp(p.beta), std::exp(-p.beta), std::exp(-p.beta), std::exp(p.beta);
    for (int k = 1; k < H; ++k) v = (v * T).cwiseProduct(site(k).transpose());
    return v.sum();
  };
  const double z = chain(xi) / chain(VectorX::Zero(H));
  CHECK(transfer_matrix_partition<double>(lat, p, xi) == doctest::Approx(z).epsilon(1e-13));
  CHECK(transfer_matrix_partition<double>(lat, p, VectorX::Zero(H)) == doctest::Approx(1.0).epsilon(1e-14));

  // Transposed strip: H x 1 uses the same sites in the same order.
  const Lattice row = discretize_domain(DomainSpec::strip(H, 1, 0.1));
  CHECK(transfer_matrix_partition<double>(row, ModelParams::plus(row), xi) ==
        doctest::Approx(transfer_matrix_partition<double>(lat, p, xi)).epsilon(1e-14));
}

TEST_CASE("transfer matrix width cap") {
  const Lattice lat = discretize_domain(DomainSpec::strip(21, 21, 0.01));
  try {
    transfer_matrix_partition(lat, ModelParams::plus(lat));
    FAIL("expected TooWide");
  } catch (const Error& e) {
    CHECK(e.code() == Errc::TooWide);
  }
  try {
    exact_partition(lat, ModelParams::plus(lat));
    FAIL("expected TooLarge");
  } catch (const Error& e) {
    CHECK(e.code() == Errc::TooLarge);
  }
}

TEST_CASE("correlations: Griffiths, FKG, spin flip") {
  const Lattice lat = discretize_domain(DomainSpec::unit_square(0.25));
  const CorrelationTable plus = exact_correlations(lat, ModelParams::plus(lat), 9);
  const CorrelationTable minus = exact_correlations(lat, ModelParams::minus(lat), 9);
  for (const auto& [I, v] : plus.entries()) {
    CHECK(v >= -1e-13);
    CHECK(v <= 1 + 1e-13);
    const double sign = I.size() % 2 ? -1.0 : 1.0;
    CHECK(minus.at(I) == doctest::Approx(sign * v).epsilon(1e-12));
  }
  for (int x = 0; x < 9; ++x)
    for (int y = x + 1; y < 9; ++y) CHECK(plus.at({x, y}) >= plus.at({x}) * plus.at({y}) - 1e-15);

  // The sparse route (above 22 sites) agrees with the dense one.
  const Lattice big = discretize_domain(DomainSpec::strip(4, 6, 0.1));
  const CorrelationTable sp = exact_correlations(big, ModelParams::plus(big), 1);
  VectorXc f = VectorXc::Zero(big.size());
  const double eps = 1e-5;
  f(5) = cplx(eps, 0);
  // d/dξ_5 log Z at 0 is E[σ_5].
  const double d = (std::log(exact_partition<cplx>(big, ModelParams::plus(big), f).real()) -
                    std::log(exact_partition<cplx>(big, ModelParams::plus(big), VectorXc(-f)).real())) /
                   (2 * eps);
  CHECK(sp.at({5}) == doctest::Approx(d).epsilon(1e-6));
  CHECK_THROWS_AS(sp.at({1, 2}), Error);
}

TEST_CASE("correlation csv round trip") {
  const Lattice lat = discretize_domain(DomainSpec::unit_square(1.0 / 3));
  const CorrelationTable t = exact_correlations(lat, ModelParams::plus(lat), 4);
  std::stringstream ss;
  write_correlations_csv(ss, t);
  const CorrelationTable u = read_correlations_csv(ss, 4, 4, lat.mesh);
  for (const auto& [I, v] : t.entries()) CHECK(u.at(I) == v);
}

TEST_CASE("rescaled partition and characteristic function") {
  const Lattice lat = discretize_domain(DomainSpec::unit_square(0.25));
  const ModelParams p = ModelParams::plus(lat);
  const VectorX w = sample_disorder(lat, {}, 1);
  const ExternalField zero = build_external_field(lat, profiles::constant(0), profiles::constant(0), w);
  CHECK(std::abs(rescaled_partition(lat, p, zero) - 1.0) < 1e-15);
  const ExternalField one = build_external_field(lat, profiles::constant(1), profiles::constant(0), w);
  CHECK(one.theta() == doctest::Approx(std::exp(-0.5 * std::pow(4.0, 0.25))).epsilon(1e-12));

  const Lattice site = discretize_domain(DomainSpec::unit_square(0.5));
  const Profile phi = profiles::constant(2.0);
  FieldOptions opt;
  opt.phi = &phi;
  const ExternalField f = build_external_field(site, profiles::constant(0), profiles::constant(0),
                                               VectorX::Zero(1), opt);
  const double pt = f.phi_tilde(0);
  const cplx mu = characteristic_function(site, ModelParams::plus(site), f);
  CHECK(std::abs(mu - cplx(std::cos(pt), std::sin(pt) * std::tanh(4 * beta_c))) < 1e-14);

  CounterRng r(77, Purpose::Test);
  for (int k = 0; k < 100; ++k) {
    const double c = 20 * r.normal();
    const Point g(10 * r.normal(), 10 * r.normal());
    const Profile ph = profiles::linear(c, g);
    FieldOptions o;
    o.phi = &ph;
    const ExternalField e = build_external_field(lat, profiles::constant(1), profiles::constant(1), w, o);
    CHECK(std::abs(characteristic_function(lat, p, e)) <= 1.0 + 1e-12);
  }
}

TEST_CASE("prefactor times exact Gaussian MGF tends to one") {
  // For fixed σ, θ_a E[exp(Σ λ^a ω σ)] = θ_a exp(½ Σ (λ^a)²).
  double prev = 0.0;
  for (int k : {8, 16, 32, 64, 128}) {
    const Lattice lat = discretize_domain(DomainSpec::unit_square(1.0 / k));
    const ExternalField f =
        build_external_field(lat, profiles::constant(1), profiles::constant(0), VectorX::Zero(lat.size()));
    const double v = std::exp(f.log_theta() + 0.5 * f.lambda_a.squaredNorm());
    CHECK(v < 1.0);
    CHECK(v > prev);
    prev = v;
  }
  CHECK(prev > 0.9);
}
