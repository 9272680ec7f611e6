#include <doctest.h>

#include <cmath>
#include <sstream>

#include "helpers.hpp"
#include "rfim/besov.hpp"

using namespace rfim;

namespace {

const WaveletBasis& db(int order) {
  static const WaveletBasis b3 = build_wavelet_basis(WaveletFamily::daubechies, 3);
  static const WaveletBasis b4 = build_wavelet_basis(WaveletFamily::daubechies, 4);
  return order == 3 ? b3 : b4;
}

// Trapezoid rule on the table grid: ∫ u(x) v(x - s) dx.
double table_inner(const DyadicTable& u, const DyadicTable& v, int shift) {
  const Index scale = Index(1) << u.depth();
  const Index n = static_cast<Index>(std::lround(u.support())) * scale;
  double s = 0;
  for (Index i = 0; i <= n; ++i) {
    const double x = double(i) / double(scale);
    const double w = (i == 0 || i == n) ? 0.5 : 1.0;
    s += w * u(x) * v(x - shift);
  }
  return s / double(scale);
}

GridField random_cells(int cells, std::uint64_t seed) {
  GridField f;
  f.x = Axis::intervals(VectorX::LinSpaced(cells + 1, 0.0, 1.0));
  f.y = Axis::intervals(VectorX::LinSpaced(cells + 1, 0.0, 1.0));
  f.values = test::random_real_field(cells * cells, seed, 1.0).reshaped(cells, cells);
  return f;
}

}  // namespace

TEST_CASE("daubechies filters") {
  const WaveletBasis d2 = build_wavelet_basis(WaveletFamily::daubechies, 2);
  const double s3 = std::sqrt(3.0), n = 4 * std::sqrt(2.0);
  const double expect[] = {(1 + s3) / n, (3 + s3) / n, (3 - s3) / n, (1 - s3) / n};
  for (int k = 0; k < 4; ++k) CHECK(d2.h(k) == doctest::Approx(expect[k]).epsilon(1e-13));
  for (int N = 1; N <= 6; ++N) {
    const WaveletBasis b = build_wavelet_basis(WaveletFamily::daubechies, N, {}, 8);
    CHECK(b.h.sum() == doctest::Approx(std::sqrt(2.0)).epsilon(1e-13));
    for (int m = 0; 2 * m < b.taps(); ++m) {
      double s = 0;
      for (int k = 0; k + 2 * m < b.taps(); ++k) s += b.h(k) * b.h(k + 2 * m);
      CHECK(std::abs(s - (m == 0 ? 1.0 : 0.0)) < 1e-12);
    }
    for (int p = 0; p < N; ++p) {
      double s = 0;
      for (int k = 0; k < b.taps(); ++k) s += std::pow(double(k), p) * b.g(k);
      CHECK(std::abs(s) < 1e-9 * std::pow(double(b.taps()), p));
    }
  }
  CHECK(build_wavelet_basis("db4").name() == "db4");
  CHECK(db(3).regularity == 1);
  CHECK_THROWS_AS(build_wavelet_basis(WaveletFamily::haar, 1, -0.2), Error);
  CHECK_THROWS_AS(build_wavelet_basis(WaveletFamily::daubechies, 2, -0.5), Error);
  CHECK_NOTHROW(build_wavelet_basis(WaveletFamily::daubechies, 3, -0.5, 8));
}

TEST_CASE("haar debug family") {
  const WaveletBasis h = build_wavelet_basis(WaveletFamily::haar, 1, {}, 6);
  CHECK(std::abs(h.psi.antiderivative(1.0)) < 1e-15);
  CHECK(h.phi(0.3) == 1.0);
  CHECK(h.psi(0.25) == doctest::Approx(1.0));
  CHECK(h.psi(0.75) == doctest::Approx(-1.0));
}

TEST_CASE("orthonormality and two-scale relation") {
  for (int order : {3, 4}) {
    const WaveletBasis& b = db(order);
    // 5×5 window of translates: Gram(k, k') = G1(k1-k1') G1(k2-k2').
    auto g1 = [&](const DyadicTable& u, const DyadicTable& v, int s) { return table_inner(u, v, s); };
    for (int d1 = -4; d1 <= 4; ++d1)
      for (int d2 = -4; d2 <= 4; ++d2) {
        const double pp = g1(b.phi, b.phi, d1) * g1(b.phi, b.phi, d2);
        CHECK(std::abs(pp - (d1 == 0 && d2 == 0 ? 1.0 : 0.0)) < 1e-8);
        const double pw = g1(b.phi, b.phi, d1) * g1(b.psi, b.phi, d2);
        CHECK(std::abs(pw) < 1e-8);
        const double ww = g1(b.psi, b.psi, d1) * g1(b.psi, b.psi, d2);
        CHECK(std::abs(ww - (d1 == 0 && d2 == 0 ? 1.0 : 0.0)) < 1e-8);
      }
    // Two-scale consistency on the depth J-1 grid.
    const Index scale = Index(1) << (b.phi.depth() - 1);
    double err = 0;
    for (Index i = 0; i <= b.span() * scale; ++i) {
      const double x = double(i) / double(scale);
      double r = 0;
      for (int k = 0; k < b.taps(); ++k) r += std::sqrt(2.0) * b.h(k) * b.phi(2 * x - k);
      err = std::max(err, std::abs(r - b.phi(x)));
    }
    CHECK(err < 1e-6);
    // Vanishing moments of ψ: ∫ x^p ψ = 0 for p < order.
    for (int p = 0; p < order; ++p) {
      const Index sc = Index(1) << b.psi.depth();
      double m = 0;
      for (Index i = 0; i <= b.span() * sc; ++i) m += std::pow(double(i) / double(sc), p) * b.psi.value_at(i);
      CHECK(std::abs(m / double(sc)) < 1e-8);
    }
    CHECK(b.phi.antiderivative(b.phi.support()) == doctest::Approx(1.0).epsilon(1e-13));
  }
}

TEST_CASE("projection examples") {
  const WaveletBasis& b = db(3);
  GridField zero = random_cells(4, 1);
  zero.values.setZero();
  const LevelCoefficients z = mra_project(zero, 2, b);
  for (int t = 0; t < 4; ++t) CHECK(z.c[t].cwiseAbs().maxCoeff() == 0.0);

  // f = φ_{n,k0} as a separable product of 1D scaling functions.
  const int n = 2;
  const Index k1 = 1, k2 = -2;
  const double s = std::ldexp(1.0, n);
  auto comp = [&](Index k) { return [&b, s, k](double x) { return std::sqrt(s) * b.phi(s * x - double(k)); }; };
  const GridField pf = separable_field(comp(k1), comp(k2),
                                       Box(Point(k1 / s, k2 / s), Point((k1 + b.span()) / s, (k2 + b.span()) / s)));
  const LevelCoefficients pc = mra_project(pf, n, b);
  for (Index r = 0; r < pc.rows(); ++r)
    for (Index c = 0; c < pc.cols(); ++c) {
      const bool hit = pc.k1_lo + c == k1 && pc.k2_lo + r == k2;
      CHECK(std::abs(pc.c[0](r, c) - (hit ? 1.0 : 0.0)) < 1e-8);
      for (int t = 1; t < 4; ++t) CHECK(std::abs(pc.c[t](r, c)) < 1e-8);
    }

  // Interior wavelet coefficients of a constant vanish.
  const GridField cst = box_indicator(Point(-2, -2), Point(2, 2));
  const LevelCoefficients cc = mra_project(cst, 3, b);
  double worst = 0;
  for (Index r = 0; r < cc.rows(); ++r)
    for (Index c = 0; c < cc.cols(); ++c) {
      const Index k1i = cc.k1_lo + c, k2i = cc.k2_lo + r;
      if (k1i >= -16 && k1i + b.span() <= 16 && k2i >= -16 && k2i + b.span() <= 16)
        for (int t = 1; t < 4; ++t) worst = std::max(worst, std::abs(cc.c[t](r, c)));
    }
  CHECK(worst < 1e-8);

  std::ostringstream os;
  write_coefficients_csv(os, pc);
  CHECK(os.str().find("\n2,0,0.25,-0.5,") != std::string::npos);
}

TEST_CASE("filter bank identities") {
  for (int order : {3, 4}) {
    const WaveletBasis& b = db(order);
    LevelCoefficients top;
    top.level = 5;
    top.k1_lo = -3;
    top.k2_lo = 2;
    top.c[0] = test::random_real_field(30 * 27, 3, 1.0).reshaped(27, 30);
    double energy = top.c[0].squaredNorm(), parts = 0;
    std::vector<LevelCoefficients> chain;
    LevelCoefficients cur = top;
    while (cur.level > 0) {
      LevelCoefficients d = decompose(cur, b);
      for (int t = 1; t < 4; ++t) parts += d.c[t].squaredNorm();
      chain.push_back(d);
      cur = d;
    }
    parts += cur.c[0].squaredNorm();
    CHECK(std::abs(parts - energy) < 1e-10 * energy);
    // Reconstruction from level 0 upwards.
    LevelCoefficients up = chain.back();
    for (std::size_t i = chain.size(); i-- > 0;) {
      LevelCoefficients step = chain[i];
      step.c[0] = up.c[0];
      step.k1_lo = up.k1_lo;
      step.k2_lo = up.k2_lo;
      step.c[0] = up.c[0];
      if (step.c[1].rows() != up.c[0].rows() || step.c[1].cols() != up.c[0].cols()) break;
      const LevelCoefficients rec = reconstruct(step, b);
      up = rec;
      if (i > 0) {
        LevelCoefficients& next = chain[i - 1];
        const Index dr = next.k2_lo - up.k2_lo, dc = next.k1_lo - up.k1_lo;
        up.c[0] = MatrixX(up.c[0].block(dr, dc, next.c[1].rows(), next.c[1].cols()));
        up.k1_lo = next.k1_lo;
        up.k2_lo = next.k2_lo;
      }
    }
    const Index dr = top.k2_lo - up.k2_lo, dc = top.k1_lo - up.k1_lo;
    CHECK((up.c[0].block(dr, dc, 27, 30) - top.c[0]).cwiseAbs().maxCoeff() < 1e-12);

    // Filter bank agrees with direct projection one level down.
    const GridField f = random_cells(8, 11);
    const LevelCoefficients fine = mra_project(f, 4, b, true, false);
    const LevelCoefficients coarse = decompose(fine, b);
    const LevelCoefficients direct = mra_project(f, 3, b);
    for (int t = 0; t < 4; ++t) {
      const Index dr2 = direct.k2_lo - coarse.k2_lo, dc2 = direct.k1_lo - coarse.k1_lo;
      CHECK((coarse.c[t].block(dr2, dc2, direct.rows(), direct.cols()) - direct.c[t]).cwiseAbs().maxCoeff() < 1e-10);
    }
  }
}

TEST_CASE("besov norm examples") {
  const WaveletBasis& b = db(3);
  GridField zero = random_cells(4, 1);
  zero.values.setZero();
  CHECK(besov_holder_norm(zero, -0.3, 4, b).value == 0.0);
  CHECK_THROWS_AS(besov_holder_norm(zero, -0.3, 4, build_wavelet_basis(WaveletFamily::haar, 1, {}, 6)), Error);

  // Single wavelet ψ^{(1)}_{m,x0}.
  const int m = 3;
  const double alpha = -0.3;
  std::vector<LevelCoefficients> levels;
  for (int n = 1; n <= 5; ++n) {
    LevelCoefficients lc;
    lc.level = n;
    for (int t = 1; t < 4; ++t) lc.c[t] = MatrixX::Zero(3, 3);
    if (n == m) lc.c[1](1, 1) = 1.0;
    levels.push_back(lc);
  }
  LevelCoefficients l0;
  l0.c[0] = MatrixX::Zero(1, 1);
  const BesovNorm bn = besov_norm_from_coefficients(l0, levels, alpha, b, 4);
  const double sup = b.phi.sup(2) * b.psi.sup(2);
  CHECK(bn.level_term[m - 1] == doctest::Approx(std::pow(2.0, alpha * m) * std::ldexp(1.0, m) * sup).epsilon(1e-12));
  CHECK(bn.argsup_level == m);
  CHECK(besov_norm_json(bn).find("\"argsup_level\": 3") != std::string::npos);

  // Dilation covariance: f(2·) at level n+1 carries half the level-n coefficients of f.
  const GridField f = random_cells(8, 5);
  GridField g = f;
  g.x = Axis::intervals(f.x.nodes / 2);
  g.y = Axis::intervals(f.y.nodes / 2);
  for (int n = 1; n <= 4; ++n) {
    const LevelCoefficients cf = mra_project(f, n, b), cg = mra_project(g, n + 1, b);
    CHECK(cf.k1_lo == cg.k1_lo);
    for (int t = 0; t < 4; ++t) CHECK((cg.c[t] - 0.5 * cf.c[t]).cwiseAbs().maxCoeff() < 1e-14);
  }
  const BesovNorm nf = besov_holder_norm(f, alpha, 4, b), ng = besov_holder_norm(g, alpha, 5, b);
  for (int n = 1; n <= 4; ++n)
    CHECK(ng.level_term[n] == doctest::Approx(std::pow(2.0, alpha) * nf.level_term[n - 1]).epsilon(1e-12));
}

TEST_CASE("test function norm") {
  const auto lib = bump_library();
  CHECK(lib.size() == 3);
  for (const auto& g : lib) {
    double mx = 0;
    for (int i = -50; i <= 50; ++i)
      for (int j = -50; j <= 50; ++j) mx = std::max(mx, std::abs(g(Point(i / 50.0, j / 50.0))));
    CHECK(mx <= 1.0 + 1e-12);
  }
  GridField zero = random_cells(4, 1);
  zero.values.setZero();
  CHECK(test_function_norm(zero, -0.3, 4, lib) == 0.0);

  const Field2D g0 = lib[0];
  const GridField f = quadrature_field(g0, Box(Point(-1, -1), Point(1, 1)), 16);
  const double g2 = integrate_box([&](const Point& y) { return g0(y) * g0(y); }, Box(Point(-1, -1), Point(1, 1)), 64);
  CHECK(test_function_norm(f, -0.3, 3, lib) >= g2 * (1 - 1e-6));

  // Norm equivalence spot check on random piecewise-constant fields.
  const WaveletBasis& b = db(3);
  double lo = 1e300, hi = 0;
  for (int r = 0; r < 20; ++r) {
    const GridField fr = random_cells(16, 100 + r);
    const double ratio = test_function_norm(fr, -0.5, 4, lib) / besov_holder_norm(fr, -0.5, 6, b).value;
    lo = std::min(lo, ratio);
    hi = std::max(hi, ratio);
  }
  CHECK(hi / lo < 3.0);
}

TEST_CASE("box dimension") {
  std::vector<int> lv;
  for (int n = 2; n <= 9; ++n) lv.push_back(n);
  const BoxDimension sq = box_dimension(rectangle(Point(0.1, 0.2), Point(0.8, 0.7)), lv);
  CHECK(sq.dimension == doctest::Approx(1.0).epsilon(0.05));
  CHECK(box_dimension(Polygon{Point(0.3, 0.3)}, lv).dimension == doctest::Approx(0.0));
  const Polygon koch = quadratic_koch_island(Point(0.25, 0.25), 0.5, 4);
  const BoxDimension kd = box_dimension(koch, {2, 3, 4, 5, 6, 7, 8});
  CHECK(kd.dimension == doctest::Approx(1.5).epsilon(0.1 / 1.5));
}

TEST_CASE("subdomain integration") {
  const WaveletBasis& b = db(3);
  const double alpha = -0.5;
  auto bump1 = [](double c, double w) { return [c, w](double x) { return std::exp(-(x - c) * (x - c) / (w * w)); }; };
  const GridField f = separable_field(bump1(0.5, 0.2), bump1(0.45, 0.15), Box(Point(-0.5, -0.5), Point(1.5, 1.5)));

  SUBCASE("smooth field on a square") {
    const Region B = Region::from_box(Point(0.3, 0.25), Point(0.65, 0.7));
    const SubdomainIntegral I = integrate_over_subdomain(f, B, alpha, b, 10);
    auto erf_int = [](double c, double w, double a, double z) {
      return 0.5 * std::sqrt(M_PI) * w * (std::erf((z - c) / w) - std::erf((a - c) / w));
    };
    const double exact = erf_int(0.5, 0.2, 0.3, 0.65) * erf_int(0.45, 0.15, 0.25, 0.7);
    CHECK(std::abs(I.value - exact) < 1e-3 * exact);
    CHECK(I.dimension == doctest::Approx(1.0).epsilon(0.05));
  }
  SUBCASE("disjoint region") {
    const GridField local = separable_field(bump1(0.2, 0.02), bump1(0.2, 0.02), Box(Point(0.1, 0.1), Point(0.3, 0.3)));
    const SubdomainIntegral I = integrate_over_subdomain(local, Region::from_box(Point(0.6, 0.6), Point(0.9, 0.9)), alpha, b, 8);
    CHECK(std::abs(I.value) <= I.tail_bound + 1e-12);
  }
  SUBCASE("atomic magnetisation on the left half") {
    const Lattice lat = discretize_domain(DomainSpec::unit_square(1.0 / 16));
    SpinVector s(lat.size());
    CounterRng rng(9, Purpose::Test);
    for (Index i = 0; i < s.size(); ++i) s(i) = rng.uniform() < 0.6 ? 1 : -1;
    const MagnetisationField m{&lat, s, Representation::atomic};
    const double edge = 0.5 + lat.mesh / 2;
    const SubdomainIntegral I =
        integrate_over_subdomain(grid_field(m), Region::from_box(Point(0, 0), Point(edge, 1)), alpha, b, 8);
    double direct = 0;
    const VectorX w = m.weights();
    for (Index i = 0; i < lat.size(); ++i)
      if (lat.sites[i].x() < edge) direct += w(i);
    CHECK(std::abs(I.value - direct) <= I.tail_bound + 1e-9);
  }
  SUBCASE("rough pairs respect the tail bound") {
    for (int r = 0; r < 4; ++r) {
      const GridField fr = random_cells(16, 300 + r);
      const Region B = r % 2 ? Region::from_polygon(quadratic_koch_island(Point(0.3, 0.25), 0.375, 2))
                             : Region::from_box(Point(0.1 + 0.05 * r, 0.2), Point(0.77, 0.61));
      const SubdomainIntegral lo = integrate_over_subdomain(fr, B, alpha, b, 6);
      const SubdomainIntegral hi = integrate_over_subdomain(fr, B, alpha, b, 9);
      CHECK(std::abs(hi.value - lo.value) <= lo.tail_bound);
      CHECK(lo.tail_bound > 0);
    }
  }
  SUBCASE("rectilinear region decomposition") {
    const Polygon k = quadratic_koch_island(Point(0.25, 0.25), 0.5, 3);
    const Region B = Region::from_polygon(k);
    CHECK(B.area() == doctest::Approx(polygon_area(k)).epsilon(1e-12));
    CHECK(B.area() == doctest::Approx(0.25).epsilon(1e-12));
    const Region P = Region::from_polygon(Polygon{Point(0.1, 0.1), Point(0.9, 0.2), Point(0.4, 0.8)}, 8);
    CHECK(std::abs(P.area() - 0.5 * std::abs(0.8 * 0.7 - 0.1 * 0.3)) <= P.pixel_error_area);
  }
  SUBCASE("dimension guard") {
    SubdomainOptions opt;
    opt.dimension = 1.7;
    CHECK_THROWS_AS(integrate_over_subdomain(f, Region::from_box(Point(0, 0), Point(1, 1)), -0.5, b, 4, opt), Error);
  }
}
