#include "rfim/disorder.hpp"

#include <cmath>

#include "rfim/quadrature.hpp"

namespace rfim {

const char* law_name(LawFamily f) {
  switch (f) {
    case LawFamily::gaussian: return "gaussian";
    case LawFamily::rademacher: return "rademacher";
    case LawFamily::uniform: return "uniform";
  }
  return "?";
}

LawFamily parse_law(const std::string& name) {
  if (name == "gaussian") return LawFamily::gaussian;
  if (name == "rademacher") return LawFamily::rademacher;
  if (name == "uniform") return LawFamily::uniform;
  fail(Errc::InvalidArgument, "unknown disorder law '" + name + "'");
}

double DisorderLaw::draw(std::uint64_t key, std::uint64_t counter) const {
  switch (family) {
    case LawFamily::gaussian: return normal_at(key, counter);
    case LawFamily::rademacher: return (counter_bits(key, counter) >> 63) ? 1.0 : -1.0;
    case LawFamily::uniform: return std::sqrt(3.0) * (2.0 * uniform_at(key, counter) - 1.0);
  }
  return 0.0;
}

double DisorderLaw::draw(CounterRng& rng) const {
  switch (family) {
    case LawFamily::gaussian: return rng.normal();
    case LawFamily::rademacher: return (rng() >> 63) ? 1.0 : -1.0;
    case LawFamily::uniform: return std::sqrt(3.0) * (2.0 * rng.uniform() - 1.0);
  }
  return 0.0;
}

double DisorderLaw::third_abs_moment() const {
  switch (family) {
    case LawFamily::gaussian: return 2.0 * std::sqrt(2.0 / 3.14159265358979323846);
    case LawFamily::rademacher: return 1.0;
    case LawFamily::uniform: return 3.0 * std::sqrt(3.0) / 4.0;
  }
  return 0.0;
}

double DisorderLaw::expect(const std::function<double(double)>& f) const {
  switch (family) {
    case LawFamily::gaussian: {
      static const QuadratureRule q = gauss_hermite_normal(60);
      double s = 0.0;
      for (Index i = 0; i < q.nodes.size(); ++i) s += q.weights(i) * f(q.nodes(i));
      return s;
    }
    case LawFamily::rademacher: return 0.5 * (f(1.0) + f(-1.0));
    case LawFamily::uniform: {
      static const QuadratureRule q = gauss_legendre(64);
      const double r = std::sqrt(3.0);
      double s = 0.0;
      for (Index i = 0; i < q.nodes.size(); ++i) s += q.weights(i) * f(r * q.nodes(i));
      return 0.5 * s;
    }
  }
  return 0.0;
}

namespace profiles {

Profile constant(double c) {
  return [c](const Point&) { return c; };
}

Profile gaussian_bump(const Point& center, double width, double c) {
  return [=](const Point& y) { return c * std::exp(-(y - center).squaredNorm() / (width * width)); };
}

Profile linear(double c0, const Point& g) {
  return [=](const Point& y) { return c0 + g.dot(y); };
}

}  // namespace profiles

VectorX sample_disorder(const Lattice& lat, const DisorderLaw& law, std::uint64_t seed,
                        std::uint64_t replica) {
  const std::uint64_t key = derive_key(seed, Purpose::Disorder, replica);
  VectorX w(lat.size());
  for (Index i = 0; i < w.size(); ++i) w(i) = law.draw(key, static_cast<std::uint64_t>(i));
  return w;
}

WhiteNoiseGrid sample_white_noise_grid(const Lattice& lat, std::uint64_t seed, std::uint64_t replica) {
  WhiteNoiseGrid g;
  g.mesh = lat.mesh;
  g.centers = lat.sites;
  g.parent_seed = seed;
  const std::uint64_t key = derive_key(seed, Purpose::WhiteNoise, replica);
  g.values.resize(lat.size());
  for (Index i = 0; i < lat.size(); ++i) g.values(i) = normal_at(key, static_cast<std::uint64_t>(i));
  return g;
}

WhiteNoiseGrid refine(const WhiteNoiseGrid& g, std::uint64_t seed) {
  WhiteNoiseGrid c;
  c.mesh = g.mesh / 2;
  c.parent_seed = seed;
  c.depth = g.depth + 1;
  const Index n = g.values.size();
  c.values.resize(4 * n);
  c.centers.reserve(4 * n);
  const std::uint64_t key = derive_key(seed, Purpose::Refinement, static_cast<std::uint64_t>(c.depth));
  const double q = g.mesh / 4;
  for (Index i = 0; i < n; ++i) {
    // Children given their average: z_k - mean(z) + parent/2 has the exact
    // conditional law of four unit Gaussians whose half-sum is the parent.
    double z[4];
    double mean = 0.0;
    for (int k = 0; k < 4; ++k) {
      z[k] = normal_at(key, static_cast<std::uint64_t>(4 * i + k));
      mean += z[k] / 4;
    }
    for (int k = 0; k < 4; ++k) {
      c.values(4 * i + k) = z[k] - mean + g.values(i) / 2;
      c.centers.push_back(g.centers[i] + Point((k & 1) ? q : -q, (k & 2) ? q : -q));
    }
  }
  return c;
}

WhiteNoiseGrid coarsen(const WhiteNoiseGrid& g) {
  require(g.depth > 0 && g.values.size() % 4 == 0, Errc::InvalidArgument, "grid was not refined");
  WhiteNoiseGrid p;
  p.mesh = g.mesh * 2;
  p.depth = g.depth - 1;
  const Index n = g.values.size() / 4;
  p.values.resize(n);
  for (Index i = 0; i < n; ++i) {
    p.values(i) = 0.5 * g.values.segment(4 * i, 4).sum();
    Point c = Point::Zero();
    for (int k = 0; k < 4; ++k) c += g.centers[4 * i + k] / 4;
    p.centers.push_back(c);
  }
  return p;
}

VectorX cell_integrals(const Lattice& lat, const Profile& phi) {
  VectorX v(lat.size());
  for (Index i = 0; i < lat.size(); ++i) v(i) = integrate_box(phi, lat.cell(i), 2);
  return v;
}

VectorXc ExternalField::xi() const {
  VectorXc z(size());
  z.real() = xi_real();
  z.imag() = phi_tilde;
  return z;
}

ExternalField build_external_field(const Lattice& lat, const Profile& lambda, const Profile& h,
                                   const VectorX& omega, const FieldOptions& opt) {
  require(omega.size() == lat.size(), Errc::InvalidArgument, "disorder length mismatch");
  const double a = lat.mesh;
  ExternalField f;
  f.mesh = a;
  f.omega = omega;
  f.lambda_a.resize(lat.size());
  f.h_a.resize(lat.size());
  for (Index i = 0; i < lat.size(); ++i) {
    f.lambda_a(i) = std::pow(a, 7.0 / 8.0) * lambda(lat.sites[i]);
    f.h_a(i) = std::pow(a, 15.0 / 8.0) * h(lat.sites[i]);
  }
  if (opt.chaos_normalized)
    require(f.lambda_a.minCoeff() > 0, Errc::NonPositiveLambda, "inf λ must be positive");
  if (opt.phi) {
    f.phi_tilde = std::pow(a, -1.0 / 8.0) * cell_integrals(lat, *opt.phi);
    f.has_phi = true;
  } else {
    f.phi_tilde = VectorX::Zero(lat.size());
  }
  f.lambda_l2_sq = integrate_domain([&](const Point& y) { const double l = lambda(y); return l * l; },
                                    lat.domain.shape, opt.l2_resolution);
  return f;
}

double pair_white_noise(const Lattice& lat, const VectorX& omega, const Profile& phi) {
  return omega.dot(cell_integrals(lat, phi)) / lat.mesh;
}

double white_noise_pairing_variance(const Lattice& lat, const Profile& phi) {
  return cell_integrals(lat, phi).squaredNorm() / (lat.mesh * lat.mesh);
}

}  // namespace rfim
