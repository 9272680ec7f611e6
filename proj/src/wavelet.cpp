#include <cmath>
#include <unsupported/Eigen/Polynomials>

#include "rfim/besov.hpp"

namespace rfim {

namespace {

// Hölder exponents of φ for Daubechies orders 1..10.
constexpr double holder_exponent[] = {0.0, 0.55, 1.088, 1.618, 1.969, 2.189, 2.460, 2.761, 3.074, 3.361};

VectorX daubechies_filter(int N) {
  if (N == 1) return VectorX::Constant(2, 1.0 / std::sqrt(2.0));
  // P(y) = Σ_{k<N} C(N-1+k, k) y^k with y = sin²(ω/2).
  VectorX p(N);
  double c = 1.0;
  for (int k = 0; k < N; ++k) {
    p(k) = c;
    c = c * (N + k) / (k + 1);
  }
  Eigen::PolynomialSolver<double, Eigen::Dynamic> solver;
  solver.compute(p);
  // H(z) = √2 ((1+z)/2)^N Π_j (z - z_j)/(1 - z_j), z_j the root of
  // z + 1/z = 2 - 4 y_j outside the unit circle.
  Eigen::VectorXcd poly = Eigen::VectorXcd::Ones(1);
  auto multiply = [&](cplx c0, cplx c1) {
    Eigen::VectorXcd out = Eigen::VectorXcd::Zero(poly.size() + 1);
    out.head(poly.size()) += c0 * poly;
    out.tail(poly.size()) += c1 * poly;
    poly = out;
  };
  for (int k = 0; k < N; ++k) multiply(0.5, 0.5);
  for (Index j = 0; j < solver.roots().size(); ++j) {
    const cplx y = solver.roots()(j);
    const cplx b = 2.0 - 4.0 * y;
    const cplx disc = std::sqrt(b * b - 4.0);
    cplx z = (b + disc) / 2.0;
    if (std::abs(z) < 1.0) z = (b - disc) / 2.0;
    multiply(-z / (1.0 - z), 1.0 / (1.0 - z));
  }
  return std::sqrt(2.0) * poly.real();
}

// Solves v = T v with Σ v = 1.
VectorX fixed_point(const MatrixX& T) {
  const Index n = T.rows();
  MatrixX A(n + 1, n);
  A.topRows(n) = T - MatrixX::Identity(n, n);
  A.row(n).setOnes();
  VectorX rhs = VectorX::Zero(n + 1);
  rhs(n) = 1.0;
  return A.colPivHouseholderQr().solve(rhs);
}

struct Tables {
  VectorX phi_values, psi_values, phi_cells, psi_cells;
};

Tables cascade(const VectorX& h, const VectorX& g, int J) {
  const int L = static_cast<int>(h.size()) - 1;
  const Index scale = Index(1) << J;
  const double r2 = std::sqrt(2.0);
  Tables t;

  // Point values at integers, then refinement to depth J.
  VectorX ints(L + 1);
  if (L == 1) {
    ints << 1.0, 0.0;
  } else {
    MatrixX T = MatrixX::Zero(L + 1, L + 1);
    for (int j = 0; j <= L; ++j)
      for (int k = 0; k <= L; ++k)
        if (2 * j - k >= 0 && 2 * j - k <= L) T(j, 2 * j - k) += r2 * h(k);
    ints = fixed_point(T);
  }
  const Index npts = L * scale + 1;
  VectorX v = VectorX::Zero(npts);
  for (int j = 0; j <= L; ++j) v(j * scale) = ints(j);
  auto phi_at = [&](Index i) { return (i < 0 || i >= npts) ? 0.0 : v(i); };
  for (int lev = 1; lev <= J; ++lev) {
    const Index step = Index(1) << (J - lev);
    for (Index i = step; i < npts; i += 2 * step) {
      double s = 0;
      for (int k = 0; k <= L; ++k) s += h(k) * phi_at(2 * i - k * scale);
      v(i) = r2 * s;
    }
  }
  t.phi_values = v;
  t.psi_values.resize(npts);
  for (Index i = 0; i < npts; ++i) {
    double s = 0;
    for (int k = 0; k <= L; ++k) s += g(k) * phi_at(2 * i - k * scale);
    t.psi_values(i) = r2 * s;
  }

  // Exact dyadic cell integrals.
  VectorX cells(L);
  if (L == 1) {
    cells << 1.0;
  } else {
    MatrixX T = MatrixX::Zero(L, L);
    for (int c = 0; c < L; ++c)
      for (int m = 0; m <= L; ++m)
        for (int q : {2 * c - m, 2 * c - m + 1})
          if (q >= 0 && q < L) T(c, q) += h(m) / r2;
    cells = fixed_point(T);
  }
  VectorX prev = cells;
  for (int lev = 1; lev <= J; ++lev) {
    const Index n = L * (Index(1) << lev), half = Index(1) << (lev - 1);
    VectorX next = VectorX::Zero(n);
    for (Index c = 0; c < n; ++c) {
      double s = 0;
      for (int m = 0; m <= L; ++m) {
        const Index q = c - m * half;
        if (q >= 0 && q < prev.size()) s += h(m) * prev(q);
      }
      next(c) = s / r2;
    }
    if (lev == J) {
      t.psi_cells = VectorX::Zero(n);
      for (Index c = 0; c < n; ++c) {
        double s = 0;
        for (int m = 0; m <= L; ++m) {
          const Index q = c - m * half;
          if (q >= 0 && q < prev.size()) s += g(m) * prev(q);
        }
        t.psi_cells(c) = s / r2;
      }
    }
    prev = std::move(next);
  }
  t.phi_cells = prev;
  if (J == 0) {
    t.psi_cells = VectorX::Zero(L);
    for (int c = 0; c < L; ++c)
      for (int m = 0; m <= L; ++m)
        for (int q : {2 * c - m, 2 * c - m + 1})
          if (q >= 0 && q < L) t.psi_cells(c) += g(m) * cells(q) / r2;
  }
  return t;
}

}  // namespace

DyadicTable::DyadicTable(int depth, VectorX values, VectorX cells)
    : depth_(depth), values_(std::move(values)) {
  support_ = std::ldexp(static_cast<double>(cells.size()), -depth);
  cumulative_.resize(cells.size() + 1);
  cumulative_(0) = 0.0;
  for (Index i = 0; i < cells.size(); ++i) cumulative_(i + 1) = cumulative_(i) + cells(i);
}

double DyadicTable::operator()(double x) const {
  const double t = std::ldexp(x, depth_);
  if (t < 0 || t > static_cast<double>(values_.size() - 1)) return 0.0;
  const Index i = std::min<Index>(static_cast<Index>(t), values_.size() - 2);
  const double f = t - static_cast<double>(i);
  return (1 - f) * values_(i) + f * values_(i + 1);
}

double DyadicTable::antiderivative(double x) const {
  const double t = std::ldexp(x, depth_);
  const Index last = cumulative_.size() - 1;
  if (t <= 0) return 0.0;
  if (t >= static_cast<double>(last)) return cumulative_(last);
  const Index i = static_cast<Index>(t);
  const double f = t - static_cast<double>(i);
  return (1 - f) * cumulative_(i) + f * cumulative_(i + 1);
}

double DyadicTable::cell_integral(int d, Index k) const {
  const Index w = Index(1) << (depth_ - d);
  const Index lo = k * w, hi = lo + w, last = cumulative_.size() - 1;
  if (hi <= 0 || lo >= last) return 0.0;
  return cumulative_(std::min(hi, last)) - cumulative_(std::max<Index>(lo, 0));
}

double DyadicTable::sup(int d) const {
  const Index step = Index(1) << (depth_ - std::min(d, depth_));
  double m = 0;
  for (Index i = 0; i < values_.size(); i += step) m = std::max(m, std::abs(values_(i)));
  return m;
}

double DyadicTable::l1() const {
  double s = 0;
  for (Index i = 0; i + 1 < cumulative_.size(); ++i) s += std::abs(cumulative_(i + 1) - cumulative_(i));
  return s;
}

std::string WaveletBasis::name() const {
  return family == WaveletFamily::haar ? "haar" : "db" + std::to_string(order);
}

int required_regularity(double alpha) { return static_cast<int>(std::floor(-alpha)) + 1; }

WaveletBasis build_wavelet_basis(WaveletFamily family, int order, std::optional<double> alpha, int depth) {
  if (family == WaveletFamily::haar) order = 1;
  require(order >= 1 && order <= 10, Errc::InvalidArgument, "Daubechies order must lie in 1..10");
  require(depth >= 0 && depth <= 20, Errc::InvalidArgument, "table depth must lie in 0..20");
  WaveletBasis b;
  b.family = family;
  b.order = order;
  b.regularity = static_cast<int>(std::floor(holder_exponent[order - 1]));
  if (alpha && b.regularity < required_regularity(*alpha))
    fail(Errc::InsufficientRegularity, b.name() + " has regularity " + std::to_string(b.regularity) +
                                           ", alpha needs " + std::to_string(required_regularity(*alpha)));
  b.h = daubechies_filter(order);
  const Index L = b.h.size();
  b.g.resize(L);
  for (Index k = 0; k < L; ++k) b.g(k) = ((k % 2) ? -1.0 : 1.0) * b.h(L - 1 - k);
  Tables t = cascade(b.h, b.g, depth);
  b.phi = DyadicTable(depth, std::move(t.phi_values), std::move(t.phi_cells));
  b.psi = DyadicTable(depth, std::move(t.psi_values), std::move(t.psi_cells));
  return b;
}

WaveletBasis build_wavelet_basis(const std::string& name, std::optional<double> alpha, int depth) {
  if (name == "haar") return build_wavelet_basis(WaveletFamily::haar, 1, alpha, depth);
  if (name.rfind("db", 0) == 0) return build_wavelet_basis(WaveletFamily::daubechies, std::stoi(name.substr(2)), alpha, depth);
  fail(Errc::InvalidArgument, "unknown wavelet family " + name);
}

}  // namespace rfim
