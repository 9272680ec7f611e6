#include <algorithm>
#include <bit>
#include <cmath>
#include <istream>
#include <ostream>
#include <sstream>

#include "rfim/ising.hpp"

namespace rfim {

ModelParams ModelParams::plus(const Lattice& lat, double beta) {
  ModelParams p;
  p.beta = beta;
  p.boundary = Eigen::VectorXi::Ones(static_cast<Index>(lat.boundary.size()));
  return p;
}

ModelParams ModelParams::minus(const Lattice& lat, double beta) {
  ModelParams p = plus(lat, beta);
  p.boundary = -p.boundary;
  return p;
}

bool ModelParams::uniform_boundary(int* value) const {
  if (!boundary.size()) {
    if (value) *value = 1;
    return true;
  }
  const int v = boundary(0);
  if ((boundary.array() != v).any()) return false;
  if (value) *value = v;
  return true;
}

Eigen::VectorXi boundary_drive(const Lattice& lat, const ModelParams& p) {
  Eigen::VectorXi d = Eigen::VectorXi::Zero(lat.size());
  for (Index s = 0; s < lat.size(); ++s)
    for (int b : lat.boundary_bonds[s]) d(s) += p.boundary_value(b);
  return d;
}

namespace {

/// Gray-code walk over all 2^n states, calling visit(state, energy) with the
/// integer energy Σ_bonds σσ + Σ drive σ.
template <class Visit>
void enumerate_states(const Lattice& lat, const Eigen::VectorXi& drive, Visit&& visit) {
  const int n = static_cast<int>(lat.size());
  std::vector<int> spin(n, 1);
  long e = static_cast<long>(lat.bonds.size()) + drive.sum();
  std::uint64_t g = 0;
  visit(g, e);
  const std::uint64_t total = std::uint64_t(1) << n;
  for (std::uint64_t t = 1; t < total; ++t) {
    const int k = std::countr_zero(t);
    long local = drive(k);
    for (int c : lat.nbr[k])
      if (c >= 0) local += spin[c];
    e -= 2L * spin[k] * local;
    spin[k] = -spin[k];
    g ^= std::uint64_t(1) << k;
    visit(g, e);
  }
}

long energy_bound(const Lattice& lat, const Eigen::VectorXi& drive) {
  return static_cast<long>(lat.bonds.size()) + drive.cwiseAbs().sum();
}

/// exp(Σ_x ξ_x σ_x) for any state as a product of two half tables.
template <class Scalar>
struct SplitExp {
  int low_bits;
  std::vector<Scalar> low, high;

  SplitExp(const VectorS<Scalar>& xi) {
    const int n = static_cast<int>(xi.size());
    low_bits = n / 2;
    auto build = [&](int first, int count) {
      std::vector<Scalar> t(std::size_t(1) << count);
      for (std::size_t m = 0; m < t.size(); ++m) {
        Scalar f = 0;
        for (int b = 0; b < count; ++b) f += ((m >> b) & 1) ? -xi(first + b) : xi(first + b);
        t[m] = std::exp(f);
      }
      return t;
    };
    low = build(0, low_bits);
    high = build(low_bits, n - low_bits);
  }
  Scalar operator()(std::uint64_t g) const {
    return low[g & ((std::uint64_t(1) << low_bits) - 1)] * high[g >> low_bits];
  }
};

/// Neumaier-compensated running sum.
template <class Scalar>
struct CompensatedSum {
  Scalar sum{0}, comp{0};
  void add(Scalar x) {
    const Scalar t = sum + x;
    comp += step(sum, x, t);
    sum = t;
  }
  Scalar value() const { return sum + comp; }

 private:
  static double step(double s, double x, double t) {
    return std::abs(s) >= std::abs(x) ? (s - t) + x : (x - t) + s;
  }
  static cplx step(cplx s, cplx x, cplx t) {
    return {step(s.real(), x.real(), t.real()), step(s.imag(), x.imag(), t.imag())};
  }
};

}  // namespace

template <class Scalar>
Scalar exact_partition(const Lattice& lat, const ModelParams& p, const VectorS<Scalar>& xi) {
  require(lat.size() <= enumeration_cap, Errc::TooLarge,
          std::to_string(lat.size()) + " sites exceed the enumeration cap");
  require(xi.size() == lat.size(), Errc::InvalidArgument, "field length mismatch");
  const Eigen::VectorXi drive = boundary_drive(lat, p);
  const long emax = energy_bound(lat, drive);
  std::vector<double> w(2 * emax + 1);
  for (long e = -emax; e <= emax; ++e) w[e + emax] = std::exp(p.beta * double(e - emax));
  const SplitExp<Scalar> ex(xi);
  CompensatedSum<Scalar> num;
  CompensatedSum<double> den;
  enumerate_states(lat, drive, [&](std::uint64_t g, long e) {
    const double we = w[e + emax];
    den.add(we);
    num.add(we * ex(g));
  });
  return num.value() / den.value();
}

template double exact_partition<double>(const Lattice&, const ModelParams&, const VectorS<double>&);
template cplx exact_partition<cplx>(const Lattice&, const ModelParams&, const VectorS<cplx>&);

cplx exact_partition(const Lattice& lat, const ModelParams& p) {
  const VectorXc xi = p.xi.size() ? p.xi : VectorXc::Zero(lat.size());
  return exact_partition<cplx>(lat, p, xi);
}

VectorX configuration_probabilities(const Lattice& lat, const ModelParams& p) {
  require(lat.size() <= 22, Errc::TooLarge, "configuration table limited to 22 sites");
  const Eigen::VectorXi drive = boundary_drive(lat, p);
  const long emax = energy_bound(lat, drive);
  VectorX prob(Index(1) << lat.size());
  enumerate_states(lat, drive, [&](std::uint64_t g, long e) {
    prob(static_cast<Index>(g)) = std::exp(p.beta * double(e - emax));
  });
  prob /= prob.sum();
  return prob;
}

void walsh_hadamard(VectorX& v) {
  const Index n = v.size();
  for (Index h = 1; h < n; h <<= 1)
    for (Index i = 0; i < n; i += 2 * h)
      for (Index j = i; j < i + h; ++j) {
        const double x = v(j), y = v(j + h);
        v(j) = x + y;
        v(j + h) = x - y;
      }
}

CorrelationTable::CorrelationTable(Index n_sites, int k_max, double mesh, std::string boundary_tag)
    : n_(n_sites), k_max_(k_max), mesh_(mesh), tag_(std::move(boundary_tag)) {}

bool CorrelationTable::has(const Subset& I) const {
  if (dense()) return static_cast<int>(I.size()) <= k_max_;
  return sparse_.count(I) > 0;
}

double CorrelationTable::at(const Subset& I) const {
  if (I.empty()) return 1.0;
  if (dense() && static_cast<int>(I.size()) <= k_max_) {
    std::uint64_t m = 0;
    for (int x : I) m |= std::uint64_t(1) << x;
    return dense_(static_cast<Index>(m));
  }
  const auto it = sparse_.find(I);
  if (it == sparse_.end()) {
    std::ostringstream os;
    os << "subset {";
    for (int x : I) os << ' ' << x;
    os << " } absent";
    fail(Errc::MissingCorrelation, os.str());
  }
  return it->second;
}

void CorrelationTable::set(Subset I, double v) {
  std::sort(I.begin(), I.end());
  sparse_[std::move(I)] = v;
}

void CorrelationTable::set_dense(VectorX v) { dense_ = std::move(v); }

std::vector<std::pair<CorrelationTable::Subset, double>> CorrelationTable::entries() const {
  std::vector<std::pair<Subset, double>> out;
  if (dense()) {
    for (Index m = 0; m < dense_.size(); ++m) {
      if (std::popcount(static_cast<std::uint64_t>(m)) > k_max_) continue;
      Subset I;
      for (int b = 0; b < n_; ++b)
        if ((m >> b) & 1) I.push_back(b);
      out.emplace_back(std::move(I), dense_(m));
    }
    std::sort(out.begin(), out.end(), [](const auto& x, const auto& y) {
      return x.first.size() != y.first.size() ? x.first.size() < y.first.size() : x.first < y.first;
    });
    return out;
  }
  out.emplace_back(Subset{}, 1.0);
  for (const auto& kv : sparse_)
    if (!kv.first.empty()) out.push_back(kv);
  std::stable_sort(out.begin(), out.end(),
                   [](const auto& x, const auto& y) { return x.first.size() < y.first.size(); });
  return out;
}

namespace {

void for_each_subset(int n, int k, const std::function<void(const std::vector<int>&)>& f) {
  std::vector<int> I;
  std::function<void(int)> rec = [&](int start) {
    if (!I.empty()) f(I);
    if (static_cast<int>(I.size()) == k) return;
    for (int x = start; x < n; ++x) {
      I.push_back(x);
      rec(x + 1);
      I.pop_back();
    }
  };
  rec(0);
}

std::string boundary_tag(const ModelParams& p) {
  int v = 0;
  if (p.uniform_boundary(&v)) return v > 0 ? "plus" : "minus";
  return "mixed";
}

}  // namespace

CorrelationTable exact_correlations(const Lattice& lat, const ModelParams& p, int k_max) {
  require(lat.size() <= enumeration_cap, Errc::TooLarge, "correlations need enumeration");
  const int n = static_cast<int>(lat.size());
  k_max = std::clamp(k_max, 0, n);
  CorrelationTable t(lat.size(), k_max, lat.mesh, boundary_tag(p));
  if (n <= 22) {
    VectorX v = configuration_probabilities(lat, p);
    walsh_hadamard(v);
    v(0) = 1.0;
    t.set_dense(std::move(v));
    return t;
  }
  require(k_max <= 3, Errc::TooLarge, "above 22 sites only degree ≤ 3 correlations are enumerated");
  std::vector<std::vector<int>> subsets;
  for_each_subset(n, k_max, [&](const std::vector<int>& I) { subsets.push_back(I); });
  std::vector<double> acc(subsets.size(), 0.0);
  const Eigen::VectorXi drive = boundary_drive(lat, p);
  const long emax = energy_bound(lat, drive);
  double z = 0.0;
  enumerate_states(lat, drive, [&](std::uint64_t g, long e) {
    const double w = std::exp(p.beta * double(e - emax));
    z += w;
    for (std::size_t s = 0; s < subsets.size(); ++s) {
      int par = 0;
      for (int x : subsets[s]) par ^= int((g >> x) & 1);
      acc[s] += par ? -w : w;
    }
  });
  for (std::size_t s = 0; s < subsets.size(); ++s) t.set(subsets[s], acc[s] / z);
  return t;
}

void write_correlations_csv(std::ostream& os, const CorrelationTable& t) {
  os << "sites,value\n";
  os.precision(17);
  for (const auto& [I, v] : t.entries()) {
    for (std::size_t k = 0; k < I.size(); ++k) os << (k ? " " : "") << I[k];
    os << ',' << v << '\n';
  }
}

CorrelationTable read_correlations_csv(std::istream& is, Index n_sites, int k_max, double mesh) {
  CorrelationTable t(n_sites, k_max, mesh, "file");
  std::string line;
  std::getline(is, line);
  while (std::getline(is, line)) {
    if (line.empty()) continue;
    const auto comma = line.rfind(',');
    std::istringstream ss(line.substr(0, comma));
    std::vector<int> I;
    int x;
    while (ss >> x) I.push_back(x);
    if (!I.empty()) t.set(I, std::stod(line.substr(comma + 1)));
  }
  return t;
}

cplx rescaled_partition(const Lattice& lat, const ModelParams& p, const ExternalField& f) {
  const VectorXc xi = f.xi();
  const cplx z = lat.size() <= 20 || !lat.is_full_rectangle() ? exact_partition<cplx>(lat, p, xi)
                                                               : transfer_matrix_partition<cplx>(lat, p, xi);
  return f.theta() * z;
}

cplx characteristic_function(const Lattice& lat, const ModelParams& p, const ExternalField& f) {
  ExternalField base = f;
  base.phi_tilde.setZero();
  base.has_phi = false;
  const cplx den = rescaled_partition(lat, p, base);
  require(std::abs(den) > 0, Errc::ZeroDenominator, "Z̃_{λ,h} vanished");
  return rescaled_partition(lat, p, f) / den;
}

}  // namespace rfim
