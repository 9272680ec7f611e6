#include "rfim/chaos.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <json.hpp>
#include <ostream>

#include "rfim/stats.hpp"

namespace rfim {

namespace {

bool canonical_less(const ChaosKernel::Subset& a, const ChaosKernel::Subset& b) {
  if (a.size() != b.size()) return a.size() < b.size();
  return a < b;
}

// Calls f on every subset of {0..n-1} with size ≤ l, in (size, lex) order.
template <class F>
void for_each_subset(int n, int l, F&& f) {
  std::vector<int> I;
  f(I);
  for (int k = 1; k <= std::min(l, n); ++k) {
    I.resize(k);
    for (int i = 0; i < k; ++i) I[i] = i;
    while (true) {
      f(I);
      int i = k - 1;
      while (i >= 0 && I[i] == n - k + i) --i;
      if (i < 0) break;
      ++I[i];
      for (int j = i + 1; j < k; ++j) I[j] = I[j - 1] + 1;
    }
  }
}

// ω = F^{-1}(Φ(z)).
double from_gaussian(const DisorderLaw& law, double z) {
  switch (law.family) {
    case LawFamily::gaussian: return z;
    case LawFamily::rademacher: return z >= 0 ? 1.0 : -1.0;
    case LawFamily::uniform: return std::sqrt(3.0) * std::erf(z / std::sqrt(2.0));
  }
  return z;
}

}  // namespace

ChaosKernel::ChaosKernel(Index n_vars, std::vector<Subset> subsets, VectorX coeffs, double mesh, std::string origin)
    : n_(n_vars), mesh_(mesh), origin_(std::move(origin)) {
  require(static_cast<Index>(subsets.size()) == coeffs.size(), Errc::InvalidArgument,
          "kernel subsets and coefficients differ in length");
  std::vector<std::size_t> order(subsets.size());
  for (std::size_t i = 0; i < order.size(); ++i) {
    std::sort(subsets[i].begin(), subsets[i].end());
    require(std::adjacent_find(subsets[i].begin(), subsets[i].end()) == subsets[i].end(), Errc::InvalidArgument,
            "kernel subset with repeated site");
    require(subsets[i].empty() || (subsets[i].front() >= 0 && subsets[i].back() < n_vars), Errc::InvalidArgument,
            "kernel subset outside variable range");
    order[i] = i;
  }
  std::stable_sort(order.begin(), order.end(),
                   [&](std::size_t a, std::size_t b) { return canonical_less(subsets[a], subsets[b]); });
  subsets_.reserve(order.size());
  coeffs_.resize(coeffs.size());
  for (std::size_t k = 0; k < order.size(); ++k) {
    subsets_.push_back(std::move(subsets[order[k]]));
    coeffs_(static_cast<Index>(k)) = coeffs(static_cast<Index>(order[k]));
  }
  index();
}

void ChaosKernel::index() {
  lookup_.clear();
  parent_.assign(subsets_.size(), -1);
  degree_ = 0;
  for (std::size_t k = 0; k < subsets_.size(); ++k) {
    require(lookup_.emplace(subsets_[k], static_cast<Index>(k)).second, Errc::InvalidArgument,
            "duplicate kernel subset");
    degree_ = std::max(degree_, static_cast<int>(subsets_[k].size()));
    if (!subsets_[k].empty()) {
      Subset p(subsets_[k].begin(), subsets_[k].end() - 1);
      const auto it = lookup_.find(p);
      if (it != lookup_.end()) parent_[k] = it->second;
    }
  }
}

double ChaosKernel::coefficient(const Subset& I) const {
  Subset s = I;
  std::sort(s.begin(), s.end());
  const auto it = lookup_.find(s);
  return it == lookup_.end() ? 0.0 : coeffs_(it->second);
}

double ChaosKernel::variance() const {
  double v = 0;
  for (std::size_t k = 0; k < subsets_.size(); ++k)
    if (!subsets_[k].empty()) v += coeffs_(static_cast<Index>(k)) * coeffs_(static_cast<Index>(k));
  return v;
}

VectorX ChaosKernel::influences() const {
  VectorX inf = VectorX::Zero(std::max<Index>(n_, 1));
  for (std::size_t k = 0; k < subsets_.size(); ++k) {
    const double c2 = coeffs_(static_cast<Index>(k)) * coeffs_(static_cast<Index>(k));
    for (int x : subsets_[k]) inf(x) += c2;
  }
  return inf;
}

double ChaosKernel::tail_norm(int l) const {
  double v = 0;
  for (std::size_t k = 0; k < subsets_.size(); ++k)
    if (static_cast<int>(subsets_[k].size()) > l) v += coeffs_(static_cast<Index>(k)) * coeffs_(static_cast<Index>(k));
  return v;
}

ChaosKernel ChaosKernel::truncated(int l) const {
  std::vector<Subset> s;
  std::vector<double> c;
  for (std::size_t k = 0; k < subsets_.size(); ++k)
    if (static_cast<int>(subsets_[k].size()) <= l) {
      s.push_back(subsets_[k]);
      c.push_back(coeffs_(static_cast<Index>(k)));
    }
  return ChaosKernel(n_, std::move(s), Eigen::Map<VectorX>(c.data(), static_cast<Index>(c.size())), mesh_,
                     origin_ + "|truncated");
}

ChaosKernel ChaosKernel::scaled_by_degree(double s) const {
  ChaosKernel k = *this;
  for (std::size_t i = 0; i < subsets_.size(); ++i)
    k.coeffs_(static_cast<Index>(i)) *= std::pow(s, static_cast<double>(subsets_[i].size()));
  return k;
}

VectorX ChaosKernel::evaluate_batch(const MatrixX& U) const {
  require(U.cols() == n_, Errc::InvalidArgument, "batch width differs from kernel variables");
  VectorX out = VectorX::Zero(U.rows());
  if (degree_ <= 2 && n_ > 0) {
    VectorX lin = VectorX::Zero(n_);
    MatrixX quad = MatrixX::Zero(n_, n_);
    for (std::size_t k = 0; k < subsets_.size(); ++k) {
      const Subset& I = subsets_[k];
      const double c = coeffs_(static_cast<Index>(k));
      if (I.empty()) out.array() += c;
      else if (I.size() == 1) lin(I[0]) += c;
      else quad(I[0], I[1]) += c;
    }
    out += U * lin;
    if (degree_ == 2) out += (U * quad).cwiseProduct(U).rowwise().sum();
    return out;
  }
  VectorX p(U.rows());
  for (std::size_t k = 0; k < subsets_.size(); ++k) {
    const Subset& I = subsets_[k];
    const double c = coeffs_(static_cast<Index>(k));
    if (c == 0.0) continue;
    if (I.empty()) {
      out.array() += c;
      continue;
    }
    p = U.col(I[0]);
    for (std::size_t j = 1; j < I.size(); ++j) p.array() *= U.col(I[j]).array();
    out += c * p;
  }
  return out;
}

ChaosKernel build_chaos_kernel(const CorrelationTable& corr, const VectorX& lambda_a, int l) {
  require(lambda_a.size() == corr.sites(), Errc::InvalidArgument, "lambda size differs from correlation sites");
  require(l >= 0, Errc::InvalidArgument, "negative degree cap");
  if (l > corr.k_max())
    fail(Errc::MissingCorrelation, "correlations stop at degree " + std::to_string(corr.k_max()));
  std::vector<ChaosKernel::Subset> subsets;
  std::vector<double> coeffs;
  for_each_subset(static_cast<int>(corr.sites()), l, [&](const std::vector<int>& I) {
    double c = corr.at(I);
    for (int x : I) c *= lambda_a(x);
    subsets.push_back(I);
    coeffs.push_back(c);
  });
  return ChaosKernel(corr.sites(), std::move(subsets),
                     Eigen::Map<VectorX>(coeffs.data(), static_cast<Index>(coeffs.size())), corr.mesh(),
                     "rfim:" + corr.boundary_tag());
}

ChaosKernel white_noise_kernel(const Lattice& lat, const Profile& phi) {
  std::vector<ChaosKernel::Subset> s;
  VectorX c(lat.size());
  for (Index i = 0; i < lat.size(); ++i) {
    s.push_back({static_cast<int>(i)});
    c(i) = lat.mesh * phi(lat.sites[i]);
  }
  return ChaosKernel(lat.size(), std::move(s), c, lat.mesh, "white-noise");
}

void write_kernel_csv(std::ostream& os, const ChaosKernel& k) {
  os.precision(17);
  for (Index t = 0; t < k.terms(); ++t) {
    const auto& I = k.subsets()[t];
    os << I.size();
    for (int x : I) os << ',' << x;
    os << ',' << k.coefficients()(t) << '\n';
  }
}

cplx evaluate_high_temperature_expansion(const Lattice& lat, const ModelParams& p, const ExternalField& f) {
  const Index n = lat.size();
  if (n > 16) fail(Errc::TooLarge, "full expansion is limited to 16 sites");
  require(f.size() == n, Errc::InvalidArgument, "field size differs from lattice");
  const CorrelationTable corr = exact_correlations(lat, p, static_cast<int>(n));
  const VectorX& cor = corr.dense_values();
  const VectorXc xi = f.xi();
  std::vector<cplx> prod(std::size_t(1) << n);
  prod[0] = 1.0;
  cplx s = cor(0);
  cplx log_cosh = 0.0;
  for (Index x = 0; x < n; ++x) log_cosh += std::log(std::cosh(xi(x)));
  for (std::size_t m = 1; m < prod.size(); ++m) {
    const int low = std::countr_zero(m);
    prod[m] = prod[m & (m - 1)] * std::tanh(xi(low));
    s += cor(static_cast<Index>(m)) * prod[m];
  }
  return std::exp(f.log_theta() + log_cosh) * s;
}

ChaosEvaluator::ChaosEvaluator(ChaosKernel kernel, ChaosMode mode, const ExternalField& f)
    : kernel_(std::move(kernel)), mode_(mode), field_(f) {
  require(kernel_.variables() == f.size(), Errc::InvalidArgument, "kernel and field sizes differ");
  require(f.lambda_a.size() == 0 || f.lambda_a.minCoeff() > 0, Errc::NonPositiveLambda,
          "chaos variables divide by λ^a");
}

VectorXc ChaosEvaluator::variables(const VectorX& d) const {
  const Index n = field_.size();
  require(d.size() == n, Errc::InvalidArgument, "driver size differs from kernel");
  VectorXc u(n);
  const cplx i1(0.0, 1.0);
  for (Index x = 0; x < n; ++x) {
    const cplx shift = field_.h_a(x) + (field_.has_phi ? i1 * field_.phi_tilde(x) : cplx(0));
    const double lam = field_.lambda_a(x);
    switch (mode_) {
      case ChaosMode::truncate: u(x) = std::tanh(lam * d(x) + shift) / lam; break;
      case ChaosMode::linearize: u(x) = (lam * d(x) + shift) / lam; break;
      case ChaosMode::gaussianize: u(x) = d(x) + shift / lam; break;
    }
  }
  return u;
}

cplx ChaosEvaluator::operator()(const VectorX& driver) const { return kernel_(variables(driver)); }

cplx ChaosEvaluator::prefactor() const {
  const VectorXc xi = field_.xi();
  cplx lc = 0.0;
  for (Index x = 0; x < xi.size(); ++x) lc += std::log(std::cosh(xi(x)));
  return std::exp(field_.log_theta() + lc);
}

ChaosEvaluator transform_chaos(const ChaosKernel& k, const ExternalField& f, ChaosMode mode, int l) {
  require(l >= 0, Errc::InvalidArgument, "negative degree");
  if (l > k.degree() && k.degree() < k.variables())
    fail(Errc::DegreeExceeded, "kernel degree cap is " + std::to_string(k.degree()));
  return ChaosEvaluator(k.truncated(l), mode, f);
}

LindebergReport influence_and_lindeberg_bound(const std::vector<ChaosKernel>& kernels, const DisorderLaw& law_omega,
                                              const DisorderLaw& law_theta, const Functional& g, Index replicas,
                                              std::uint64_t seed) {
  require(!kernels.empty(), Errc::InvalidArgument, "no kernels");
  require(replicas >= 2, Errc::InvalidArgument, "need two or more replicas");
  LindebergReport r;
  Index n = 0;
  double sum = 0;
  for (const auto& k : kernels) {
    r.variance.push_back(k.variance());
    r.max_influence.push_back(k.max_influence());
    r.degree = std::max(r.degree, k.degree());
    n = std::max(n, k.variables());
  }
  r.third_moment = std::max(law_omega.third_abs_moment(), law_theta.third_abs_moment());
  for (std::size_t i = 0; i < kernels.size(); ++i) sum += r.variance[i] * std::sqrt(r.max_influence[i]);
  r.structural = std::pow(r.third_moment, r.degree) * sum;

  RunningStats diff;
  VectorX w(n), t(n), yw(kernels.size()), yt(kernels.size());
  const std::uint64_t key = derive_key(seed, Purpose::Replica);
  for (Index rep = 0; rep < replicas; ++rep) {
    CounterRng rng(mix64(key ^ static_cast<std::uint64_t>(rep)));
    for (Index x = 0; x < n; ++x) {
      const double z = rng.normal();
      w(x) = from_gaussian(law_omega, z);
      t(x) = from_gaussian(law_theta, z);
    }
    for (std::size_t i = 0; i < kernels.size(); ++i) {
      yw(static_cast<Index>(i)) = kernels[i](w.head(kernels[i].variables()));
      yt(static_cast<Index>(i)) = kernels[i](t.head(kernels[i].variables()));
    }
    diff.add(g(yw) - g(yt));
  }
  r.gap_signed = diff.mean();
  r.gap = std::abs(diff.mean());
  r.gap_se = diff.se();
  r.replicas = replicas;
  return r;
}

std::string lindeberg_report_json(const LindebergReport& r) {
  nlohmann::json j;
  j["variance"] = r.variance;
  j["max_influence"] = r.max_influence;
  j["third_moment"] = r.third_moment;
  j["degree"] = r.degree;
  j["structural"] = r.structural;
  j["constant"] = "C_{g,l,n} not assembled; structural = M^l sum Var (max Inf)^{1/2}";
  j["gap"] = r.gap;
  j["gap_signed"] = r.gap_signed;
  j["gap_se"] = r.gap_se;
  j["replicas"] = r.replicas;
  return j.dump(2);
}

TanhMomentTable tanh_moment_table(const DisorderLaw& law, double lambda, double h, double phi, double a,
                                  Index n_samples, std::uint64_t seed) {
  require(n_samples >= 2, Errc::InvalidArgument, "need two or more samples");
  TanhMomentTable t;
  t.mesh = a;
  t.samples = n_samples;
  const double la = std::pow(a, 7.0 / 8.0) * lambda;
  const double ha = std::pow(a, 15.0 / 8.0) * h;
  const double pt = std::pow(a, 15.0 / 8.0) * phi;
  t.leading = {ha, la * la, pt, pt * pt, ha * pt};
  const std::array<double, 5> control_mean = {ha, la * la + ha * ha, 0.0, 0.0, ha * pt};
  std::array<RunningStats, 5> s;
  const std::uint64_t key = derive_key(seed, Purpose::Disorder);
  for (Index k = 0; k < n_samples; ++k) {
    const double xi = la * law.draw(key, static_cast<std::uint64_t>(k)) + ha;
    const cplx v = std::tanh(cplx(xi, pt));
    const double re = v.real(), im = v.imag();
    s[0].add(re - xi);
    s[1].add(re * re - xi * xi);
    s[2].add(im);
    s[3].add(im * im);
    s[4].add(re * im - xi * pt);
  }
  for (int q = 0; q < 5; ++q) {
    t.estimate[q] = s[q].mean() + control_mean[q];
    t.se[q] = s[q].se();
  }
  return t;
}

WienerChaos::WienerChaos(const CorrelationTable& corr, const Lattice& lat, const Profile& lambda, const Profile& h,
                         int l) {
  if (l > corr.k_max()) fail(Errc::DegreeExceeded, "correlations stop at degree " + std::to_string(corr.k_max()));
  require(corr.sites() == lat.size(), Errc::InvalidArgument, "correlations and lattice differ in size");
  kernel_ = build_chaos_kernel(corr, VectorX::Ones(lat.size()), l);
  scale_.resize(lat.size());
  shift_.resize(lat.size());
  for (Index x = 0; x < lat.size(); ++x) {
    scale_(x) = std::pow(lat.mesh, 7.0 / 8.0) * lambda(lat.sites[x]);
    shift_(x) = std::pow(lat.mesh, 15.0 / 8.0) * h(lat.sites[x]);
  }
}

double WienerChaos::operator()(const VectorX& theta) const {
  require(theta.size() == scale_.size(), Errc::InvalidArgument, "noise grid differs from lattice");
  return kernel_(VectorX(scale_.cwiseProduct(theta) + shift_));
}

VectorX WienerChaos::batch(const MatrixX& theta) const {
  require(theta.cols() == scale_.size(), Errc::InvalidArgument, "noise grid differs from lattice");
  MatrixX u = theta * scale_.asDiagonal();
  u.rowwise() += shift_.transpose();
  return kernel_.evaluate_batch(u);
}

double wiener_chaos_partition(const CorrelationTable& corr, const Lattice& lat, const Profile& lambda,
                              const Profile& h, const VectorX& theta, int l) {
  return WienerChaos(corr, lat, lambda, h, l)(theta);
}

}  // namespace rfim
