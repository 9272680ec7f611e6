#include "rfim/experiments.hpp"

#include <algorithm>
#include <cmath>
#include <istream>
#include <limits>
#include <map>
#include <ostream>
#include <sstream>

#include "rfim/besov.hpp"
#include "rfim/chaos.hpp"
#include "rfim/ising.hpp"
#include "rfim/magnetisation.hpp"
#include "rfim/moments.hpp"
#include "rfim/sampler.hpp"
#include "rfim/stats.hpp"

namespace rfim {

namespace {

constexpr double nan = std::numeric_limits<double>::quiet_NaN();

std::string fmt(double v, int prec = 6) {
  std::ostringstream os;
  os.precision(prec);
  os << v;
  return os.str();
}

CriterionResult start(const std::string& id) {
  CriterionResult r = criterion_stub(id);
  r.evaluated = true;
  return r;
}

CriterionResult not_evaluated(const std::string& id, const std::string& why) {
  CriterionResult r = criterion_stub(id);
  r.measured = why;
  return r;
}

Table make_table(const std::string& name) {
  Table t;
  t.name = name;
  t.columns = table_schemas().at(name);
  return t;
}

Index nearest_site(const Lattice& lat, const Point& p) {
  Index best = 0;
  for (Index i = 1; i < lat.size(); ++i)
    if ((lat.sites[i] - p).squaredNorm() < (lat.sites[best] - p).squaredNorm()) best = i;
  return best;
}

}  // namespace

const std::map<std::string, std::vector<std::string>>& table_schemas() {
  static const std::map<std::string, std::vector<std::string>> s = {
      {"chaos_identity", {"width", "height", "sites", "identity_max_rel", "backend_max_rel"}},
      {"one_point", {"mesh", "side", "center_mean", "center_se", "tau", "effective"}},
      {"tanh_table", {"mesh", "re", "re_se", "re_leading", "re2", "re2_se", "re2_leading"}},
      {"lindeberg", {"proxy_mesh", "lambda_a", "variance", "max_influence", "gap", "gap_se", "structural"}},
      {"besov", {"mesh", "alpha", "mean_norm", "se", "samples", "n_max"}},
      {"subdomain", {"rough", "index", "value", "reference", "abs_err", "rel_err", "tail_bound"}},
      {"singularity", {"lambda0", "N", "m", "mesh", "bc", "bc_ci_lo", "bc_ci_hi", "bc_se", "n_pure", "n_disordered", "bins", "top_decile_occupancy", "null_bc", "null_ci_lo", "null_ci_hi", "S", "M", "inv_f_mc", "inv_f_gaussian", "tilt_f_over_z", "direct_f", "product", "product_se", "product_gaussian", "m_over_s", "epsilon", "p_tilt_below_eps", "bc_coarsened", "bc_merged", "data_processing_ok"}},
      {"moments", {"mesh", "lambda0", "replicas", "pz_prob", "pz_prob_ci_hi", "pz_bound", "pz_bound_ci_lo", "pz_holds", "z2", "z2_bound", "psi4", "psi4_bound", "moment_holds", "tail_slope", "tail_slope_se", "tail_points", "tail_holds", "jensen_ok", "inverse_moment", "inverse_moment_se"}},
      {"conditional_gaussian", {"case", "mesh", "sites", "W", "factor", "oracle", "oracle_se", "z"}},
  };
  return s;
}

Table empty_table(const std::string& name) { return make_table(name); }

Index Table::column(const std::string& c) const {
  const auto it = std::find(columns.begin(), columns.end(), c);
  require(it != columns.end(), Errc::InvalidArgument, "table " + name + " has no column " + c);
  return Index(it - columns.begin());
}

void Table::append(const Table& other) {
  if (columns.empty()) columns = other.columns;
  require(columns == other.columns, Errc::InvalidArgument, "tables differ in columns");
  rows.insert(rows.end(), other.rows.begin(), other.rows.end());
}

void write_table_csv(std::ostream& os, const Table& t) {
  for (std::size_t c = 0; c < t.columns.size(); ++c) os << (c ? "," : "") << t.columns[c];
  os << '\n';
  os.precision(17);
  for (const auto& row : t.rows) {
    for (std::size_t c = 0; c < row.size(); ++c) {
      if (c) os << ',';
      if (std::isnan(row[c]))
        os << "nan";
      else
        os << row[c];
    }
    os << '\n';
  }
}

Table read_table_csv(std::istream& is, const std::string& name) {
  Table t;
  t.name = name;
  std::string line;
  require(static_cast<bool>(std::getline(is, line)), Errc::IoError, "missing table header");
  std::stringstream hs(line);
  for (std::string c; std::getline(hs, c, ',');) t.columns.push_back(c);
  while (std::getline(is, line)) {
    if (line.empty()) continue;
    std::vector<double> row;
    std::stringstream ls(line);
    for (std::string c; std::getline(ls, c, ',');) {
      if (c == "nan")
        row.push_back(nan);
      else
        row.push_back(std::stod(c));
    }
    require(row.size() == t.columns.size(), Errc::IoError, "ragged table row");
    t.rows.push_back(std::move(row));
  }
  return t;
}

const std::vector<CriterionInfo>& acceptance_criteria() {
  static const std::vector<CriterionInfo> list = {
      {"C1", "chaos-partition identity below 1e-10 up to 4x4"},
      {"C2", "transfer matrix equals enumeration to 1e-12 up to 4x5"},
      {"C3", "one-point ratio 64^2 / 32^2 within 3% of 2^{-1/8}"},
      {"C4", "tanh moment residual exponents above 2"},
      {"C5", "Lindeberg gap drops 3x when max influence drops 10x"},
      {"C6", "C^alpha norm of pure field: tight at -0.2, increasing at -0.05"},
      {"C7", "subdomain integration: smooth 1e-3, rough within tail bound"},
      {"C8", "Bhattacharyya decreasing in N with separated CIs; lambda = 0 control at 1"},
      {"C9", "product bound dominates the direct Bhattacharyya estimate"},
      {"C10", "Paley-Zygmund, second moment bound and Gaussian tail slope"},
      {"C11", "conditional rn factor matches the oracle and has mean 1"},
  };
  return list;
}

CriterionResult criterion_stub(const std::string& id) {
  CriterionResult r;
  r.id = id;
  for (const auto& c : acceptance_criteria())
    if (c.id == id) r.title = c.title;
  return r;
}

std::string format_criterion(const CriterionResult& r) {
  std::string s = (r.evaluated ? (r.pass ? "PASS " : "FAIL ") : "SKIP ") + r.id + " " + r.title;
  if (!r.measured.empty()) s += " | " + r.measured;
  return s;
}

// ---------------------------------------------------------------------------
// C1, C2

Table chaos_identity_cell(int width, int height, int fields, std::uint64_t seed) {
  Table t = make_table("chaos_identity");
  const Lattice lat = discretize_domain(DomainSpec::strip(width, height, 0.1));
  const ModelParams p = ModelParams::plus(lat);
  const Index n = lat.size();
  double id_err = nan, be_err = 0.0;
  if (width <= 4 && height <= 4) id_err = 0.0;
  CounterRng rng(derive_key(seed, Purpose::Test, std::uint64_t(width), std::uint64_t(height)));
  for (int k = 0; k < fields; ++k) {
    ExternalField f;
    f.mesh = lat.mesh;
    f.omega.resize(n);
    f.lambda_a.resize(n);
    f.h_a.resize(n);
    f.phi_tilde.resize(n);
    f.has_phi = true;
    for (Index x = 0; x < n; ++x) {
      f.omega(x) = rng.normal();
      f.lambda_a(x) = 0.2 + rng.uniform();
      f.h_a(x) = 0.3 * rng.normal();
      f.phi_tilde(x) = 0.8 * rng.normal();
    }
    f.lambda_l2_sq = rng.uniform();
    if (!std::isnan(id_err)) {
      const cplx ref = rescaled_partition(lat, p, f);
      id_err = std::max(id_err, std::abs(evaluate_high_temperature_expansion(lat, p, f) - ref) / std::abs(ref));
    }
    const VectorXc xi = f.xi();
    const cplx e = exact_partition<cplx>(lat, p, xi);
    be_err = std::max(be_err, std::abs(transfer_matrix_partition<cplx>(lat, p, xi) - e) / std::abs(e));
  }
  t.rows.push_back({double(width), double(height), double(n), id_err, be_err});
  return t;
}

CriterionResult evaluate_chaos_identity(const Table& t) {
  CriterionResult r = start("C1");
  double worst = 0.0;
  int lattices = 0;
  for (std::size_t i = 0; i < t.rows.size(); ++i) {
    const double e = t.at(i, "identity_max_rel");
    if (std::isnan(e)) continue;
    worst = std::max(worst, e);
    ++lattices;
  }
  if (lattices == 0) return not_evaluated("C1", "no lattice up to 4x4");
  r.pass = worst < 1e-10;
  r.measured = "max rel err " + fmt(worst, 3) + " over " + std::to_string(lattices) + " lattices";
  return r;
}

CriterionResult evaluate_backend_equivalence(const Table& t) {
  CriterionResult r = start("C2");
  double worst = 0.0;
  for (std::size_t i = 0; i < t.rows.size(); ++i) worst = std::max(worst, t.at(i, "backend_max_rel"));
  if (t.rows.empty()) return not_evaluated("C2", "no lattices");
  r.pass = worst < 1e-12;
  r.measured = "max rel err " + fmt(worst, 3) + " over " + std::to_string(t.rows.size()) + " lattices";
  return r;
}

// ---------------------------------------------------------------------------
// C3

Table one_point_cell(double a, Index samples, std::uint64_t seed) {
  Table t = make_table("one_point");
  const Lattice lat = discretize_domain(DomainSpec::unit_square(a));
  const ModelParams p = ModelParams::plus(lat);
  const Index c = nearest_site(lat, Point(0.5, 0.5));
  std::vector<double> v;
  v.reserve(std::size_t(samples));
  SamplingOptions opt;
  opt.algorithm = Algorithm::wolff;
  sample_gibbs(lat, p, samples, seed, opt,
               [&](const SpinVector& s, Index) { v.push_back(conditional_spin_mean(lat, p, s, c)); });
  const double tau = integrated_autocorrelation_time(v);
  const MeanSe ms = mean_se(v);
  const double eff = double(samples) / std::max(1.0, 2 * tau);
  t.rows.push_back({a, std::round(1.0 / a), ms.mean, ms.sd / std::sqrt(eff), tau, eff});
  return t;
}

CriterionResult evaluate_one_point_scaling(const Table& t) {
  if (t.rows.size() < 2) return not_evaluated("C3", "needs two meshes");
  CriterionResult r = start("C3");
  std::vector<std::size_t> idx(t.rows.size());
  for (std::size_t i = 0; i < idx.size(); ++i) idx[i] = i;
  std::sort(idx.begin(), idx.end(), [&](auto x, auto y) { return t.at(x, "mesh") > t.at(y, "mesh"); });
  const std::size_t coarse = idx[idx.size() - 2], fine = idx.back();
  const double step = t.at(coarse, "mesh") / t.at(fine, "mesh");
  const double target = std::pow(step, -1.0 / 8);
  const double m0 = t.at(coarse, "center_mean"), m1 = t.at(fine, "center_mean");
  const double ratio = m1 / m0;
  const double se = ratio * std::hypot(t.at(coarse, "center_se") / m0, t.at(fine, "center_se") / m1);
  const double eff = std::min(t.at(coarse, "effective"), t.at(fine, "effective"));
  const double dev = std::abs(ratio / target - 1);
  r.pass = dev < 0.03 && eff >= 1000;
  r.measured = "ratio " + fmt(ratio) + " +- " + fmt(se, 2) + " vs " + fmt(target) + " (" + fmt(100 * dev, 3) +
               "%), min effective samples " + fmt(eff, 6);
  return r;
}

// ---------------------------------------------------------------------------
// C4

Table tanh_table_cell(double a, double lambda, double h, Index samples, std::uint64_t seed, const DisorderLaw& law) {
  Table t = make_table("tanh_table");
  const TanhMomentTable m = tanh_moment_table(law, lambda, h, 0.0, a, samples, seed);
  t.rows.push_back({a, m.estimate[0], m.se[0], m.leading[0], m.estimate[1], m.se[1], m.leading[1]});
  return t;
}

CriterionResult evaluate_tanh_table(const Table& t) {
  if (t.rows.size() < 2) return not_evaluated("C4", "needs two meshes");
  CriterionResult r = start("C4");
  std::vector<double> as, re, re2;
  for (std::size_t i = 0; i < t.rows.size(); ++i) {
    as.push_back(t.at(i, "mesh"));
    re.push_back(std::abs(t.at(i, "re") - t.at(i, "re_leading")));
    re2.push_back(std::abs(t.at(i, "re2") - t.at(i, "re2_leading")));
    r.info.push_back("a=" + fmt(as.back()) + " residual Re " + fmt(re.back(), 4) + " (se " + fmt(t.at(i, "re_se"), 2) +
                     "), Re^2 " + fmt(re2.back(), 4) + " (se " + fmt(t.at(i, "re2_se"), 2) + ")");
  }
  const LineFit f1 = fit_power_law(as, re), f2 = fit_power_law(as, re2);
  r.pass = f1.slope > 2.0 && f2.slope > 2.0;
  r.measured = "exponents Re " + fmt(f1.slope, 4) + " +- " + fmt(f1.slope_se, 2) + ", Re^2 " + fmt(f2.slope, 4) +
               " +- " + fmt(f2.slope_se, 2);
  return r;
}

// ---------------------------------------------------------------------------
// C5

namespace {

const CorrelationTable& lindeberg_correlations() {
  static const CorrelationTable corr = [] {
    const Lattice lat = discretize_domain(DomainSpec::unit_square(0.25));
    return exact_correlations(lat, ModelParams::plus(lat), 3);
  }();
  return corr;
}

ChaosKernel lindeberg_kernel(double lambda0, double a) {
  const double la = std::pow(a, 7.0 / 8) * lambda0;
  return build_chaos_kernel(lindeberg_correlations(), VectorX::Constant(9, la), 3);
}

}  // namespace

Table lindeberg_cell(double lambda0, double a, Index replicas, std::uint64_t seed) {
  Table t = make_table("lindeberg");
  const ChaosKernel k = lindeberg_kernel(lambda0, a);
  const Functional g = [](const VectorX& y) { return std::cos(y(0)); };
  const LindebergReport rep =
      influence_and_lindeberg_bound({k}, DisorderLaw{LawFamily::rademacher}, DisorderLaw{}, g, replicas, seed);
  t.rows.push_back({a, std::pow(a, 7.0 / 8) * lambda0, k.variance(), k.max_influence(), rep.gap, rep.gap_se,
                    rep.structural});
  return t;
}

double lindeberg_proxy_mesh(double lambda0, double drop) {
  const double a0 = 0.25;
  const double target = lindeberg_kernel(lambda0, a0).max_influence() / drop;
  double lo = 0.0, hi = a0;
  for (int it = 0; it < 80; ++it) {
    const double mid = 0.5 * (lo + hi);
    (lindeberg_kernel(lambda0, mid).max_influence() > target ? hi : lo) = mid;
  }
  return 0.5 * (lo + hi);
}

CriterionResult evaluate_lindeberg(const Table& t) {
  if (t.rows.size() < 2) return not_evaluated("C5", "needs two influence levels");
  CriterionResult r = start("C5");
  std::vector<std::size_t> idx(t.rows.size());
  for (std::size_t i = 0; i < idx.size(); ++i) idx[i] = i;
  std::sort(idx.begin(), idx.end(),
            [&](auto x, auto y) { return t.at(x, "max_influence") > t.at(y, "max_influence"); });
  const std::size_t hi = idx.front(), lo = idx[1];
  const double inf_drop = t.at(hi, "max_influence") / t.at(lo, "max_influence");
  const double gap_drop = t.at(hi, "gap") / t.at(lo, "gap");
  r.pass = inf_drop >= 10.0 * (1 - 1e-9) && gap_drop >= 3.0;
  r.measured = "influence drop " + fmt(inf_drop, 4) + ", gap " + fmt(t.at(hi, "gap"), 4) + " +- " +
               fmt(t.at(hi, "gap_se"), 2) + " -> " + fmt(t.at(lo, "gap"), 4) + " +- " + fmt(t.at(lo, "gap_se"), 2) +
               " (drop " + fmt(gap_drop, 4) + ")";
  return r;
}

// ---------------------------------------------------------------------------
// C6, C7

namespace {

const WaveletBasis& db3() {
  static const WaveletBasis b = build_wavelet_basis(WaveletFamily::daubechies, 3);
  return b;
}

}  // namespace

Table besov_cell(double a, Index samples, std::uint64_t seed) {
  Table t = make_table("besov");
  const Lattice lat = discretize_domain(DomainSpec::unit_square(a));
  const int n_max = int(std::lround(std::log2(1.0 / a))) + 2;
  const std::vector<double> alphas = {-0.2, -0.05};
  std::vector<std::vector<double>> v(alphas.size());
  SamplingOptions opt;
  opt.algorithm = Algorithm::wolff;
  opt.spacing = 10;
  sample_gibbs(lat, ModelParams::plus(lat), samples, seed, opt, [&](const SpinVector& s, Index) {
    const GridField g = grid_field(MagnetisationField{&lat, s, Representation::piecewise_constant});
    for (std::size_t k = 0; k < alphas.size(); ++k) v[k].push_back(besov_holder_norm(g, alphas[k], n_max, db3()).value);
  });
  for (std::size_t k = 0; k < alphas.size(); ++k) {
    const MeanSe ms = mean_se(v[k]);
    t.rows.push_back({a, alphas[k], ms.mean, ms.se, double(samples), double(n_max)});
  }
  return t;
}

CriterionResult evaluate_besov(const Table& t) {
  std::map<double, std::map<double, double>> by_alpha;  // alpha -> mesh -> norm
  for (std::size_t i = 0; i < t.rows.size(); ++i) by_alpha[t.at(i, "alpha")][t.at(i, "mesh")] = t.at(i, "mean_norm");
  if (!by_alpha.count(-0.2) || !by_alpha.count(-0.05) || by_alpha[-0.2].size() < 2)
    return not_evaluated("C6", "needs two meshes at both exponents");
  CriterionResult r = start("C6");
  double lo = 1e300, hi = 0.0;
  for (const auto& [a, v] : by_alpha[-0.2]) {
    lo = std::min(lo, v);
    hi = std::max(hi, v);
  }
  bool increasing = true;
  double prev = -1.0;
  std::string seq;
  for (auto it = by_alpha[-0.05].rbegin(); it != by_alpha[-0.05].rend(); ++it) {
    increasing = increasing && it->second > prev;
    prev = it->second;
    seq += (seq.empty() ? "" : " < ") + fmt(it->second, 5);
  }
  r.pass = hi / lo < 2.0 && increasing;
  r.measured = "alpha=-0.2 max/min " + fmt(hi / lo, 4) + "; alpha=-0.05 " + seq + (increasing ? "" : " (not increasing)");
  return r;
}

Table subdomain_cell(int smooth_pairs, int rough_pairs, std::uint64_t seed) {
  Table t = make_table("subdomain");
  const double alpha = -0.5;
  CounterRng rng(seed, Purpose::Test, 7);
  auto bump = [](double c, double w) { return [c, w](double x) { return std::exp(-(x - c) * (x - c) / (w * w)); }; };
  auto erf_int = [](double c, double w, double lo, double hi) {
    return 0.5 * std::sqrt(M_PI) * w * (std::erf((hi - c) / w) - std::erf((lo - c) / w));
  };
  for (int k = 0; k < smooth_pairs; ++k) {
    const double c1 = 0.35 + 0.3 * rng.uniform(), c2 = 0.35 + 0.3 * rng.uniform();
    const double w1 = 0.12 + 0.1 * rng.uniform(), w2 = 0.12 + 0.1 * rng.uniform();
    const Point lo(0.1 + 0.25 * rng.uniform(), 0.1 + 0.25 * rng.uniform());
    const Point hi(0.6 + 0.3 * rng.uniform(), 0.6 + 0.3 * rng.uniform());
    const GridField f = separable_field(bump(c1, w1), bump(c2, w2), Box(Point(-0.5, -0.5), Point(1.5, 1.5)));
    const SubdomainIntegral I = integrate_over_subdomain(f, Region::from_box(lo, hi), alpha, db3(), 10);
    const double ref = erf_int(c1, w1, lo.x(), hi.x()) * erf_int(c2, w2, lo.y(), hi.y());
    t.rows.push_back({0, double(k), I.value, ref, std::abs(I.value - ref), std::abs(I.value - ref) / std::abs(ref),
                      I.tail_bound});
  }
  const int cells = 16;
  for (int k = 0; k < rough_pairs; ++k) {
    GridField f;
    f.x = Axis::intervals(VectorX::LinSpaced(cells + 1, 0.0, 1.0));
    f.y = Axis::intervals(VectorX::LinSpaced(cells + 1, 0.0, 1.0));
    f.values.resize(cells, cells);
    for (Index i = 0; i < f.values.size(); ++i) f.values(i) = rng.normal();
    Polygon poly;
    Region B;
    if (k % 2) {
      const double side = 0.25 + 0.125 * double(rng.below(2));
      const Point lo(0.25 + std::ldexp(double(rng.below(16)), -6), 0.25 + std::ldexp(double(rng.below(16)), -6));
      poly = quadratic_koch_island(lo, side, 1 + int(rng.below(2)));
      B = Region::from_polygon(poly);
    } else {
      const Point lo(0.05 + 0.3 * rng.uniform(), 0.05 + 0.3 * rng.uniform());
      const Point hi(0.55 + 0.4 * rng.uniform(), 0.55 + 0.4 * rng.uniform());
      poly = rectangle(lo, hi);
      B = Region::from_box(lo, hi);
    }
    const SubdomainIntegral I = integrate_over_subdomain(f, B, alpha, db3(), 8);
    double ref = 0.0;
    for (int i = 0; i < cells; ++i)
      for (int j = 0; j < cells; ++j) {
        const Box cell(Point(double(i) / cells, double(j) / cells), Point(double(i + 1) / cells, double(j + 1) / cells));
        ref += f.values(j, i) * clipped_area(poly, cell) * cells * cells;
      }
    t.rows.push_back({1, double(k), I.value, ref, std::abs(I.value - ref),
                      std::abs(I.value - ref) / std::max(1e-300, std::abs(ref)), I.tail_bound});
  }
  return t;
}

CriterionResult evaluate_subdomain(const Table& t) {
  if (t.rows.empty()) return not_evaluated("C7", "no pairs");
  CriterionResult r = start("C7");
  int smooth = 0, smooth_ok = 0, rough = 0, rough_ok = 0;
  double worst_rel = 0.0, worst_ratio = 0.0;
  for (std::size_t i = 0; i < t.rows.size(); ++i) {
    if (t.at(i, "rough") == 0) {
      ++smooth;
      smooth_ok += t.at(i, "rel_err") < 1e-3;
      worst_rel = std::max(worst_rel, t.at(i, "rel_err"));
    } else {
      ++rough;
      rough_ok += t.at(i, "abs_err") <= t.at(i, "tail_bound");
      worst_ratio = std::max(worst_ratio, t.at(i, "abs_err") / t.at(i, "tail_bound"));
    }
  }
  r.pass = smooth_ok == smooth && rough_ok == rough && smooth > 0 && rough > 0;
  r.measured = "smooth " + std::to_string(smooth_ok) + "/" + std::to_string(smooth) + " (worst rel " +
               fmt(worst_rel, 3) + "), rough " + std::to_string(rough_ok) + "/" + std::to_string(rough) +
               " (worst err/bound " + fmt(worst_ratio, 3) + ")";
  return r;
}

// ---------------------------------------------------------------------------
// C8, C9

Table singularity_table(double lambda0, const std::vector<SingularityCell>& cells) {
  Table t = make_table("singularity");
  for (const auto& c : cells) {
    const auto& z = c.certificate;
    t.rows.push_back({lambda0, double(c.N), double(c.m), z.mesh, c.bc.value, c.bc.ci_lo, c.bc.ci_hi, c.bc.se,
                      double(c.bc.n_pure), double(c.bc.n_disordered), double(c.bc.bins), c.bc.top_decile_occupancy,
                      c.null_bc.value, c.null_bc.ci_lo, c.null_bc.ci_hi, z.S, z.M, z.inv_f_mc, z.inv_f_gaussian,
                      z.tilt_f_over_z, z.direct_f, z.product, z.product_se, z.product_gaussian, z.m_over_s, z.epsilon,
                      z.p_tilt_below_eps, c.bc_coarsened, c.bc_merged, c.data_processing_ok ? 1.0 : 0.0});
  }
  return t;
}

Table singularity_cell(double a, const SingularityOptions& opt, const std::vector<int>& Ns, const std::vector<int>& ms,
                       const BootstrapOptions& boot) {
  const Lattice lat = discretize_domain(DomainSpec::unit_square(a));
  SingularityOptions o = opt;
  o.N = *std::max_element(Ns.begin(), Ns.end());
  const SingularitySamples s = sample_singularity(lat, o);
  BootstrapOptions b = boot;
  if (b.seed == 0) b.seed = opt.seed;
  return singularity_table(opt.lambda(Point(0.5, 0.5)), singularity_grid(s, Ns, ms, b));
}

CriterionResult evaluate_singularity_trend(const Table& main, const Table& control) {
  if (main.rows.empty()) return not_evaluated("C8", "no singularity cells");
  CriterionResult r = start("C8");
  std::map<int, std::map<int, std::size_t>> cell;  // m -> N -> row
  for (std::size_t i = 0; i < main.rows.size(); ++i) cell[int(main.at(i, "m"))][int(main.at(i, "N"))] = i;
  bool ok = true;
  std::string summary;
  for (const auto& [m, byN] : cell) {
    bool dec = true, sep = true;
    double prev = 2.0;
    std::string seq;
    for (const auto& [N, i] : byN) {
      const double v = main.at(i, "bc");
      dec = dec && v < prev;
      prev = v;
      seq += (seq.empty() ? "" : " > ") + fmt(v, 4);
      r.info.push_back("m=" + std::to_string(m) + " N=" + std::to_string(N) + " bc " + fmt(v, 4) + " [" +
                       fmt(main.at(i, "bc_ci_lo"), 4) + ", " + fmt(main.at(i, "bc_ci_hi"), 4) + "], null bc " +
                       fmt(main.at(i, "null_bc"), 4) + " [" + fmt(main.at(i, "null_ci_lo"), 4) + ", " +
                       fmt(main.at(i, "null_ci_hi"), 4) + "], bins " + fmt(main.at(i, "bins"), 8) +
                       ", top-decile occupancy " + fmt(main.at(i, "top_decile_occupancy"), 4) +
                       (main.at(i, "top_decile_occupancy") < 20 ? " (sparse)" : ""));
    }
    const std::size_t first = byN.begin()->second, last = byN.rbegin()->second;
    sep = main.at(first, "bc_ci_lo") > main.at(last, "bc_ci_hi");
    ok = ok && dec && sep && byN.size() >= 2;
    summary += "m=" + std::to_string(m) + ": " + seq + (dec ? "" : " (not decreasing)") + (sep ? "" : " (CIs overlap)") + "; ";
  }
  bool control_ok = !control.rows.empty();
  double worst = 0.0;
  for (std::size_t i = 0; i < control.rows.size(); ++i) {
    const double v = control.at(i, "bc");
    const double half = std::max(control.at(i, "bc_ci_hi") - v, v - control.at(i, "bc_ci_lo"));
    control_ok = control_ok && std::abs(1.0 - v) <= half + 1e-12;
    worst = std::max(worst, std::abs(1.0 - v));
  }
  r.pass = ok && control_ok;
  r.measured = summary + "lambda=0 control max |1-bc| " + fmt(worst, 3) + (control.rows.empty() ? " (missing)" : "");
  return r;
}

CriterionResult evaluate_certificate(const Table& main) {
  if (main.rows.empty()) return not_evaluated("C9", "no singularity cells");
  CriterionResult r = start("C9");
  bool ok = true;
  double min_margin = 1e300;
  for (std::size_t i = 0; i < main.rows.size(); ++i) {
    const double tol = 2.0 * std::hypot(main.at(i, "product_se"), main.at(i, "bc_se"));
    const double margin = main.at(i, "product") - main.at(i, "bc");
    ok = ok && margin >= -tol;
    min_margin = std::min(min_margin, margin);
    r.info.push_back("N=" + fmt(main.at(i, "N")) + " m=" + fmt(main.at(i, "m")) + " product " +
                     fmt(main.at(i, "product"), 4) + " +- " + fmt(main.at(i, "product_se"), 2) + " >= bc " +
                     fmt(main.at(i, "bc"), 4) + "; direct E_nu f " + fmt(main.at(i, "direct_f"), 4) +
                     ", tilt E[f/Z] " + fmt(main.at(i, "tilt_f_over_z"), 4));
  }
  r.pass = ok;
  r.measured = "min(product - bc) " + fmt(min_margin, 4) + " over " + std::to_string(main.rows.size()) + " cells";
  return r;
}

// ---------------------------------------------------------------------------
// C10

Table moments_cell(double a, double lambda0, Index replicas, std::uint64_t seed) {
  Table t = make_table("moments");
  const Lattice lat = discretize_domain(DomainSpec::unit_square(a));
  const Profile lam = profiles::constant(lambda0), zero = profiles::constant(0.0);
  const PaleyZygmundReport pz = paley_zygmund_check(lat, lam, zero, replicas, seed);
  const MomentReport m2 = positive_moment_bound_check(lat, lam, zero, 2.0, replicas, seed + 1);
  const MomentReport m4 = positive_moment_bound_check(lat, lam, zero, 4.0, replicas, seed + 2);
  const TailReport tail = negative_tail_check(lat, lam, zero, replicas, {}, seed + 3);
  t.rows.push_back({a, lambda0, double(replicas), pz.prob, pz.prob_ci_hi, pz.bound, pz.bound_ci_lo,
                    pz.holds ? 1.0 : 0.0, m2.z_moment_2p, m2.z_bound, m4.empirical, m4.bound,
                    (m2.holds && m4.holds) ? 1.0 : 0.0, tail.fit.slope, tail.fit.slope_se, double(tail.fit_points),
                    tail.holds ? 1.0 : 0.0, tail.jensen_ok ? 1.0 : 0.0, tail.inverse_moment, tail.inverse_moment_se});
  return t;
}

CriterionResult evaluate_moments(const Table& t) {
  if (t.rows.empty()) return not_evaluated("C10", "no moment cells");
  CriterionResult r = start("C10");
  bool ok = true;
  std::string s;
  for (std::size_t i = 0; i < t.rows.size(); ++i) {
    const bool pz = t.at(i, "pz_holds") > 0;
    const bool z2 = t.at(i, "z2") <= t.at(i, "z2_bound");
    const bool tail = t.at(i, "tail_slope") >= 1.5;
    ok = ok && pz && z2 && tail && t.at(i, "jensen_ok") > 0;
    s += "a=" + fmt(t.at(i, "mesh"), 4) + ": P(Z>=C1/2) " + fmt(t.at(i, "pz_prob"), 4) + " vs " +
         fmt(t.at(i, "pz_bound"), 4) + ", E[Z^2] " + fmt(t.at(i, "z2"), 4) + " <= " + fmt(t.at(i, "z2_bound"), 4) +
         ", tail slope " + fmt(t.at(i, "tail_slope"), 4) + " +- " + fmt(t.at(i, "tail_slope_se"), 2) + "; ";
    r.info.push_back("a=" + fmt(t.at(i, "mesh"), 4) + " Psi p=4 moment " + fmt(t.at(i, "psi4"), 5) + " <= kernel " +
                     fmt(t.at(i, "psi4_bound"), 5) + ", E[1/Z] " + fmt(t.at(i, "inverse_moment"), 5) + " +- " +
                     fmt(t.at(i, "inverse_moment_se"), 2));
  }
  r.pass = ok;
  r.measured = s;
  return r;
}

// ---------------------------------------------------------------------------
// C11

Table conditional_gaussian_cell(Index draws, std::uint64_t seed) {
  Table t = make_table("conditional_gaussian");
  CounterRng rng(seed, Purpose::Test, 11);
  int id = 0;
  for (double a : {0.25, 0.125}) {
    for (int n : {1, 4, 9}) {
      for (double wscale : {-1.0, 0.0, 0.7}) {
        SpinVector s(n);
        for (int x = 0; x < n; ++x) s(x) = rng.uniform() < 0.6 ? 1 : -1;
        const double la = std::pow(a, 7.0 / 8);
        const double Lambda = a * a * n;
        const double W = wscale * std::sqrt(Lambda);
        BlockObservables b;
        b.N = 1;
        b.mesh = a;
        b.Phi = MatrixX::Constant(1, 1, std::pow(a, 15.0 / 8) * s.cast<double>().sum());
        b.W = MatrixX::Constant(1, 1, W);
        b.Lambda = MatrixX::Constant(1, 1, Lambda);
        const double factor = conditional_rn_factor(b);
        RunningStats st;
        CounterRng draw(derive_key(seed, Purpose::Test, 1000 + std::uint64_t(id)));
        const VectorX var = VectorX::Ones(n);
        for (Index d = 0; d < draws; ++d) {
          const VectorX om = sample_conditional_gaussian(var, W / a, draw);
          st.add(std::exp(la * s.cast<double>().dot(om) - 0.5 * la * la * n));
        }
        const double z = st.se() > 1e-14 * std::abs(st.mean())
                             ? (factor - st.mean()) / st.se()
                             : (std::abs(factor - st.mean()) <= 1e-12 * std::abs(factor) ? 0.0 : 1e300);
        t.rows.push_back({double(id), a, double(n), W, factor, st.mean(), st.se(), z});
        ++id;
      }
    }
  }
  // E_W of the factor for one block of 9 sites at a = 1/8, W ~ N(0, Λ)
  const double a = 0.125;
  const int n = 9;
  const double Lambda = a * a * n;
  BlockObservables b;
  b.N = 1;
  b.mesh = a;
  b.Phi = MatrixX::Constant(1, 1, std::pow(a, 15.0 / 8) * 5.0);
  b.Lambda = MatrixX::Constant(1, 1, Lambda);
  b.W = MatrixX::Zero(1, 1);
  RunningStats st;
  CounterRng draw(derive_key(seed, Purpose::Test, 999));
  for (Index d = 0; d < draws; ++d) {
    b.W(0, 0) = std::sqrt(Lambda) * draw.normal();
    st.add(conditional_rn_factor(b));
  }
  t.rows.push_back({-1.0, a, double(n), nan, 1.0, st.mean(), st.se(), (st.mean() - 1.0) / st.se()});
  return t;
}

CriterionResult evaluate_conditional_gaussian(const Table& t) {
  if (t.rows.empty()) return not_evaluated("C11", "no cases");
  CriterionResult r = start("C11");
  double worst = 0.0, mean_z = 0.0;
  bool ok = true, have_mean = false;
  for (std::size_t i = 0; i < t.rows.size(); ++i) {
    const double z = std::abs(t.at(i, "z"));
    ok = ok && z < 3.0;
    if (t.at(i, "case") < 0) {
      mean_z = z;
      have_mean = true;
      r.info.push_back("E_W factor " + fmt(t.at(i, "oracle"), 6) + " +- " + fmt(t.at(i, "oracle_se"), 2));
    } else {
      worst = std::max(worst, z);
    }
  }
  r.pass = ok && have_mean;
  r.measured = std::to_string(t.rows.size() - (have_mean ? 1 : 0)) + " single-block cases, max |z| " + fmt(worst, 3) +
               "; mean-one |z| " + fmt(mean_z, 3);
  return r;
}

}  // namespace rfim
