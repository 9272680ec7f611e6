#include <CLI11.hpp>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <json.hpp>
#include <sstream>

#include "rfim/chaos.hpp"
#include "rfim/disorder.hpp"
#include "rfim/experiments.hpp"
#include "rfim/harness.hpp"
#include "rfim/io.hpp"
#include "rfim/ising.hpp"
#include "rfim/lattice.hpp"
#include "rfim/sampler.hpp"

namespace fs = std::filesystem;
using nlohmann::json;
using namespace rfim;

namespace {

struct Common {
  std::uint64_t seed = 1;
  int threads = 1;
  std::string out;

  fs::path dir(const char* sub) const { return out.empty() ? default_out_root() / sub : fs::path(out); }
};

struct LatticeArgs {
  double mesh = 0.25;
  std::vector<int> strip;

  Lattice build() const {
    if (strip.size() == 2) return discretize_domain(DomainSpec::strip(strip[0], strip[1], mesh));
    return discretize_domain(DomainSpec::unit_square(mesh));
  }
};

void add_lattice(CLI::App* c, LatticeArgs& l) {
  c->add_option("--mesh", l.mesh, "mesh of the unit square")->check(CLI::Range(1e-6, 0.5));
  c->add_option("--strip", l.strip, "W H strip instead of the unit square")->expected(2);
}

void write_text(const fs::path& p, const std::string& s) {
  write_file_atomic(p, s);
  std::cerr << "wrote " << p.string() << "\n";
}

template <class F>
std::string to_string(F&& writer) {
  std::ostringstream os;
  writer(os);
  return os.str();
}

ExternalField sampled_field(const Lattice& lat, double lambda, double h, std::uint64_t seed, std::uint64_t replica) {
  const VectorX omega = sample_disorder(lat, DisorderLaw{}, seed, replica);
  return build_external_field(lat, profiles::constant(lambda), profiles::constant(h), omega);
}

void print_criterion(const CriterionResult& r) {
  std::cout << format_criterion(r) << "\n";
  for (const auto& line : r.info) std::cout << "  INFO " << r.id << " " << line << "\n";
}

void write_table(const fs::path& dir, const Table& t) {
  write_text(dir / (t.name + ".csv"), to_string([&](std::ostream& os) { write_table_csv(os, t); }));
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"rfim: critical Ising model in a random field"};
  app.require_subcommand(1);
  Common common;
  app.add_option("--seed", common.seed, "master seed");
  app.add_option("--threads", common.threads, "worker threads")->check(CLI::PositiveNumber);
  app.add_option("--out", common.out, "output directory (default $RFIM_OUT or ./runs)");

  // exact
  LatticeArgs ex_lat;
  double ex_lambda = 1.0, ex_h = 0.0;
  int ex_k = 2;
  std::uint64_t ex_replica = 0;
  auto* exact = app.add_subcommand("exact", "exact partition functions and correlations on a small lattice");
  add_lattice(exact, ex_lat);
  exact->add_option("--lambda", ex_lambda, "constant disorder strength");
  exact->add_option("--field", ex_h, "constant external field h");
  exact->add_option("--k", ex_k, "maximal correlation order")->check(CLI::Range(1, 8));
  exact->add_option("--replica", ex_replica, "disorder replica");

  // sample
  LatticeArgs sa_lat;
  Index sa_samples = 1000, sa_snapshots = 0;
  std::string sa_algo = "wolff";
  Index sa_spacing = 1;
  bool sa_disorder = false;
  auto* sample = app.add_subcommand("sample", "Gibbs samples of the pure model under + boundary");
  add_lattice(sample, sa_lat);
  sample->add_option("--samples", sa_samples)->check(CLI::PositiveNumber);
  sample->add_option("--algorithm", sa_algo, "heatbath, wolff or swendsen_wang");
  sample->add_option("--spacing", sa_spacing, "sweeps between samples")->check(CLI::PositiveNumber);
  sample->add_option("--snapshots", sa_snapshots, "write the last K spin configurations");
  sample->add_flag("--disorder", sa_disorder, "also write a Gaussian disorder snapshot");

  // chaos
  LatticeArgs ch_lat;
  double ch_lambda = 1.0, ch_h = 0.0;
  int ch_degree = 3;
  auto* chaos = app.add_subcommand("chaos", "chaos kernel and high-temperature expansion check");
  add_lattice(chaos, ch_lat);
  chaos->add_option("--lambda", ch_lambda);
  chaos->add_option("--field", ch_h, "constant external field h");
  chaos->add_option("--degree", ch_degree, "kernel degree l")->check(CLI::Range(1, 16));

  // besov
  double be_mesh = 1.0 / 32;
  Index be_samples = 16;
  bool be_subdomain = false;
  auto* besov = app.add_subcommand("besov", "Hölder-Besov norms of the pure magnetisation field");
  besov->add_option("--mesh", be_mesh)->check(CLI::Range(1e-6, 0.5));
  besov->add_option("--samples", be_samples)->check(CLI::PositiveNumber);
  besov->add_flag("--subdomain", be_subdomain, "also run the subdomain integration check");

  // singularity
  double si_mesh = 1.0 / 64, si_lambda = 1.0;
  std::vector<int> si_N{1, 2, 4}, si_m{2, 3, 4};
  SingularityOptions si_opt;
  auto* sing = app.add_subcommand("singularity", "Bhattacharyya coefficients and tilt certificates");
  sing->add_option("--mesh", si_mesh)->check(CLI::Range(1e-6, 0.5));
  sing->add_option("--lambda", si_lambda, "constant disorder strength");
  sing->add_option("--N", si_N, "block grid sizes");
  sing->add_option("--m", si_m, "histogram refinements");
  sing->add_option("--replicas", si_opt.replicas);
  sing->add_option("--null-replicas", si_opt.null_replicas);
  sing->add_option("--tilt-replicas", si_opt.tilt_replicas);
  sing->add_option("--bank-size", si_opt.bank_size);

  // moments
  double mo_mesh = 1.0 / 3, mo_lambda = 1.0;
  Index mo_replicas = 100000;
  auto* moments = app.add_subcommand("moments", "moment bounds, negative tail and Paley-Zygmund");
  moments->add_option("--mesh", mo_mesh)->check(CLI::Range(1e-6, 0.5));
  moments->add_option("--lambda", mo_lambda);
  moments->add_option("--replicas", mo_replicas)->check(CLI::PositiveNumber);

  // run
  std::string manifest_path, run_report = "csv";
  bool run_quiet = false;
  auto* run = app.add_subcommand("run", "execute a manifest, resuming completed cells");
  run->add_option("manifest", manifest_path, "manifest JSON")->required()->check(CLI::ExistingFile);
  run->add_option("--report", run_report, "report format")->check(CLI::IsMember({"csv", "json", "none"}));
  run->add_flag("--quiet", run_quiet, "no per-cell progress");

  // report
  std::string report_dir, report_format = "csv";
  auto* report = app.add_subcommand("report", "emit tables and the acceptance summary of a run");
  report->add_option("run", report_dir, "run directory")->required()->check(CLI::ExistingDirectory);
  report->add_option("--format", report_format)->check(CLI::IsMember({"csv", "json"}));

  CLI11_PARSE(app, argc, argv);

  try {
    if (*exact) {
      const Lattice lat = ex_lat.build();
      const fs::path dir = common.dir("exact");
      const ExternalField f = sampled_field(lat, ex_lambda, ex_h, common.seed, ex_replica);
      ModelParams p = ModelParams::plus(lat);
      write_text(dir / "lattice.csv", to_string([&](std::ostream& os) { write_lattice_csv(os, lat); }));
      write_text(dir / "correlations.csv",
                 to_string([&](std::ostream& os) { write_correlations_csv(os, exact_correlations(lat, p, ex_k)); }));
      const cplx rescaled = rescaled_partition(lat, p, f);
      ModelParams pf = p;
      pf.xi = f.xi();
      json j = {{"sites", lat.size()},
                {"mesh", lat.mesh},
                {"log_z_enumeration", std::log(std::abs(exact_partition(lat, pf)))},
                {"log_z_transfer_matrix", std::log(std::abs(transfer_matrix_partition(lat, pf)))},
                {"rescaled_partition", {rescaled.real(), rescaled.imag()}}};
      std::cout << j.dump() << "\n";
    } else if (*sample) {
      const Lattice lat = sa_lat.build();
      const fs::path dir = common.dir("sample");
      SamplingOptions opt;
      opt.algorithm = parse_algorithm(sa_algo);
      opt.spacing = sa_spacing;
      CorrelationAccumulator acc(lat.size());
      double m_sum = 0.0;
      const SamplingReport rep =
          sample_gibbs(lat, ModelParams::plus(lat), sa_samples, common.seed, opt, [&](const SpinVector& s, Index k) {
            acc.add(s);
            m_sum += s.cast<double>().mean();
            if (k >= sa_samples - sa_snapshots) {
              SnapshotMeta meta{"spins", lat.size(), lat.mesh, common.seed, 0, std::int64_t(k), ""};
              write_spin_snapshot(dir / ("spins_" + std::to_string(k)), s, meta);
            }
          });
      write_text(dir / "correlations.csv",
                 to_string([&](std::ostream& os) { write_correlations_csv(os, acc.table(lat.mesh, 2)); }));
      if (sa_disorder) {
        SnapshotMeta meta{"disorder", lat.size(), lat.mesh, common.seed, 0, -1, "gaussian"};
        write_disorder_snapshot(dir / "disorder", sample_disorder(lat, DisorderLaw{}, common.seed), meta);
      }
      json j = {{"sites", lat.size()},       {"samples", rep.samples},
                {"burn_in", rep.burn_in},    {"tau_int", rep.tau_int},
                {"effective_samples", rep.effective_samples()}, {"mean_magnetisation", m_sum / sa_samples}};
      std::cout << j.dump() << "\n";
    } else if (*chaos) {
      const Lattice lat = ch_lat.build();
      const fs::path dir = common.dir("chaos");
      const ExternalField f = sampled_field(lat, ch_lambda, ch_h, common.seed, 0);
      const ModelParams p = ModelParams::plus(lat);
      const CorrelationTable corr = exact_correlations(lat, p, ch_degree);
      write_text(dir / "kernel.csv",
                 to_string([&](std::ostream& os) { write_kernel_csv(os, build_chaos_kernel(corr, f.lambda_a, ch_degree)); }));
      const cplx hte = evaluate_high_temperature_expansion(lat, p, f);
      const cplx z = rescaled_partition(lat, p, f);
      json j = {{"sites", lat.size()},
                {"high_temperature_expansion", {hte.real(), hte.imag()}},
                {"rescaled_partition", {z.real(), z.imag()}},
                {"relative_error", std::abs(hte - z) / std::abs(z)}};
      std::cout << j.dump() << "\n";
    } else if (*besov) {
      const fs::path dir = common.dir("besov");
      const Table t = besov_cell(be_mesh, be_samples, common.seed);
      write_table(dir, t);
      print_criterion(evaluate_besov(t));
      if (be_subdomain) {
        const Table s = subdomain_cell(10, 50, common.seed);
        write_table(dir, s);
        print_criterion(evaluate_subdomain(s));
      }
    } else if (*sing) {
      const fs::path dir = common.dir("singularity");
      si_opt.lambda = profiles::constant(si_lambda);
      si_opt.seed = common.seed;
      BootstrapOptions boot;
      boot.seed = common.seed;
      const Table t = singularity_cell(si_mesh, si_opt, si_N, si_m, boot);
      write_table(dir, t);
      print_criterion(evaluate_certificate(t));
    } else if (*moments) {
      const fs::path dir = common.dir("moments");
      const Table t = moments_cell(mo_mesh, mo_lambda, mo_replicas, common.seed);
      write_table(dir, t);
      print_criterion(evaluate_moments(t));
    } else if (*run) {
      ExperimentManifest m = load_manifest(manifest_path);
      if (app.count("--seed")) m.seed = common.seed;
      RunOptions opt;
      opt.out_root = common.out;
      opt.threads = common.threads;
      opt.progress = !run_quiet;
      const RunRecord r = run_experiment(m, opt);
      Index failed = 0;
      for (const auto& c : r.cells) failed += c.status == "failed";
      std::cout << "run " << r.dir.string() << ": " << r.cells.size() << " cells, " << r.computed() << " computed, "
                << failed << " failed, " << r.wall_clock << " s\n";
      if (run_report != "none") {
        emit_report(r, run_report == "json" ? ReportFormat::json : ReportFormat::csv);
        for (const auto& c : evaluate_run(r, collect_tables(r)))
          if (c.evaluated) print_criterion(c);
      }
      return failed ? 1 : 0;
    } else if (*report) {
      const RunRecord r = load_run(report_dir);
      for (const auto& p : emit_report(r, report_format == "json" ? ReportFormat::json : ReportFormat::csv))
        std::cerr << "wrote " << p.string() << "\n";
      for (const auto& c : evaluate_run(r, collect_tables(r))) print_criterion(c);
    }
  } catch (const Error& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  }
  return 0;
}
