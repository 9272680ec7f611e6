#include "rfim/harness.hpp"

#include <atomic>
#include <chrono>
#include <cmath>
#include <cstdlib>
#include <functional>
#include <iostream>
#include <mutex>
#include <sstream>
#include <thread>

#include "rfim/io.hpp"

#ifndef RFIM_CODE_VERSION
#define RFIM_CODE_VERSION "unversioned"
#endif

namespace rfim {

using nlohmann::json;

namespace {

const std::vector<std::pair<ExperimentKind, const char*>> kind_names = {
    {ExperimentKind::scaling, "scaling"},         {ExperimentKind::chaos_identity, "chaos-identity"},
    {ExperimentKind::lindeberg, "lindeberg"},     {ExperimentKind::besov, "besov"},
    {ExperimentKind::singularity, "singularity"}, {ExperimentKind::moments, "moments"},
    {ExperimentKind::tanh_table, "tanh-table"},
};

std::string num(double v) {
  std::ostringstream os;
  os.precision(17);
  os << v;
  return os.str();
}

std::vector<std::string> kind_tables(ExperimentKind k) {
  switch (k) {
    case ExperimentKind::scaling: return {"one_point"};
    case ExperimentKind::chaos_identity: return {"chaos_identity"};
    case ExperimentKind::lindeberg: return {"lindeberg"};
    case ExperimentKind::besov: return {"besov", "subdomain"};
    case ExperimentKind::singularity: return {"singularity", "conditional_gaussian"};
    case ExperimentKind::moments: return {"moments"};
    case ExperimentKind::tanh_table: return {"tanh_table"};
  }
  return {};
}

struct PlannedCell {
  std::string key;
  std::string table;
  std::function<Table()> run;
};

template <class T>
T option(const ExperimentManifest& m, const char* name, T fallback) {
  return m.options.contains(name) ? m.options.at(name).get<T>() : fallback;
}

std::vector<PlannedCell> plan(const ExperimentManifest& m) {
  std::vector<PlannedCell> cells;
  const std::uint64_t seed = m.seed;
  const Point center(0.5, 0.5);
  switch (m.kind) {
    case ExperimentKind::scaling:
      for (double a : m.meshes)
        cells.push_back({"mesh=" + num(a), "one_point", [=, &m] { return one_point_cell(a, m.replicas, seed); }});
      break;
    case ExperimentKind::chaos_identity: {
      const int fields = option(m, "fields", 20);
      if (m.domain.shape == "strip") {
        const int w = m.domain.width, h = m.domain.height;
        cells.push_back({"width=" + std::to_string(w) + ",height=" + std::to_string(h), "chaos_identity",
                         [=] { return chaos_identity_cell(w, h, fields, seed); }});
      } else {
        const int mw = option(m, "max_width", 4), mh = option(m, "max_height", 5);
        for (int w = 1; w <= mw; ++w)
          for (int h = 1; h <= mh; ++h)
            cells.push_back({"width=" + std::to_string(w) + ",height=" + std::to_string(h), "chaos_identity",
                             [=] { return chaos_identity_cell(w, h, fields, seed); }});
      }
      break;
    }
    case ExperimentKind::tanh_table: {
      const double l = m.lambda.build()(center), h = m.h.build()(center);
      for (double a : m.meshes)
        cells.push_back({"mesh=" + num(a), "tanh_table", [=, &m] { return tanh_table_cell(a, l, h, m.replicas, seed); }});
      break;
    }
    case ExperimentKind::lindeberg: {
      const double l0 = option(m, "lambda0", m.lambda.build()(center));
      std::vector<double> meshes = m.meshes;
      if (m.options.contains("drop")) meshes.push_back(lindeberg_proxy_mesh(l0, m.options["drop"].get<double>()));
      for (double a : meshes)
        cells.push_back({"lambda0=" + num(l0) + ",proxy_mesh=" + num(a), "lindeberg",
                         [=, &m] { return lindeberg_cell(l0, a, m.replicas, seed); }});
      break;
    }
    case ExperimentKind::besov: {
      for (double a : m.meshes)
        cells.push_back({"mesh=" + num(a), "besov", [=, &m] { return besov_cell(a, m.replicas, seed); }});
      const int smooth = option(m, "smooth_pairs", 10), rough = option(m, "rough_pairs", 50);
      if (smooth + rough > 0)
        cells.push_back({"smooth=" + std::to_string(smooth) + ",rough=" + std::to_string(rough), "subdomain",
                         [=] { return subdomain_cell(smooth, rough, seed); }});
      break;
    }
    case ExperimentKind::singularity: {
      SingularityOptions base;
      base.replicas = m.replicas;
      base.null_replicas = option<Index>(m, "null_replicas", m.replicas);
      base.tilt_replicas = option<Index>(m, "tilt_replicas", 4000);
      base.bank_size = option<Index>(m, "bank_size", 4000);
      base.disorder_sweeps = option<Index>(m, "disorder_sweeps", 30);
      base.pure_spacing = option<Index>(m, "pure_spacing", 4);
      base.burn_in = option<Index>(m, "burn_in", 400);
      base.seed = seed;
      BootstrapOptions boot;
      boot.resamples = option<Index>(m, "bootstrap", 200);
      boot.seed = option<std::uint64_t>(m, "bootstrap_seed", 0);
      const Profile lam = m.lambda.build();
      const double l0 = lam(center);
      for (double a : m.meshes) {
        SingularityOptions o = base;
        o.lambda = lam;
        cells.push_back({"lambda0=" + num(l0) + ",mesh=" + num(a), "singularity",
                         [=, &m] { return singularity_cell(a, o, m.Ns, m.ms, boot); }});
      }
      if (option(m, "control", true)) {
        const Index r = option<Index>(m, "control_replicas", 2000);
        for (double a : m.meshes) {
          SingularityOptions o = base;
          o.lambda = profiles::constant(0.0);
          o.replicas = o.null_replicas = r;
          o.tilt_replicas = o.bank_size = std::min<Index>(r, 500);
          cells.push_back({"lambda0=0,mesh=" + num(a), "singularity",
                           [=, &m] { return singularity_cell(a, o, m.Ns, m.ms, boot); }});
        }
      }
      const Index draws = option<Index>(m, "conditional_draws", 100000);
      if (draws > 0)
        cells.push_back({"draws=" + std::to_string(draws), "conditional_gaussian",
                         [=] { return conditional_gaussian_cell(draws, seed); }});
      break;
    }
    case ExperimentKind::moments: {
      const double l0 = m.lambda.build()(center);
      for (double a : m.meshes)
        cells.push_back({"mesh=" + num(a), "moments", [=, &m] { return moments_cell(a, l0, m.replicas, seed); }});
      break;
    }
  }
  return cells;
}

std::string cell_file(const ExperimentManifest& m, const std::string& table, const std::string& key) {
  const std::string id = content_hash(m.canonical().dump() + "\n" + code_version() + "\n" + key);
  return "cells/" + table + "-" + id.substr(0, 16) + ".csv";
}

json table_json(const Table& t) {
  json rows = json::array();
  for (const auto& r : t.rows) {
    json row = json::array();
    for (double v : r) row.push_back(std::isnan(v) ? json(nullptr) : json(v));
    rows.push_back(row);
  }
  return {{"name", t.name}, {"columns", t.columns}, {"rows", rows}};
}

}  // namespace

const char* kind_name(ExperimentKind k) {
  for (const auto& [kk, n] : kind_names)
    if (kk == k) return n;
  return "?";
}

ExperimentKind parse_kind(const std::string& s) {
  for (const auto& [k, n] : kind_names)
    if (s == n) return k;
  fail(Errc::ValidationError, "kind: unknown experiment kind '" + s + "'");
}

Profile ProfileSpec::build() const {
  if (preset == "constant") return profiles::constant(value);
  if (preset == "bump") return profiles::gaussian_bump(center, width, amplitude);
  if (preset == "linear") return profiles::linear(c0, gradient);
  fail(Errc::ValidationError, "unknown profile preset '" + preset + "'");
}

double ProfileSpec::grid_min() const {
  const Profile f = build();
  double m = 1e300;
  for (int i = 0; i <= 64; ++i)
    for (int j = 0; j <= 64; ++j) m = std::min(m, f(Point(i / 64.0, j / 64.0)));
  return m;
}

json ProfileSpec::to_json() const {
  if (preset == "constant") return {{"preset", preset}, {"value", value}};
  if (preset == "bump")
    return {{"preset", preset}, {"center", {center.x(), center.y()}}, {"width", width}, {"amplitude", amplitude}};
  return {{"preset", preset}, {"c0", c0}, {"gradient", {gradient.x(), gradient.y()}}};
}

DomainSpec DomainConfig::at(double a) const {
  return shape == "strip" ? DomainSpec::strip(width, height, a) : DomainSpec::unit_square(a);
}

json ExperimentManifest::canonical() const {
  json j;
  j["version"] = version;
  j["kind"] = kind_name(kind);
  j["domain"] = domain.shape == "strip" ? json{{"shape", "strip"}, {"width", domain.width}, {"height", domain.height}}
                                        : json{{"shape", domain.shape}};
  j["lambda"] = lambda.to_json();
  j["h"] = h.to_json();
  if (phi) j["phi"] = phi->to_json();
  j["meshes"] = meshes;
  j["N"] = Ns;
  j["m"] = ms;
  j["l"] = ls;
  j["replicas"] = replicas;
  j["options"] = options;
  j["seed"] = seed;
  return j;
}

std::string ExperimentManifest::hash() const { return content_hash(canonical().dump()); }

ExperimentManifest parse_manifest(const json& j) {
  std::vector<std::string> errors;
  ExperimentManifest m;
  auto field = [&](const char* name, auto&& fn) {
    try {
      fn();
    } catch (const Error& e) {
      errors.push_back(std::string(name) + ": " + e.what());
    } catch (const std::exception& e) {
      errors.push_back(std::string(name) + ": " + e.what());
    }
  };
  if (!j.is_object()) fail(Errc::ValidationError, "manifest: must be a JSON object");
  static const std::vector<std::string> known = {"version", "kind", "domain", "lambda", "h",    "phi",   "meshes",
                                                 "N",       "m",    "l",      "replicas", "options", "seed", "output"};
  for (const auto& [k, v] : j.items())
    if (std::find(known.begin(), known.end(), k) == known.end()) errors.push_back(k + ": unknown field");

  field("version", [&] {
    m.version = j.value("version", 1);
    if (m.version != 1) throw std::runtime_error("only version 1 is supported");
  });
  bool have_kind = false;
  field("kind", [&] {
    if (!j.contains("kind")) throw std::runtime_error("required");
    m.kind = parse_kind(j.at("kind").get<std::string>());
    have_kind = true;
  });
  field("domain", [&] {
    if (!j.contains("domain")) return;
    const json& d = j.at("domain");
    m.domain.shape = d.value("shape", std::string("unit_square"));
    if (m.domain.shape == "strip") {
      m.domain.width = d.at("width").get<int>();
      m.domain.height = d.at("height").get<int>();
      if (m.domain.width < 1 || m.domain.height < 1) throw std::runtime_error("strip sides must be positive");
    } else if (m.domain.shape != "unit_square") {
      throw std::runtime_error("shape must be unit_square or strip");
    }
  });
  auto profile = [&](const char* name, ProfileSpec& p) {
    field(name, [&] {
      if (!j.contains(name)) return;
      const json& d = j.at(name);
      p.preset = d.at("preset").get<std::string>();
      if (p.preset == "constant") {
        p.value = d.at("value").get<double>();
      } else if (p.preset == "bump") {
        const auto c = d.value("center", std::vector<double>{0.5, 0.5});
        if (c.size() != 2) throw std::runtime_error("center must have two coordinates");
        p.center = Point(c[0], c[1]);
        p.width = d.value("width", 0.25);
        p.amplitude = d.value("amplitude", 1.0);
        if (p.width <= 0) throw std::runtime_error("width must be positive");
      } else if (p.preset == "linear") {
        p.c0 = d.at("c0").get<double>();
        const auto g = d.value("gradient", std::vector<double>{0.0, 0.0});
        if (g.size() != 2) throw std::runtime_error("gradient must have two coordinates");
        p.gradient = Point(g[0], g[1]);
      } else {
        throw std::runtime_error("unknown preset '" + p.preset + "' (constant, bump, linear)");
      }
    });
  };
  profile("lambda", m.lambda);
  profile("h", m.h);
  if (j.contains("phi")) {
    m.phi = ProfileSpec{};
    profile("phi", *m.phi);
  }
  field("meshes", [&] {
    if (!j.contains("meshes")) throw std::runtime_error("required");
    m.meshes = j.at("meshes").get<std::vector<double>>();
    if (m.meshes.empty()) throw std::runtime_error("must be a nonempty list");
    for (double a : m.meshes)
      if (!(a > 0 && a <= 0.5)) throw std::runtime_error("mesh " + num(a) + " outside (0, 1/2]");
  });
  auto grid = [&](const char* name, std::vector<int>& v) {
    field(name, [&] {
      if (j.contains(name)) v = j.at(name).get<std::vector<int>>();
      for (int x : v)
        if (x < 0) throw std::runtime_error("entries must be nonnegative");
    });
  };
  grid("N", m.Ns);
  grid("m", m.ms);
  grid("l", m.ls);
  field("replicas", [&] {
    m.replicas = j.value("replicas", Index(0));
    if (have_kind && m.kind != ExperimentKind::chaos_identity && m.replicas <= 0)
      throw std::runtime_error("must be positive");
  });
  field("options", [&] {
    m.options = j.value("options", json::object());
    if (!m.options.is_object()) throw std::runtime_error("must be an object");
  });
  field("seed", [&] { m.seed = j.value("seed", std::uint64_t(1)); });
  field("output", [&] { m.output = j.value("output", std::string()); });

  if (have_kind && m.kind == ExperimentKind::singularity) {
    if (m.Ns.empty()) errors.push_back("N: must be a nonempty list for singularity");
    if (m.ms.empty()) errors.push_back("m: must be a nonempty list for singularity");
    for (int N : m.Ns)
      if (N < 1 || (N & (N - 1))) errors.push_back("N: " + std::to_string(N) + " is not a power of two");
  }
  if (have_kind && m.kind != ExperimentKind::chaos_identity && m.domain.shape != "unit_square")
    errors.push_back(std::string("domain: ") + kind_name(m.kind) + " runs on the unit square");
  if (!errors.empty()) {
    std::string msg;
    for (const auto& e : errors) msg += (msg.empty() ? "" : "; ") + e;
    fail(Errc::ValidationError, msg);
  }
  return m;
}

ExperimentManifest load_manifest(const std::filesystem::path& path) {
  json j;
  try {
    j = json::parse(read_file(path));
  } catch (const json::exception& e) {
    fail(Errc::ValidationError, "manifest: " + std::string(e.what()));
  }
  return parse_manifest(j);
}

const char* code_version() { return RFIM_CODE_VERSION; }

Index RunRecord::computed() const {
  Index n = 0;
  for (const auto& c : cells) n += c.computed;
  return n;
}

std::filesystem::path default_out_root() {
  if (const char* e = std::getenv("RFIM_OUT"); e && *e) return e;
  return "runs";
}

std::filesystem::path run_directory(const ExperimentManifest& m, const RunOptions& opt) {
  const std::filesystem::path root = opt.out_root.empty() ? default_out_root() : opt.out_root;
  if (!m.output.empty()) {
    const std::filesystem::path o(m.output);
    return o.is_absolute() ? o : root / o;
  }
  return root / (std::string(kind_name(m.kind)) + "-" + m.hash().substr(0, 12));
}

namespace {

void write_run_json(const RunRecord& r) {
  json cells = json::array();
  for (const auto& c : r.cells)
    cells.push_back({{"key", c.key}, {"table", c.table}, {"file", c.file}, {"status", c.status}, {"error", c.error}});
  json j = {{"manifest_hash", r.manifest_hash},
            {"code_version", r.code_version},
            {"kind", kind_name(r.kind)},
            {"tables", r.tables},
            {"cells", cells},
            {"results", json::object()}};
  for (const auto& t : r.tables) j["results"][t] = "results/" + t + ".csv";
  write_file_atomic(r.dir / "run.json", j.dump(2) + "\n");
}

}  // namespace

RunRecord run_experiment(const ExperimentManifest& m, const RunOptions& opt) {
  const auto t0 = std::chrono::steady_clock::now();
  RunRecord run;
  run.dir = run_directory(m, opt);
  run.manifest_hash = m.hash();
  run.code_version = code_version();
  run.kind = m.kind;
  run.tables = kind_tables(m.kind);
  std::filesystem::create_directories(run.dir / "cells");
  json mj = m.canonical();
  mj["output"] = m.output;
  const std::string manifest_text = mj.dump(2) + "\n";
  if (!std::filesystem::exists(run.dir / "manifest.json") || read_file(run.dir / "manifest.json") != manifest_text)
    write_file_atomic(run.dir / "manifest.json", manifest_text);

  const std::vector<PlannedCell> planned = plan(m);
  std::vector<std::size_t> pending;
  for (std::size_t i = 0; i < planned.size(); ++i) {
    CellRecord c;
    c.key = planned[i].key;
    c.table = planned[i].table;
    c.file = cell_file(m, c.table, c.key);
    if (std::filesystem::exists(run.dir / c.file)) {
      c.status = "done";
    } else {
      pending.push_back(i);
    }
    run.cells.push_back(c);
  }

  std::atomic<std::size_t> next{0};
  std::mutex log_mutex;
  auto worker = [&] {
    for (std::size_t k; (k = next.fetch_add(1)) < pending.size();) {
      const std::size_t i = pending[k];
      CellRecord& c = run.cells[i];
      const auto c0 = std::chrono::steady_clock::now();
      const std::filesystem::path err = run.dir / (c.file.substr(0, c.file.size() - 4) + ".err");
      try {
        const Table t = planned[i].run();
        std::ostringstream os;
        write_table_csv(os, t);
        write_file_atomic(run.dir / c.file, os.str());
        std::filesystem::remove(err);
        c.status = "done";
        c.error.clear();
      } catch (const std::exception& e) {
        c.status = "failed";
        c.error = e.what();
        write_file_atomic(err, c.error + "\n");
      }
      c.computed = true;
      c.seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - c0).count();
      if (opt.progress) {
        std::lock_guard<std::mutex> lock(log_mutex);
        std::cerr << "[" << c.status << "] " << c.table << " " << c.key << " (" << c.seconds << " s)\n";
      }
    }
  };
  const int threads = std::max(1, std::min<int>(opt.threads, int(pending.size())));
  if (threads <= 1) {
    worker();
  } else {
    std::vector<std::thread> pool;
    for (int t = 0; t < threads; ++t) pool.emplace_back(worker);
    for (auto& t : pool) t.join();
  }

  for (const Table& t : collect_tables(run)) {
    std::ostringstream os;
    write_table_csv(os, t);
    const std::filesystem::path p = run.dir / "results" / (t.name + ".csv");
    if (!std::filesystem::exists(p) || read_file(p) != os.str()) write_file_atomic(p, os.str());
  }
  write_run_json(run);
  run.wall_clock = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  json timing = {{"wall_clock_seconds", run.wall_clock}, {"computed", run.computed()}, {"cells", json::array()}};
  for (const auto& c : run.cells) timing["cells"].push_back({{"key", c.key}, {"computed", c.computed}, {"seconds", c.seconds}});
  write_file_atomic(run.dir / "timing.json", timing.dump(2) + "\n");
  return run;
}

RunRecord load_run(const std::filesystem::path& dir) {
  const json j = json::parse(read_file(dir / "run.json"));
  RunRecord r;
  r.dir = dir;
  r.manifest_hash = j.at("manifest_hash").get<std::string>();
  r.code_version = j.at("code_version").get<std::string>();
  r.kind = parse_kind(j.at("kind").get<std::string>());
  r.tables = j.at("tables").get<std::vector<std::string>>();
  for (const auto& c : j.at("cells")) {
    CellRecord cr;
    cr.key = c.at("key").get<std::string>();
    cr.table = c.at("table").get<std::string>();
    cr.file = c.at("file").get<std::string>();
    cr.status = c.at("status").get<std::string>();
    cr.error = c.value("error", std::string());
    r.cells.push_back(cr);
  }
  return r;
}

std::vector<Table> collect_tables(const RunRecord& run) {
  std::vector<Table> out;
  for (const auto& name : run.tables) {
    Table t = empty_table(name);
    for (const auto& c : run.cells) {
      if (c.table != name || c.status != "done") continue;
      std::istringstream is(read_file(run.dir / c.file));
      t.append(read_table_csv(is, name));
    }
    out.push_back(std::move(t));
  }
  return out;
}

std::vector<CriterionResult> evaluate_run(const RunRecord& run, const std::vector<Table>& tables) {
  std::vector<CriterionResult> res;
  for (const auto& c : acceptance_criteria()) res.push_back(criterion_stub(c.id));
  auto table = [&](const std::string& name) -> const Table& {
    for (const auto& t : tables)
      if (t.name == name) return t;
    fail(Errc::InvalidArgument, "run has no table " + name);
  };
  auto put = [&](const CriterionResult& r) {
    for (auto& x : res)
      if (x.id == r.id) x = r;
  };
  switch (run.kind) {
    case ExperimentKind::chaos_identity:
      put(evaluate_chaos_identity(table("chaos_identity")));
      put(evaluate_backend_equivalence(table("chaos_identity")));
      break;
    case ExperimentKind::scaling: put(evaluate_one_point_scaling(table("one_point"))); break;
    case ExperimentKind::tanh_table: put(evaluate_tanh_table(table("tanh_table"))); break;
    case ExperimentKind::lindeberg: put(evaluate_lindeberg(table("lindeberg"))); break;
    case ExperimentKind::besov:
      put(evaluate_besov(table("besov")));
      if (!table("subdomain").rows.empty()) put(evaluate_subdomain(table("subdomain")));
      break;
    case ExperimentKind::singularity: {
      const Table& all = table("singularity");
      Table main = empty_table("singularity"), control = empty_table("singularity");
      for (std::size_t i = 0; i < all.rows.size(); ++i) (all.at(i, "lambda0") == 0 ? control : main).rows.push_back(all.rows[i]);
      if (!main.rows.empty()) {
        put(evaluate_singularity_trend(main, control));
        put(evaluate_certificate(main));
      }
      if (!table("conditional_gaussian").rows.empty()) put(evaluate_conditional_gaussian(table("conditional_gaussian")));
      break;
    }
    case ExperimentKind::moments: put(evaluate_moments(table("moments"))); break;
  }
  Index failed = 0;
  for (const auto& c : run.cells) failed += c.status == "failed";
  if (failed)
    for (auto& r : res)
      if (r.evaluated) r.info.push_back(std::to_string(failed) + " cells failed; see cells/*.err");
  return res;
}

std::vector<std::filesystem::path> emit_report(const RunRecord& run, ReportFormat format) {
  std::vector<std::filesystem::path> files;
  const std::filesystem::path dir = run.dir / "report";
  const std::vector<Table> tables = collect_tables(run);
  for (const Table& t : tables) {
    std::filesystem::path p = dir / (t.name + (format == ReportFormat::csv ? ".csv" : ".json"));
    if (format == ReportFormat::csv) {
      std::ostringstream os;
      write_table_csv(os, t);
      write_file_atomic(p, os.str());
    } else {
      write_file_atomic(p, table_json(t).dump(2) + "\n");
    }
    files.push_back(p);
  }
  json crit = json::array();
  for (const auto& r : evaluate_run(run, tables))
    crit.push_back({{"id", r.id},
                    {"title", r.title},
                    {"status", r.evaluated ? (r.pass ? "pass" : "fail") : "not_run"},
                    {"measured", r.measured},
                    {"info", r.info}});
  Index done = 0, failed = 0;
  for (const auto& c : run.cells) {
    done += c.status == "done";
    failed += c.status == "failed";
  }
  const json summary = {{"manifest_hash", run.manifest_hash}, {"code_version", run.code_version},
                        {"kind", kind_name(run.kind)},        {"cells_done", done},
                        {"cells_failed", failed},             {"criteria", crit}};
  write_file_atomic(dir / "summary.json", summary.dump(2) + "\n");
  files.push_back(dir / "summary.json");
  return files;
}

}  // namespace rfim
