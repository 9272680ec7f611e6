#include <doctest.h>

#include <cmath>
#include <filesystem>
#include <map>
#include <set>
#include <sstream>
#include <string>

#include "rfim/harness.hpp"
#include "rfim/io.hpp"

using namespace rfim;
using nlohmann::json;
namespace fs = std::filesystem;

namespace {

fs::path scratch(const std::string& name) {
  const fs::path p = fs::temp_directory_path() / "rfim_test_harness" / name;
  fs::remove_all(p);
  return p;
}

std::string validation_message(const json& j) {
  try {
    parse_manifest(j);
  } catch (const Error& e) {
    CHECK(e.code() == Errc::ValidationError);
    return e.what();
  }
  FAIL("manifest validated");
  return {};
}

json chaos_manifest(int seed = 1) {
  return {{"kind", "chaos-identity"},
          {"domain", {{"shape", "unit_square"}}},
          {"meshes", {0.1}},
          {"options", {{"max_width", 2}, {"max_height", 3}, {"fields", 3}}},
          {"seed", seed}};
}

// Every regular file below dir, keyed by relative path, except timing.json.
std::map<std::string, std::string> snapshot(const fs::path& dir) {
  std::map<std::string, std::string> out;
  for (const auto& e : fs::recursive_directory_iterator(dir))
    if (e.is_regular_file() && e.path().filename() != "timing.json")
      out[fs::relative(e.path(), dir).string()] = read_file(e.path());
  return out;
}

}  // namespace

TEST_CASE("manifest validation reports every offending field") {
  json j = chaos_manifest();
  j["meshes"] = json::array();
  CHECK(validation_message(j).find("meshes") != std::string::npos);

  json k = {{"kind", "scaling"}, {"meshes", {0.25}}, {"replicas", 0}, {"lambda", {{"preset", "wavy"}}}, {"colour", 1}};
  const std::string msg = validation_message(k);
  CHECK(msg.find("replicas") != std::string::npos);
  CHECK(msg.find("lambda") != std::string::npos);
  CHECK(msg.find("colour: unknown field") != std::string::npos);

  CHECK(validation_message({{"kind", "annealing"}, {"meshes", {0.25}}}).find("kind") != std::string::npos);
  CHECK(validation_message({{"kind", "singularity"}, {"meshes", {0.25}}, {"replicas", 10}, {"N", {3}}, {"m", {2}}})
            .find("power of two") != std::string::npos);
  CHECK(validation_message({{"kind", "moments"}, {"meshes", {0.75}}, {"replicas", 10}}).find("mesh") !=
        std::string::npos);
}

TEST_CASE("manifest presets and canonical hash") {
  const ExperimentManifest m = parse_manifest(
      {{"kind", "moments"},
       {"meshes", {0.5}},
       {"replicas", 10},
       {"lambda", {{"preset", "bump"}, {"center", {0.5, 0.5}}, {"width", 0.25}, {"amplitude", 2.0}}},
       {"h", {{"preset", "linear"}, {"c0", 1.0}, {"gradient", {0.5, 0.0}}}},
       {"output", "x"}});
  CHECK(m.lambda.build()(Point(0.5, 0.5)) == doctest::Approx(2.0));
  CHECK(m.h.build()(Point(1.0, 0.3)) == doctest::Approx(1.5));
  CHECK(m.lambda.grid_min() == doctest::Approx(2.0 * std::exp(-8.0)).epsilon(1e-6));

  json j = m.canonical();
  j["output"] = "elsewhere";
  CHECK(parse_manifest(j).hash() == m.hash());
  j["seed"] = 2;
  CHECK(parse_manifest(j).hash() != m.hash());
  CHECK(parse_manifest(m.canonical()).canonical() == m.canonical());
}

TEST_CASE("rerun of a completed manifest is byte-identical with zero recomputation") {
  const fs::path root = scratch("rerun");
  RunOptions opt;
  opt.out_root = root;
  const ExperimentManifest m = parse_manifest(chaos_manifest());
  const RunRecord first = run_experiment(m, opt);
  CHECK(first.cells.size() == 6);
  CHECK(first.computed() == 6);
  for (const auto& c : first.cells) CHECK(c.status == "done");
  const auto bytes = snapshot(first.dir);

  const RunRecord second = run_experiment(m, opt);
  CHECK(second.computed() == 0);
  CHECK(snapshot(second.dir) == bytes);

  // resume after losing a cell and the merged table
  fs::remove(first.dir / first.cells[3].file);
  fs::remove(first.dir / "results" / "chaos_identity.csv");
  const RunRecord resumed = run_experiment(m, opt);
  CHECK(resumed.computed() == 1);
  CHECK(snapshot(resumed.dir) == bytes);

  // worker count does not change the bytes
  RunOptions threaded = opt;
  threaded.out_root = root / "threaded";
  threaded.threads = 3;
  const RunRecord par = run_experiment(m, threaded);
  CHECK(snapshot(par.dir) == bytes);

  const RunRecord loaded = load_run(first.dir);
  CHECK(loaded.manifest_hash == m.hash());
  CHECK(loaded.cells.size() == 6);
  const auto tables = collect_tables(loaded);
  REQUIRE(tables.size() == 1);
  CHECK(tables[0].rows.size() == 6);
  const auto crit = evaluate_run(loaded, tables);
  CHECK(crit[0].evaluated);
  CHECK(crit[0].pass);
  CHECK(crit[1].pass);
}

TEST_CASE("per-cell failures are recorded and the run continues") {
  RunOptions opt;
  opt.out_root = scratch("failure");
  // 5 x 5 sites exceeds the exact kernel
  const ExperimentManifest m = parse_manifest({{"kind", "moments"}, {"meshes", {0.5, 1.0 / 6}}, {"replicas", 2000}});
  const RunRecord r = run_experiment(m, opt);
  REQUIRE(r.cells.size() == 2);
  CHECK(r.cells[0].status == "done");
  CHECK(r.cells[1].status == "failed");
  CHECK(r.cells[1].error.find("TooLarge") != std::string::npos);
  const auto tables = collect_tables(r);
  CHECK(tables[0].rows.size() == 1);
  const json run = json::parse(read_file(r.dir / "run.json"));
  CHECK(run["cells"][1]["status"] == "failed");
  const auto crit = evaluate_run(r, tables);
  CHECK(crit[9].evaluated);
  CHECK(crit[9].info.back().find("1 cells failed") != std::string::npos);
}

TEST_CASE("empty run reports header-only tables and every criterion once") {
  RunRecord r;
  r.dir = scratch("empty");
  r.kind = ExperimentKind::besov;
  r.tables = {"besov", "subdomain"};
  for (ReportFormat f : {ReportFormat::csv, ReportFormat::json}) {
    const auto files = emit_report(r, f);
    REQUIRE(files.size() == 3);
    if (f == ReportFormat::csv) {
      CHECK(read_file(files[0]) == "mesh,alpha,mean_norm,se,samples,n_max\n");
    } else {
      const json t = json::parse(read_file(files[0]));
      CHECK(t["rows"].empty());
      CHECK(t["columns"].size() == 6);
    }
    const json s = json::parse(read_file(r.dir / "report" / "summary.json"));
    std::multiset<std::string> ids;
    for (const auto& c : s["criteria"]) ids.insert(c["id"].get<std::string>());
    CHECK(ids.size() == 11);
    for (int i = 1; i <= 11; ++i) CHECK(ids.count("C" + std::to_string(i)) == 1);
  }
}

TEST_CASE("small singularity preset runs end to end") {
  RunOptions opt;
  opt.out_root = scratch("singularity");
  const ExperimentManifest m = load_manifest(fs::path(RFIM_SOURCE_DIR) / "manifests" / "smoke_singularity.json");
  const RunRecord r = run_experiment(m, opt);
  CHECK(r.cells.size() == 3);
  for (const auto& c : r.cells) CHECK(c.status == "done");
  emit_report(r, ReportFormat::csv);
  std::istringstream is(read_file(r.dir / "report" / "singularity.csv"));
  const Table t = read_table_csv(is, "singularity");
  REQUIRE(t.rows.size() == 4);
  // main rows first: N = 1 then N = 2 at m = 2
  CHECK(t.at(0, "lambda0") == 1.0);
  CHECK(t.at(0, "N") == 1);
  CHECK(t.at(1, "N") == 2);
  CHECK(t.at(1, "bc") < t.at(0, "bc"));
  CHECK(t.at(2, "lambda0") == 0.0);
  const json s = json::parse(read_file(r.dir / "report" / "summary.json"));
  std::set<std::string> evaluated;
  for (const auto& c : s["criteria"])
    if (c["status"] != "not_run") evaluated.insert(c["id"].get<std::string>());
  CHECK(evaluated == std::set<std::string>{"C8", "C9", "C11"});
}
