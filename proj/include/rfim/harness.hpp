#pragma once

#include <cstdint>
#include <filesystem>
#include <json.hpp>
#include <optional>
#include <string>
#include <vector>

#include "rfim/disorder.hpp"
#include "rfim/experiments.hpp"
#include "rfim/lattice.hpp"

namespace rfim {

enum class ExperimentKind { scaling, chaos_identity, lindeberg, besov, singularity, moments, tanh_table };

const char* kind_name(ExperimentKind k);
ExperimentKind parse_kind(const std::string& s);

/// Named profile: constant {value}, bump {center, width, amplitude},
/// linear {c0, gradient}. Presets are versioned with the manifest.
struct ProfileSpec {
  std::string preset = "constant";
  double value = 0.0;
  Point center = Point(0.5, 0.5);
  double width = 0.25;
  double amplitude = 1.0;
  double c0 = 0.0;
  Point gradient = Point(0, 0);

  Profile build() const;
  /// Infimum over a 65 x 65 grid of the unit square.
  double grid_min() const;
  nlohmann::json to_json() const;
};

struct DomainConfig {
  std::string shape = "unit_square";  ///< or "strip"
  int width = 0, height = 0;           ///< strip only
  DomainSpec at(double a) const;
};

/// Resolved manifest; `canonical()` is the hashed form.
struct ExperimentManifest {
  int version = 1;
  ExperimentKind kind = ExperimentKind::scaling;
  DomainConfig domain;
  ProfileSpec lambda{"constant", 1.0};
  ProfileSpec h{"constant", 0.0};
  std::optional<ProfileSpec> phi;
  std::vector<double> meshes;
  std::vector<int> Ns;
  std::vector<int> ms;
  std::vector<int> ls;
  Index replicas = 0;
  nlohmann::json options = nlohmann::json::object();
  std::uint64_t seed = 1;
  std::string output;

  nlohmann::json canonical() const;  ///< everything except `output`
  std::string hash() const;
};

/// Throws ValidationError listing every offending field.
ExperimentManifest parse_manifest(const nlohmann::json& j);
ExperimentManifest load_manifest(const std::filesystem::path& path);

/// Content address of the compiled sources.
const char* code_version();

struct CellRecord {
  std::string key;    ///< grid coordinates, e.g. "mesh=0.015625"
  std::string table;  ///< table name
  std::string file;   ///< relative to the run directory
  std::string status = "pending";  ///< done, failed
  std::string error;
  bool computed = false;  ///< false when reused from disk
  double seconds = 0.0;
};

struct RunRecord {
  std::filesystem::path dir;
  std::string manifest_hash;
  std::string code_version;
  ExperimentKind kind = ExperimentKind::scaling;
  std::vector<CellRecord> cells;
  std::vector<std::string> tables;  ///< names emitted by this kind
  double wall_clock = 0.0;
  Index computed() const;
};

struct RunOptions {
  std::filesystem::path out_root;  ///< empty: RFIM_OUT or ./runs
  int threads = 1;
  bool progress = false;
};

std::filesystem::path default_out_root();
std::filesystem::path run_directory(const ExperimentManifest& m, const RunOptions& opt);

/// Executes every pending cell, skipping cells already on disk, then merges
/// results/<table>.csv in grid order and writes run.json.
RunRecord run_experiment(const ExperimentManifest& m, const RunOptions& opt = {});
RunRecord load_run(const std::filesystem::path& dir);

/// Tables of a run merged over completed cells (header only when none).
std::vector<Table> collect_tables(const RunRecord& run);
/// One result per acceptance criterion id; criteria the kind does not cover are not evaluated.
std::vector<CriterionResult> evaluate_run(const RunRecord& run, const std::vector<Table>& tables);

enum class ReportFormat { csv, json };

/// Writes report/<table>.{csv,json} and report/summary.json; returns the paths.
std::vector<std::filesystem::path> emit_report(const RunRecord& run, ReportFormat format);

}  // namespace rfim
