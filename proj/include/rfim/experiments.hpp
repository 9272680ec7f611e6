#pragma once

#include <cstdint>
#include <iosfwd>
#include <map>
#include <string>
#include <vector>

#include "rfim/disorder.hpp"
#include "rfim/lattice.hpp"
#include "rfim/singularity.hpp"

namespace rfim {

/// Numeric table with named columns; NaN marks a value that does not apply.
struct Table {
  std::string name;
  std::vector<std::string> columns;
  std::vector<std::vector<double>> rows;

  Index column(const std::string& c) const;
  double at(std::size_t row, const std::string& c) const { return rows[row][column(c)]; }
  void append(const Table& other);
};

/// Column lists of every table an experiment cell emits, by table name.
const std::map<std::string, std::vector<std::string>>& table_schemas();
/// Header-only table.
Table empty_table(const std::string& name);

/// Round-trips exactly (17 significant digits).
void write_table_csv(std::ostream& os, const Table& t);
Table read_table_csv(std::istream& is, const std::string& name = {});

struct CriterionResult {
  std::string id;
  std::string title;
  bool evaluated = false;
  bool pass = false;
  std::string measured;
  std::vector<std::string> info;
};

struct CriterionInfo {
  std::string id;
  std::string title;
};

/// C1 .. C11 in order.
const std::vector<CriterionInfo>& acceptance_criteria();
CriterionResult criterion_stub(const std::string& id);

// chaos-partition identity and backend equivalence on a W x H strip
Table chaos_identity_cell(int width, int height, int fields, std::uint64_t seed);
CriterionResult evaluate_chaos_identity(const Table& t);
CriterionResult evaluate_backend_equivalence(const Table& t);

// centre spin under + boundary, Wolff with the improved estimator
Table one_point_cell(double a, Index samples, std::uint64_t seed);
CriterionResult evaluate_one_point_scaling(const Table& t);

Table tanh_table_cell(double a, double lambda, double h, Index samples, std::uint64_t seed,
                      const DisorderLaw& law = {});
CriterionResult evaluate_tanh_table(const Table& t);

/// Degree-3 chaos of the 3x3 lattice at a0 = 1/4 with λ^a = a^{7/8} λ0 for
/// the proxy mesh a; Rademacher against Gaussian drivers with g = cos.
Table lindeberg_cell(double lambda0, double a, Index replicas, std::uint64_t seed);
/// Proxy mesh at which the maximal influence is 1/drop of its value at a0.
double lindeberg_proxy_mesh(double lambda0, double drop);
CriterionResult evaluate_lindeberg(const Table& t);

/// Mean C^α norm of pure Φ^a (piecewise constant) at α = -0.2 and -0.05.
Table besov_cell(double a, Index samples, std::uint64_t seed);
CriterionResult evaluate_besov(const Table& t);

/// Smooth separable bumps on boxes and random cell fields on boxes or Koch islands.
Table subdomain_cell(int smooth_pairs, int rough_pairs, std::uint64_t seed);
CriterionResult evaluate_subdomain(const Table& t);

Table singularity_table(double lambda0, const std::vector<SingularityCell>& cells);
Table singularity_cell(double a, const SingularityOptions& opt, const std::vector<int>& Ns,
                       const std::vector<int>& ms, const BootstrapOptions& boot = {});
CriterionResult evaluate_singularity_trend(const Table& main, const Table& control);
CriterionResult evaluate_certificate(const Table& main);

/// Paley-Zygmund, second moment against the kernel bound and the Gaussian tail
/// fit at one mesh.
Table moments_cell(double a, double lambda0, Index replicas, std::uint64_t seed);
CriterionResult evaluate_moments(const Table& t);

/// Single-block rn factors against the conditional MC oracle plus the
/// lognormal mean over W.
Table conditional_gaussian_cell(Index draws, std::uint64_t seed);
CriterionResult evaluate_conditional_gaussian(const Table& t);

std::string format_criterion(const CriterionResult& r);

}  // namespace rfim
