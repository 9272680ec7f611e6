#pragma once

#include <map>
#include <string>
#include <vector>

#include "rfim/common.hpp"
#include "rfim/disorder.hpp"
#include "rfim/lattice.hpp"

namespace rfim {

template <class Scalar>
using VectorS = Eigen::Matrix<Scalar, Eigen::Dynamic, 1>;

struct ModelParams {
  double beta = beta_c;
  Eigen::VectorXi boundary;  ///< ±1 per boundary site; empty means all +1
  VectorXc xi;               ///< site fields ξ; empty means zero

  static ModelParams plus(const Lattice& lat, double beta = beta_c);
  static ModelParams minus(const Lattice& lat, double beta = beta_c);

  int boundary_value(Index b) const { return boundary.size() ? boundary(b) : 1; }
  bool uniform_boundary(int* value = nullptr) const;
  bool has_field() const { return xi.size() && xi.cwiseAbs().maxCoeff() != 0.0; }
  bool real_field() const { return !xi.size() || xi.imag().cwiseAbs().maxCoeff() == 0.0; }
  VectorX real_xi(Index n) const { return xi.size() ? VectorX(xi.real()) : VectorX::Zero(n); }
};

/// Sum of boundary spin values adjacent to each interior site.
Eigen::VectorXi boundary_drive(const Lattice& lat, const ModelParams& p);

inline constexpr Index enumeration_cap = 26;
inline constexpr int transfer_width_cap = 20;

/// E[exp(Σ ξ σ)] under the field-free Gibbs measure, by full enumeration.
template <class Scalar>
Scalar exact_partition(const Lattice& lat, const ModelParams& p, const VectorS<Scalar>& xi);
cplx exact_partition(const Lattice& lat, const ModelParams& p);

/// Same ratio by a site-by-site transfer matrix on a full rectangle; the
/// narrower side is used as the state width.
template <class Scalar>
Scalar transfer_matrix_partition(const Lattice& lat, const ModelParams& p, const VectorS<Scalar>& xi);
cplx transfer_matrix_partition(const Lattice& lat, const ModelParams& p);

/// Probability of every configuration (bit x set means σ_x = -1) under the
/// field-free measure. Requires at most 22 sites.
VectorX configuration_probabilities(const Lattice& lat, const ModelParams& p);

/// In-place Walsh-Hadamard transform: out[I] = Σ_b in[b] (-1)^{|I ∧ b|}.
void walsh_hadamard(VectorX& v);

/// E[σ^I] for |I| ≤ k_max.
class CorrelationTable {
 public:
  using Subset = std::vector<int>;

  CorrelationTable() = default;
  CorrelationTable(Index n_sites, int k_max, double mesh, std::string boundary_tag);

  Index sites() const { return n_; }
  int k_max() const { return k_max_; }
  double mesh() const { return mesh_; }
  const std::string& boundary_tag() const { return tag_; }

  bool has(const Subset& I) const;
  /// Throws MissingCorrelation when the subset is not stored.
  double at(const Subset& I) const;
  void set(Subset I, double v);

  /// Dense table indexed by bitmask, available when all subsets are stored.
  bool dense() const { return dense_.size() > 0; }
  const VectorX& dense_values() const { return dense_; }
  void set_dense(VectorX v);

  /// All stored (subset, value) pairs in canonical order.
  std::vector<std::pair<Subset, double>> entries() const;

 private:
  Index n_ = 0;
  int k_max_ = 0;
  double mesh_ = 0.0;
  std::string tag_;
  VectorX dense_;
  std::map<Subset, double> sparse_;
};

/// Exact correlations of the field-free measure.
CorrelationTable exact_correlations(const Lattice& lat, const ModelParams& p, int k_max);

void write_correlations_csv(std::ostream& os, const CorrelationTable& t);
CorrelationTable read_correlations_csv(std::istream& is, Index n_sites, int k_max, double mesh);

/// θ_a Z with the field of `f` (complex when f carries φ̃).
cplx rescaled_partition(const Lattice& lat, const ModelParams& p, const ExternalField& f);

/// Z̃_{λ,h+iφ̃} / Z̃_{λ,h}.
cplx characteristic_function(const Lattice& lat, const ModelParams& p, const ExternalField& f);

}  // namespace rfim
