#include <cmath>

#include "rfim/ising.hpp"

namespace rfim {

namespace {

template <class Scalar>
double max_abs(const std::vector<Scalar>& v) {
  double m = 0.0;
  for (const auto& x : v) m = std::max(m, std::abs(x));
  return m;
}

/// Σ_σ exp(β E(σ) + Σ ξσ), returned as (mantissa, log scale).
template <class Scalar>
std::pair<Scalar, double> strip_sum(const Lattice& lat, const ModelParams& p, const VectorS<Scalar>& xi,
                                    bool transpose) {
  const int rows = transpose ? lat.width() : lat.height();
  const int cols = transpose ? lat.height() : lat.width();
  auto site = [&](int r, int c) {
    return transpose ? lat.site_at(lat.lo[0] + r, lat.lo[1] + c) : lat.site_at(lat.lo[0] + c, lat.lo[1] + r);
  };
  const Eigen::VectorXi drive = boundary_drive(lat, p);
  const std::size_t states = std::size_t(1) << cols;
  std::vector<Scalar> v(states, Scalar(0)), next(states);
  v[0] = Scalar(1);
  double log_scale = 0.0;
  const double eb = std::exp(p.beta), emb = std::exp(-p.beta);
  for (int r = 0; r < rows; ++r) {
    for (int c = 0; c < cols; ++c) {
      const int s = site(r, c);
      const std::size_t bit = std::size_t(1) << c;
      const std::size_t left = c > 0 ? std::size_t(1) << (c - 1) : 0;
      // Factor for new spin value sp, given the spin above (su, or none in row 0)
      // and the spin to the left (read from the frontier).
      const Scalar fp = std::exp(p.beta * drive(s) + xi(s));
      const Scalar fm = std::exp(-p.beta * drive(s) - xi(s));
      for (std::size_t x = 0; x < states; ++x) {
        if (x & bit) continue;
        const Scalar v0 = v[x];        // spin above = +1
        const Scalar v1 = v[x | bit];  // spin above = -1
        Scalar up_p, up_m;             // contributions for new spin +1 / -1
        if (r == 0) {
          up_p = up_m = v0 + v1;
        } else {
          up_p = v0 * eb + v1 * emb;
          up_m = v0 * emb + v1 * eb;
        }
        double lp = 1.0, lm = 1.0;
        if (c > 0) {
          const bool left_minus = x & left;
          lp = left_minus ? emb : eb;
          lm = left_minus ? eb : emb;
        }
        next[x] = up_p * (lp * fp);
        next[x | bit] = up_m * (lm * fm);
      }
      v.swap(next);
    }
    const double m = max_abs(v);
    if (m > 0) {
      for (auto& y : v) y /= m;
      log_scale += std::log(m);
    }
  }
  Scalar total(0);
  for (const auto& y : v) total += y;
  return {total, log_scale};
}

}  // namespace

template <class Scalar>
Scalar transfer_matrix_partition(const Lattice& lat, const ModelParams& p, const VectorS<Scalar>& xi) {
  require(lat.is_full_rectangle(), Errc::InvalidArgument, "transfer matrix needs a full rectangle");
  require(xi.size() == lat.size(), Errc::InvalidArgument, "field length mismatch");
  const bool transpose = lat.height() < lat.width();
  const int w = transpose ? lat.height() : lat.width();
  require(w <= transfer_width_cap, Errc::TooWide, "strip width " + std::to_string(w) + " exceeds 20");
  const auto [num, ln] = strip_sum<Scalar>(lat, p, xi, transpose);
  const auto [den, ld] = strip_sum<Scalar>(lat, p, VectorS<Scalar>::Zero(lat.size()), transpose);
  return num / den * std::exp(ln - ld);
}

template double transfer_matrix_partition<double>(const Lattice&, const ModelParams&, const VectorS<double>&);
template cplx transfer_matrix_partition<cplx>(const Lattice&, const ModelParams&, const VectorS<cplx>&);

cplx transfer_matrix_partition(const Lattice& lat, const ModelParams& p) {
  const VectorXc xi = p.xi.size() ? p.xi : VectorXc::Zero(lat.size());
  return transfer_matrix_partition<cplx>(lat, p, xi);
}

}  // namespace rfim
