#pragma once

#include <cmath>
#include <vector>

#include "rfim/common.hpp"
#include "rfim/rng.hpp"

namespace rfim::test {

struct MeanSe {
  double mean = 0.0;
  double se = 0.0;
};

inline MeanSe mean_se(const std::vector<double>& v) {
  double m = 0.0;
  for (double x : v) m += x;
  m /= double(v.size());
  double s2 = 0.0;
  for (double x : v) s2 += (x - m) * (x - m);
  s2 /= double(v.size() - 1);
  return {m, std::sqrt(s2 / double(v.size()))};
}

inline VectorXc random_complex_field(Index n, std::uint64_t seed, double scale) {
  CounterRng r(seed, Purpose::Test);
  VectorXc z(n);
  for (Index i = 0; i < n; ++i) z(i) = cplx(scale * r.normal(), scale * r.normal());
  return z;
}

inline VectorX random_real_field(Index n, std::uint64_t seed, double scale) {
  CounterRng r(seed, Purpose::Test);
  VectorX z(n);
  for (Index i = 0; i < n; ++i) z(i) = scale * r.normal();
  return z;
}

inline double rel_err(cplx a, cplx b) { return std::abs(a - b) / std::abs(b); }

}  // namespace rfim::test
