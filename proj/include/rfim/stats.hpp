#pragma once

#include <vector>

#include "rfim/common.hpp"

namespace rfim {

struct MeanSe {
  double mean = 0.0;
  double se = 0.0;
  double sd = 0.0;
  Index n = 0;
};

MeanSe mean_se(const std::vector<double>& x);

/// Welford accumulator.
class RunningStats {
 public:
  void add(double x);
  Index count() const { return n_; }
  double mean() const { return mean_; }
  double variance() const { return n_ > 1 ? m2_ / static_cast<double>(n_ - 1) : 0.0; }
  double se() const { return n_ > 1 ? std::sqrt(variance() / static_cast<double>(n_)) : 0.0; }

 private:
  Index n_ = 0;
  double mean_ = 0.0;
  double m2_ = 0.0;
};

struct LineFit {
  double slope = 0.0;
  double intercept = 0.0;
  double slope_se = 0.0;
  double r2 = 0.0;
};

/// Least-squares y = intercept + slope x.
LineFit fit_line(const std::vector<double>& x, const std::vector<double>& y);
/// Fit of log|y| against log x.
LineFit fit_power_law(const std::vector<double>& x, const std::vector<double>& y);

double normal_cdf(double z);
double normal_quantile(double p);

}  // namespace rfim
