#pragma once

#include <span>

namespace recon {

struct MeanEstimate {
  double mean = 0.0;
  double se = 0.0;  // standard error of the mean
};

MeanEstimate estimate_mean(std::span<const double> samples);

/// (E|Z|^p)^{1/p} from samples, with a delta-method standard error.
struct NormEstimate {
  double value = 0.0;
  double se = 0.0;
};

NormEstimate estimate_lp_norm(std::span<const double> samples, double p);

/// Closed-form (E|g|^p)^{1/p} for a standard Gaussian g.
double gaussian_abs_moment_root(double p);

}  // namespace recon
