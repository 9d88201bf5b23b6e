#pragma once

#include <span>
#include <string>

namespace recon {

/// Straight-line fit y = intercept + slope * x.
struct RateFit {
  double slope = 0.0;
  double intercept = 0.0;
  double stderr_slope = 0.0;  // from least-squares residuals
  double r2 = 0.0;
  int points = 0;
  std::string method;
};

RateFit fit_least_squares(std::span<const double> x, std::span<const double> y);

/// Theil-Sen: median of pairwise slopes, intercept as median residual.
/// The standard error is the least-squares one.
RateFit fit_theil_sen(std::span<const double> x, std::span<const double> y);

/// y = c + a*u + b*v, robustly: coordinate-wise medians of the planes through
/// all non-degenerate triples of points. Standard errors from least squares.
struct TwoWayFit {
  double a = 0.0, b = 0.0, c = 0.0;
  double se_a = 0.0, se_b = 0.0;
  double r2 = 0.0;
  int points = 0;
};

TwoWayFit fit_two_way(std::span<const double> u, std::span<const double> v, std::span<const double> y);

}  // namespace recon
