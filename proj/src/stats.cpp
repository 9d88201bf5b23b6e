#include "recon/stats.hpp"

#include <cmath>
#include <numbers>
#include <vector>

#include "recon/error.hpp"

namespace recon {

MeanEstimate estimate_mean(std::span<const double> samples) {
  require(!samples.empty(), ErrorKind::argument, "mean of an empty sample");
  const double n = static_cast<double>(samples.size());
  double sum = 0.0;
  for (double v : samples) sum += v;
  const double mean = sum / n;
  if (samples.size() < 2) return {mean, 0.0};
  double ss = 0.0;
  for (double v : samples) ss += (v - mean) * (v - mean);
  return {mean, std::sqrt(ss / (n - 1.0) / n)};
}

NormEstimate estimate_lp_norm(std::span<const double> samples, double p) {
  require(p >= 1.0, ErrorKind::argument, "Lp norm needs p >= 1");
  std::vector<double> powers(samples.size());
  for (std::size_t i = 0; i < samples.size(); ++i) powers[i] = std::pow(std::abs(samples[i]), p);
  const auto m = estimate_mean(powers);
  const double value = std::pow(m.mean, 1.0 / p);
  const double se = value > 0.0 ? m.se / (p * std::pow(value, p - 1.0)) : 0.0;
  return {value, se};
}

double gaussian_abs_moment_root(double p) {
  const double m = std::pow(2.0, p / 2.0) * std::tgamma((p + 1.0) / 2.0) / std::sqrt(std::numbers::pi);
  return std::pow(m, 1.0 / p);
}

}  // namespace recon
