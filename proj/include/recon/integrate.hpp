#pragma once

#include <cstdint>
#include <functional>
#include <vector>

#include "recon/fit.hpp"
#include "recon/germ.hpp"
#include "recon/noise.hpp"
#include "recon/stats.hpp"
#include "recon/wavelet.hpp"

namespace recon {

/// A two-parameter germ on [0,T]^2 with A(s,s) = 0.
struct SewingInput {
  TwoParameter A;
  double T = 1.0;
};

/// Extension to the whole line: A(t,s) = -A(s,t); for s <= t the arguments
/// are clamped to [0,T], so A(s,t) = A(0,t) for s <= 0, A(0,T) when s <= 0 and
/// t >= T, and 0 once s >= T or t <= 0.
SewingInput extend_domain(TwoParameter A, double T);

/// I_n on the dyadic partition t_i = i T 2^{-n}: node values and, between
/// nodes, I(t) = I(t_k) + A(t_k, t).
struct SewingOutput {
  int level = 0;
  double T = 1.0;
  std::vector<double> nodes;
  TwoParameter A;

  double at(double t) const;
};

SewingOutput sew(const SewingInput& input, int level);

struct SewingRate {
  std::vector<int> levels;
  std::vector<NormEstimate> errors;  // ||I_n(T) - exact||_{L_2}
  RateFit fit;                       // log2 error vs n
};

/// L_2 error of I_n(T) against an exact value, per level.
SewingRate sewing_error_rate(const TwoParameterFactory& A, const std::function<double(const PathSample&)>& exact,
                             double T, const std::vector<int>& levels, const PathSampler& sampler, std::size_t paths,
                             int workers = 1);

struct SewingEquivalenceOptions {
  int n_min = 4;
  int n_max = 10;        // reconstruction level
  int sew_level = 12;    // dyadic level of the sewn process
  double T = 1.0;
  std::size_t paths = 500;
  int workers = 1;
};

struct SewingEquivalence {
  NormEstimate difference;       // ||f(psi) + int I psi'||_{L_2}
  MeanEstimate mean_difference;
  double quadrature_tolerance = 0.0;  // ||centered-difference form - sum psi_c dI_c||_{L_2}
  double tail_bound = 0.0;            // reconstruction tail from the Cauchy increments
  double threshold = 0.0;             // 3 SE + tail + quadrature
  bool pass = false;
  std::vector<NormEstimate> increments;
};

/// Reconstruction of F_s(psi) = -int A(s,t) psi'(t) dt against the sewn
/// process tested with -psi'.
SewingEquivalence sewing_equivalence_check(const TwoParameterFactory& A, const WaveletBasis& basis,
                                           const GridFunction& psi, const SewingEquivalenceOptions& options,
                                           const PathSampler& sampler);

/// sum_c X(lower corner of c) psi(c) W(c), the elementary-process integral.
double walsh_integral(const RandomField& X, const NoiseField& W, const GridFunction& psi);

/// int ||X(s,.) psi(s,.)||_K^2 ds by quadrature (axis 0 is time), the
/// variance of the Walsh integral for deterministic X.
double walsh_variance(const RandomField& X, const CovarianceMeasure& K, const GridFunction& psi);

struct HomogeneityReport {
  std::vector<double> lambdas;
  std::vector<double> values;  // int ||phi_{t,y}^lambda(s,.)||_K^2 ds
  RateFit fit;                 // log2 value vs log2 lambda
  double expected_slope = 0.0; // 2 alpha, alpha = -d - 1/2 + delta/2
};

/// phi is sampled on a time-space grid with 2^J cells per unit and localized
/// at `center` with the canonical scaling.
HomogeneityReport homogeneity_check(const CovarianceMeasure& K, std::size_t space_dim, const Profile& phi,
                                    const Box& phi_support, const Point& center, const std::vector<double>& lambdas,
                                    int J);

}  // namespace recon
