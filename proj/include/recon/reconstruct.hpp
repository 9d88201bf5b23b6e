#pragma once

#include <cstdint>
#include <functional>
#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

#include "recon/fit.hpp"
#include "recon/germ.hpp"
#include "recon/stats.hpp"
#include "recon/wavelet.hpp"

namespace recon {

enum class Variant { one_sided, two_sided, covariance };
std::string to_string(Variant v);
Variant parse_variant(const std::string& name);

struct ReconstructionOptions {
  ScalingVector scaling;
  int n_min = 0, n_max = 0;
  Variant variant = Variant::one_sided;
  std::size_t paths = 1;
  double p = 2.0;
  int workers = 1;
  /// Base points the test functions are localized at; the one-sided
  /// precondition is checked relative to them (default: the origin).
  std::vector<Point> anchors;
};

/// The reconstructing sequence f^(n)(psi) = sum_y F_y(phi_y^n) <phi_y^n, psi>
/// for fixed test functions, evaluated path by path.
class Reconstructor {
 public:
  Reconstructor(const Germ& germ, const WaveletBasis& basis, std::vector<GridFunction> psis,
                const ReconstructionOptions& options);

  std::size_t levels() const { return levels_.size(); }
  int level(std::size_t i) const { return levels_[i]; }
  std::size_t tests() const { return psis_.size(); }
  const GridFunction& psi(std::size_t j) const { return psis_[j]; }

  /// f^(n)(psi_j) on one path, n = level(i).
  double value(std::size_t i, std::size_t j, const PathSample& path) const;
  /// All levels for all test functions: out[i * tests + j].
  std::vector<double> values(const PathSample& path) const;

 private:
  const Germ& germ_;
  const WaveletBasis& basis_;
  std::vector<GridFunction> psis_;
  std::vector<int> levels_;
  std::vector<CoefficientArray> coefficients_;  // [i * tests + j], <phi_y^n, psi_j>
};

struct ReconstructionRun {
  Variant variant = Variant::one_sided;
  std::vector<int> levels;
  std::size_t tests = 0, paths = 0;
  double p = 2.0;
  std::uint64_t seed = 0;
  std::vector<double> values;             // [(i * tests + j) * paths + path]
  std::vector<NormEstimate> increments;   // [i * tests + j]: ||f^(n_{i+1}) - f^(n_i)||_{L_p}
  std::vector<double> tail_bound;         // per test function
  std::vector<RateFit> cauchy_fit;        // per test, log2 increment vs n (needs 3+ increments)

  double value(std::size_t i, std::size_t j, std::size_t path) const {
    return values[(i * tests + j) * paths + path];
  }
  /// Limit estimate: the values at n_max.
  std::vector<double> limit(std::size_t j) const;

  void write_csv(std::ostream& out) const;  // level, test, mean, l_p norm, increment
  std::string diagnostics_json() const;
};

/// Geometric tail sum extrapolated from the last three increments; +inf when
/// they do not decrease.
double geometric_tail(std::span<const double> increments);

ReconstructionRun reconstruct(const Germ& germ, const WaveletBasis& basis, const std::vector<GridFunction>& psis,
                              const ReconstructionOptions& options, const PathSampler* sampler);

/// Cuts at S_i(x) = pi_i(x) - lambda^{s_i} (Rtilde + Ctilde) on the stochastic axes.
std::vector<FiltrationCut> two_sided_offsets(const Point& x, double lambda, double Rtilde, double Ctilde,
                                             const ScalingVector& scaling, std::size_t e);

struct ErrorRateOptions {
  ScalingVector scaling;
  std::vector<double> lambdas;
  std::vector<Point> points;  // base points x
  int n_max = 10;
  Variant variant = Variant::one_sided;
  bool conditional = false;
  double Rtilde = 1.0, Ctilde = 1.0;  // two-sided offsets
  std::size_t paths = 1;
  std::size_t inner_paths = 64;
  double p = 2.0;
  int workers = 1;
};

struct ErrorRateReport {
  std::vector<double> lambdas;
  std::vector<NormEstimate> norms;            // ||(f - F_x)(psi_x^lambda)||_{L_p}, pooled over x
  std::vector<MeanEstimate> conditional;      // E^{F_cut}(f - F_x)(psi_x^lambda), pooled over x
  std::vector<NormEstimate> conditional_norms;
  RateFit fit;              // log2 norm vs log2 lambda
  RateFit conditional_fit;  // when the conditional norms are non-zero
  bool degenerate = false;             // residuals below 1e-12
  bool conditional_vanishes = false;   // conditional residuals below 1e-12
  bool conditional_within_3se = false;
  double expected_slope = 0.0;  // gamma - E/2 for the caller's gamma, filled by the caller
};

/// Residuals of the reconstruction limit (level n_max) against the germ.
ErrorRateReport fit_error_rate(const Germ& germ, const WaveletBasis& basis, const GridFunction& psi,
                               const ErrorRateOptions& options, const PathSampler* sampler);

struct CovarianceCheckOptions {
  ScalingVector scaling;
  std::vector<double> lambdas;
  Point x;                     // first base point; the second sits where the first residual support ends
  double lambda_ratio = 1.0;   // lambda_2 = ratio * lambda_1
  double Rtilde = 1.0;
  int n_max = 10;
  std::size_t axis = 0;  // stochastic axis separating the pair
  std::size_t paths = 1;
  int workers = 1;
};

struct CovarianceCheckReport {
  std::vector<double> lambdas;
  std::vector<MeanEstimate> moments;  // E[(f-F_x1)(psi1) (f-F_x2)(psi2)]
  std::vector<double> magnitude;      // |mean| + 3 SE
  RateFit magnitude_fit;              // log2 magnitude vs log2 lambda
  bool within_3se = false;
};

/// Mixed second moments of residuals at point pairs with disjoint residual
/// effective supports.
CovarianceCheckReport covariance_uniqueness_check(const Germ& germ, const WaveletBasis& basis,
                                                  const GridFunction& psi1, const GridFunction& psi2,
                                                  const CovarianceCheckOptions& options, const PathSampler* sampler);

/// One explicit pair (x1, lambda1), (x2, lambda2); precondition error when the
/// residual supports overlap.
MeanEstimate covariance_moment(const Germ& germ, const WaveletBasis& basis, const GridFunction& psi1,
                               const Point& x1, double lambda1, const GridFunction& psi2, const Point& x2,
                               double lambda2, const CovarianceCheckOptions& options, const PathSampler* sampler);

// ---------------------------------------------------------------------------
// BDG-type inequality.

/// Z_1..Z_N with Z_i F_{i+1}-measurable, drawn together with E^{F_i} Z_i.
struct AdaptedFamily {
  std::string name;
  std::function<void(std::size_t N, Rng& rng, std::span<double> Z, std::span<double> conditional)> draw;
};

AdaptedFamily constant_family();      // Z_i = 1 + i mod 3 (deterministic)
AdaptedFamily gaussian_family();      // iid N(0,1), independent of F_i
AdaptedFamily martingale_family();    // Z_i = B_{t_i} (B_{t_{i+1}} - B_{t_i}), t_i = i/N

struct BdgRow {
  std::size_t N = 0;
  double lhs = 0.0, rhs = 0.0, ratio = 0.0;
  double lhs_se = 0.0;
};

struct BdgReport {
  std::string family;
  double p = 2.0;
  std::vector<BdgRow> rows;
  RateFit trend;  // log2 ratio vs log2 N
};

BdgReport bdg_verify(const AdaptedFamily& family, double p, const std::vector<std::size_t>& Ns, std::size_t paths,
                     std::uint64_t seed, int workers = 1);

// ---------------------------------------------------------------------------
// Pathwise Hoelder constant from wavelet coefficients.

/// A distribution given by weights on lattice cells, f(g) = sum_c g_c w_c.
struct CellMeasure {
  CellWindow window;
  std::vector<double> weights;
};

struct KolmogorovOptions {
  ScalingVector scaling;
  Box box;  // the fattened compact set
  double alpha = -0.55;
  double p = 2.0;
  int n_max = 6;
  double kappa = 0.05;  // B = sup_n 2^{-n kappa} (...)
  std::size_t paths = 1;
  int workers = 1;
};

struct KolmogorovEstimate {
  std::vector<int> levels;
  std::vector<double> normalizer;  // c_n
  std::vector<double> B_scaling;   // [n * paths + path]
  std::vector<double> B_detail;    // [n * paths + path]
  std::vector<double> B;           // per path
  NormEstimate norm;               // ||B||_{L_p}
  double rtilde = 0.0;
};

KolmogorovEstimate kolmogorov_constant(const WaveletBasis& basis, const KolmogorovOptions& options,
                                       const std::function<CellMeasure(std::size_t path)>& distribution);

/// Warning text when alpha + rtilde <= 0 or gamma - E/2 + rtilde <= 0 for the
/// chosen basis (a larger moment count is needed), empty otherwise.
std::string capability_warning(double alpha, double gamma, int stochastic_total, const WaveletBasis& basis,
                               const ScalingVector& scaling);

}  // namespace recon
