#pragma once

#include <cstdint>
#include <iosfwd>
#include <memory>
#include <span>
#include <string>
#include <vector>

#include "recon/geometry.hpp"
#include "recon/grid.hpp"

namespace recon {

enum class WaveletFamily { haar, daubechies };

std::string to_string(WaveletFamily f);
WaveletFamily parse_wavelet_family(const std::string& name);

/// Taps a_0..a_{2N-1} of the Daubechies filter with N vanishing moments,
/// by spectral factorization followed by Newton polishing of the
/// orthogonality and moment conditions.
std::vector<double> daubechies_filter(int moments);

class TableCache;

/// Compactly supported orthonormal scaling function phi and detail wavelet
/// phihat, both supported in [C, R] = [shift, shift + 2N - 1].
class WaveletBasis {
 public:
  WaveletFamily family = WaveletFamily::daubechies;
  int moments = 0;             // N
  int shift = 1;               // C
  int cascade_resolution = 0;  // J: samples live on C + 2^{-J} Z
  std::vector<double> filter;         // a_k for k = C..R, stored at k - C
  std::vector<double> detail_filter;  // b_k for k = C..R, stored at k - C
  std::vector<double> scaling_samples;  // phi(C + j 2^{-J}), j = 0..(R-C) 2^J

  int support_lo() const { return shift; }
  int support_hi() const { return shift + 2 * moments - 1; }
  int support_length() const { return 2 * moments - 1; }
  double tap(int k) const;         // a_k, zero outside [C,R]
  double detail_tap(int k) const;  // b_k

  /// Cell values of the depth-D cascade iterate started from the box
  /// 1_[C,C+1): piecewise constant on cells of width 2^{-D}, cells
  /// j = C 2^D .. R 2^D - 1 stored at j - C 2^D. Integer translates are exactly
  /// orthonormal at every depth, so a fine grid of resolution 2^J carries an
  /// exact discrete multiresolution when level-L functions use depth J - L.
  const std::vector<double>& scaling_table(int depth) const;
  const std::vector<double>& detail_table(int depth) const;  // depth >= 1

  std::shared_ptr<TableCache> cache;
};

WaveletBasis build_basis(WaveletFamily family, int vanishing_moments, int cascade_resolution, int shift = 1);

/// Point values of phi on C + 2^{-level} Z, obtained from the basis samples
/// (subsampled, or refined through the two-scale relation).
std::vector<double> cascade_eval(const WaveletBasis& basis, int level);

/// Point values of phihat on C + 2^{-level} Z, level <= J.
std::vector<double> detail_eval(const WaveletBasis& basis, int level);

struct BasisCheck {
  double filter_sum_error = 0.0;        // |sum a_k - sqrt 2|
  double filter_orthogonality_error = 0.0;  // max_m |sum a_k a_{k+2m} - delta_m|
  double shift_orthonormality_error = 0.0;  // Riemann sums of the samples
  double max_vanishing_moment = 0.0;        // max_{m<N} |<x^m, phihat>|
  double refinement_residual = 0.0;
};

BasisCheck check_basis(const WaveletBasis& basis);

/// max_x |phi(x) - sqrt 2 sum_k a_k phi(2x - k)| over the sample grid.
double refinement_residual(const WaveletBasis& basis);

void write_basis(std::ostream& out, const WaveletBasis& basis);
WaveletBasis read_basis(std::istream& in);

// ---------------------------------------------------------------------------
// Tensor-product families on anisotropic dyadic meshes.

/// One factor of a tensor-product basis function: phi or phihat at 1D level L,
/// i.e. 2^{L/2} g(2^L x - m).
struct AxisSpec {
  int level = 0;
  bool detail = false;
};

struct LevelComponent {
  std::vector<AxisSpec> axes;
  bool is_detail() const;
  std::string label() const;
};

/// phi_y^n: level n s_i on axis i.
LevelComponent scaling_component(int n, const ScalingVector& scaling);

/// Components spanning the complement of V_n in V_{n+1}. Along axis i the
/// summand is either phi at level n s_i or phihat at a level in
/// [n s_i, (n+1) s_i - 1]; the all-phi choice is excluded. With canonical
/// scaling these are the 2^d - 1 binary masks.
std::vector<LevelComponent> detail_components(int n, const ScalingVector& scaling);

/// Coefficients sum_cells g_m(cell) data(cell) weight over translates m. The
/// function with index m on axis i sits at y_i = m_i 2^{-L_i}.
struct CoefficientArray {
  LevelComponent component;
  std::vector<std::int64_t> first, extent;
  std::vector<double> values;

  std::size_t size() const { return values.size(); }
  Point point(std::size_t flat) const;
  std::vector<std::size_t> strides() const;
};

/// Requires power-of-two resolutions 2^{J_i} with J_i >= L_i (J_i > L_i for
/// detail factors).
CoefficientArray analyze(const WaveletBasis& basis, const LevelComponent& component, const CellWindow& window,
                         std::span<const double> data, double weight);

/// sum_m c_m g_m evaluated on the cells of `target`.
std::vector<double> synthesize(const WaveletBasis& basis, const CoefficientArray& coefficients,
                               const CellWindow& target);

/// Window covering the supports of all functions in a coefficient array.
CellWindow synthesis_window(const WaveletBasis& basis, const CoefficientArray& coefficients,
                            const std::vector<std::int64_t>& resolution);

/// The single basis function with translate index m, sampled on the lattice.
GridFunction basis_function(const WaveletBasis& basis, const LevelComponent& component,
                            std::span<const std::int64_t> m, const std::vector<std::int64_t>& resolution);

struct DyadicMesh {
  int level = 0;
  ScalingVector scaling;
  Box box;
  std::size_t first_axis = 0, last_axis = 0;  // active axes [a, b]
  Point offset;
  std::vector<std::int64_t> first, extent;  // translate ranges, inactive axes have extent 1

  double spacing(std::size_t axis) const;
  std::size_t size() const;
  Point point(std::size_t flat) const;
};

/// Points y of offset + Delta_n in the box, together with those whose
/// phi_y^n support meets the box.
DyadicMesh mesh_points(int n, const ScalingVector& scaling, const Box& box, const WaveletBasis& basis,
                       Point offset = {}, std::size_t first_axis = 0, std::size_t last_axis = SIZE_MAX);

enum class ProjectionKind { scaling, detail };

/// P_n psi or Phat_n psi, sampled on the lattice of psi.
GridFunction project(const WaveletBasis& basis, const GridFunction& psi, int n, const ScalingVector& scaling,
                     ProjectionKind kind);

/// Integer exponent of the power of two equal to r, or -1.
int dyadic_exponent(std::int64_t r);

struct LemmaReport {
  std::vector<int> levels;
  std::vector<double> sup_scaling;  // sup_y |<phi_y^n, psi_z^lambda>|
  std::vector<double> sup_detail;   // sup over the detail family
  double slope_scaling = 0.0;       // fitted in n, log base 2
  double slope_detail = 0.0;
  double theory_scaling = 0.0;  // -|S|/2
  double theory_detail = 0.0;   // -|S|/2 - rtilde
  double rtilde = 0.0;          // N min s_i
};

LemmaReport verify_lemma1(const WaveletBasis& basis, const ScalingVector& scaling, const GridFunction& psi,
                          const Point& z, double lambda, int n_min, int n_max);

}  // namespace recon
