#include "recon/wavelet.hpp"

#include <Eigen/Dense>
#include <cmath>
#include <complex>
#include <deque>
#include <iomanip>
#include <istream>
#include <mutex>
#include <ostream>
#include <sstream>

#include "recon/error.hpp"

namespace recon {

std::string to_string(WaveletFamily f) { return f == WaveletFamily::haar ? "haar" : "daubechies"; }

WaveletFamily parse_wavelet_family(const std::string& name) {
  if (name == "haar") return WaveletFamily::haar;
  if (name == "daubechies") return WaveletFamily::daubechies;
  fail(ErrorKind::argument, "unknown wavelet family '" + name + "'");
}

namespace {

constexpr int max_moments = 10;

double binomial(int n, int k) {
  double r = 1.0;
  for (int i = 1; i <= k; ++i) r = r * (n - k + i) / i;
  return r;
}

// Residual of the conditions defining the Daubechies filter: orthogonality
// for shifts 0..N-1 and N discrete moments of the alternating filter.
Eigen::VectorXd filter_conditions(const Eigen::VectorXd& a, int N) {
  const int L = 2 * N;
  Eigen::VectorXd r(L);
  for (int m = 0; m < N; ++m) {
    double s = 0.0;
    for (int k = 0; k + 2 * m < L; ++k) s += a(k) * a(k + 2 * m);
    r(m) = s - (m == 0 ? 1.0 : 0.0);
  }
  const double mid = (L - 1) / 2.0;
  for (int j = 0; j < N; ++j) {
    double s = 0.0;
    for (int k = 0; k < L; ++k) s += ((k % 2) ? -1.0 : 1.0) * std::pow((k - mid) / mid, j) * a(k);
    r(N + j) = s;
  }
  return r;
}

Eigen::MatrixXd filter_jacobian(const Eigen::VectorXd& a, int N) {
  const int L = 2 * N;
  Eigen::MatrixXd J = Eigen::MatrixXd::Zero(L, L);
  for (int m = 0; m < N; ++m)
    for (int k = 0; k + 2 * m < L; ++k) {
      J(m, k) += a(k + 2 * m);
      J(m, k + 2 * m) += a(k);
    }
  const double mid = (L - 1) / 2.0;
  for (int j = 0; j < N; ++j)
    for (int k = 0; k < L; ++k) J(N + j, k) = ((k % 2) ? -1.0 : 1.0) * std::pow((k - mid) / mid, j);
  return J;
}

}  // namespace

std::vector<double> daubechies_filter(int N) {
  require(N >= 1 && N <= max_moments, ErrorKind::argument, "Daubechies filters are available for N = 1..10");
  using cd = std::complex<double>;
  // Roots of P(y) = sum_k binom(N-1+k, k) y^k.
  std::vector<cd> yroots;
  if (N > 1) {
    const int deg = N - 1;
    Eigen::MatrixXd companion = Eigen::MatrixXd::Zero(deg, deg);
    const double lead = binomial(2 * N - 2, N - 1);
    for (int i = 0; i < deg; ++i) companion(0, i) = -binomial(N - 1 + (deg - 1 - i), deg - 1 - i) / lead;
    for (int i = 1; i < deg; ++i) companion(i, i - 1) = 1.0;
    Eigen::EigenSolver<Eigen::MatrixXd> es(companion);
    for (int i = 0; i < deg; ++i) yroots.push_back(es.eigenvalues()(i));
  }
  // Each y gives z + 1/z = 2 - 4y; keep the root outside the unit circle.
  std::vector<cd> poly{1.0};
  auto multiply = [&poly](cd root) {  // poly *= (z - root)
    std::vector<cd> next(poly.size() + 1, 0.0);
    for (std::size_t i = 0; i < poly.size(); ++i) {
      next[i + 1] += poly[i];
      next[i] -= root * poly[i];
    }
    poly = std::move(next);
  };
  for (cd y : yroots) {
    const cd b = 2.0 - 4.0 * y;
    const cd disc = std::sqrt(b * b - 4.0);
    cd z = (b + disc) / 2.0;
    if (std::abs(z) < 1.0) z = (b - disc) / 2.0;
    multiply(z);
  }
  for (int i = 0; i < N; ++i) multiply(-1.0);
  Eigen::VectorXd a(2 * N);
  double sum = 0.0;
  for (int k = 0; k < 2 * N; ++k) sum += poly[static_cast<std::size_t>(k)].real();
  for (int k = 0; k < 2 * N; ++k) a(k) = poly[static_cast<std::size_t>(k)].real() * std::sqrt(2.0) / sum;

  double best = filter_conditions(a, N).cwiseAbs().maxCoeff();
  for (int it = 0; it < 20 && best > 1e-16; ++it) {
    const Eigen::VectorXd r = filter_conditions(a, N);
    const Eigen::VectorXd step = filter_jacobian(a, N).fullPivLu().solve(r);
    const Eigen::VectorXd trial = a - step;
    const double err = filter_conditions(trial, N).cwiseAbs().maxCoeff();
    if (!(err < best)) break;
    a = trial;
    best = err;
  }
  require(best < 1e-12, ErrorKind::numeric, "Daubechies filter did not satisfy its constraints");
  if (a.sum() < 0) a = -a;
  return std::vector<double>(a.data(), a.data() + a.size());
}

// ---------------------------------------------------------------------------

class TableCache {
 public:

  const std::vector<double>& scaling(const WaveletBasis& b, int depth) {
    std::lock_guard<std::mutex> lock(mutex_);
    extend(b, depth);
    return scaling_[static_cast<std::size_t>(depth)];
  }
  const std::vector<double>& detail(const WaveletBasis& b, int depth) {
    std::lock_guard<std::mutex> lock(mutex_);
    extend(b, depth);
    return detail_[static_cast<std::size_t>(depth)];
  }

 private:
  void extend(const WaveletBasis& b, int depth) {
    require(depth >= 0 && depth <= 26, ErrorKind::argument, "cascade table depth out of range");
    const int C = b.support_lo(), R = b.support_hi();
    if (scaling_.empty()) {
      std::vector<double> box(static_cast<std::size_t>(R - C), 0.0);
      box[0] = 1.0;
      scaling_.push_back(std::move(box));
      detail_.emplace_back();  // undefined at depth 0
    }
    while (static_cast<int>(scaling_.size()) <= depth) {
      const int D = static_cast<int>(scaling_.size());
      const std::int64_t half = std::int64_t{1} << (D - 1);
      const auto& prev = scaling_.back();
      const std::int64_t lo = C * (half * 2), hi = R * (half * 2);
      std::vector<double> s(static_cast<std::size_t>(hi - lo), 0.0), w(s.size(), 0.0);
      for (std::int64_t j = lo; j < hi; ++j) {
        double vs = 0.0, vw = 0.0;
        for (int k = C; k <= R; ++k) {
          const std::int64_t i = j - k * half;  // cell index at depth D - 1
          if (i < C * half || i >= R * half) continue;
          const double p = prev[static_cast<std::size_t>(i - C * half)];
          vs += b.tap(k) * p;
          vw += b.detail_tap(k) * p;
        }
        s[static_cast<std::size_t>(j - lo)] = std::sqrt(2.0) * vs;
        w[static_cast<std::size_t>(j - lo)] = std::sqrt(2.0) * vw;
      }
      scaling_.push_back(std::move(s));
      detail_.push_back(std::move(w));
    }
  }

  std::mutex mutex_;
  std::deque<std::vector<double>> scaling_, detail_;
};

double WaveletBasis::tap(int k) const {
  if (k < support_lo() || k > support_hi()) return 0.0;
  return filter[static_cast<std::size_t>(k - support_lo())];
}

double WaveletBasis::detail_tap(int k) const {
  if (k < support_lo() || k > support_hi()) return 0.0;
  return detail_filter[static_cast<std::size_t>(k - support_lo())];
}

const std::vector<double>& WaveletBasis::scaling_table(int depth) const {
  require(cache != nullptr, ErrorKind::argument, "basis has no table cache");
  return cache->scaling(*this, depth);
}

const std::vector<double>& WaveletBasis::detail_table(int depth) const {
  require(depth >= 1, ErrorKind::resolution, "detail functions need one level of headroom on the grid");
  require(cache != nullptr, ErrorKind::argument, "basis has no table cache");
  return cache->detail(*this, depth);
}

namespace {

// Fixed point of the two-scale map on the integers, started from the box.
std::vector<double> integer_values(const WaveletBasis& b) {
  const int C = b.support_lo(), R = b.support_hi();
  std::vector<double> g(static_cast<std::size_t>(R - C + 1), 0.0), next(g.size());
  g[0] = 1.0;
  double last_change = INFINITY;
  for (int it = 0; it < 2000; ++it) {
    double change = 0.0;
    for (int j = C; j <= R; ++j) {
      double v = 0.0;
      for (int k = C; k <= R; ++k) {
        const int i = 2 * j - k;
        if (i >= C && i <= R) v += b.tap(k) * g[static_cast<std::size_t>(i - C)];
      }
      next[static_cast<std::size_t>(j - C)] = std::sqrt(2.0) * v;
      change = std::max(change, std::abs(next[static_cast<std::size_t>(j - C)] - g[static_cast<std::size_t>(j - C)]));
    }
    g.swap(next);
    if (change < 1e-15) return g;
    if (it > 200 && change >= last_change) break;
    last_change = std::min(last_change, change);
  }
  fail(ErrorKind::numeric, "cascade iteration did not converge");
}

// Refine point values from level l-1 to level l.
std::vector<double> refine_once(const WaveletBasis& b, const std::vector<double>& coarse, int l) {
  const int C = b.support_lo(), R = b.support_hi();
  const std::int64_t n = static_cast<std::int64_t>(R - C) << l;
  std::vector<double> fine(static_cast<std::size_t>(n + 1), 0.0);
  const std::int64_t half = std::int64_t{1} << (l - 1);
  for (std::int64_t j = 0; j <= n; ++j) {
    if (j % 2 == 0) {
      fine[static_cast<std::size_t>(j)] = coarse[static_cast<std::size_t>(j / 2)];
      continue;
    }
    // x = C + j 2^{-l}; 2x - k = 2C - k + j 2^{-(l-1)} on the coarse grid
    double v = 0.0;
    for (int k = C; k <= R; ++k) {
      const std::int64_t i = (static_cast<std::int64_t>(C - k) * half) + j;  // index of 2x - k at level l-1
      if (i >= 0 && i <= static_cast<std::int64_t>(R - C) * half) v += b.tap(k) * coarse[static_cast<std::size_t>(i)];
    }
    fine[static_cast<std::size_t>(j)] = std::sqrt(2.0) * v;
  }
  return fine;
}

}  // namespace

WaveletBasis build_basis(WaveletFamily family, int N, int J, int shift) {
  require(N >= 1, ErrorKind::argument, "vanishing moments must be >= 1");
  require(J >= 6, ErrorKind::argument, "cascade resolution must be >= 6");
  require(J <= 20, ErrorKind::argument, "cascade resolution must be <= 20");
  require(shift >= 1, ErrorKind::argument, "support shift must be >= 1");
  if (family == WaveletFamily::haar) require(N == 1, ErrorKind::argument, "the Haar basis has one vanishing moment");
  WaveletBasis b;
  b.family = family;
  b.moments = N;
  b.shift = shift;
  b.cascade_resolution = J;
  b.filter = daubechies_filter(N);
  const int C = b.support_lo(), R = b.support_hi();
  b.detail_filter.resize(b.filter.size());
  for (int k = C; k <= R; ++k) {
    const int mirror = 2 * C + (R - C) - k;  // b_k = (-1)^k a_{2C+2N-1-k}
    b.detail_filter[static_cast<std::size_t>(k - C)] = ((k % 2) ? -1.0 : 1.0) * b.filter[static_cast<std::size_t>(mirror - C)];
  }
  b.scaling_samples = integer_values(b);
  for (int l = 1; l <= J; ++l) b.scaling_samples = refine_once(b, b.scaling_samples, l);
  b.cache = std::make_shared<TableCache>();
  return b;
}

std::vector<double> cascade_eval(const WaveletBasis& b, int level) {
  require(level >= 0, ErrorKind::argument, "cascade level must be >= 0");
  const int J = b.cascade_resolution;
  if (level <= J) {
    const std::int64_t step = std::int64_t{1} << (J - level);
    const std::int64_t n = static_cast<std::int64_t>(b.support_length()) << level;
    std::vector<double> out(static_cast<std::size_t>(n + 1));
    for (std::int64_t j = 0; j <= n; ++j) out[static_cast<std::size_t>(j)] = b.scaling_samples[static_cast<std::size_t>(j * step)];
    return out;
  }
  std::vector<double> v = b.scaling_samples;
  for (int l = J + 1; l <= level; ++l) v = refine_once(b, v, l);
  return v;
}

std::vector<double> detail_eval(const WaveletBasis& b, int level) {
  require(level >= 1 && level <= b.cascade_resolution, ErrorKind::argument, "detail samples need 1 <= level <= J");
  const auto phi = cascade_eval(b, level);
  const int C = b.support_lo(), R = b.support_hi();
  const std::int64_t n = static_cast<std::int64_t>(R - C) << level;
  const std::int64_t half = std::int64_t{1} << (level - 1);
  std::vector<double> out(static_cast<std::size_t>(n + 1), 0.0);
  // phihat(x) = sqrt2 sum_k b_k phi(2x - k), x = C + j 2^{-level}
  for (std::int64_t j = 0; j <= n; ++j) {
    double v = 0.0;
    for (int k = C; k <= R; ++k) {
      const std::int64_t i = 2 * j + static_cast<std::int64_t>(C - k) * (half * 2);  // index of 2x - k at this level
      if (i >= 0 && i <= n) v += b.detail_tap(k) * phi[static_cast<std::size_t>(i)];
    }
    out[static_cast<std::size_t>(j)] = std::sqrt(2.0) * v;
  }
  return out;
}

double refinement_residual(const WaveletBasis& b) {
  const int J = b.cascade_resolution;
  const int C = b.support_lo(), R = b.support_hi();
  const auto& phi = b.scaling_samples;
  const std::int64_t n = static_cast<std::int64_t>(R - C) << J;
  const std::int64_t scale = std::int64_t{1} << J;
  double worst = 0.0;
  for (std::int64_t j = 0; j <= n; ++j) {
    // 2x - k with x = C + j 2^{-J} has index 2j + (C - k) 2^J on the same grid
    double v = 0.0;
    for (int k = C; k <= R; ++k) {
      const std::int64_t i = 2 * j + static_cast<std::int64_t>(C - k) * scale;
      if (i >= 0 && i <= n) v += b.tap(k) * phi[static_cast<std::size_t>(i)];
    }
    worst = std::max(worst, std::abs(phi[static_cast<std::size_t>(j)] - std::sqrt(2.0) * v));
  }
  return worst;
}

BasisCheck check_basis(const WaveletBasis& b) {
  BasisCheck c;
  const int C = b.support_lo(), R = b.support_hi();
  double sum = 0.0;
  for (double a : b.filter) sum += a;
  c.filter_sum_error = std::abs(sum - std::sqrt(2.0));
  for (int m = 0; m <= R - C; m += 1) {
    if (2 * m > R - C && m > 0) break;
    double s = 0.0;
    for (int k = C; k <= R; ++k) s += b.tap(k) * b.tap(k + 2 * m);
    c.filter_orthogonality_error = std::max(c.filter_orthogonality_error, std::abs(s - (m == 0 ? 1.0 : 0.0)));
  }
  const int J = b.cascade_resolution;
  const auto& phi = b.scaling_samples;
  const std::int64_t n = static_cast<std::int64_t>(R - C) << J;
  const double h = std::ldexp(1.0, -J);
  for (int k = 0; k <= R - C; ++k) {
    double s = 0.0;
    const std::int64_t off = static_cast<std::int64_t>(k) << J;
    for (std::int64_t j = off; j <= n; ++j) s += phi[static_cast<std::size_t>(j)] * phi[static_cast<std::size_t>(j - off)];
    c.shift_orthonormality_error = std::max(c.shift_orthonormality_error, std::abs(s * h - (k == 0 ? 1.0 : 0.0)));
  }
  const auto hat = detail_eval(b, J);
  for (int m = 0; m < b.moments; ++m) {
    double s = 0.0;
    for (std::int64_t j = 0; j <= n; ++j) s += std::pow(C + static_cast<double>(j) * h, m) * hat[static_cast<std::size_t>(j)];
    c.max_vanishing_moment = std::max(c.max_vanishing_moment, std::abs(s * h));
  }
  c.refinement_residual = refinement_residual(b);
  return c;
}

void write_basis(std::ostream& out, const WaveletBasis& b) {
  out << "wavelet-basis 1\n";
  out << "family " << to_string(b.family) << '\n';
  out << "vanishing_moments " << b.moments << '\n';
  out << "shift " << b.shift << '\n';
  out << "cascade_resolution " << b.cascade_resolution << '\n';
  out << "support " << b.support_lo() << ' ' << b.support_hi() << '\n';
  out << std::setprecision(17);
  out << "filter " << b.filter.size() << '\n';
  for (std::size_t i = 0; i < b.filter.size(); ++i)
    out << b.support_lo() + static_cast<int>(i) << ' ' << b.filter[i] << ' ' << b.detail_filter[i] << '\n';
  out << "samples " << b.scaling_samples.size() << '\n';
  for (double v : b.scaling_samples) out << v << '\n';
}

WaveletBasis read_basis(std::istream& in) {
  auto expect = [&in](const std::string& key) {
    std::string word;
    require(static_cast<bool>(in >> word) && word == key, ErrorKind::argument, "basis table: expected '" + key + "'");
  };
  WaveletBasis b;
  int version = 0;
  expect("wavelet-basis");
  in >> version;
  require(version == 1, ErrorKind::argument, "basis table: unsupported version");
  std::string family;
  expect("family");
  in >> family;
  b.family = parse_wavelet_family(family);
  expect("vanishing_moments");
  in >> b.moments;
  expect("shift");
  in >> b.shift;
  expect("cascade_resolution");
  in >> b.cascade_resolution;
  int lo = 0, hi = 0;
  expect("support");
  in >> lo >> hi;
  require(lo == b.support_lo() && hi == b.support_hi(), ErrorKind::argument, "basis table: inconsistent support");
  std::size_t count = 0;
  expect("filter");
  in >> count;
  require(count == static_cast<std::size_t>(hi - lo + 1), ErrorKind::argument, "basis table: wrong filter length");
  b.filter.resize(count);
  b.detail_filter.resize(count);
  for (std::size_t i = 0; i < count; ++i) {
    int k = 0;
    in >> k >> b.filter[i] >> b.detail_filter[i];
  }
  expect("samples");
  in >> count;
  require(count == (static_cast<std::size_t>(hi - lo) << b.cascade_resolution) + 1, ErrorKind::argument,
          "basis table: wrong sample count");
  b.scaling_samples.resize(count);
  for (auto& v : b.scaling_samples) in >> v;
  require(static_cast<bool>(in), ErrorKind::argument, "basis table: truncated input");
  b.cache = std::make_shared<TableCache>();
  return b;
}

}  // namespace recon
