#include "recon/fit.hpp"

#include <Eigen/Dense>
#include <algorithm>
#include <cmath>
#include <vector>

#include "recon/error.hpp"

namespace recon {

namespace {

double median(std::vector<double> v) {
  require(!v.empty(), ErrorKind::numeric, "median of an empty set");
  const std::size_t mid = v.size() / 2;
  std::nth_element(v.begin(), v.begin() + static_cast<std::ptrdiff_t>(mid), v.end());
  double hi = v[mid];
  if (v.size() % 2 == 1) return hi;
  double lo = *std::max_element(v.begin(), v.begin() + static_cast<std::ptrdiff_t>(mid));
  return 0.5 * (lo + hi);
}

void check_sizes(std::size_t a, std::size_t b, std::size_t minimum) {
  require(a == b, ErrorKind::argument, "fit inputs differ in length");
  require(a >= minimum, ErrorKind::argument, "too few points to fit");
}

}  // namespace

RateFit fit_least_squares(std::span<const double> x, std::span<const double> y) {
  check_sizes(x.size(), y.size(), 2);
  const double n = static_cast<double>(x.size());
  double mx = 0, my = 0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    mx += x[i];
    my += y[i];
  }
  mx /= n;
  my /= n;
  double sxx = 0, sxy = 0, syy = 0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    sxx += (x[i] - mx) * (x[i] - mx);
    sxy += (x[i] - mx) * (y[i] - my);
    syy += (y[i] - my) * (y[i] - my);
  }
  require(sxx > 0.0, ErrorKind::numeric, "degenerate abscissae in fit");
  RateFit fit;
  fit.slope = sxy / sxx;
  fit.intercept = my - fit.slope * mx;
  double rss = 0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    const double r = y[i] - fit.intercept - fit.slope * x[i];
    rss += r * r;
  }
  fit.stderr_slope = x.size() > 2 ? std::sqrt(rss / (n - 2.0) / sxx) : 0.0;
  fit.r2 = syy > 0.0 ? 1.0 - rss / syy : 1.0;
  fit.points = static_cast<int>(x.size());
  fit.method = "least-squares";
  return fit;
}

RateFit fit_theil_sen(std::span<const double> x, std::span<const double> y) {
  check_sizes(x.size(), y.size(), 2);
  std::vector<double> slopes;
  for (std::size_t i = 0; i < x.size(); ++i)
    for (std::size_t j = i + 1; j < x.size(); ++j)
      if (x[j] != x[i]) slopes.push_back((y[j] - y[i]) / (x[j] - x[i]));
  RateFit fit = fit_least_squares(x, y);
  fit.slope = median(slopes);
  std::vector<double> offsets(x.size());
  for (std::size_t i = 0; i < x.size(); ++i) offsets[i] = y[i] - fit.slope * x[i];
  fit.intercept = median(offsets);
  fit.method = "theil-sen";
  return fit;
}

TwoWayFit fit_two_way(std::span<const double> u, std::span<const double> v, std::span<const double> y) {
  check_sizes(u.size(), y.size(), 3);
  check_sizes(v.size(), y.size(), 3);
  const std::size_t n = y.size();

  Eigen::MatrixXd design(n, 3);
  Eigen::VectorXd rhs(n);
  for (std::size_t i = 0; i < n; ++i) {
    design(static_cast<Eigen::Index>(i), 0) = 1.0;
    design(static_cast<Eigen::Index>(i), 1) = u[i];
    design(static_cast<Eigen::Index>(i), 2) = v[i];
    rhs(static_cast<Eigen::Index>(i)) = y[i];
  }
  const Eigen::Matrix3d gram = design.transpose() * design;
  Eigen::FullPivLU<Eigen::Matrix3d> lu(gram);
  require(lu.rank() == 3, ErrorKind::numeric, "degenerate design in two-way fit");
  const Eigen::Vector3d beta = lu.solve(design.transpose() * rhs);
  const Eigen::VectorXd resid = rhs - design * beta;
  const double rss = resid.squaredNorm();
  const double ybar = rhs.mean();
  const double tss = (rhs.array() - ybar).square().sum();
  const double sigma2 = n > 3 ? rss / static_cast<double>(n - 3) : 0.0;
  const Eigen::Matrix3d cov = sigma2 * gram.inverse();

  std::vector<double> as, bs, cs;
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = i + 1; j < n; ++j)
      for (std::size_t k = j + 1; k < n; ++k) {
        Eigen::Matrix3d m;
        m << 1.0, u[i], v[i], 1.0, u[j], v[j], 1.0, u[k], v[k];
        // Skip nearly collinear triples; they give arbitrary planes.
        const double scale = 1.0 + m.cwiseAbs().maxCoeff();
        if (std::abs(m.determinant()) < 1e-9 * scale * scale) continue;
        const Eigen::Vector3d sol = m.partialPivLu().solve(Eigen::Vector3d(y[i], y[j], y[k]));
        cs.push_back(sol(0));
        as.push_back(sol(1));
        bs.push_back(sol(2));
      }

  TwoWayFit fit;
  fit.points = static_cast<int>(n);
  fit.se_a = std::sqrt(std::max(0.0, cov(1, 1)));
  fit.se_b = std::sqrt(std::max(0.0, cov(2, 2)));
  fit.r2 = tss > 0.0 ? 1.0 - rss / tss : 1.0;
  if (as.empty()) {
    fit.c = beta(0);
    fit.a = beta(1);
    fit.b = beta(2);
  } else {
    fit.a = median(as);
    fit.b = median(bs);
    fit.c = median(cs);
  }
  return fit;
}

}  // namespace recon
