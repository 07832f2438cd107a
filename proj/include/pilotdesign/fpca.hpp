#pragma once

#include <Eigen/Dense>
#include <algorithm>
#include <cmath>
#include <limits>
#include <string>
#include <vector>

#include "pilotdesign/types.hpp"

namespace pilotdesign {

struct FitOptions {
  enum class Smoothing { gcv, fixed, none };

  Smoothing smoothing = Smoothing::gcv;
  double mean_bandwidth = 0.0;  // used when smoothing == fixed; echoes the GCV pick otherwise
  double cov_bandwidth = 0.0;
  double fve_threshold = 0.95;
  int max_components = 20;
  int fixed_components = 0;  // > 0 pins the component count
  // Fraction of the domain, centred, over which the diagonal gap is averaged
  // for the error-variance estimate.
  double error_center_fraction = 0.5;
  double ridge_scale = 1e-8;
  double condition_limit = 1e12;
};

// Fitted sparse-FPCA model on the observation grid. Eigenfunctions are
// orthonormal under the trapezoid quadrature rule of the grid; eigenvalues
// are positive and non-increasing.
struct FpcaModel {
  Eigen::VectorXd grid;
  Eigen::VectorXd mean;            // length v
  Eigen::MatrixXd covariance;      // v x v surface of the signal process
  Eigen::VectorXd eigenvalues;     // length M
  Eigen::MatrixXd eigenfunctions;  // v x M
  double error_variance = 0.0;
  double fve = 1.0;
  FitOptions options;

  int components() const { return static_cast<int>(eigenvalues.size()); }
  int grid_size() const { return static_cast<int>(grid.size()); }
};

namespace detail {

inline Eigen::VectorXd trapezoid_weights(const Eigen::VectorXd& grid) {
  const int v = static_cast<int>(grid.size());
  Eigen::VectorXd w(v);
  if (v == 1) {
    w(0) = 1.0;
    return w;
  }
  w(0) = (grid(1) - grid(0)) / 2.0;
  w(v - 1) = (grid(v - 1) - grid(v - 2)) / 2.0;
  for (int j = 1; j + 1 < v; ++j) w(j) = (grid(j + 1) - grid(j - 1)) / 2.0;
  return w;
}

// Gaussian kernel values between all grid point pairs at bandwidth h.
inline Eigen::MatrixXd kernel_matrix(const Eigen::VectorXd& grid, double h) {
  const int v = static_cast<int>(grid.size());
  Eigen::MatrixXd e(v, v);
  for (int a = 0; a < v; ++a)
    for (int b = a; b < v; ++b) {
      const double u = (grid(a) - grid(b)) / h;
      e(a, b) = e(b, a) = std::exp(-0.5 * u * u);
    }
  return e;
}

// Scatter data pooled over subjects and aggregated by grid index.
struct PooledScatter {
  std::vector<int> loc;  // grid indices holding data
  std::vector<double> count, sum, sumsq;
  double total = 0.0;

  void add(int j, double y) {
    for (std::size_t p = 0; p < loc.size(); ++p)
      if (loc[p] == j) {
        count[p] += 1.0;
        sum[p] += y;
        sumsq[p] += y * y;
        total += 1.0;
        return;
      }
    loc.push_back(j);
    count.push_back(1.0);
    sum.push_back(y);
    sumsq.push_back(y * y);
    total += 1.0;
  }
};

// Raw covariance data aggregated by ordered off-diagonal grid pair; every
// unordered raw pair is mirrored so the surface smoother is symmetric.
struct PooledSurface {
  std::vector<std::pair<int, int>> loc;
  std::vector<double> count, sum, sumsq;
  double total = 0.0;

  void add_mirrored(int j, int k, double g, std::vector<int>& index, int v) {
    add_one(j, k, g, index, v);
    add_one(k, j, g, index, v);
  }

  void add_one(int j, int k, double g, std::vector<int>& index, int v) {
    const int key = j * v + k;
    if (index[key] < 0) {
      index[key] = static_cast<int>(loc.size());
      loc.emplace_back(j, k);
      count.push_back(0.0);
      sum.push_back(0.0);
      sumsq.push_back(0.0);
    }
    const int p = index[key];
    count[p] += 1.0;
    sum[p] += g;
    sumsq[p] += g * g;
    total += 1.0;
  }
};

struct LocalFit {
  double value = 0.0;
  double own_weight = 0.0;  // per-observation hat weight at the evaluation point
  bool valid = false;
};

// Local linear regression at grid index `at`, kernel row taken from a
// precomputed kernel matrix. Distances are scaled by h inside the normal
// equations for conditioning.
inline LocalFit local_linear_at(const PooledScatter& d, const Eigen::VectorXd& grid,
                                const Eigen::MatrixXd& kern, double h, int at) {
  double s0 = 0, s1 = 0, s2 = 0, t0 = 0, t1 = 0;
  double own_u = 0.0;
  for (std::size_t p = 0; p < d.loc.size(); ++p) {
    const double u = kern(at, d.loc[p]);
    const double cu = d.count[p] * u;
    const double x = (grid(d.loc[p]) - grid(at)) / h;
    s0 += cu;
    s1 += cu * x;
    s2 += cu * x * x;
    t0 += u * d.sum[p];
    t1 += u * d.sum[p] * x;
    if (d.loc[p] == at) own_u = u;
  }
  LocalFit f;
  const double det = s0 * s2 - s1 * s1;
  if (!(s0 > 0.0)) return f;
  if (det <= 1e-10 * s0 * s2 || !(det > 0.0)) {
    return f;  // effectively a single support point: no linear fit
  }
  f.value = (s2 * t0 - s1 * t1) / det;
  f.own_weight = own_u * s2 / det;
  f.valid = true;
  return f;
}

inline double gcv_1d(const PooledScatter& d, const Eigen::VectorXd& grid, double h) {
  const Eigen::MatrixXd kern = kernel_matrix(grid, h);
  double rss = 0.0, trace = 0.0;
  for (std::size_t p = 0; p < d.loc.size(); ++p) {
    const LocalFit f = local_linear_at(d, grid, kern, h, d.loc[p]);
    if (!f.valid) return std::numeric_limits<double>::infinity();
    rss += d.sumsq[p] - 2.0 * f.value * d.sum[p] + d.count[p] * f.value * f.value;
    trace += d.count[p] * f.own_weight;
  }
  const double n = d.total;
  if (!(trace < n)) return std::numeric_limits<double>::infinity();
  const double denom = 1.0 - trace / n;
  return rss / (n * denom * denom);
}

inline std::vector<double> bandwidth_candidates(const Eigen::VectorXd& grid) {
  const int v = static_cast<int>(grid.size());
  double min_gap = std::numeric_limits<double>::infinity();
  for (int j = 1; j < v; ++j) min_gap = std::min(min_gap, grid(j) - grid(j - 1));
  const double range = grid(v - 1) - grid(0);
  std::vector<double> out;
  for (double h = 0.5 * min_gap; h < range * 0.55; h *= 1.45) out.push_back(h);
  if (out.empty()) out.push_back(range / 4.0);
  return out;
}

inline double choose_bandwidth_1d(const PooledScatter& d, const Eigen::VectorXd& grid) {
  double best_h = 0.0, best = std::numeric_limits<double>::infinity();
  for (const double h : bandwidth_candidates(grid)) {
    const double g = gcv_1d(d, grid, h);
    if (g < best) {
      best = g;
      best_h = h;
    }
  }
  if (!(best < std::numeric_limits<double>::infinity()))
    return (grid(grid.size() - 1) - grid(0)) / 4.0;  // GCV degenerate, fall back
  return best_h;
}

inline Eigen::VectorXd smooth_1d(const PooledScatter& d, const Eigen::VectorXd& grid, double h) {
  const Eigen::MatrixXd kern = kernel_matrix(grid, h);
  const int v = static_cast<int>(grid.size());
  Eigen::VectorXd out(v);
  for (int j = 0; j < v; ++j) {
    const LocalFit f = local_linear_at(d, grid, kern, h, j);
    if (!f.valid)
      throw InsufficientData("pooled data too sparse for the smoothing bandwidth at grid point " +
                             std::to_string(j + 1));
    out(j) = f.value;
  }
  return out;
}

// Local plane fit on the pooled covariance scatter at grid pair (a, b).
inline LocalFit local_plane_at(const PooledSurface& d, const Eigen::VectorXd& grid,
                               const Eigen::MatrixXd& kern, double h, int a, int b) {
  double m00 = 0, m10 = 0, m01 = 0, m20 = 0, m11 = 0, m02 = 0;
  double t00 = 0, t10 = 0, t01 = 0;
  double own_u = 0.0;
  for (std::size_t p = 0; p < d.loc.size(); ++p) {
    const auto [j, k] = d.loc[p];
    const double u = kern(a, j) * kern(b, k);
    const double cu = d.count[p] * u;
    const double x = (grid(j) - grid(a)) / h;
    const double y = (grid(k) - grid(b)) / h;
    m00 += cu;
    m10 += cu * x;
    m01 += cu * y;
    m20 += cu * x * x;
    m11 += cu * x * y;
    m02 += cu * y * y;
    t00 += u * d.sum[p];
    t10 += u * d.sum[p] * x;
    t01 += u * d.sum[p] * y;
    if (j == a && k == b) own_u = u;
  }
  LocalFit f;
  if (!(m00 > 0.0)) return f;
  Eigen::Matrix3d m;
  m << m00, m10, m01, m10, m20, m11, m01, m11, m02;
  const double det = m.determinant();
  if (det <= 1e-12 * m00 * m20 * m02 || !(det > 0.0)) return f;
  const Eigen::Matrix3d inv = m.inverse();
  f.value = inv(0, 0) * t00 + inv(0, 1) * t10 + inv(0, 2) * t01;
  f.own_weight = own_u * inv(0, 0);
  f.valid = true;
  return f;
}

// Diagonal evaluation of the covariance surface. The surface has a ridge
// along the diagonal, so a plane fit systematically undershoots there;
// following the conditional-expectation literature the fit is rotated:
// linear along the diagonal, quadratic across it. With the mirrored data the
// odd cross-direction moments vanish and the estimate at eta = 0 is the
// intercept.
inline LocalFit local_diag_at(const PooledSurface& d, const Eigen::VectorXd& grid,
                              const Eigen::MatrixXd& kern, double h, int a) {
  double m00 = 0, m10 = 0, m01 = 0, m20 = 0, m11 = 0, m02 = 0;
  double t00 = 0, t10 = 0, t01 = 0;
  for (std::size_t p = 0; p < d.loc.size(); ++p) {
    const auto [j, k] = d.loc[p];
    const double u = kern(a, j) * kern(a, k);
    const double cu = d.count[p] * u;
    const double x = (grid(j) - grid(a)) / h;
    const double y = (grid(k) - grid(a)) / h;
    const double xi = (x + y) / 2.0;   // along the diagonal
    const double q = (y - x) * (y - x);  // even across the diagonal
    m00 += cu;
    m10 += cu * xi;
    m01 += cu * q;
    m20 += cu * xi * xi;
    m11 += cu * xi * q;
    m02 += cu * q * q;
    t00 += u * d.sum[p];
    t10 += u * d.sum[p] * xi;
    t01 += u * d.sum[p] * q;
  }
  LocalFit f;
  if (!(m00 > 0.0)) return f;
  Eigen::Matrix3d m;
  m << m00, m10, m01, m10, m20, m11, m01, m11, m02;
  const double det = m.determinant();
  if (std::abs(det) <= 1e-12 * m00 * std::max(m20, 1e-300) * std::max(m02, 1e-300)) return f;
  const Eigen::Matrix3d inv = m.inverse();
  f.value = inv(0, 0) * t00 + inv(0, 1) * t10 + inv(0, 2) * t01;
  f.valid = true;
  return f;
}

inline double gcv_2d(const PooledSurface& d, const Eigen::VectorXd& grid, double h) {
  const Eigen::MatrixXd kern = kernel_matrix(grid, h);
  double rss = 0.0, trace = 0.0;
  for (std::size_t p = 0; p < d.loc.size(); ++p) {
    const LocalFit f = local_plane_at(d, grid, kern, h, d.loc[p].first, d.loc[p].second);
    if (!f.valid) return std::numeric_limits<double>::infinity();
    rss += d.sumsq[p] - 2.0 * f.value * d.sum[p] + d.count[p] * f.value * f.value;
    trace += d.count[p] * f.own_weight;
  }
  const double n = d.total;
  if (!(trace < n)) return std::numeric_limits<double>::infinity();
  const double denom = 1.0 - trace / n;
  return rss / (n * denom * denom);
}

inline double choose_bandwidth_2d(const PooledSurface& d, const Eigen::VectorXd& grid) {
  double best_h = 0.0, best = std::numeric_limits<double>::infinity();
  for (const double h : bandwidth_candidates(grid)) {
    const double g = gcv_2d(d, grid, h);
    if (g < best) {
      best = g;
      best_h = h;
    }
  }
  if (!(best < std::numeric_limits<double>::infinity()))
    return (grid(grid.size() - 1) - grid(0)) / 4.0;
  return best_h;
}

inline Eigen::MatrixXd smooth_2d(const PooledSurface& d, const Eigen::VectorXd& grid, double h) {
  const Eigen::MatrixXd kern = kernel_matrix(grid, h);
  const int v = static_cast<int>(grid.size());
  Eigen::MatrixXd out(v, v);
  for (int a = 0; a < v; ++a)
    for (int b = a; b < v; ++b) {
      const LocalFit f = a == b ? local_diag_at(d, grid, kern, h, a)
                                : local_plane_at(d, grid, kern, h, a, b);
      if (!f.valid)
        throw InsufficientData("covariance scatter too sparse for the smoothing bandwidth");
      out(a, b) = out(b, a) = f.value;
    }
  return out;
}

// Symmetric positive (semi)definite solve with the ridge policy: when the
// condition estimate exceeds the limit, a diagonal shift proportional to the
// mean eigenvalue is added before inversion.
class SpdSolver {
 public:
  void factor(const Eigen::MatrixXd& s, double ridge_scale, double condition_limit) {
    es_.compute(s);
    if (es_.info() != Eigen::Success) throw SingularConditioning("eigendecomposition failed");
    const Eigen::VectorXd& d = es_.eigenvalues();
    const double dmax = d(d.size() - 1);
    const double dmin = d(0);
    if (!(dmax > 0.0)) throw SingularConditioning("conditioning matrix is not positive");
    shift_ = 0.0;
    if (dmin <= 0.0 || dmax / dmin > condition_limit) {
      shift_ = ridge_scale * s.trace() / static_cast<double>(s.rows());
      if (dmin + shift_ <= dmax * 1e-15)
        throw SingularConditioning("ridge failed to stabilize the conditioning matrix");
    }
  }

  Eigen::MatrixXd solve(const Eigen::MatrixXd& b) const {
    const Eigen::VectorXd inv_d =
        (es_.eigenvalues().array() + shift_).inverse().matrix();
    return es_.eigenvectors() * inv_d.asDiagonal() * (es_.eigenvectors().transpose() * b);
  }

  double shift() const { return shift_; }

 private:
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es_;
  double shift_ = 0.0;
};

}  // namespace detail

// Fits the sparse-FPCA model: local linear mean from the pooled scatter,
// covariance surface from 2-D local linear smoothing of the off-diagonal raw
// covariances, error variance from the central diagonal gap, eigenpairs from
// the quadrature-weighted eigenproblem on the grid.
inline FpcaModel fit_pace(const SparseDataset& data, const FitOptions& options = {}) {
  data.validate();
  const int v = static_cast<int>(data.grid.size());
  if (data.subjects.size() < 2) throw InsufficientData("need at least two subjects");

  Eigen::VectorXd grid(v);
  for (int j = 0; j < v; ++j) grid(j) = data.grid[j];

  detail::PooledScatter mean_data;
  for (const auto& s : data.subjects)
    for (std::size_t k = 0; k < s.indices.size(); ++k) mean_data.add(s.indices[k], s.values[k]);
  if (mean_data.loc.size() < 2)
    throw InsufficientData("pooled observations cover fewer than two grid points");

  FpcaModel model;
  model.grid = grid;
  model.options = options;

  // Mean curve.
  const bool raw = options.smoothing == FitOptions::Smoothing::none;
  if (raw) {
    if (static_cast<int>(mean_data.loc.size()) != v)
      throw InsufficientData("raw-moment fitting needs every grid point observed");
    model.mean.resize(v);
    for (std::size_t p = 0; p < mean_data.loc.size(); ++p)
      model.mean(mean_data.loc[p]) = mean_data.sum[p] / mean_data.count[p];
    model.options.mean_bandwidth = 0.0;
  } else {
    const double h_mu = options.smoothing == FitOptions::Smoothing::fixed
                            ? options.mean_bandwidth
                            : detail::choose_bandwidth_1d(mean_data, grid);
    if (!(h_mu > 0.0)) throw InvalidSpec("mean bandwidth must be positive");
    model.mean = detail::smooth_1d(mean_data, grid, h_mu);
    model.options.mean_bandwidth = h_mu;
  }

  // Raw covariances: off-diagonal products feed the surface smoother, the
  // diagonal squared residuals feed the error-variance estimate.
  detail::PooledSurface cov_data;
  detail::PooledScatter diag_data;
  std::vector<int> pair_index(static_cast<std::size_t>(v) * v, -1);
  for (const auto& s : data.subjects) {
    const int m = static_cast<int>(s.indices.size());
    for (int a = 0; a < m; ++a) {
      const double ra = s.values[a] - model.mean(s.indices[a]);
      diag_data.add(s.indices[a], ra * ra);
      for (int b = a + 1; b < m; ++b) {
        const double rb = s.values[b] - model.mean(s.indices[b]);
        cov_data.add_mirrored(s.indices[a], s.indices[b], ra * rb, pair_index, v);
      }
    }
  }
  if (cov_data.loc.empty())
    throw InsufficientData("no off-diagonal covariance information (all subjects singleton?)");

  Eigen::VectorXd diag_smooth(v);
  if (raw) {
    if (static_cast<long>(cov_data.loc.size()) != static_cast<long>(v) * (v - 1))
      throw InsufficientData("raw-moment fitting needs every grid pair observed");
    model.covariance.resize(v, v);
    for (std::size_t p = 0; p < cov_data.loc.size(); ++p)
      model.covariance(cov_data.loc[p].first, cov_data.loc[p].second) =
          cov_data.sum[p] / cov_data.count[p];
    for (std::size_t p = 0; p < diag_data.loc.size(); ++p) {
      const double val = diag_data.sum[p] / diag_data.count[p];
      model.covariance(diag_data.loc[p], diag_data.loc[p]) = val;
      diag_smooth(diag_data.loc[p]) = val;
    }
    model.options.cov_bandwidth = 0.0;
  } else {
    const double h_cov = options.smoothing == FitOptions::Smoothing::fixed
                             ? options.cov_bandwidth
                             : detail::choose_bandwidth_2d(cov_data, grid);
    if (!(h_cov > 0.0)) throw InvalidSpec("covariance bandwidth must be positive");
    model.covariance = detail::smooth_2d(cov_data, grid, h_cov);
    const double h_diag = detail::choose_bandwidth_1d(diag_data, grid);
    diag_smooth = detail::smooth_1d(diag_data, grid, h_diag);
    model.options.cov_bandwidth = h_cov;
  }

  // Error variance: the central average of the gap between the smoothed
  // diagonal and the surface diagonal. Both sides are smoothed with matched
  // per-pair weights: for every within-subject pair at grid distance d the
  // half squared residual difference has mean sigma_e^2 plus the signal
  // semivariance, which vanishes quadratically as d -> 0, so the intercept
  // of the two nearest band means in d^2 estimates the nugget with the
  // shared score realization cancelled. Falls back to the pointwise
  // diagonal gap when fewer than two near-diagonal bands carry data.
  {
    const double lo = grid(0) + (1.0 - options.error_center_fraction) / 2.0 * (grid(v - 1) - grid(0));
    const double hi = grid(v - 1) - (1.0 - options.error_center_fraction) / 2.0 * (grid(v - 1) - grid(0));
    constexpr int max_band = 4;
    double zsum[max_band + 1] = {0};
    double zcnt[max_band + 1] = {0};
    for (const auto& s : data.subjects) {
      const int m = static_cast<int>(s.indices.size());
      for (int a = 0; a < m; ++a)
        for (int b = a + 1; b < m; ++b) {
          const int d = s.indices[b] - s.indices[a];
          if (d > max_band) continue;
          const double mid = (grid(s.indices[a]) + grid(s.indices[b])) / 2.0;
          if (mid < lo - 1e-12 || mid > hi + 1e-12) continue;
          const double diff = (s.values[a] - model.mean(s.indices[a])) -
                              (s.values[b] - model.mean(s.indices[b]));
          zsum[d] += 0.5 * diff * diff;
          zcnt[d] += 1.0;
        }
    }
    int d1 = 0, d2 = 0;
    for (int d = 1; d <= max_band; ++d)
      if (zcnt[d] >= 10.0) {
        if (d1 == 0) {
          d1 = d;
        } else if (d2 == 0) {
          d2 = d;
          break;
        }
      }
    if (d2 > 0) {
      const double g1 = zsum[d1] / zcnt[d1];
      const double g2 = zsum[d2] / zcnt[d2];
      const double q1 = static_cast<double>(d1) * d1;
      const double q2 = static_cast<double>(d2) * d2;
      model.error_variance = std::max(0.0, (q2 * g1 - q1 * g2) / (q2 - q1));
    } else {
      double acc = 0.0;
      int cnt = 0;
      for (int j = 0; j < v; ++j)
        if (grid(j) >= lo - 1e-12 && grid(j) <= hi + 1e-12) {
          acc += diag_smooth(j) - model.covariance(j, j);
          ++cnt;
        }
      model.error_variance = cnt > 0 ? std::max(0.0, acc / cnt) : 0.0;
    }
  }
  if (raw) model.error_variance = 0.0;

  // Quadrature-weighted eigenproblem. With W the diagonal of trapezoid
  // weights, the symmetric problem W^1/2 S W^1/2 yields eigenfunctions that
  // are orthonormal under the quadrature inner product.
  model.covariance = ((model.covariance + model.covariance.transpose()) / 2.0).eval();
  {
    const double scale = std::max(1.0, model.mean.cwiseAbs().maxCoeff());
    if (model.covariance.cwiseAbs().maxCoeff() <= 1e-12 * scale * scale) {
      // Zero-variance data: a valid model with no components and no noise.
      model.covariance.setZero();
      model.eigenvalues.resize(0);
      model.eigenfunctions.resize(v, 0);
      model.error_variance = 0.0;
      model.fve = 1.0;
      return model;
    }
  }
  const Eigen::VectorXd w = detail::trapezoid_weights(grid);
  const Eigen::VectorXd sqrt_w = w.array().sqrt().matrix();
  const Eigen::MatrixXd b = sqrt_w.asDiagonal() * model.covariance * sqrt_w.asDiagonal();
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(b);
  if (es.info() != Eigen::Success) throw DegenerateCovariance("covariance eigendecomposition failed");

  std::vector<std::pair<double, int>> order;
  for (int m = 0; m < v; ++m)
    if (es.eigenvalues()(m) > 0.0) order.emplace_back(es.eigenvalues()(m), m);
  std::sort(order.begin(), order.end(), [](const auto& a, const auto& b2) {
    return a.first != b2.first ? a.first > b2.first : a.second < b2.second;
  });

  if (order.empty())
    throw DegenerateCovariance("no positive eigenvalues in the smoothed covariance");

  double total = 0.0;
  for (const auto& [lam, _] : order) total += lam;
  int m_count;
  if (options.fixed_components > 0) {
    m_count = std::min<int>(options.fixed_components, static_cast<int>(order.size()));
  } else {
    m_count = static_cast<int>(order.size());
    double cum = 0.0;
    for (std::size_t m = 0; m < order.size(); ++m) {
      cum += order[m].first;
      if (cum / total >= options.fve_threshold) {
        m_count = static_cast<int>(m) + 1;
        break;
      }
    }
  }
  m_count = std::min(m_count, options.max_components);

  model.eigenvalues.resize(m_count);
  model.eigenfunctions.resize(v, m_count);
  double cum = 0.0;
  for (int m = 0; m < m_count; ++m) {
    model.eigenvalues(m) = order[m].first;
    cum += order[m].first;
    Eigen::VectorXd psi = es.eigenvectors().col(order[m].second).cwiseQuotient(sqrt_w);
    // Deterministic sign: positive value at the first grid point, falling
    // back to the largest-magnitude coordinate when that value is negligible.
    double ref = psi(0);
    if (std::abs(ref) <= 1e-8 * psi.cwiseAbs().maxCoeff()) {
      int arg = 0;
      psi.cwiseAbs().maxCoeff(&arg);
      ref = psi(arg);
    }
    if (ref < 0.0) psi = -psi;
    model.eigenfunctions.col(m) = psi;
  }
  model.fve = cum / total;
  return model;
}

// Conditional-expectation score estimates for one subject given the model:
// lambda_m * psi_im' * Sigma_Ui^-1 * (U_i - mu_i).
inline Eigen::VectorXd predict_scores(const FpcaModel& model, const std::vector<int>& indices,
                                      const Eigen::VectorXd& values) {
  const int k = static_cast<int>(indices.size());
  if (k != values.size()) throw ShapeMismatch("index/value lengths differ");
  for (int a = 0; a < k; ++a) {
    if (indices[a] < 0 || indices[a] >= model.grid_size())
      throw ShapeMismatch("observation index outside the model grid");
    if (a > 0 && indices[a] <= indices[a - 1])
      throw DuplicateObservation("observation indices must be strictly increasing");
  }
  const int m = model.components();
  if (m == 0) return Eigen::VectorXd(0);
  if (k == 0) return Eigen::VectorXd::Zero(m);

  Eigen::MatrixXd psi(k, m);
  Eigen::VectorXd resid(k);
  for (int a = 0; a < k; ++a) {
    psi.row(a) = model.eigenfunctions.row(indices[a]);
    resid(a) = values(a) - model.mean(indices[a]);
  }
  Eigen::MatrixXd sigma_u = psi * model.eigenvalues.asDiagonal() * psi.transpose();
  sigma_u.diagonal().array() += model.error_variance;

  detail::SpdSolver solver;
  solver.factor(sigma_u, model.options.ridge_scale, model.options.condition_limit);
  return model.eigenvalues.asDiagonal() * psi.transpose() * solver.solve(resid);
}

// Trajectory recovery on the grid from a score vector.
inline Eigen::VectorXd recover_trajectory(const FpcaModel& model, const Eigen::VectorXd& scores) {
  if (scores.size() != model.components())
    throw ShapeMismatch("score length does not match the component count");
  return model.mean + model.eigenfunctions * scores;
}

}  // namespace pilotdesign
