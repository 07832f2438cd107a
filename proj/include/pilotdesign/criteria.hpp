#pragma once

#include <Eigen/Dense>
#include <cmath>
#include <string>
#include <utility>
#include <vector>

#include "pilotdesign/fpca.hpp"
#include "pilotdesign/types.hpp"

namespace pilotdesign {

// Repeated evaluation of the next-study design criterion
//   F(t) = tr{ L P(t)' [P(t) L P(t)' + sigma_e^2 I]^-1 P(t) L }
// for one model, with the kernel matrix P L P' gathered from a precomputed
// v x v table. L is the diagonal of eigenvalues, P(t) the K x M matrix of
// eigenfunction values at the candidate points.
class FCriterion {
 public:
  explicit FCriterion(const FpcaModel& model)
      : model_(&model),
        weighted_(model.eigenfunctions * model.eigenvalues.asDiagonal()),
        kernel_(weighted_ * model.eigenfunctions.transpose()) {}

  double operator()(const CandidateDesign& t) const {
    const int k = static_cast<int>(t.size());
    if (k == 0) return 0.0;
    const int m = model_->components();
    if (m == 0) return 0.0;

    Eigen::MatrixXd s(k, k);
    Eigen::MatrixXd b(k, m);
    for (int a = 0; a < k; ++a) {
      b.row(a) = weighted_.row(t[a]);
      for (int c = 0; c < k; ++c) s(a, c) = kernel_(t[a], t[c]);
    }
    s.diagonal().array() += model_->error_variance;

    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(s);
    if (es.info() != Eigen::Success) throw SingularConditioning("criterion eigendecomposition failed");
    const double dmax = es.eigenvalues()(k - 1);
    const double dmin = es.eigenvalues()(0);
    if (!(dmax > 0.0)) {
      if (b.cwiseAbs().maxCoeff() == 0.0) return 0.0;  // no signal at these points
      throw SingularConditioning("criterion conditioning matrix is not positive");
    }
    double shift = 0.0;
    if (dmin <= 0.0 || dmax / dmin > model_->options.condition_limit) {
      shift = model_->options.ridge_scale * s.trace() / k;
      if (dmin + shift <= dmax * 1e-15)
        throw SingularConditioning("ridge failed to stabilize the criterion matrix");
    }
    const Eigen::MatrixXd bt = es.eigenvectors().transpose() * b;
    const Eigen::VectorXd inv_d = (es.eigenvalues().array() + shift).inverse().matrix();
    return (bt.array().square().rowwise().sum() * inv_d.array()).sum();
  }

 private:
  const FpcaModel* model_;
  Eigen::MatrixXd weighted_;  // Psi * Lambda, v x M
  Eigen::MatrixXd kernel_;    // Psi * Lambda * Psi', v x v
};

inline double f_value(const FpcaModel& model, const CandidateDesign& t) {
  validate_candidate(t, model.grid_size());
  return FCriterion(model)(t);
}

// MISE(t) = tr(Lambda) - F(t): the unexplained variance of the best
// predictor for a new subject observed at t.
inline double mise(const FpcaModel& model, const CandidateDesign& t) {
  return model.eigenvalues.sum() - f_value(model, t);
}

struct RrmseResult {
  double value = 0.0;
  int excluded = 0;  // subjects dropped for a near-zero denominator
};

// Subject-normalized trajectory-recovery error: for each subject the squared
// error at its observed points over its squared signal, averaged over
// subjects, square-rooted. Subjects whose denominator falls below 1e-12 are
// excluded and counted.
inline RrmseResult rrmse(const std::vector<Eigen::VectorXd>& truth,
                         const std::vector<Eigen::VectorXd>& fitted) {
  if (truth.size() != fitted.size()) throw ShapeMismatch("subject count mismatch");
  double acc = 0.0;
  int used = 0, excluded = 0;
  for (std::size_t i = 0; i < truth.size(); ++i) {
    if (truth[i].size() != fitted[i].size()) throw ShapeMismatch("per-subject length mismatch");
    const double denom = truth[i].squaredNorm();
    if (denom < 1e-12) {
      ++excluded;
      continue;
    }
    acc += (truth[i] - fitted[i]).squaredNorm() / denom;
    ++used;
  }
  if (used == 0) throw InsufficientData("every subject had a near-zero signal norm");
  return {std::sqrt(acc / used), excluded};
}

inline double composite(double are_value, double rrmse_value, double weight = 0.5) {
  if (weight < 0.0 || weight > 1.0) throw InvalidSpec("composite weight must lie in [0, 1]");
  return weight * are_value + (1.0 - weight) * rrmse_value;
}

struct AreResult {
  double are = 0.0;
  CandidateDesign t_opt;   // argmax of the estimated criterion
  CandidateDesign t_star;  // argmax of the true criterion
  double f_at_opt = 0.0;   // true criterion at t_opt
  double f_at_star = 0.0;  // true criterion at t_star
};

// Absolute relative error of the true criterion at the surrogate optimum:
// |F(t_opt) - F(t*)| / F(t*). The searcher maps a model to its argmax
// design; the same searcher is applied to both models.
template <class Searcher>
AreResult are_with(const FpcaModel& estimated, const FpcaModel& truth, Searcher&& searcher) {
  AreResult r;
  r.t_opt = searcher(estimated);
  r.t_star = searcher(truth);
  const FCriterion f_true(truth);
  r.f_at_opt = f_true(r.t_opt);
  r.f_at_star = f_true(r.t_star);
  if (!(r.f_at_star > 0.0)) throw ZeroTrueOptimum("true criterion optimum is zero");
  r.are = std::abs(r.f_at_opt - r.f_at_star) / r.f_at_star;
  return r;
}

struct CriterionReport {
  double are = 0.0;
  double rrmse = 0.0;
  double composite = 0.0;
  CandidateDesign t_opt;
  CandidateDesign t_star;
  double f_at_opt = 0.0;
  double f_at_star = 0.0;
};

}  // namespace pilotdesign
