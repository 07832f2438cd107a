#include <catch2/catch_amalgamated.hpp>

#include <Eigen/Dense>
#include <cmath>

#include "pilotdesign/design.hpp"
#include "pilotdesign/fpca.hpp"
#include "pilotdesign/simulate.hpp"

using namespace pilotdesign;

namespace {

IncidenceMatrix full_design(int n, int v) {
  IncidenceMatrix m(n, v, DesignStructure::random);
  for (auto& c : m.cells) c = 1;
  return m;
}

double quad_inner(const FpcaModel& m, int col, const Eigen::VectorXd& other) {
  const Eigen::VectorXd w = detail::trapezoid_weights(m.grid);
  return (m.eigenfunctions.col(col).array() * w.array() * other.array()).sum();
}

}  // namespace

TEST_CASE("dense noiseless two-component data recovers the generator") {
  SimConfig cfg;
  cfg.n_components = 2;
  cfg.error_variance = 0.0;
  cfg.master_seed = 8;
  const DenseSim ds = simulate_dataset(cfg, 1, 200);
  const FpcaModel fit = fit_pace(sparsify(ds.noisy, cfg.grid(), full_design(200, 25)));
  const FpcaModel truth = cfg.true_model();

  REQUIRE(fit.components() >= 2);
  CHECK(std::abs(fit.eigenvalues(0) / truth.eigenvalues(0) - 1.0) < 0.05);
  CHECK(std::abs(fit.eigenvalues(1) / truth.eigenvalues(1) - 1.0) < 0.05);
  CHECK(std::abs(quad_inner(fit, 0, truth.eigenfunctions.col(0))) >= 0.99);
  CHECK(std::abs(quad_inner(fit, 1, truth.eigenfunctions.col(1))) >= 0.99);
}

TEST_CASE("constant curves give a flat mean and no components") {
  SparseDataset data;
  data.grid = {0.0, 0.25, 0.5, 0.75, 1.0};
  for (int i = 0; i < 8; ++i) {
    SparseDataset::Subject s;
    s.indices = {0, 1, 2, 3, 4};
    s.values = {3.5, 3.5, 3.5, 3.5, 3.5};
    data.subjects.push_back(s);
  }
  const FpcaModel fit = fit_pace(data);
  for (int j = 0; j < 5; ++j) CHECK(fit.mean(j) == Catch::Approx(3.5).margin(1e-9));
  CHECK(fit.error_variance == 0.0);
  CHECK(fit.components() == 0);

  // Degenerate follow-ons behave: empty scores, recovery returns the mean.
  const Eigen::VectorXd scores = predict_scores(fit, {0, 2}, Eigen::Vector2d(3.5, 3.5));
  CHECK(scores.size() == 0);
  CHECK((recover_trajectory(fit, scores) - fit.mean).norm() == 0.0);
}

TEST_CASE("error variance is recovered from sparse snippet data") {
  SimConfig cfg;
  cfg.master_seed = 1;
  const DenseSim ds = simulate_dataset(cfg, 1, 240);
  DesignSpec sp;
  sp.n_subjects = 240;
  sp.grid_size = 25;
  sp.obs_per_subject = 5;
  sp.seed = 1;
  const FpcaModel fit = fit_pace(sparsify(ds.noisy, cfg.grid(), generate_snippet_design(sp)));
  CHECK(std::abs(fit.error_variance / 0.96875 - 1.0) <= 0.30);
}

TEST_CASE("raw-moment fit matches a direct eigendecomposition oracle") {
  // Dense noiseless curves on a 5-point grid from a hand-built 2-component
  // model; no smoothing anywhere, so the fitted eigenpairs must agree with
  // the direct weighted eigendecomposition of the sample covariance.
  const int v = 5, n = 60;
  SparseDataset data;
  data.grid = {0.0, 0.25, 0.5, 0.75, 1.0};
  Eigen::VectorXd g(v);
  for (int j = 0; j < v; ++j) g(j) = data.grid[j];

  Eigen::MatrixXd basis(v, 2);
  for (int j = 0; j < v; ++j) {
    basis(j, 0) = std::sin(6.283185307179586 * g(j)) + 0.3;
    basis(j, 1) = std::cos(6.283185307179586 * g(j)) - 0.1 * g(j);
  }
  Rng rng(424242);
  Eigen::MatrixXd x(n, v);
  for (int i = 0; i < n; ++i) {
    const double s1 = 2.0 * rng.next_normal();
    const double s2 = 0.8 * rng.next_normal();
    for (int j = 0; j < v; ++j) x(i, j) = 1.0 + g(j) + s1 * basis(j, 0) + s2 * basis(j, 1);
  }
  for (int i = 0; i < n; ++i) {
    SparseDataset::Subject s;
    for (int j = 0; j < v; ++j) {
      s.indices.push_back(j);
      s.values.push_back(x(i, j));
    }
    data.subjects.push_back(s);
  }

  FitOptions opt;
  opt.smoothing = FitOptions::Smoothing::none;
  const FpcaModel fit = fit_pace(data, opt);

  // Oracle: weighted eigenproblem on the plain sample covariance.
  const Eigen::VectorXd mean = x.colwise().mean();
  Eigen::MatrixXd centered = x.rowwise() - mean.transpose();
  const Eigen::MatrixXd cov = centered.transpose() * centered / n;
  const Eigen::VectorXd w = detail::trapezoid_weights(g);
  const Eigen::VectorXd sw = w.array().sqrt().matrix();
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(sw.asDiagonal() * cov * sw.asDiagonal());

  REQUIRE(fit.components() >= 2);
  for (int m = 0; m < 2; ++m) {
    const double oracle_lambda = es.eigenvalues()(v - 1 - m);
    CHECK(fit.eigenvalues(m) == Catch::Approx(oracle_lambda).margin(1e-6));
    Eigen::VectorXd oracle_psi = es.eigenvectors().col(v - 1 - m).cwiseQuotient(sw);
    const double align = (fit.eigenfunctions.col(m).array() * w.array() * oracle_psi.array()).sum();
    CHECK(std::abs(align) == Catch::Approx(1.0).margin(1e-6));
  }
  CHECK((fit.mean - mean).cwiseAbs().maxCoeff() < 1e-12);
}

TEST_CASE("score prediction matches the closed scalar form") {
  FpcaModel model;
  model.grid = Eigen::Vector2d(0.0, 1.0);
  model.mean = Eigen::Vector2d(1.0, 2.0);
  model.eigenvalues = Eigen::VectorXd::Constant(1, 5.0);
  model.eigenfunctions = Eigen::MatrixXd(2, 1);
  model.eigenfunctions << std::sqrt(2.0), -std::sqrt(2.0);
  model.error_variance = 0.96875;
  model.covariance = model.eigenfunctions * model.eigenvalues.asDiagonal() *
                     model.eigenfunctions.transpose();

  const double u = 3.25;
  const Eigen::VectorXd scores = predict_scores(model, {0}, Eigen::VectorXd::Constant(1, u));
  REQUIRE(scores.size() == 1);
  const double psi = std::sqrt(2.0);
  const double expected = 5.0 * psi * (u - 1.0) / (5.0 * psi * psi + 0.96875);
  CHECK(scores(0) == Catch::Approx(expected).epsilon(1e-12));

  // Observations equal to the mean give zero scores.
  const Eigen::VectorXd zero = predict_scores(model, {0, 1}, Eigen::Vector2d(1.0, 2.0));
  CHECK(zero.cwiseAbs().maxCoeff() == 0.0);
}

TEST_CASE("noiseless full observation is interpolated") {
  SimConfig cfg;
  FpcaModel model = cfg.true_model();
  model.error_variance = 0.0;

  std::vector<int> idx(25);
  for (int j = 0; j < 25; ++j) idx[j] = j;

  // The conditioning matrix is exactly rank-5 here, so the ridge activates;
  // its scale (1e-8 of the mean eigenvalue) bounds the achievable residual.
  for (int seed = 1; seed <= 10; ++seed) {
    Rng rng(seed);
    Eigen::VectorXd scores(5);
    for (int m = 0; m < 5; ++m) scores(m) = std::sqrt(model.eigenvalues(m)) * rng.next_normal();
    const Eigen::VectorXd u = model.mean + model.eigenfunctions * scores;
    const Eigen::VectorXd recovered = recover_trajectory(model, predict_scores(model, idx, u));
    const double err = (recovered - u).cwiseAbs().maxCoeff();
    CHECK(err < 5e-8);
    if (seed == 2) CHECK(err < 1e-8);
  }
}

TEST_CASE("trajectory recovery is the affine score map") {
  SimConfig cfg;
  const FpcaModel model = cfg.true_model();

  CHECK((recover_trajectory(model, Eigen::VectorXd::Zero(5)) - model.mean).norm() == 0.0);

  Rng rng(11);
  Eigen::VectorXd s1(5), s2(5);
  for (int m = 0; m < 5; ++m) {
    s1(m) = rng.next_normal();
    s2(m) = rng.next_normal();
  }
  const double a = 0.7, b = -1.3;
  const Eigen::VectorXd lhs = recover_trajectory(model, a * s1 + b * s2);
  const Eigen::VectorXd rhs = a * recover_trajectory(model, s1) +
                              b * recover_trajectory(model, s2) -
                              (a + b - 1.0) * model.mean;
  CHECK((lhs - rhs).cwiseAbs().maxCoeff() < 1e-10);

  CHECK_THROWS_AS(recover_trajectory(model, Eigen::VectorXd::Zero(3)), ShapeMismatch);
}

TEST_CASE("fitted eigenfunctions are quadrature-orthonormal and the fit is deterministic") {
  SimConfig cfg;
  cfg.master_seed = 21;
  const DenseSim ds = simulate_dataset(cfg, 1, 120);
  DesignSpec sp;
  sp.n_subjects = 120;
  sp.grid_size = 25;
  sp.obs_per_subject = 5;
  sp.seed = 3;
  const SparseDataset data = sparsify(ds.noisy, cfg.grid(), generate_random_design(sp));

  const FpcaModel fit = fit_pace(data);
  const Eigen::VectorXd w = detail::trapezoid_weights(fit.grid);
  const Eigen::MatrixXd gram =
      fit.eigenfunctions.transpose() * w.asDiagonal() * fit.eigenfunctions;
  CHECK((gram - Eigen::MatrixXd::Identity(fit.components(), fit.components()))
            .cwiseAbs()
            .maxCoeff() < 1e-6);

  const FpcaModel again = fit_pace(data);
  CHECK(fit.mean == again.mean);
  CHECK(fit.covariance == again.covariance);
  CHECK(fit.eigenvalues == again.eigenvalues);
  CHECK(fit.eigenfunctions == again.eigenfunctions);
  CHECK(fit.error_variance == again.error_variance);
}

TEST_CASE("scores stay bounded and shrink as the error variance grows") {
  SimConfig cfg;
  FpcaModel model = cfg.true_model();

  const std::vector<int> idx = {2, 7, 12, 17, 22};
  Rng rng(5);
  for (int rep = 0; rep < 10; ++rep) {
    Eigen::VectorXd u(5);
    for (int a = 0; a < 5; ++a) u(a) = model.mean(idx[a]) + 3.0 * rng.next_normal();

    double previous = std::numeric_limits<double>::infinity();
    for (const double s2 : {0.05, 0.2, 0.96875, 3.0, 10.0}) {
      model.error_variance = s2;
      const Eigen::VectorXd scores = predict_scores(model, idx, u);

      Eigen::MatrixXd psi(5, 5);
      Eigen::VectorXd resid(5);
      for (int a = 0; a < 5; ++a) {
        psi.row(a) = model.eigenfunctions.row(idx[a]);
        resid(a) = u(a) - model.mean(idx[a]);
      }
      Eigen::MatrixXd sigma_u = psi * model.eigenvalues.asDiagonal() * psi.transpose();
      sigma_u.diagonal().array() += s2;
      Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(sigma_u);
      const double inv_norm = 1.0 / es.eigenvalues()(0);
      for (int m = 0; m < scores.size(); ++m) {
        const double bound = model.eigenvalues(m) * psi.col(m).norm() * inv_norm * resid.norm();
        CHECK(std::abs(scores(m)) <= bound + 1e-12);
      }

      CHECK(scores.norm() <= previous + 1e-12);
      previous = scores.norm();
    }
  }
}

TEST_CASE("insufficient data is rejected") {
  SparseDataset one;
  one.grid = {0.0, 0.5, 1.0};
  one.subjects.resize(1);
  one.subjects[0].indices = {0, 1};
  one.subjects[0].values = {1.0, 2.0};
  CHECK_THROWS_AS(fit_pace(one), InsufficientData);

  SparseDataset narrow;
  narrow.grid = {0.0, 0.5, 1.0};
  narrow.subjects.resize(3);
  for (auto& s : narrow.subjects) {
    s.indices = {1};
    s.values = {2.0};
  }
  CHECK_THROWS_AS(fit_pace(narrow), InsufficientData);
}
