#pragma once

#include <Eigen/Dense>
#include <atomic>
#include <cmath>
#include <cstdint>
#include <cstdio>
#include <string>
#include <thread>
#include <vector>

#include "pilotdesign/criteria.hpp"
#include "pilotdesign/design.hpp"
#include "pilotdesign/fpca.hpp"
#include "pilotdesign/hybrid.hpp"
#include "pilotdesign/rng.hpp"
#include "pilotdesign/search.hpp"
#include "pilotdesign/types.hpp"

namespace pilotdesign {

// Synthetic-data generator and experiment protocol settings. The generating
// model is a five-component Fourier expansion around mu(t) = t + sin(t) on
// an equally spaced grid over [0, 1]; eigenvalues default to 10/2^m with the
// error variance chosen for a signal-to-noise ratio of 10.
struct SimConfig {
  int grid_size = 25;
  int n_components = 5;
  Eigen::VectorXd eigenvalues;  // empty => 10/2^m defaults
  double error_variance = 0.96875;
  int n_datasets = 10;
  int n_designs_per_structure = 20;
  std::vector<int> subject_counts = {50, 60, 70, 80, 90, 100, 110, 120, 130, 140,
                                     150, 160, 170, 180, 190, 200, 210, 220, 230, 240};
  std::uint64_t master_seed = 0;

  std::vector<DesignStructure> structures = {DesignStructure::bibd, DesignStructure::random,
                                             DesignStructure::hybrid};
  int obs_per_subject = 5;
  double snippet_frac = 0.2;
  double concurrence_tol = 1.0;
  int snippet_gap = 2;
  std::vector<double> thresholds = {0.99, 0.97, 0.95};
  double composite_weight = 0.5;
  FitOptions fit;
  SearchMethod search;
  double max_failure_fraction = 0.1;

  Eigen::VectorXd lambdas() const {
    if (eigenvalues.size() > 0) return eigenvalues;
    Eigen::VectorXd lam(n_components);
    for (int m = 0; m < n_components; ++m) lam(m) = 10.0 / std::pow(2.0, m + 1);
    return lam;
  }

  Eigen::VectorXd grid() const {
    Eigen::VectorXd g(grid_size);
    for (int j = 0; j < grid_size; ++j) g(j) = static_cast<double>(j) / (grid_size - 1);
    return g;
  }

  Eigen::VectorXd mean_curve() const {
    const Eigen::VectorXd g = grid();
    return g.array() + g.array().sin();
  }

  // First n_components of the Fourier system sqrt(2)*{sin 2pi t, cos 2pi t,
  // sin 4pi t, cos 4pi t, sin 6pi t, ...} evaluated on the grid.
  Eigen::MatrixXd eigenfunction_matrix() const {
    const Eigen::VectorXd g = grid();
    Eigen::MatrixXd psi(grid_size, n_components);
    constexpr double two_pi = 6.283185307179586476925287;
    const double root2 = std::sqrt(2.0);
    for (int m = 0; m < n_components; ++m) {
      const double freq = two_pi * (m / 2 + 1);
      for (int j = 0; j < grid_size; ++j)
        psi(j, m) = root2 * (m % 2 == 0 ? std::sin(freq * g(j)) : std::cos(freq * g(j)));
    }
    return psi;
  }

  FpcaModel true_model() const {
    FpcaModel m;
    m.grid = grid();
    m.mean = mean_curve();
    m.eigenvalues = lambdas();
    m.eigenfunctions = eigenfunction_matrix();
    m.covariance = m.eigenfunctions * m.eigenvalues.asDiagonal() * m.eigenfunctions.transpose();
    m.error_variance = error_variance;
    m.fve = 1.0;
    m.options = fit;
    return m;
  }

  void validate() const {
    if (grid_size < 2) throw InvalidSpec("grid size must be at least 2");
    if (n_components < 1 || n_components > 5)
      throw InvalidSpec("the generator supports 1 to 5 components");
    if (eigenvalues.size() > 0 && eigenvalues.size() != n_components)
      throw InvalidSpec("eigenvalue override must match the component count");
    const Eigen::VectorXd lam = lambdas();
    for (int m = 0; m < lam.size(); ++m) {
      if (!(lam(m) > 0.0)) throw InvalidSpec("eigenvalues must be positive");
      if (m > 0 && lam(m) > lam(m - 1)) throw InvalidSpec("eigenvalues must be non-increasing");
    }
    if (error_variance < 0.0) throw InvalidSpec("error variance must be non-negative");
    if (n_datasets < 1 || n_designs_per_structure < 1)
      throw InvalidSpec("dataset and design counts must be positive");
    if (subject_counts.empty()) throw InvalidSpec("subject counts must not be empty");
    if (structures.empty()) throw InvalidSpec("structure list must not be empty");
    if (obs_per_subject < 2 || obs_per_subject > grid_size)
      throw InvalidSpec("observations per subject must lie in [2, grid size]");
    for (const double th : thresholds)
      if (!(th > 0.0 && th <= 1.0)) throw InvalidSpec("thresholds must lie in (0, 1]");
    if (max_failure_fraction < 0.0 || max_failure_fraction > 1.0)
      throw InvalidSpec("failure tolerance must lie in [0, 1]");
  }

  // Generator sanity, asserted once per experiment run: the eigenfunctions
  // must be near-orthonormal under the grid quadrature, and the default
  // eigenvalue/error-variance pair must reproduce the design SNR of 10.
  void assert_generator_invariants() const {
    const Eigen::VectorXd w = detail::trapezoid_weights(grid());
    const Eigen::MatrixXd psi = eigenfunction_matrix();
    const Eigen::MatrixXd gram = psi.transpose() * w.asDiagonal() * psi;
    const double err =
        (gram - Eigen::MatrixXd::Identity(n_components, n_components)).cwiseAbs().maxCoeff();
    if (err > 1e-3)
      throw InvalidSpec("generator eigenfunctions deviate from orthonormality by " + std::to_string(err));
    if (eigenvalues.size() == 0 && n_components == 5 && error_variance == 0.96875) {
      const double snr = lambdas().sum() / error_variance;
      if (std::abs(snr - 10.0) > 1e-6) throw InvalidSpec("generator SNR drifted from 10");
    }
  }
};

struct DenseSim {
  Eigen::MatrixXd truth;  // n x v underlying curves X_i
  Eigen::MatrixXd noisy;  // n x v observations U_i
};

// Draws n subjects of dataset `dataset_id`: scores xi_im ~ N(0, lambda_m),
// X_i = mu + sum xi_im psi_m, U_i = X_i + N(0, sigma_e^2) noise. Every
// subject has its own named stream, so prefixes of a dataset coincide for
// any requested subject count.
inline DenseSim simulate_dataset(const SimConfig& config, int dataset_id, int n_subjects) {
  config.validate();
  const Eigen::VectorXd mu = config.mean_curve();
  const Eigen::MatrixXd psi = config.eigenfunction_matrix();
  const Eigen::VectorXd lam_sqrt = config.lambdas().array().sqrt().matrix();
  const double noise_sd = std::sqrt(config.error_variance);
  const int v = config.grid_size;

  DenseSim out;
  out.truth.resize(n_subjects, v);
  out.noisy.resize(n_subjects, v);
  for (int i = 0; i < n_subjects; ++i) {
    Rng rng = make_stream(config.master_seed, "subject", dataset_id, i);
    Eigen::VectorXd scores(config.n_components);
    for (int m = 0; m < config.n_components; ++m) scores(m) = lam_sqrt(m) * rng.next_normal();
    const Eigen::VectorXd x = mu + psi * scores;
    out.truth.row(i) = x.transpose();
    for (int j = 0; j < v; ++j) out.noisy(i, j) = x(j) + noise_sd * rng.next_normal();
  }
  return out;
}

// Keeps, for each design row, exactly the observations at the selected grid
// points of the corresponding dense subject.
inline SparseDataset sparsify(const Eigen::MatrixXd& noisy, const Eigen::VectorXd& grid,
                              const IncidenceMatrix& design) {
  if (noisy.cols() != grid.size() || design.grid_size != grid.size())
    throw ShapeMismatch("design grid size does not match the data grid");
  if (design.n_subjects > noisy.rows())
    throw ShapeMismatch("design has more subjects than the dense data");
  SparseDataset data;
  data.grid.assign(grid.data(), grid.data() + grid.size());
  data.subjects.resize(design.n_subjects);
  for (int i = 0; i < design.n_subjects; ++i) {
    auto& s = data.subjects[i];
    for (int j = 0; j < design.grid_size; ++j)
      if (design(i, j)) {
        s.indices.push_back(j);
        s.values.push_back(noisy(i, j));
      }
  }
  return data;
}

struct ExperimentRecord {
  std::string structure;
  int n_subjects = 0;
  int dataset_id = 0;  // -1 marks an across-dataset mean (a box-plot point)
  int design_id = 0;
  std::string metric;
  double value = 0.0;
};

struct ExperimentResult {
  std::vector<ExperimentRecord> records;
  int total_cells = 0;
  int failed_cells = 0;
};

namespace detail {

inline std::string format_theta(double theta) {
  char buf[32];
  std::snprintf(buf, sizeof(buf), "%g", theta);
  return buf;
}

inline int resolve_threads(int requested) {
  if (requested > 0) return requested;
  if (const char* env = std::getenv("PILOTDESIGN_THREADS")) {
    const int n = std::atoi(env);
    if (n > 0) return n;
  }
  const unsigned hw = std::thread::hardware_concurrency();
  return hw > 0 ? static_cast<int>(hw) : 1;
}

template <class Fn>
void parallel_for(int n_items, int n_threads, Fn&& fn) {
  n_threads = std::min(std::max(1, n_threads), std::max(1, n_items));
  if (n_threads == 1) {
    for (int i = 0; i < n_items; ++i) fn(i);
    return;
  }
  std::atomic<int> next{0};
  std::vector<std::thread> workers;
  workers.reserve(n_threads);
  for (int t = 0; t < n_threads; ++t)
    workers.emplace_back([&] {
      for (;;) {
        const int i = next.fetch_add(1);
        if (i >= n_items) return;
        fn(i);
      }
    });
  for (auto& w : workers) w.join();
}

// Generates a pilot design of the requested structure for one (n, design_id)
// slot, all randomness drawn from named streams of the master seed.
inline IncidenceMatrix generate_structure(const SimConfig& config, DesignStructure structure,
                                          int n_subjects, int design_id) {
  DesignSpec spec;
  spec.n_subjects = n_subjects;
  spec.grid_size = config.grid_size;
  spec.obs_per_subject = config.obs_per_subject;
  spec.snippet_frac = config.snippet_frac;
  spec.concurrence_tol = config.concurrence_tol;
  spec.snippet_gap = config.snippet_gap;
  spec.seed = derive_seed(config.master_seed, "design", to_string(structure), n_subjects, design_id);
  switch (structure) {
    case DesignStructure::random:
      return generate_random_design(spec);
    case DesignStructure::snippet:
      return generate_snippet_design(spec);
    case DesignStructure::bibd: {
      const IncidenceMatrix base = generate_bibd(spec.seed);
      return extend_design(base, n_subjects, derive_seed(spec.seed, "extend"));
    }
    case DesignStructure::hybrid:
      return generate_hybrid_design(spec);
  }
  throw InvalidSpec("unknown design structure");
}

// Everything fixed across cells of one experiment run.
struct TrueContext {
  const FpcaModel* model = nullptr;
  const ExhaustiveScan* scan = nullptr;
  const FCriterion* criterion = nullptr;
};

// Fits the pilot model on one sparsified cell and computes every metric.
// noisy/truth hold the selected subjects' rows; truth rows are the
// trajectories the recovery is judged against.
inline std::vector<std::pair<std::string, double>> evaluate_cell(
    const Eigen::MatrixXd& noisy, const Eigen::MatrixXd& truth, const Eigen::VectorXd& grid,
    const IncidenceMatrix& design, const SimConfig& config, const TrueContext& ctx) {
  const SparseDataset sparse = sparsify(noisy, grid, design);
  const FpcaModel model = fit_pace(sparse, config.fit);

  std::vector<std::pair<std::string, double>> out;
  const int k = config.obs_per_subject;

  CandidateDesign t_opt;
  double f_at_opt = 0.0;
  ExhaustiveScan est_scan;
  const bool exhaustive = config.search.kind == SearchMethod::Kind::exhaustive;
  if (exhaustive) {
    est_scan = scan_criterion(model, k);
    t_opt = est_scan.design_at(est_scan.best_rank);
  } else {
    t_opt = search_optimal(model, k, config.search).best;
  }
  f_at_opt = (*ctx.criterion)(t_opt);
  const double f_at_star = ctx.scan->f_best;
  if (!(f_at_star > 0.0)) throw ZeroTrueOptimum("true criterion optimum is zero");
  const double are_value = std::abs(f_at_opt - f_at_star) / f_at_star;

  std::vector<Eigen::VectorXd> truth_obs(sparse.subjects.size());
  std::vector<Eigen::VectorXd> fitted_obs(sparse.subjects.size());
  for (std::size_t i = 0; i < sparse.subjects.size(); ++i) {
    const auto& s = sparse.subjects[i];
    Eigen::VectorXd values(s.values.size());
    for (std::size_t a = 0; a < s.values.size(); ++a) values(a) = s.values[a];
    const Eigen::VectorXd scores = predict_scores(model, s.indices, values);
    const Eigen::VectorXd curve = recover_trajectory(model, scores);
    truth_obs[i].resize(s.indices.size());
    fitted_obs[i].resize(s.indices.size());
    for (std::size_t a = 0; a < s.indices.size(); ++a) {
      truth_obs[i](a) = truth(static_cast<int>(i), s.indices[a]);
      fitted_obs[i](a) = curve(s.indices[a]);
    }
  }
  const RrmseResult rr = rrmse(truth_obs, fitted_obs);

  out.emplace_back("are", are_value);
  out.emplace_back("rrmse", rr.value);
  out.emplace_back("composite", composite(are_value, rr.value, config.composite_weight));
  out.emplace_back("f_at_opt", f_at_opt);
  out.emplace_back("f_at_star", f_at_star);
  if (rr.excluded > 0) out.emplace_back("rrmse_excluded", rr.excluded);

  if (exhaustive) {
    for (const double theta : config.thresholds) {
      const ThresholdReport rep = threshold_analysis_scanned(est_scan, *ctx.scan, theta);
      out.emplace_back("eff_worst_" + format_theta(theta), rep.eff_true_worst);
      out.emplace_back("eff_median_" + format_theta(theta), rep.eff_true_median);
    }
  }
  return out;
}

struct CellTask {
  int structure_idx, n_idx, design_idx, dataset_idx;
};

// Shared driver for the synthetic and real-data protocols. The callback
// provides the (noisy, truth) rows of a given (n, dataset) pair.
template <class RowsFn>
ExperimentResult run_protocol(const SimConfig& config, const Eigen::VectorXd& grid,
                              const TrueContext& ctx, RowsFn&& rows_of, int n_threads) {
  // Designs are generated once per (structure, n, design_id) and reused
  // across datasets; a failed construction fails all its cells.
  struct DesignSlot {
    IncidenceMatrix design;
    bool ok = false;
    std::string error;
  };
  const int n_structures = static_cast<int>(config.structures.size());
  const int n_counts = static_cast<int>(config.subject_counts.size());
  const int n_designs = config.n_designs_per_structure;
  std::vector<DesignSlot> slots(static_cast<std::size_t>(n_structures) * n_counts * n_designs);
  const auto slot_index = [&](int s, int ni, int g) {
    return (static_cast<std::size_t>(s) * n_counts + ni) * n_designs + g;
  };
  for (int s = 0; s < n_structures; ++s)
    for (int ni = 0; ni < n_counts; ++ni)
      for (int g = 0; g < n_designs; ++g) {
        DesignSlot& slot = slots[slot_index(s, ni, g)];
        try {
          slot.design = generate_structure(config, config.structures[s],
                                           config.subject_counts[ni], g + 1);
          slot.ok = true;
        } catch (const Error& e) {
          slot.error = e.what();
        }
      }

  std::vector<CellTask> tasks;
  for (int s = 0; s < n_structures; ++s)
    for (int ni = 0; ni < n_counts; ++ni)
      for (int g = 0; g < n_designs; ++g)
        for (int d = 0; d < config.n_datasets; ++d) tasks.push_back({s, ni, g, d});

  std::vector<std::vector<std::pair<std::string, double>>> cell_metrics(tasks.size());
  std::vector<std::string> cell_errors(tasks.size());
  parallel_for(static_cast<int>(tasks.size()), n_threads, [&](int idx) {
    const CellTask& task = tasks[idx];
    const DesignSlot& slot = slots[slot_index(task.structure_idx, task.n_idx, task.design_idx)];
    if (!slot.ok) {
      cell_errors[idx] = slot.error;
      return;
    }
    try {
      const auto [noisy, truth] = rows_of(task.n_idx, task.dataset_idx);
      cell_metrics[idx] =
          evaluate_cell(noisy, truth, grid, slot.design, config, ctx);
    } catch (const Error& e) {
      cell_errors[idx] = e.what();
    }
  });

  ExperimentResult result;
  result.total_cells = static_cast<int>(tasks.size());
  for (std::size_t idx = 0; idx < tasks.size(); ++idx) {
    const CellTask& task = tasks[idx];
    const std::string structure = to_string(config.structures[task.structure_idx]);
    const int n = config.subject_counts[task.n_idx];
    if (!cell_errors[idx].empty()) {
      ++result.failed_cells;
      result.records.push_back({structure, n, task.dataset_idx + 1, task.design_idx + 1, "failed", 1.0});
      continue;
    }
    for (const auto& [metric, value] : cell_metrics[idx])
      result.records.push_back({structure, n, task.dataset_idx + 1, task.design_idx + 1, metric, value});
  }

  // Across-dataset means: one box-plot point per (structure, n, design).
  for (int s = 0; s < n_structures; ++s)
    for (int ni = 0; ni < n_counts; ++ni)
      for (int g = 0; g < n_designs; ++g) {
        std::vector<std::pair<std::string, double>> sums;
        std::vector<int> counts;
        for (std::size_t idx = 0; idx < tasks.size(); ++idx) {
          const CellTask& task = tasks[idx];
          if (task.structure_idx != s || task.n_idx != ni || task.design_idx != g) continue;
          if (!cell_errors[idx].empty()) continue;
          for (const auto& [metric, value] : cell_metrics[idx]) {
            bool found = false;
            for (std::size_t q = 0; q < sums.size(); ++q)
              if (sums[q].first == metric) {
                sums[q].second += value;
                ++counts[q];
                found = true;
                break;
              }
            if (!found) {
              sums.emplace_back(metric, value);
              counts.push_back(1);
            }
          }
        }
        for (std::size_t q = 0; q < sums.size(); ++q)
          result.records.push_back({to_string(config.structures[s]), config.subject_counts[ni], -1,
                                    g + 1, sums[q].first, sums[q].second / counts[q]});
      }
  return result;
}

}  // namespace detail

// The synthetic protocol: simulate n_datasets functional datasets, sparsify
// each by every generated design, fit the pilot model, and score it against
// the exact generating parameters.
inline ExperimentResult run_experiment(const SimConfig& config, int n_threads = 0) {
  config.validate();
  config.assert_generator_invariants();
  if (config.search.kind != SearchMethod::Kind::exhaustive)
    throw InvalidSpec("the experiment protocol requires the exhaustive search (threshold analysis)");

  const FpcaModel true_model = config.true_model();
  const ExhaustiveScan true_scan = scan_criterion(true_model, config.obs_per_subject);
  const FCriterion true_criterion(true_model);
  detail::TrueContext ctx{&true_model, &true_scan, &true_criterion};

  int max_n = 0;
  for (const int n : config.subject_counts) max_n = std::max(max_n, n);
  std::vector<DenseSim> datasets(config.n_datasets);
  for (int d = 0; d < config.n_datasets; ++d) datasets[d] = simulate_dataset(config, d + 1, max_n);

  const Eigen::VectorXd grid = config.grid();
  auto rows_of = [&](int n_idx, int dataset_idx) {
    const int n = config.subject_counts[n_idx];
    const DenseSim& ds = datasets[dataset_idx];
    return std::pair<Eigen::MatrixXd, Eigen::MatrixXd>(ds.noisy.topRows(n), ds.truth.topRows(n));
  };
  return detail::run_protocol(config, grid, ctx, rows_of, detail::resolve_threads(n_threads));
}

// A fully observed longitudinal dataset, one row per subject. Missing
// entries are NaN.
struct DenseDataset {
  std::vector<std::string> subject_ids;
  Eigen::VectorXd grid;
  Eigen::MatrixXd values;

  int n_subjects() const { return static_cast<int>(values.rows()); }
  int missing_count() const {
    int c = 0;
    for (int i = 0; i < values.rows(); ++i)
      for (int j = 0; j < values.cols(); ++j)
        if (std::isnan(values(i, j))) ++c;
    return c;
  }
  double missing_fraction() const {
    return values.size() == 0 ? 0.0 : static_cast<double>(missing_count()) / values.size();
  }

  SparseDataset as_sparse() const {
    SparseDataset s;
    s.grid.assign(grid.data(), grid.data() + grid.size());
    s.subjects.resize(values.rows());
    for (int i = 0; i < values.rows(); ++i)
      for (int j = 0; j < values.cols(); ++j)
        if (!std::isnan(values(i, j))) {
          s.subjects[i].indices.push_back(j);
          s.subjects[i].values.push_back(values(i, j));
        }
    return s;
  }
};

// The case-study protocol: the model fitted to the full dense dataset is
// treated as the truth (its criterion scan and its recovered trajectories),
// then the synthetic protocol runs on subject subsamples sparsified by each
// design. Subjects with missing entries are skipped during subsampling.
inline ExperimentResult real_data_experiment(const DenseDataset& dense, const SimConfig& config,
                                             int n_threads = 0) {
  config.validate();
  if (config.search.kind != SearchMethod::Kind::exhaustive)
    throw InvalidSpec("the experiment protocol requires the exhaustive search (threshold analysis)");
  if (dense.grid.size() != config.grid_size)
    throw ShapeMismatch("dense data grid size does not match the configuration");

  std::vector<int> complete;
  for (int i = 0; i < dense.n_subjects(); ++i) {
    bool ok = true;
    for (int j = 0; j < dense.values.cols(); ++j)
      if (std::isnan(dense.values(i, j))) {
        ok = false;
        break;
      }
    if (ok) complete.push_back(i);
  }
  int max_n = 0;
  for (const int n : config.subject_counts) max_n = std::max(max_n, n);
  if (static_cast<int>(complete.size()) < max_n)
    throw InsufficientSubjects("dense dataset has " + std::to_string(complete.size()) +
                               " complete subjects; the protocol needs " + std::to_string(max_n));

  // Fit once on the full dense data; this fit defines the true criterion and
  // the reference trajectories.
  const FpcaModel true_model = fit_pace(dense.as_sparse(), config.fit);
  const ExhaustiveScan true_scan = scan_criterion(true_model, config.obs_per_subject);
  const FCriterion true_criterion(true_model);
  detail::TrueContext ctx{&true_model, &true_scan, &true_criterion};

  Eigen::MatrixXd reference(dense.n_subjects(), dense.values.cols());
  for (const int i : complete) {
    const SparseDataset::Subject subj = [&] {
      SparseDataset::Subject s;
      for (int j = 0; j < dense.values.cols(); ++j) {
        s.indices.push_back(j);
        s.values.push_back(dense.values(i, j));
      }
      return s;
    }();
    Eigen::VectorXd values(dense.values.cols());
    for (int j = 0; j < dense.values.cols(); ++j) values(j) = dense.values(i, j);
    reference.row(i) =
        recover_trajectory(true_model, predict_scores(true_model, subj.indices, values)).transpose();
  }

  // Subject subsamples per (n, dataset): draws without replacement from the
  // complete rows.
  const int n_counts = static_cast<int>(config.subject_counts.size());
  std::vector<std::vector<std::vector<int>>> picks(n_counts);
  for (int ni = 0; ni < n_counts; ++ni) {
    picks[ni].resize(config.n_datasets);
    for (int d = 0; d < config.n_datasets; ++d) {
      Rng rng = make_stream(config.master_seed, "subsample", config.subject_counts[ni], d + 1);
      std::vector<int> pool = complete;
      rng.shuffle(pool.begin(), pool.end());
      picks[ni][d].assign(pool.begin(), pool.begin() + config.subject_counts[ni]);
    }
  }

  auto rows_of = [&](int n_idx, int dataset_idx) {
    const std::vector<int>& rows = picks[n_idx][dataset_idx];
    Eigen::MatrixXd noisy(rows.size(), dense.values.cols());
    Eigen::MatrixXd truth(rows.size(), dense.values.cols());
    for (std::size_t i = 0; i < rows.size(); ++i) {
      noisy.row(i) = dense.values.row(rows[i]);
      truth.row(i) = reference.row(rows[i]);
    }
    return std::pair<Eigen::MatrixXd, Eigen::MatrixXd>(std::move(noisy), std::move(truth));
  };
  return detail::run_protocol(config, dense.grid, ctx, rows_of, detail::resolve_threads(n_threads));
}

}  // namespace pilotdesign
