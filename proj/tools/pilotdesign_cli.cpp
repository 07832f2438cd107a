// Command-line surface for pilot-study design construction, sparse FPCA
// fitting, criterion evaluation, next-study design search, and the
// simulation / case-study experiment protocols.

#include <cstdio>
#include <filesystem>
#include <iostream>
#include <map>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "pilotdesign/pilotdesign.hpp"

namespace pd = pilotdesign;
namespace fs = std::filesystem;

namespace {

constexpr int kExitValidation = 2;
constexpr int kExitConstruction = 3;
constexpr int kExitExperiment = 4;
constexpr int kExitIo = 5;

struct FitFlags {
  std::string smoothing = "gcv";
  double mean_bandwidth = 0.0;
  double cov_bandwidth = 0.0;
  double fve = 0.95;
  int max_components = 20;
  int fixed_components = 0;

  pd::FitOptions to_options() const {
    pd::FitOptions o;
    if (smoothing == "gcv") {
      o.smoothing = pd::FitOptions::Smoothing::gcv;
    } else if (smoothing == "fixed") {
      o.smoothing = pd::FitOptions::Smoothing::fixed;
    } else if (smoothing == "none") {
      o.smoothing = pd::FitOptions::Smoothing::none;
    } else {
      throw pd::InvalidSpec("unknown smoothing mode: " + smoothing);
    }
    o.mean_bandwidth = mean_bandwidth;
    o.cov_bandwidth = cov_bandwidth;
    o.fve_threshold = fve;
    o.max_components = max_components;
    o.fixed_components = fixed_components;
    return o;
  }
};

void add_fit_flags(CLI::App* cmd, FitFlags& flags) {
  cmd->add_option("--smoothing", flags.smoothing, "Smoothing mode: gcv, fixed, or none");
  cmd->add_option("--mean-bandwidth", flags.mean_bandwidth, "Mean bandwidth (fixed mode)");
  cmd->add_option("--cov-bandwidth", flags.cov_bandwidth, "Covariance bandwidth (fixed mode)");
  cmd->add_option("--fve", flags.fve, "Fraction-of-variance-explained threshold");
  cmd->add_option("--max-components", flags.max_components, "Component count cap");
  cmd->add_option("--fixed-components", flags.fixed_components, "Pin the component count (0 = auto)");
}

pd::SearchMethod make_search(const std::string& method, int samples, std::uint64_t seed) {
  pd::SearchMethod m;
  if (method == "exhaustive") {
    m.kind = pd::SearchMethod::Kind::exhaustive;
  } else if (method == "heuristic") {
    m.kind = pd::SearchMethod::Kind::weighted_heuristic;
  } else {
    throw pd::InvalidSpec("unknown search method: " + method);
  }
  m.samples = samples;
  m.seed = seed;
  return m;
}

void print_model_summary(const pd::FpcaModel& model) {
  std::printf("components: %d (FVE %.4f)\n", model.components(), model.fve);
  std::printf("error variance: %s\n", pd::detail::format_double(model.error_variance).c_str());
  for (int m = 0; m < model.components(); ++m)
    std::printf("  lambda_%d = %s\n", m + 1, pd::detail::format_double(model.eigenvalues(m)).c_str());
  if (model.options.smoothing != pd::FitOptions::Smoothing::none)
    std::printf("bandwidths: mean %s, covariance %s\n",
                pd::detail::format_double(model.options.mean_bandwidth).c_str(),
                pd::detail::format_double(model.options.cov_bandwidth).c_str());
}

// Median composite per (structure, n) from the across-dataset mean records.
void print_median_table(const std::vector<pd::ExperimentRecord>& records, const std::string& metric) {
  std::map<std::pair<int, std::string>, std::vector<double>> groups;
  for (const auto& r : records)
    if (r.dataset_id == -1 && r.metric == metric) groups[{r.n_subjects, r.structure}].push_back(r.value);
  if (groups.empty()) return;
  std::printf("%-10s %6s  %s\n", "structure", "n", ("median " + metric).c_str());
  for (auto& [key, values] : groups) {
    std::sort(values.begin(), values.end());
    std::printf("%-10s %6d  %s\n", key.second.c_str(), key.first,
                pd::detail::format_double(pd::detail::quantile_sorted(values, 0.5)).c_str());
  }
}

void write_experiment_outputs(const pd::ExperimentResult& result, const std::string& out_dir,
                              bool plots) {
  fs::create_directories(out_dir);
  pd::write_results_csv(result.records, out_dir + "/results.csv");
  pd::write_summary_csv(result.records, out_dir + "/summary.csv");
  if (plots) {
    std::vector<std::string> metrics;
    for (const auto& r : result.records)
      if (r.dataset_id == -1 && r.metric != "failed" &&
          std::find(metrics.begin(), metrics.end(), r.metric) == metrics.end())
        metrics.push_back(r.metric);
    for (const auto& metric : metrics) {
      const std::string svg = pd::render_boxplot_svg(result.records, metric);
      if (svg.empty()) continue;
      std::ofstream out(out_dir + "/boxplot_" + metric + ".svg", std::ios::binary);
      out << svg;
    }
  }
}

int finish_experiment(const pd::ExperimentResult& result, const pd::SimConfig& config,
                      const std::string& out_dir, bool plots) {
  write_experiment_outputs(result, out_dir, plots);
  print_median_table(result.records, "composite");
  std::printf("cells: %d total, %d failed\n", result.total_cells, result.failed_cells);
  std::printf("wrote %s/results.csv and %s/summary.csv\n", out_dir.c_str(), out_dir.c_str());
  if (result.failed_cells >
      config.max_failure_fraction * static_cast<double>(result.total_cells)) {
    std::fprintf(stderr, "error: failed cell fraction exceeds the configured tolerance\n");
    return kExitExperiment;
  }
  return 0;
}

int run(int argc, char** argv) {
  CLI::App app{"Pilot-study designs for sparse functional data"};
  app.require_subcommand(1);

  // ---- design generate / inspect -------------------------------------
  auto* design_cmd = app.add_subcommand("design", "Construct or inspect pilot designs");
  design_cmd->require_subcommand(1);

  auto* gen = design_cmd->add_subcommand("generate", "Generate a design and write CSV + metadata");
  std::string gen_structure = "hybrid", gen_out;
  pd::DesignSpec gen_spec;
  gen_spec.n_subjects = 30;
  gen_spec.grid_size = 25;
  gen_spec.obs_per_subject = 5;
  gen_spec.snippet_frac = 0.2;
  gen->add_option("--structure", gen_structure, "random, snippet, bibd, or hybrid")->required();
  gen->add_option("--subjects", gen_spec.n_subjects, "Number of subjects");
  gen->add_option("--grid", gen_spec.grid_size, "Grid size");
  gen->add_option("--obs", gen_spec.obs_per_subject, "Observations per subject");
  gen->add_option("--snippet-frac", gen_spec.snippet_frac, "Snippet fraction (hybrid)");
  gen->add_option("--delta", gen_spec.concurrence_tol, "Concurrence tolerance (hybrid)");
  gen->add_option("--gap", gen_spec.snippet_gap, "Snippet exclusion radius (hybrid)");
  gen->add_option("--seed", gen_spec.seed, "RNG seed");
  gen->add_option("--out", gen_out, "Output CSV path")->required();

  // ---- design inspect --------------------------------------------------
  auto* inspect = design_cmd->add_subcommand("inspect", "Summarise a design file");
  std::string inspect_path, inspect_plot;
  inspect->add_option("--design", inspect_path, "Design CSV path")->required();
  inspect->add_option("--plot-data", inspect_plot, "Write concurrence plot triples CSV here");

  // ---- simulate ---------------------------------------------------------
  auto* sim = app.add_subcommand("simulate", "Generate synthetic dense datasets");
  int sim_datasets = 1, sim_subjects = 240, sim_grid = 25, sim_components = 5;
  double sim_error = 0.96875;
  std::uint64_t sim_seed = 0;
  std::string sim_out = ".";
  sim->add_option("--datasets", sim_datasets, "Number of datasets");
  sim->add_option("--subjects", sim_subjects, "Subjects per dataset");
  sim->add_option("--grid-size", sim_grid, "Grid size");
  sim->add_option("--components", sim_components, "Generator components (1-5)");
  sim->add_option("--error-variance", sim_error, "Observation noise variance");
  sim->add_option("--seed", sim_seed, "Master seed");
  sim->add_option("--out", sim_out, "Output directory");

  // ---- fit ---------------------------------------------------------------
  auto* fit = app.add_subcommand("fit", "Fit the sparse FPCA model");
  std::string fit_data, fit_layout = "long", fit_design, fit_out;
  FitFlags fit_flags;
  fit->add_option("--data", fit_data, "Dense data CSV")->required();
  fit->add_option("--layout", fit_layout, "wide or long");
  fit->add_option("--design", fit_design, "Sparsify by this design CSV before fitting");
  fit->add_option("--out", fit_out, "Model JSON output path")->required();
  add_fit_flags(fit, fit_flags);

  // ---- evaluate -----------------------------------------------------------
  auto* eval = app.add_subcommand("evaluate", "Score a pilot design on one dataset");
  std::string eval_truth, eval_noisy, eval_layout = "long", eval_design, eval_true_model,
              eval_report;
  double eval_weight = 0.5;
  std::vector<double> eval_thresholds = {0.99, 0.97, 0.95};
  FitFlags eval_flags;
  eval->add_option("--truth", eval_truth, "True curves CSV (same layout)")->required();
  eval->add_option("--noisy", eval_noisy, "Noisy observations CSV")->required();
  eval->add_option("--layout", eval_layout, "wide or long");
  eval->add_option("--design", eval_design, "Pilot design CSV")->required();
  eval->add_option("--true-model", eval_true_model, "True model JSON")->required();
  eval->add_option("--weight", eval_weight, "Composite criterion weight on ARE");
  eval->add_option("--thresholds", eval_thresholds, "Efficiency thresholds")->delimiter(',');
  eval->add_option("--report", eval_report, "Append a CSV report row here");
  add_fit_flags(eval, eval_flags);

  // ---- search ---------------------------------------------------------------
  auto* search = app.add_subcommand("search", "Find optimal next-study designs");
  std::string search_model, search_true_model, search_method = "exhaustive";
  int search_obs = 5, search_samples = 2000;
  std::uint64_t search_seed = 0;
  std::vector<double> search_thresholds = {0.99, 0.97, 0.95};
  search->add_option("--model", search_model, "Model JSON")->required();
  search->add_option("--obs", search_obs, "Design size K");
  search->add_option("--method", search_method, "exhaustive or heuristic");
  search->add_option("--samples", search_samples, "Heuristic sample count");
  search->add_option("--seed", search_seed, "Heuristic seed");
  search->add_option("--true-model", search_true_model, "True model JSON for efficiency reporting");
  search->add_option("--thresholds", search_thresholds, "Efficiency thresholds")->delimiter(',');

  // ---- experiment -------------------------------------------------------------
  auto* exp = app.add_subcommand("experiment", "Run the synthetic simulation protocol");
  std::string exp_config, exp_out = ".";
  int exp_threads = 0;
  bool exp_plots = false;
  exp->add_option("--config", exp_config, "Experiment config JSON")->required();
  exp->add_option("--out", exp_out, "Output directory");
  exp->add_option("--threads", exp_threads, "Worker threads (0 = auto)");
  exp->add_flag("--plots", exp_plots, "Also write box-plot SVGs");

  // ---- real-data ----------------------------------------------------------------
  auto* real = app.add_subcommand("real-data", "Run the case-study protocol on a dense dataset");
  std::string real_data, real_layout = "wide", real_config, real_out = ".";
  int real_threads = 0;
  bool real_plots = false;
  real->add_option("--data", real_data, "Dense dataset CSV")->required();
  real->add_option("--layout", real_layout, "wide or long");
  real->add_option("--config", real_config, "Experiment config JSON")->required();
  real->add_option("--out", real_out, "Output directory");
  real->add_option("--threads", real_threads, "Worker threads (0 = auto)");
  real->add_flag("--plots", real_plots, "Also write box-plot SVGs");

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return kExitValidation;
  }

  if (gen->parsed()) {
    gen_spec.validate();
    pd::IncidenceMatrix design;
    const pd::DesignStructure structure = pd::structure_from_string(gen_structure);
    switch (structure) {
      case pd::DesignStructure::random:
        design = pd::generate_random_design(gen_spec);
        break;
      case pd::DesignStructure::snippet:
        design = pd::generate_snippet_design(gen_spec);
        break;
      case pd::DesignStructure::bibd: {
        if (gen_spec.grid_size != 25 || gen_spec.obs_per_subject != 5)
          throw pd::InvalidSpec("the BIBD family is fixed at grid 25, 5 observations per subject");
        const pd::IncidenceMatrix base = pd::generate_bibd(gen_spec.seed);
        design = pd::extend_design(base, gen_spec.n_subjects, pd::derive_seed(gen_spec.seed, "extend"));
        break;
      }
      case pd::DesignStructure::hybrid:
        design = pd::generate_hybrid_design(gen_spec);
        break;
    }
    pd::write_design_csv(design, gen_out);
    pd::write_design_metadata(design, gen_spec, gen_out);
    const pd::TargetConcurrence target = pd::target_concurrence(gen_spec);
    const pd::ConcurrenceDeviation dev = pd::concurrence_deviation(design, target);
    std::printf("wrote %s (%d x %d, %s)\n", gen_out.c_str(), design.n_subjects, design.grid_size,
                pd::to_string(design.structure));
    std::printf("targets: diagonal %s, adjacent %s, distant %s\n",
                pd::detail::format_double(target.diagonal).c_str(),
                pd::detail::format_double(target.adjacent).c_str(),
                pd::detail::format_double(target.distant).c_str());
    std::printf("achieved max deviation: diagonal %+g, adjacent %+g, distant %+g\n", dev.diagonal,
                dev.adjacent, dev.distant);
    return 0;
  }

  if (inspect->parsed()) {
    const pd::IncidenceMatrix design = pd::read_design_csv(inspect_path);
    const Eigen::MatrixXi c = pd::concurrence(design);
    int min_row = design.grid_size, max_row = 0, min_col = design.n_subjects, max_col = 0;
    for (int i = 0; i < design.n_subjects; ++i) {
      min_row = std::min(min_row, design.row_sum(i));
      max_row = std::max(max_row, design.row_sum(i));
    }
    int max_adjacent = 0, max_distant = 0;
    for (int j = 0; j < design.grid_size; ++j) {
      min_col = std::min(min_col, design.col_sum(j));
      max_col = std::max(max_col, design.col_sum(j));
      for (int k = j + 1; k < design.grid_size; ++k)
        (k - j == 1 ? max_adjacent : max_distant) = std::max(
            k - j == 1 ? max_adjacent : max_distant, c(j, k));
    }
    std::printf("subjects %d, grid %d, structure %s, snippet rows %d\n", design.n_subjects,
                design.grid_size, pd::to_string(design.structure), design.snippet_rows);
    std::printf("row sums %d..%d, column sums %d..%d\n", min_row, max_row, min_col, max_col);
    std::printf("concurrence trace %d, max adjacent %d, max distant %d\n", c.trace(), max_adjacent,
                max_distant);
    if (!inspect_plot.empty()) {
      std::ofstream out(inspect_plot, std::ios::binary);
      if (!out) throw pd::IoError("cannot open for writing: " + inspect_plot);
      out << "j,k,count\n";
      for (const pd::PlotTriple& t : pd::design_plot_data(design))
        out << t.first + 1 << "," << t.second + 1 << "," << t.count << "\n";
      std::printf("wrote %s\n", inspect_plot.c_str());
    }
    return 0;
  }

  if (sim->parsed()) {
    pd::SimConfig config;
    config.grid_size = sim_grid;
    config.n_components = sim_components;
    config.error_variance = sim_error;
    config.master_seed = sim_seed;
    config.validate();
    fs::create_directories(sim_out);
    pd::write_model_json(config.true_model(), sim_out + "/true_model.json");
    for (int d = 1; d <= sim_datasets; ++d) {
      const pd::DenseSim data = pd::simulate_dataset(config, d, sim_subjects);
      pd::DenseDataset truth, noisy;
      truth.grid = noisy.grid = config.grid();
      truth.values = data.truth;
      noisy.values = data.noisy;
      for (int i = 1; i <= sim_subjects; ++i) {
        truth.subject_ids.push_back(std::to_string(i));
        noisy.subject_ids.push_back(std::to_string(i));
      }
      pd::write_dense_csv(truth, sim_out + "/truth_" + std::to_string(d) + ".csv",
                          pd::DenseLayout::lng);
      pd::write_dense_csv(noisy, sim_out + "/noisy_" + std::to_string(d) + ".csv",
                          pd::DenseLayout::lng);
    }
    std::printf("wrote %d dataset pair(s) and true_model.json under %s\n", sim_datasets,
                sim_out.c_str());
    return 0;
  }

  if (fit->parsed()) {
    const pd::DenseDataset dense = pd::ingest_dense_csv(fit_data, pd::layout_from_string(fit_layout));
    pd::SparseDataset sparse;
    if (!fit_design.empty()) {
      const pd::IncidenceMatrix design = pd::read_design_csv(fit_design);
      sparse = pd::sparsify(dense.values, dense.grid, design);
    } else {
      sparse = dense.as_sparse();
    }
    const pd::FpcaModel model = pd::fit_pace(sparse, fit_flags.to_options());
    pd::write_model_json(model, fit_out);
    print_model_summary(model);
    std::printf("wrote %s\n", fit_out.c_str());
    return 0;
  }

  if (eval->parsed()) {
    const pd::DenseLayout layout = pd::layout_from_string(eval_layout);
    const pd::DenseDataset truth = pd::ingest_dense_csv(eval_truth, layout);
    const pd::DenseDataset noisy = pd::ingest_dense_csv(eval_noisy, layout);
    const pd::IncidenceMatrix design = pd::read_design_csv(eval_design);
    const pd::FpcaModel true_model = pd::read_model_json(eval_true_model);
    if (truth.values.rows() != noisy.values.rows() || truth.values.cols() != noisy.values.cols())
      throw pd::ShapeMismatch("truth and noisy datasets differ in shape");

    pd::SimConfig config;
    config.grid_size = static_cast<int>(noisy.grid.size());
    config.obs_per_subject = design.row_sum(0);
    config.thresholds = eval_thresholds;
    config.composite_weight = eval_weight;
    config.fit = eval_flags.to_options();
    const pd::ExhaustiveScan true_scan = pd::scan_criterion(true_model, config.obs_per_subject);
    const pd::FCriterion true_criterion(true_model);
    pd::detail::TrueContext ctx{&true_model, &true_scan, &true_criterion};
    const auto metrics =
        pd::detail::evaluate_cell(noisy.values, truth.values, noisy.grid, design, config, ctx);
    for (const auto& [name, value] : metrics)
      std::printf("%s = %s\n", name.c_str(), pd::detail::format_double(value).c_str());

    if (!eval_report.empty()) {
      pd::CriterionReport report;
      for (const auto& [name, value] : metrics) {
        if (name == "are") report.are = value;
        if (name == "rrmse") report.rrmse = value;
        if (name == "composite") report.composite = value;
        if (name == "f_at_opt") report.f_at_opt = value;
        if (name == "f_at_star") report.f_at_star = value;
      }
      // Recompute the argmax designs for the report row.
      const pd::SparseDataset sparse = pd::sparsify(noisy.values, noisy.grid, design);
      const pd::FpcaModel model = pd::fit_pace(sparse, config.fit);
      report.t_opt = pd::search_optimal(model, config.obs_per_subject).best;
      report.t_star = true_scan.design_at(true_scan.best_rank);
      pd::append_report_csv(report, pd::to_string(design.structure), design.n_subjects, 0,
                            eval_report);
      std::printf("appended report row to %s\n", eval_report.c_str());
    }
    return 0;
  }

  if (search->parsed()) {
    const pd::FpcaModel model = pd::read_model_json(search_model);
    const pd::SearchMethod method = make_search(search_method, search_samples, search_seed);
    const pd::SearchResult result = pd::search_optimal(model, search_obs, method);
    std::printf("t_best = %s\n", pd::joined_indices(result.best).c_str());
    std::printf("criterion = %s (over %llu candidates)\n",
                pd::detail::format_double(result.f_best).c_str(),
                static_cast<unsigned long long>(result.evaluated));
    if (method.kind == pd::SearchMethod::Kind::exhaustive) {
      const pd::FpcaModel true_model =
          search_true_model.empty() ? model : pd::read_model_json(search_true_model);
      const pd::ExhaustiveScan est_scan = pd::scan_criterion(model, search_obs);
      const pd::ExhaustiveScan true_scan = search_true_model.empty()
                                               ? est_scan
                                               : pd::scan_criterion(true_model, search_obs);
      for (const double theta : search_thresholds) {
        const pd::ThresholdReport rep =
            pd::threshold_analysis_scanned(est_scan, true_scan, theta);
        std::printf("theta %.4g: t_worst = %s (true eff %s), t_median = %s (true eff %s)\n", theta,
                    pd::joined_indices(rep.t_worst).c_str(),
                    pd::detail::format_double(rep.eff_true_worst).c_str(),
                    pd::joined_indices(rep.t_median).c_str(),
                    pd::detail::format_double(rep.eff_true_median).c_str());
      }
    }
    return 0;
  }

  if (exp->parsed()) {
    const pd::SimConfig config = pd::read_config_json(exp_config);
    const pd::ExperimentResult result = pd::run_experiment(config, exp_threads);
    return finish_experiment(result, config, exp_out, exp_plots);
  }

  if (real->parsed()) {
    const pd::SimConfig config = pd::read_config_json(real_config);
    const pd::DenseDataset dense =
        pd::ingest_dense_csv(real_data, pd::layout_from_string(real_layout));
    const pd::ExperimentResult result = pd::real_data_experiment(dense, config, real_threads);
    return finish_experiment(result, config, real_out, real_plots);
  }

  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  try {
    return run(argc, argv);
  } catch (const pd::IoError& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return kExitIo;
  } catch (const pd::InfeasibleSpec& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return kExitConstruction;
  } catch (const pd::ConstructionFailed& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return kExitConstruction;
  } catch (const pd::Error& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return kExitValidation;
  } catch (const std::exception& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return 1;
  }
}
