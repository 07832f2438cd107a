#pragma once

#include <algorithm>
#include <cstdint>
#include <functional>
#include <limits>
#include <vector>

#include "pilotdesign/criteria.hpp"
#include "pilotdesign/fpca.hpp"
#include "pilotdesign/rng.hpp"
#include "pilotdesign/types.hpp"

namespace pilotdesign {

struct SearchMethod {
  enum class Kind { exhaustive, weighted_heuristic };
  Kind kind = Kind::exhaustive;
  int samples = 2000;         // heuristic only
  std::uint64_t seed = 0;     // heuristic only
};

inline std::uint64_t binomial(int n, int k) {
  if (k < 0 || k > n) return 0;
  k = std::min(k, n - k);
  std::uint64_t r = 1;
  for (int i = 1; i <= k; ++i) r = r * static_cast<std::uint64_t>(n - k + i) / i;
  return r;
}

// Visits every K-subset of {0..v-1} in lexicographic order.
template <class Fn>
void for_each_subset(int v, int k, Fn&& fn) {
  if (k > v || k < 0) return;
  std::vector<int> t(k);
  for (int i = 0; i < k; ++i) t[i] = i;
  for (;;) {
    fn(const_cast<const std::vector<int>&>(t));
    int i = k - 1;
    while (i >= 0 && t[i] == v - k + i) --i;
    if (i < 0) return;
    ++t[i];
    for (int j = i + 1; j < k; ++j) t[j] = t[j - 1] + 1;
  }
}

// The K-subset at a given lexicographic rank (combinatorial number system).
inline CandidateDesign subset_at_rank(int v, int k, std::uint64_t rank) {
  CandidateDesign t(k);
  int next = 0;
  for (int i = 0; i < k; ++i) {
    for (int c = next; c <= v - k + i; ++c) {
      const std::uint64_t block = binomial(v - c - 1, k - i - 1);
      if (rank < block) {
        t[i] = c;
        next = c + 1;
        break;
      }
      rank -= block;
    }
  }
  return t;
}

// Criterion values of every candidate design, in lexicographic order.
struct ExhaustiveScan {
  int grid_size = 0;
  int subset_size = 0;
  std::vector<double> f;       // indexed by lexicographic rank
  std::uint64_t best_rank = 0; // first rank attaining the maximum
  double f_best = 0.0;

  CandidateDesign design_at(std::uint64_t rank) const {
    return subset_at_rank(grid_size, subset_size, rank);
  }
};

inline ExhaustiveScan scan_criterion(const FpcaModel& model, int k) {
  if (k < 1 || k > model.grid_size()) throw InvalidSpec("subset size must lie in [1, grid size]");
  ExhaustiveScan scan;
  scan.grid_size = model.grid_size();
  scan.subset_size = k;
  scan.f.reserve(binomial(scan.grid_size, k));
  const FCriterion crit(model);
  double best = -std::numeric_limits<double>::infinity();
  std::uint64_t best_rank = 0, rank = 0;
  for_each_subset(scan.grid_size, k, [&](const CandidateDesign& t) {
    const double value = crit(t);
    scan.f.push_back(value);
    if (value > best) {
      best = value;
      best_rank = rank;
    }
    ++rank;
  });
  scan.best_rank = best_rank;
  scan.f_best = best;
  return scan;
}

struct SearchResult {
  CandidateDesign best;
  double f_best = 0.0;
  std::uint64_t evaluated = 0;
};

namespace detail {

// Weighted sampling heuristic: candidate points are drawn without
// replacement with probability proportional to the model's pointwise
// variance, favouring regions of high between-subject variability.
inline SearchResult heuristic_search(const FpcaModel& model, int k, const SearchMethod& method) {
  const int v = model.grid_size();
  Eigen::VectorXd weight = model.covariance.diagonal().cwiseMax(0.0);
  if (!(weight.sum() > 0.0)) weight = Eigen::VectorXd::Ones(v);
  weight.array() += 1e-12 * weight.maxCoeff();

  const FCriterion crit(model);
  Rng rng = make_stream(method.seed, "heuristic-search");
  SearchResult result;
  result.f_best = -std::numeric_limits<double>::infinity();

  std::vector<double> w(v);
  CandidateDesign t(k);
  for (int s = 0; s < method.samples; ++s) {
    for (int j = 0; j < v; ++j) w[j] = weight(j);
    for (int pick = 0; pick < k; ++pick) {
      double total = 0.0;
      for (int j = 0; j < v; ++j) total += w[j];
      double r = rng.next_double() * total;
      int chosen = v - 1;
      for (int j = 0; j < v; ++j) {
        if (w[j] <= 0.0) continue;
        r -= w[j];
        if (r <= 0.0) {
          chosen = j;
          break;
        }
      }
      t[pick] = chosen;
      w[chosen] = 0.0;
    }
    std::sort(t.begin(), t.end());
    const double value = crit(t);
    ++result.evaluated;
    if (value > result.f_best ||
        (value == result.f_best && t < result.best)) {
      result.f_best = value;
      result.best = t;
    }
  }
  return result;
}

}  // namespace detail

// Finds the best next-study individual design of size k under the model's
// estimated criterion. Exhaustive enumeration returns the global optimum
// with lexicographic tie-breaking; the heuristic returns the best of its
// weighted samples.
inline SearchResult search_optimal(const FpcaModel& model, int k, const SearchMethod& method = {}) {
  if (k < 1 || k > model.grid_size()) throw InvalidSpec("subset size must lie in [1, grid size]");
  if (method.kind == SearchMethod::Kind::weighted_heuristic)
    return detail::heuristic_search(model, k, method);
  const ExhaustiveScan scan = scan_criterion(model, k);
  return {scan.design_at(scan.best_rank), scan.f_best, scan.f.size()};
}

inline AreResult are(const FpcaModel& estimated, const FpcaModel& truth, int k,
                     const SearchMethod& method = {}) {
  return are_with(estimated, truth,
                  [&](const FpcaModel& m) { return search_optimal(m, k, method).best; });
}

struct ThresholdReport {
  double theta = 0.0;
  CandidateDesign t_worst;
  CandidateDesign t_median;
  double f_hat_worst = 0.0;        // estimated criterion at t_worst
  double f_hat_median = 0.0;
  double eff_true_worst = 0.0;     // true efficiency F(t)/F(t*)
  double eff_true_median = 0.0;
};

// Efficiency-threshold analysis over a precomputed scan: among all
// candidates whose estimated efficiency clears theta, picks the design with
// the minimal and the (lower) median estimated criterion, and reports their
// true efficiencies. true_scan must come from the true model at the same
// grid and subset size.
inline ThresholdReport threshold_analysis_scanned(const ExhaustiveScan& est_scan,
                                                  const ExhaustiveScan& true_scan, double theta) {
  if (!(theta > 0.0 && theta <= 1.0)) throw InvalidSpec("efficiency threshold must lie in (0, 1]");
  if (est_scan.f.size() != true_scan.f.size() || est_scan.grid_size != true_scan.grid_size)
    throw ShapeMismatch("scans cover different candidate spaces");
  if (!(true_scan.f_best > 0.0)) throw ZeroTrueOptimum("true criterion optimum is zero");

  const double cutoff = theta * est_scan.f_best;
  std::vector<std::pair<double, std::uint64_t>> qualifying;
  std::uint64_t worst_rank = est_scan.best_rank;
  double worst_f = est_scan.f_best;
  for (std::uint64_t r = 0; r < est_scan.f.size(); ++r) {
    const double value = est_scan.f[r];
    if (value >= cutoff) {
      qualifying.emplace_back(value, r);
      if (value < worst_f) {
        worst_f = value;
        worst_rank = r;
      }
    }
  }
  std::sort(qualifying.begin(), qualifying.end());  // by criterion, then rank
  const auto& med = qualifying[(qualifying.size() - 1) / 2];

  ThresholdReport rep;
  rep.theta = theta;
  rep.t_worst = est_scan.design_at(worst_rank);
  rep.t_median = est_scan.design_at(med.second);
  rep.f_hat_worst = worst_f;
  rep.f_hat_median = med.first;
  rep.eff_true_worst = true_scan.f[worst_rank] / true_scan.f_best;
  rep.eff_true_median = true_scan.f[med.second] / true_scan.f_best;
  return rep;
}

inline ThresholdReport threshold_analysis(const FpcaModel& estimated, const FpcaModel& truth,
                                          int k, double theta) {
  const ExhaustiveScan est_scan = scan_criterion(estimated, k);
  const ExhaustiveScan true_scan = scan_criterion(truth, k);
  return threshold_analysis_scanned(est_scan, true_scan, theta);
}

}  // namespace pilotdesign
