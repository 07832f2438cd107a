#pragma once

#include <algorithm>
#include <cstdint>
#include <optional>
#include <string>
#include <unordered_set>
#include <vector>

#include "pilotdesign/design.hpp"
#include "pilotdesign/rng.hpp"
#include "pilotdesign/types.hpp"

namespace pilotdesign {

struct HybridOptions {
  // Make-up iteration budget; 0 means 50 * n_subjects.
  long max_makeup_iterations = 0;
  // The store of retired row solutions is emptied once it exceeds this
  // multiple of the subject count.
  int store_reset_multiple = 2;
};

namespace detail {

// Sequential constrained construction state for one hybrid design run.
// Tracks running column sums and running pair counts of the incidence
// matrix built so far, so per-subject subproblems can be checked
// incrementally.
class HybridBuilder {
 public:
  HybridBuilder(const DesignSpec& spec, const HybridOptions& opts)
      : spec_(spec),
        opts_(opts),
        target_(target_concurrence(spec)),
        v_(spec.grid_size),
        k_(spec.obs_per_subject),
        n_snippet_(spec.snippet_rows()),
        col_count_(spec.grid_size, 0),
        pair_count_(static_cast<std::size_t>(spec.grid_size) * spec.grid_size, 0),
        rows_(spec.n_subjects) {
    cap_col_ = target_.diagonal + spec.concurrence_tol + kSlack;
    cap_adj_ = target_.adjacent + spec.concurrence_tol + kSlack;
    cap_dist_ = target_.distant + spec.concurrence_tol + kSlack;
    max_iterations_ = opts.max_makeup_iterations > 0
                          ? opts.max_makeup_iterations
                          : 50L * spec.n_subjects;
    check_structurally_feasible();
  }

  IncidenceMatrix build() {
    Rng rng = make_stream(spec_.seed, "hybrid-design");
    long iterations = 0;
    int i = 0;
    while (i < spec_.n_subjects) {
      if (auto row = solve_subject(i, rng)) {
        place(i, *row);
        ++i;
        continue;
      }
      if (i == 0)
        throw ConstructionFailed("no feasible row for the first subject; constraints too tight");
      // Make-up process: retire the current solution of a random previous
      // subject into the store, re-solve that subject under the present
      // constraints (the store bars its old row), then retry subject i.
      bool recovered = false;
      std::vector<int> pool(i);
      for (int p = 0; p < i; ++p) pool[p] = p;
      rng.shuffle(pool.begin(), pool.end());
      for (const int prev : pool) {
        if (iterations >= max_iterations_) {
          throw ConstructionFailed(
              "hybrid construction exceeded " + std::to_string(max_iterations_) +
              " make-up iterations; concurrence tolerance too tight for these parameters");
        }
        ++iterations;
        const std::vector<int> old_row = rows_[prev];
        store_row(old_row);
        remove(prev);
        if (auto replacement = solve_subject(prev, rng)) {
          place(prev, *replacement);
          recovered = true;
          break;
        }
        place(prev, old_row);  // restore; its old row stays barred in the store
      }
      if (!recovered) {
        throw ConstructionFailed(
            "make-up process exhausted all previous subjects at subject " + std::to_string(i + 1));
      }
    }

    IncidenceMatrix m(spec_.n_subjects, v_, DesignStructure::hybrid);
    m.snippet_rows = n_snippet_;
    for (int r = 0; r < spec_.n_subjects; ++r)
      for (const int j : rows_[r]) m.at(r, j) = 1;
    return m;
  }

  // Cluster start column for snippet subject i (0-based): staggered along the
  // diagonal, wrapping so the cluster (pos, pos+1) always fits the grid.
  int cluster_start(int i) const { return i % (v_ - 1); }

 private:
  static constexpr double kSlack = 1e-9;  // absorbs float noise in integer-vs-real cap tests

  bool is_snippet(int i) const { return i < n_snippet_; }

  void check_structurally_feasible() {
    // BIBD-portion rows need K pairwise non-adjacent columns.
    if (n_snippet_ < spec_.n_subjects && k_ > (v_ + 1) / 2)
      throw InfeasibleSpec("no row of " + std::to_string(k_) +
                           " pairwise non-adjacent points exists on a grid of " + std::to_string(v_));
    // Snippet rows need K-2 free columns outside the cluster and its
    // exclusion zone.
    for (int i = 0; i < n_snippet_; ++i) {
      const int pos = cluster_start(i);
      const int lo = std::max(0, pos - spec_.snippet_gap);
      const int hi = std::min(v_ - 1, pos + 1 + spec_.snippet_gap);
      const int blocked = hi - lo + 1;
      if (v_ - blocked < k_ - 2)
        throw InfeasibleSpec("snippet exclusion radius " + std::to_string(spec_.snippet_gap) +
                             " leaves too few free columns for " + std::to_string(k_ - 2) +
                             " extra points");
    }
  }

  void place(int i, const std::vector<int>& row) {
    rows_[i] = row;
    for (std::size_t a = 0; a < row.size(); ++a) {
      ++col_count_[row[a]];
      for (std::size_t b = a + 1; b < row.size(); ++b) ++pair_at(row[a], row[b]);
    }
  }

  void remove(int i) {
    const std::vector<int>& row = rows_[i];
    for (std::size_t a = 0; a < row.size(); ++a) {
      --col_count_[row[a]];
      for (std::size_t b = a + 1; b < row.size(); ++b) --pair_at(row[a], row[b]);
    }
    rows_[i].clear();
  }

  int& pair_at(int a, int b) { return pair_count_[static_cast<std::size_t>(a) * v_ + b]; }
  int pair_at(int a, int b) const { return pair_count_[static_cast<std::size_t>(a) * v_ + b]; }

  void store_row(const std::vector<int>& row) {
    store_.push_back(row);
    store_masks_.insert(mask_of(row));
    if (static_cast<long>(store_.size()) >
        static_cast<long>(opts_.store_reset_multiple) * spec_.n_subjects) {
      store_.clear();
      store_masks_.clear();
    }
  }

  std::uint64_t mask_of(const std::vector<int>& row) const {
    std::uint64_t m = 0;
    for (const int j : row) m |= (1ULL << (j & 63));
    return m;
  }

  bool in_store(const std::vector<int>& row) const {
    if (store_.empty()) return false;
    if (v_ <= 64) return store_masks_.count(mask_of(row)) != 0;
    return std::find(store_.begin(), store_.end(), row) != store_.end();
  }

  bool col_ok(int j) const { return col_count_[j] + 1 <= cap_col_; }
  bool pair_ok(int a, int b) const {
    const double cap = (b - a == 1) ? cap_adj_ : cap_dist_;
    return pair_at(a, b) + 1 <= cap;
  }

  // Exact per-subject subproblem: enumerate all feasible K-subsets,
  // maximising the sum of appearance weights w_j = min(1/r_j, 1); ties are
  // resolved uniformly at random (reservoir rule), which supplies the
  // "randomly selected time points" of the snippet and BIBD portions.
  std::optional<std::vector<int>> solve_subject(int i, Rng& rng) {
    weights_.assign(v_, 1.0);
    for (int j = 0; j < v_; ++j)
      if (col_count_[j] > 1) weights_[j] = 1.0 / col_count_[j];

    best_obj_ = -1.0;
    best_row_.clear();
    tie_count_ = 0;

    scratch_.clear();
    if (is_snippet(i)) {
      const int pos = cluster_start(i);
      if (!col_ok(pos) || !col_ok(pos + 1) || !pair_ok(pos, pos + 1)) return std::nullopt;
      // Free columns: outside the cluster and at least gap+1 away from it.
      free_cols_.clear();
      for (int j = 0; j < v_; ++j)
        if (j < pos - spec_.snippet_gap || j > pos + 1 + spec_.snippet_gap) free_cols_.push_back(j);
      scratch_.push_back(pos);
      scratch_.push_back(pos + 1);
      ++col_count_[pos];
      ++col_count_[pos + 1];  // so the DFS cap checks see the cluster
      ++pair_at(pos, pos + 1);
      dfs_free(0, k_ - 2, rng);
      --col_count_[pos];
      --col_count_[pos + 1];
      --pair_at(pos, pos + 1);
    } else {
      free_cols_.resize(v_);
      for (int j = 0; j < v_; ++j) free_cols_[j] = j;
      dfs_spaced(0, k_, rng);
    }

    if (best_row_.empty()) return std::nullopt;
    return best_row_;
  }

  // DFS over free columns for a snippet row: any subset of the allowed
  // columns; adjacency among free points is permitted subject to the
  // running caps.
  void dfs_free(std::size_t from, int remaining, Rng& rng) {
    if (remaining == 0) {
      finish_candidate(rng);
      return;
    }
    for (std::size_t p = from; p + remaining <= free_cols_.size(); ++p) {
      const int c = free_cols_[p];
      if (!try_push(c)) continue;
      dfs_free(p + 1, remaining - 1, rng);
      pop(c);
    }
  }

  // DFS for a BIBD-portion row: selected columns pairwise non-adjacent.
  void dfs_spaced(int from, int remaining, Rng& rng) {
    if (remaining == 0) {
      finish_candidate(rng);
      return;
    }
    for (int c = from; c + 2 * (remaining - 1) < v_; ++c) {
      if (!try_push(c)) continue;
      dfs_spaced(c + 2, remaining - 1, rng);
      pop(c);
    }
  }

  bool try_push(int c) {
    if (!col_ok(c)) return false;
    for (const int s : scratch_)
      if (!pair_ok(std::min(s, c), std::max(s, c))) return false;
    scratch_.push_back(c);
    ++col_count_[c];
    for (const int s : scratch_)
      if (s != c) ++pair_at(std::min(s, c), std::max(s, c));
    return true;
  }

  void pop(int c) {
    scratch_.pop_back();
    --col_count_[c];
    for (const int s : scratch_) --pair_at(std::min(s, c), std::max(s, c));
  }

  void finish_candidate(Rng& rng) {
    candidate_ = scratch_;
    std::sort(candidate_.begin(), candidate_.end());
    if (in_store(candidate_)) return;
    double obj = 0.0;
    for (const int c : candidate_) obj += weights_[c];
    if (obj > best_obj_) {
      best_obj_ = obj;
      best_row_ = candidate_;
      tie_count_ = 1;
    } else if (obj == best_obj_) {
      ++tie_count_;
      if (rng.next_below(static_cast<std::uint64_t>(tie_count_)) == 0) best_row_ = candidate_;
    }
  }

  DesignSpec spec_;
  HybridOptions opts_;
  TargetConcurrence target_;
  int v_ = 0;
  int k_ = 0;
  int n_snippet_ = 0;
  double cap_col_ = 0.0, cap_adj_ = 0.0, cap_dist_ = 0.0;
  long max_iterations_ = 0;

  std::vector<int> col_count_;
  std::vector<int> pair_count_;
  std::vector<std::vector<int>> rows_;
  std::vector<std::vector<int>> store_;
  std::unordered_set<std::uint64_t> store_masks_;

  // per-subproblem scratch
  std::vector<double> weights_;
  std::vector<int> free_cols_;
  std::vector<int> scratch_;
  std::vector<int> candidate_;
  std::vector<int> best_row_;
  double best_obj_ = 0.0;
  long tie_count_ = 0;
};

}  // namespace detail

// Builds the hybrid pilot-study design by sequentially solving one exact
// constrained subset problem per subject: row sums fixed at K, running
// concurrence entries capped at target + tolerance, the leading snippet
// rows anchored to a staggered two-point cluster with an exclusion zone,
// the remaining rows barred from adjacent observations. Infeasible
// subjects trigger the randomized make-up process.
inline IncidenceMatrix generate_hybrid_design(const DesignSpec& spec, const HybridOptions& opts = {}) {
  spec.validate();
  detail::HybridBuilder builder(spec, opts);
  return builder.build();
}

}  // namespace pilotdesign
