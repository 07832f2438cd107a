#pragma once

#include <Eigen/Dense>
#include <algorithm>
#include <array>
#include <cstdint>
#include <numeric>
#include <vector>

#include "pilotdesign/rng.hpp"
#include "pilotdesign/types.hpp"

namespace pilotdesign {

inline double binomial2(double m) { return m * (m - 1.0) / 2.0; }

// Concurrence targets for a hybrid design. The diagonal target spreads the
// n*K observations evenly over the grid; the adjacent target mixes the
// snippet and near-BIBD contributions by the snippet fraction; the distant
// target distributes the remaining unordered pairs evenly, so that
//   adjacent*(v-1) + distant*C(v-1,2) = n*C(K,2)
// holds exactly (pair conservation).
inline TargetConcurrence target_concurrence(const DesignSpec& spec) {
  spec.validate();
  const double n = spec.n_subjects;
  const double v = spec.grid_size;
  const double k = spec.obs_per_subject;
  const double w = spec.snippet_frac;
  TargetConcurrence t;
  t.diagonal = n * k / v;
  t.adjacent = w * n * (k - 1.0) / (v - 1.0) + (1.0 - w) * n * k * (k - 1.0) / (v * (v - 1.0));
  const double distant_slots = binomial2(v - 1.0);
  t.distant = distant_slots > 0.0 ? (n * binomial2(k) - t.adjacent * (v - 1.0)) / distant_slots : 0.0;
  return t;
}

// Alternative distant target computed with a subject-based denominator
// C(n-1,2) instead of the pair-conserving grid denominator; surfaced in
// design metadata for comparison.
inline double distant_target_subject_denominator(const DesignSpec& spec) {
  const TargetConcurrence t = target_concurrence(spec);
  const double slots = binomial2(static_cast<double>(spec.n_subjects) - 1.0);
  return slots > 0.0
             ? (spec.n_subjects * binomial2(spec.obs_per_subject) - t.adjacent * (spec.grid_size - 1.0)) / slots
             : 0.0;
}

namespace detail {

// Uniform random K-subset of {0..v-1}, ascending (partial Fisher-Yates).
inline std::vector<int> random_subset(int v, int k, Rng& rng) {
  std::vector<int> pool(v);
  std::iota(pool.begin(), pool.end(), 0);
  for (int i = 0; i < k; ++i) {
    const int j = i + static_cast<int>(rng.next_below(static_cast<std::uint64_t>(v - i)));
    std::swap(pool[i], pool[j]);
  }
  std::vector<int> out(pool.begin(), pool.begin() + k);
  std::sort(out.begin(), out.end());
  return out;
}

}  // namespace detail

// Each row is an independent uniform K-subset of the grid.
inline IncidenceMatrix generate_random_design(const DesignSpec& spec) {
  spec.validate();
  IncidenceMatrix m(spec.n_subjects, spec.grid_size, DesignStructure::random);
  Rng rng = make_stream(spec.seed, "random-design");
  for (int i = 0; i < spec.n_subjects; ++i)
    for (const int j : detail::random_subset(spec.grid_size, spec.obs_per_subject, rng)) m.at(i, j) = 1;
  return m;
}

// Each row is a run of K consecutive grid points. Start positions cycle
// through all v-K+1 possibilities, in a fresh random order for every cycle,
// so the diagonal band fills evenly before any start repeats.
inline IncidenceMatrix generate_snippet_design(const DesignSpec& spec) {
  spec.validate();
  const int n_starts = spec.grid_size - spec.obs_per_subject + 1;
  IncidenceMatrix m(spec.n_subjects, spec.grid_size, DesignStructure::snippet);
  m.snippet_rows = spec.n_subjects;
  Rng rng = make_stream(spec.seed, "snippet-design");
  std::vector<int> starts(n_starts);
  std::iota(starts.begin(), starts.end(), 0);
  for (int i = 0; i < spec.n_subjects; ++i) {
    const int phase = i % n_starts;
    if (phase == 0) rng.shuffle(starts.begin(), starts.end());
    const int s = starts[phase];
    for (int j = 0; j < spec.obs_per_subject; ++j) m.at(i, s + j) = 1;
  }
  return m;
}

// The 30x25 incidence matrix of the resolvable 2-(25,5,1) design given by
// the affine plane of order 5: rows are the 30 lines (25 sloped + 5
// vertical), columns are the 25 points (x,y) in Z5 x Z5 indexed as 5x+y.
// Every column appears 6 times and every pair of columns exactly once.
// The seed randomly relabels the points, producing an isomorphic design.
inline IncidenceMatrix generate_bibd(std::uint64_t seed) {
  constexpr int q = 5;
  IncidenceMatrix m(q * q + q, q * q, DesignStructure::bibd);

  std::vector<int> relabel(q * q);
  std::iota(relabel.begin(), relabel.end(), 0);
  Rng rng = make_stream(seed, "bibd-relabel");
  rng.shuffle(relabel.begin(), relabel.end());

  int row = 0;
  for (int slope = 0; slope < q; ++slope)
    for (int intercept = 0; intercept < q; ++intercept, ++row)
      for (int x = 0; x < q; ++x) {
        const int y = (slope * x + intercept) % q;
        m.at(row, relabel[q * x + y]) = 1;
      }
  for (int x = 0; x < q; ++x, ++row)
    for (int y = 0; y < q; ++y) m.at(row, relabel[q * x + y]) = 1;
  return m;
}

// Stacks full copies of the base design and tops up with rows sampled from
// it without replacement, preserving row sums and (approximately) column
// balance.
inline IncidenceMatrix extend_design(const IncidenceMatrix& base, int n_target, std::uint64_t seed) {
  if (n_target < 1) throw InvalidSpec("extended design needs at least one subject");
  if (base.n_subjects < 1) throw InvalidSpec("base design is empty");
  IncidenceMatrix m(n_target, base.grid_size, base.structure);
  m.snippet_rows = 0;
  const int copies = n_target / base.n_subjects;
  const int extra = n_target % base.n_subjects;
  int row = 0;
  for (int c = 0; c < copies; ++c)
    for (int i = 0; i < base.n_subjects; ++i, ++row)
      for (int j = 0; j < base.grid_size; ++j) m.at(row, j) = base(i, j);
  if (extra > 0) {
    Rng rng = make_stream(seed, "extend-design");
    const std::vector<int> pick = detail::random_subset(base.n_subjects, extra, rng);
    for (const int i : pick) {
      for (int j = 0; j < base.grid_size; ++j) m.at(row, j) = base(i, j);
      ++row;
    }
  }
  return m;
}

// v x v concurrence matrix N'N: entry (j,k) counts the subjects observed at
// both grid points j and k.
inline Eigen::MatrixXi concurrence(const IncidenceMatrix& design) {
  const int v = design.grid_size;
  Eigen::MatrixXi c = Eigen::MatrixXi::Zero(v, v);
  for (int i = 0; i < design.n_subjects; ++i) {
    const std::vector<int> idx = design.row_indices(i);
    for (std::size_t a = 0; a < idx.size(); ++a)
      for (std::size_t b = a; b < idx.size(); ++b) {
        c(idx[a], idx[b]) += 1;
        if (a != b) c(idx[b], idx[a]) += 1;
      }
  }
  return c;
}

// Nonzero upper-triangle entries of the concurrence matrix, for design plots.
struct PlotTriple {
  int first = 0;   // grid index j
  int second = 0;  // grid index k >= j
  int count = 0;
};

inline std::vector<PlotTriple> design_plot_data(const IncidenceMatrix& design) {
  const Eigen::MatrixXi c = concurrence(design);
  std::vector<PlotTriple> out;
  for (int j = 0; j < c.rows(); ++j)
    for (int k = j; k < c.cols(); ++k)
      if (c(j, k) != 0) out.push_back({j, k, c(j, k)});
  return out;
}

// Signed worst-case deviations of an achieved concurrence matrix from the
// targets, split by entry class.
struct ConcurrenceDeviation {
  double diagonal = 0.0;
  double adjacent = 0.0;
  double distant = 0.0;
};

inline ConcurrenceDeviation concurrence_deviation(const IncidenceMatrix& design,
                                                  const TargetConcurrence& target) {
  const Eigen::MatrixXi c = concurrence(design);
  const int v = design.grid_size;
  ConcurrenceDeviation d{-1e300, -1e300, -1e300};
  for (int j = 0; j < v; ++j) d.diagonal = std::max(d.diagonal, c(j, j) - target.diagonal);
  for (int j = 0; j + 1 < v; ++j) d.adjacent = std::max(d.adjacent, c(j, j + 1) - target.adjacent);
  for (int j = 0; j + 2 < v; ++j)
    for (int k = j + 2; k < v; ++k) d.distant = std::max(d.distant, c(j, k) - target.distant);
  if (v < 2) d.adjacent = 0.0;
  if (v < 3) d.distant = 0.0;
  return d;
}

}  // namespace pilotdesign
