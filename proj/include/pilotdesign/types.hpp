#pragma once

#include <cmath>
#include <cstdint>
#include <stdexcept>
#include <string>
#include <vector>

namespace pilotdesign {

// Error hierarchy. Every failure mode the library reports maps onto one of
// these; the CLI translates them into exit codes.
struct Error : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// Invalid user input: bad parameters, malformed files. CLI exit code 2.
struct InvalidSpec : Error { using Error::Error; };
struct ParseError : Error { using Error::Error; };
struct DuplicateObservation : ParseError { using ParseError::ParseError; };
struct NonmonotoneGrid : ParseError { using ParseError::ParseError; };
struct ShapeMismatch : Error { using Error::Error; };

// Design construction failures. CLI exit code 3.
struct InfeasibleSpec : Error { using Error::Error; };
struct ConstructionFailed : Error { using Error::Error; };

// Model fitting / evaluation failures.
struct InsufficientData : Error { using Error::Error; };
struct DegenerateCovariance : Error { using Error::Error; };
struct SingularConditioning : Error { using Error::Error; };
struct ZeroTrueOptimum : Error { using Error::Error; };
struct InsufficientSubjects : Error { using Error::Error; };

// Filesystem problems. CLI exit code 5.
struct IoError : Error { using Error::Error; };

enum class DesignStructure { random, snippet, bibd, hybrid };

inline const char* to_string(DesignStructure s) {
  switch (s) {
    case DesignStructure::random: return "random";
    case DesignStructure::snippet: return "snippet";
    case DesignStructure::bibd: return "bibd";
    case DesignStructure::hybrid: return "hybrid";
  }
  return "unknown";
}

inline DesignStructure structure_from_string(const std::string& s) {
  if (s == "random") return DesignStructure::random;
  if (s == "snippet") return DesignStructure::snippet;
  if (s == "bibd") return DesignStructure::bibd;
  if (s == "hybrid") return DesignStructure::hybrid;
  throw InvalidSpec("unknown design structure: " + s);
}

// Parameters of a pilot-study design. Grid columns are indexed 0..grid_size-1
// internally; file formats and CLI output use 1-based labels t1..tv.
struct DesignSpec {
  int n_subjects = 0;
  int grid_size = 0;
  int obs_per_subject = 0;      // observations per subject, 2 <= K <= v
  double snippet_frac = 0.0;    // fraction of subjects under snippet constraints
  double concurrence_tol = 1.0; // additive tolerance on the concurrence targets
  int snippet_gap = 2;          // exclusion radius around a snippet cluster
  std::uint64_t seed = 0;

  // Number of leading rows under snippet constraints: n*w rounded to the
  // nearest integer, ties rounding up.
  int snippet_rows() const {
    return static_cast<int>(std::floor(static_cast<double>(n_subjects) * snippet_frac + 0.5));
  }

  void validate() const {
    if (n_subjects < 1) throw InvalidSpec("subject count must be positive");
    if (grid_size < 2) throw InvalidSpec("grid size must be at least 2");
    if (obs_per_subject < 2) throw InvalidSpec("observations per subject must be at least 2");
    if (obs_per_subject > grid_size)
      throw InvalidSpec("observations per subject cannot exceed the grid size");
    if (snippet_frac < 0.0 || snippet_frac > 1.0)
      throw InvalidSpec("snippet fraction must lie in [0, 1]");
    if (concurrence_tol < 0.0) throw InvalidSpec("concurrence tolerance must be non-negative");
    if (snippet_gap < 0) throw InvalidSpec("snippet gap must be non-negative");
  }
};

// Toeplitz-like concurrence targets: the diagonal value, the value for
// adjacent grid pairs, and the common value for all more distant pairs.
struct TargetConcurrence {
  double diagonal = 0.0;  // c1
  double adjacent = 0.0;  // c2
  double distant = 0.0;   // c3
};

// Binary subject-by-time incidence matrix. Every row sums to the design's
// observations-per-subject count.
struct IncidenceMatrix {
  int n_subjects = 0;
  int grid_size = 0;
  DesignStructure structure = DesignStructure::random;
  int snippet_rows = 0;
  std::vector<std::uint8_t> cells;  // row-major n x v

  IncidenceMatrix() = default;
  IncidenceMatrix(int n, int v, DesignStructure s)
      : n_subjects(n), grid_size(v), structure(s), cells(static_cast<std::size_t>(n) * v, 0) {}

  std::uint8_t operator()(int i, int j) const {
    return cells[static_cast<std::size_t>(i) * grid_size + j];
  }
  std::uint8_t& at(int i, int j) { return cells[static_cast<std::size_t>(i) * grid_size + j]; }

  int row_sum(int i) const {
    int s = 0;
    for (int j = 0; j < grid_size; ++j) s += (*this)(i, j);
    return s;
  }
  int col_sum(int j) const {
    int s = 0;
    for (int i = 0; i < n_subjects; ++i) s += (*this)(i, j);
    return s;
  }
  // Selected column indices of row i, ascending.
  std::vector<int> row_indices(int i) const {
    std::vector<int> idx;
    for (int j = 0; j < grid_size; ++j)
      if ((*this)(i, j)) idx.push_back(j);
    return idx;
  }
  bool operator==(const IncidenceMatrix& o) const {
    return n_subjects == o.n_subjects && grid_size == o.grid_size && cells == o.cells;
  }
};

// Sparse longitudinal observations on a fixed grid: each subject holds the
// strictly increasing grid indices it was observed at and the noisy values.
struct SparseDataset {
  struct Subject {
    std::vector<int> indices;   // 0-based grid indices, strictly increasing
    std::vector<double> values;
  };
  std::vector<double> grid;     // strictly increasing time values
  std::vector<Subject> subjects;

  void validate() const {
    for (std::size_t g = 1; g < grid.size(); ++g)
      if (!(grid[g - 1] < grid[g])) throw NonmonotoneGrid("grid values must be strictly increasing");
    for (const auto& s : subjects) {
      if (s.indices.size() != s.values.size())
        throw ShapeMismatch("subject index/value lengths differ");
      for (std::size_t k = 0; k < s.indices.size(); ++k) {
        if (s.indices[k] < 0 || s.indices[k] >= static_cast<int>(grid.size()))
          throw ShapeMismatch("observation index outside the grid");
        if (k > 0 && s.indices[k] <= s.indices[k - 1])
          throw DuplicateObservation("subject indices must be strictly increasing");
      }
    }
  }
};

// An ordered K-subset of grid indices: a candidate individual design for one
// next-study subject. 0-based internally.
using CandidateDesign = std::vector<int>;

inline void validate_candidate(const CandidateDesign& t, int grid_size) {
  for (std::size_t k = 0; k < t.size(); ++k) {
    if (t[k] < 0 || t[k] >= grid_size) throw InvalidSpec("candidate index outside the grid");
    if (k > 0 && t[k] <= t[k - 1]) throw InvalidSpec("candidate indices must be strictly increasing");
  }
}

}  // namespace pilotdesign
