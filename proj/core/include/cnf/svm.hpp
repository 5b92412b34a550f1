#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "cnf/mat.hpp"

namespace cnf {

// ---------------------------------------------------------------------------
// Kernels
// ---------------------------------------------------------------------------

enum class KernelKind { linear, rbf };

struct KernelSpec {
  KernelKind kind = KernelKind::linear;
  double gamma = 0.0;  // rbf only, > 0
};

/// linear: <x, y>;  rbf: exp(-gamma * |x - y|^2).
double kernel_eval(const KernelSpec& k, std::span<const double> x, std::span<const double> y);

// ---------------------------------------------------------------------------
// SMO solver knobs / diagnostics
// ---------------------------------------------------------------------------

struct SmoOptions {
  double tol = 1e-3;              // KKT stopping tolerance (max violating pair gap)
  long max_iter = 10'000'000;     // hard cap; exceeding it raises no_convergence
  int dense_kernel_limit = 4096;  // precompute the full Gram up to this n
  size_t cache_rows = 1024;       // LRU row budget above the dense limit (>= 2)
};

struct SmoStats {
  long iterations = 0;
  double dual_objective = 0.0;  // maximization form
  double kkt_gap = 0.0;         // m(alpha) - M(alpha) at exit
  std::vector<double> objective_trace;  // sampled every 100 iterations
  std::vector<double> alpha;            // final dual variables
};

// ---------------------------------------------------------------------------
// Classification
// ---------------------------------------------------------------------------

/// One trained binary machine: f(x) = sum_i coef_i K(sv_i, x) + bias with
/// coef_i = alpha_i * y_i.
struct BinaryMachine {
  Mat support_vectors;  // nsv x d
  std::vector<double> coef;
  double bias = 0.0;
  KernelSpec kernel;

  double decision(std::span<const double> x) const;
};

/// SMO to KKT satisfaction within tol. y must be +-1 with both classes
/// present. Deterministic: selection scans in index order.
BinaryMachine svc_train_binary(const Mat& X, const std::vector<int>& y, double C,
                               const KernelSpec& kernel, const SmoOptions& opts = {},
                               SmoStats* stats = nullptr);

/// One-vs-one multiclass classifier. classes is the sorted label list; the
/// machine for pair (i, j), i < j, scores classes[i] as +1.
struct SvcModel {
  std::vector<int> classes;
  std::vector<BinaryMachine> machines;  // pairs in (0,1), (0,2), ..., (k-2,k-1) order

  /// Majority vote; ties go to the earliest class in `classes`.
  int predict(std::span<const double> x) const;
};

SvcModel svc_train(const Mat& X, const std::vector<int>& labels, double C,
                   const KernelSpec& kernel, const SmoOptions& opts = {});

// ---------------------------------------------------------------------------
// Regression
// ---------------------------------------------------------------------------

/// epsilon-insensitive SVR: f(x) = sum_i coef_i K(sv_i, x) + bias with
/// coef_i = alpha_i - alpha*_i.
struct SvrModel {
  Mat support_vectors;
  std::vector<double> coef;
  double bias = 0.0;
  double epsilon = 0.1;
  KernelSpec kernel;

  double predict(std::span<const double> x) const;
};

SvrModel svr_train(const Mat& X, const std::vector<double>& y, double C, double epsilon,
                   const KernelSpec& kernel, const SmoOptions& opts = {},
                   SmoStats* stats = nullptr);

// ---------------------------------------------------------------------------
// Grid search
// ---------------------------------------------------------------------------

/// Hyperparameter grid: 4 linear configs plus 7 x 4 rbf configs = 32 with the
/// defaults. Gammas are listed ascending; enumeration order is linear first
/// (by C), then rbf by (gamma, C). That order is also the tie-break order.
struct GridSpec {
  std::vector<KernelKind> kernels = {KernelKind::linear, KernelKind::rbf};
  std::vector<double> gammas;  // rbf bandwidths, ascending
  std::vector<double> costs = {0.1, 2.0, 8.0, 32.0};

  /// Canonical grid: gammas = sorted {2^-13 ... 2^-3, 1/n_features}.
  static GridSpec paper_grid(int n_features);
};

struct GridPoint {
  KernelSpec kernel;
  double C = 1.0;
};

std::vector<GridPoint> enumerate_grid(const GridSpec& grid);

/// Fit/validation index pairs over the rows handed to grid_search.
struct SelectionSplit {
  std::vector<int> fit;
  std::vector<int> val;
};
struct SelectionPlan {
  std::vector<SelectionSplit> splits;
};

struct GridSearchOptions {
  double svr_epsilon = 0.1;
  SmoOptions smo;
  int threads = 1;  // per-config parallelism; results are schedule-independent
};

struct GridSearchReport {
  std::vector<GridPoint> configs;
  std::vector<double> scores;  // mean validation score per config
  int best_index = -1;
};

/// Score every config on the selection plan (accuracy), pick the max (ties:
/// earliest config), refit on all rows. Errors: empty grid/plan.
GridSearchReport grid_search_classify(const Mat& X, const std::vector<int>& labels,
                                      const GridSpec& grid, const SelectionPlan& plan,
                                      const GridSearchOptions& opts, SvcModel* refit);

/// Same with r^2 scoring and an SVR refit.
GridSearchReport grid_search_regress(const Mat& X, const std::vector<double>& targets,
                                     const GridSpec& grid, const SelectionPlan& plan,
                                     const GridSearchOptions& opts, SvrModel* refit);

/// "linear" / "rbf" (for logs and results tables).
const char* kernel_kind_name(KernelKind k);

}  // namespace cnf
