#include "cnf/svm.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <list>
#include <memory>
#include <stdexcept>
#include <unordered_map>

#include "cnf/eval.hpp"
#include "cnf/parallel.hpp"

namespace cnf {

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();

double dot(const double* a, const double* b, int d) {
  double s = 0.0;
  for (int i = 0; i < d; ++i) s += a[i] * b[i];
  return s;
}

void check_finite(const Mat& X, const char* what) {
  for (double v : X.v)
    if (!std::isfinite(v)) raise(Errc::non_finite, std::string(what) + " contains NaN/Inf");
}

// --- Kernel row providers ---------------------------------------------------

class KernelProvider {
 public:
  virtual ~KernelProvider() = default;
  virtual const double* row(int i) = 0;  // K(i, ·), length n; valid until the next row() call
  virtual double diag(int i) const = 0;
  virtual int n() const = 0;
};

/// Full Gram matrix, for desk-scale problems and grid search.
class DenseKernel : public KernelProvider {
 public:
  DenseKernel(Mat gram) : gram_(std::move(gram)) {}

  static DenseKernel from_data(const Mat& X, const KernelSpec& k) {
    const int n = X.rows;
    Mat g(n, n);
    for (int i = 0; i < n; ++i) {
      for (int j = 0; j <= i; ++j) {
        double v = kernel_eval(k, {X.row(i), size_t(X.cols)}, {X.row(j), size_t(X.cols)});
        g.at(i, j) = v;
        g.at(j, i) = v;
      }
    }
    return DenseKernel(std::move(g));
  }

  const double* row(int i) override { return gram_.row(i); }
  double diag(int i) const override { return gram_.at(i, i); }
  int n() const override { return gram_.rows; }

 private:
  Mat gram_;
};

/// Kernel rows computed on demand with least-recently-used eviction. The two
/// most recent rows are always resident (the solver uses rows i and j of the
/// working pair simultaneously), so the budget must be >= 2.
class CachedKernel : public KernelProvider {
 public:
  CachedKernel(const Mat& X, const KernelSpec& k, size_t max_rows)
      : X_(X), spec_(k), max_rows_(std::max<size_t>(2, max_rows)) {
    if (k.kind == KernelKind::rbf) {
      sqnorm_.resize(size_t(X.rows));
      for (int i = 0; i < X.rows; ++i) sqnorm_[size_t(i)] = dot(X.row(i), X.row(i), X.cols);
    }
  }

  const double* row(int i) override {
    auto it = index_.find(i);
    if (it != index_.end()) {
      rows_.splice(rows_.begin(), rows_, it->second);
      return it->second->second.data();
    }
    if (rows_.size() >= max_rows_) {
      index_.erase(rows_.back().first);
      rows_.pop_back();
    }
    rows_.emplace_front(i, compute(i));
    index_[i] = rows_.begin();
    return rows_.begin()->second.data();
  }

  double diag(int i) const override {
    if (spec_.kind == KernelKind::rbf) return 1.0;
    return dot(X_.row(i), X_.row(i), X_.cols);
  }
  int n() const override { return X_.rows; }

 private:
  std::vector<double> compute(int i) const {
    std::vector<double> out(size_t(X_.rows));
    const double* xi = X_.row(i);
    if (spec_.kind == KernelKind::linear) {
      for (int j = 0; j < X_.rows; ++j) out[size_t(j)] = dot(xi, X_.row(j), X_.cols);
    } else {
      for (int j = 0; j < X_.rows; ++j) {
        double d2 = sqnorm_[size_t(i)] + sqnorm_[size_t(j)] - 2.0 * dot(xi, X_.row(j), X_.cols);
        out[size_t(j)] = std::exp(-spec_.gamma * std::max(0.0, d2));
      }
    }
    return out;
  }

  const Mat& X_;
  KernelSpec spec_;
  size_t max_rows_;
  std::vector<double> sqnorm_;
  std::list<std::pair<int, std::vector<double>>> rows_;
  std::unordered_map<int, std::list<std::pair<int, std::vector<double>>>::iterator> index_;
};

// --- Generic SMO ------------------------------------------------------------
//
// min  1/2 b^T Q b + p^T b   s.t.  y^T b = 0,  0 <= b <= C,
// with Q_st = y_s y_t K(sample(s), sample(t)). Classification uses p = -1 and
// one variable per sample; epsilon-SVR maps to 2n variables over the same
// kernel. Working-set selection is the maximal violating pair; the reported
// dual objective is the maximization form -(1/2 b^T Q b + p^T b).

struct SmoProblem {
  std::vector<double> p;
  std::vector<signed char> y;     // +-1 per variable
  std::vector<int> sample_of;     // variable -> kernel row
  double C = 1.0;
};

struct SmoResult {
  std::vector<double> beta;
  double bias = 0.0;
  long iterations = 0;
  double kkt_gap = 0.0;
  double objective = 0.0;  // maximization form
  std::vector<double> trace;
};

SmoResult smo_solve(const SmoProblem& prob, KernelProvider& kernel, const SmoOptions& opts) {
  const int n = int(prob.p.size());
  std::vector<double> beta(size_t(n), 0.0);
  std::vector<double> G = prob.p;  // gradient of the minimization objective

  auto objective_max = [&] {
    double f = 0.0;
    for (int s = 0; s < n; ++s) f += beta[size_t(s)] * (G[size_t(s)] + prob.p[size_t(s)]);
    return -0.5 * f;
  };

  SmoResult res;
  double last_obj = -kInf;
  long iter = 0;
  for (;; ++iter) {
    // maximal violating pair
    int i = -1, j = -1;
    double m_val = -kInf, M_val = kInf;
    for (int s = 0; s < n; ++s) {
      const double v = -double(prob.y[size_t(s)]) * G[size_t(s)];
      const bool up = prob.y[size_t(s)] > 0 ? beta[size_t(s)] < prob.C : beta[size_t(s)] > 0.0;
      const bool low = prob.y[size_t(s)] > 0 ? beta[size_t(s)] > 0.0 : beta[size_t(s)] < prob.C;
      if (up && v > m_val) {
        m_val = v;
        i = s;
      }
      if (low && v < M_val) {
        M_val = v;
        j = s;
      }
    }
    res.kkt_gap = (i >= 0 && j >= 0) ? m_val - M_val : 0.0;
    if (i < 0 || j < 0 || m_val - M_val <= opts.tol) {
      if (i >= 0 && j >= 0) {
        res.bias = 0.5 * (m_val + M_val);
      } else {
        // one side empty: fall back to the unrestricted extreme values
        double lo = kInf, hi = -kInf;
        for (int s = 0; s < n; ++s) {
          double v = -double(prob.y[size_t(s)]) * G[size_t(s)];
          lo = std::min(lo, v);
          hi = std::max(hi, v);
        }
        res.bias = 0.5 * (lo + hi);
      }
      break;
    }
    if (iter >= opts.max_iter)
      raise(Errc::no_convergence, "SMO exceeded " + std::to_string(opts.max_iter) + " iterations");

    const double* ki = kernel.row(prob.sample_of[size_t(i)]);
    const double* kj = kernel.row(prob.sample_of[size_t(j)]);
    const double kii = kernel.diag(prob.sample_of[size_t(i)]);
    const double kjj = kernel.diag(prob.sample_of[size_t(j)]);
    const double kij = ki[prob.sample_of[size_t(j)]];

    double a = kii + kjj - 2.0 * kij;
    if (a <= 0.0) a = 1e-12;
    double t = (m_val - M_val) / a;

    // clamp the step to the box
    const double yi = double(prob.y[size_t(i)]), yj = double(prob.y[size_t(j)]);
    t = std::min(t, yi > 0 ? prob.C - beta[size_t(i)] : beta[size_t(i)]);
    t = std::min(t, yj > 0 ? beta[size_t(j)] : prob.C - beta[size_t(j)]);

    const double dbi = yi * t, dbj = -yj * t;
    beta[size_t(i)] += dbi;
    beta[size_t(j)] += dbj;

    for (int s = 0; s < n; ++s) {
      const double ys = double(prob.y[size_t(s)]);
      G[size_t(s)] += ys * yi * ki[prob.sample_of[size_t(s)]] * dbi +
                      ys * yj * kj[prob.sample_of[size_t(s)]] * dbj;
    }

    if (iter % 100 == 0) {
      double obj = objective_max();
      if (obj < last_obj - 1e-9 * std::max(1.0, std::abs(last_obj)))
        throw std::logic_error("SMO dual objective decreased");
      last_obj = obj;
      res.trace.push_back(obj);
    }
  }

  res.beta = std::move(beta);
  res.iterations = iter;
  res.objective = objective_max();
  res.trace.push_back(res.objective);
  return res;
}

std::unique_ptr<KernelProvider> make_provider(const Mat& X, const KernelSpec& k,
                                              const SmoOptions& opts) {
  if (X.rows <= opts.dense_kernel_limit)
    return std::make_unique<DenseKernel>(DenseKernel::from_data(X, k));
  return std::make_unique<CachedKernel>(X, k, opts.cache_rows);
}

}  // namespace

// --- Public kernel ----------------------------------------------------------

double kernel_eval(const KernelSpec& k, std::span<const double> x, std::span<const double> y) {
  if (x.size() != y.size()) raise(Errc::shape_mismatch, "kernel operands differ in dimension");
  if (k.kind == KernelKind::linear) {
    return dot(x.data(), y.data(), int(x.size()));
  }
  if (!(k.gamma > 0.0)) raise(Errc::invalid_argument, "rbf gamma must be > 0");
  double d2 = 0.0;
  for (size_t i = 0; i < x.size(); ++i) {
    double d = x[i] - y[i];
    d2 += d * d;
  }
  return std::exp(-k.gamma * d2);
}

const char* kernel_kind_name(KernelKind k) {
  return k == KernelKind::linear ? "linear" : "rbf";
}

// --- SVC --------------------------------------------------------------------

double BinaryMachine::decision(std::span<const double> x) const {
  double f = bias;
  for (int i = 0; i < support_vectors.rows; ++i)
    f += coef[size_t(i)] *
         kernel_eval(kernel, {support_vectors.row(i), size_t(support_vectors.cols)}, x);
  return f;
}

BinaryMachine svc_train_binary(const Mat& X, const std::vector<int>& y, double C,
                               const KernelSpec& kernel, const SmoOptions& opts,
                               SmoStats* stats) {
  if (X.rows < 2) raise(Errc::invalid_argument, "need at least two samples");
  if (int(y.size()) != X.rows) raise(Errc::shape_mismatch, "labels vs rows");
  check_finite(X, "features");
  int pos = 0, neg = 0;
  for (int v : y) {
    if (v == 1) ++pos;
    else if (v == -1) ++neg;
    else raise(Errc::invalid_argument, "labels must be +-1");
  }
  if (pos == 0 || neg == 0) raise(Errc::single_class, "both classes required");
  if (!(C > 0.0)) raise(Errc::invalid_argument, "C must be > 0");

  SmoProblem prob;
  prob.C = C;
  prob.p.assign(size_t(X.rows), -1.0);
  prob.y.resize(size_t(X.rows));
  prob.sample_of.resize(size_t(X.rows));
  for (int i = 0; i < X.rows; ++i) {
    prob.y[size_t(i)] = y[size_t(i)] > 0 ? 1 : -1;
    prob.sample_of[size_t(i)] = i;
  }

  auto provider = make_provider(X, kernel, opts);
  SmoResult r = smo_solve(prob, *provider, opts);

  BinaryMachine m;
  m.kernel = kernel;
  m.bias = r.bias;
  std::vector<int> sv;
  for (int i = 0; i < X.rows; ++i)
    if (r.beta[size_t(i)] > 0.0) sv.push_back(i);
  if (sv.empty()) raise(Errc::no_convergence, "no support vectors");
  m.support_vectors = X.take_rows(sv);
  m.coef.reserve(sv.size());
  for (int i : sv) m.coef.push_back(r.beta[size_t(i)] * double(y[size_t(i)]));

  if (stats) {
    stats->iterations = r.iterations;
    stats->dual_objective = r.objective;
    stats->kkt_gap = r.kkt_gap;
    stats->objective_trace = r.trace;
    stats->alpha = r.beta;
  }
  return m;
}

int SvcModel::predict(std::span<const double> x) const {
  const int k = int(classes.size());
  std::vector<int> votes(size_t(k), 0);
  size_t mi = 0;
  for (int i = 0; i < k; ++i) {
    for (int j = i + 1; j < k; ++j, ++mi) {
      double d = machines[mi].decision(x);
      ++votes[size_t(d >= 0.0 ? i : j)];
    }
  }
  int best = 0;
  for (int i = 1; i < k; ++i)
    if (votes[size_t(i)] > votes[size_t(best)]) best = i;  // ties keep the earliest
  return classes[size_t(best)];
}

SvcModel svc_train(const Mat& X, const std::vector<int>& labels, double C,
                   const KernelSpec& kernel, const SmoOptions& opts) {
  if (int(labels.size()) != X.rows) raise(Errc::shape_mismatch, "labels vs rows");
  SvcModel model;
  model.classes = labels;
  std::sort(model.classes.begin(), model.classes.end());
  model.classes.erase(std::unique(model.classes.begin(), model.classes.end()),
                      model.classes.end());
  if (model.classes.size() < 2) raise(Errc::single_class, "need at least two classes");

  const int k = int(model.classes.size());
  for (int i = 0; i < k; ++i) {
    for (int j = i + 1; j < k; ++j) {
      std::vector<int> rows;
      std::vector<int> y;
      for (int r = 0; r < X.rows; ++r) {
        if (labels[size_t(r)] == model.classes[size_t(i)]) {
          rows.push_back(r);
          y.push_back(1);
        } else if (labels[size_t(r)] == model.classes[size_t(j)]) {
          rows.push_back(r);
          y.push_back(-1);
        }
      }
      Mat sub = X.take_rows(rows);
      model.machines.push_back(svc_train_binary(sub, y, C, kernel, opts));
    }
  }
  return model;
}

// --- SVR --------------------------------------------------------------------

double SvrModel::predict(std::span<const double> x) const {
  double f = bias;
  for (int i = 0; i < support_vectors.rows; ++i)
    f += coef[size_t(i)] *
         kernel_eval(kernel, {support_vectors.row(i), size_t(support_vectors.cols)}, x);
  return f;
}

SvrModel svr_train(const Mat& X, const std::vector<double>& y, double C, double epsilon,
                   const KernelSpec& kernel, const SmoOptions& opts, SmoStats* stats) {
  if (X.rows < 2) raise(Errc::invalid_argument, "need at least two samples");
  if (int(y.size()) != X.rows) raise(Errc::shape_mismatch, "targets vs rows");
  check_finite(X, "features");
  for (double t : y)
    if (!std::isfinite(t)) raise(Errc::non_finite, "targets contain NaN/Inf");
  if (!(C > 0.0) || !(epsilon >= 0.0)) raise(Errc::invalid_argument, "bad C / epsilon");

  const int n = X.rows;
  SmoProblem prob;
  prob.C = C;
  prob.p.resize(size_t(2 * n));
  prob.y.resize(size_t(2 * n));
  prob.sample_of.resize(size_t(2 * n));
  for (int i = 0; i < n; ++i) {
    prob.p[size_t(i)] = epsilon - y[size_t(i)];
    prob.y[size_t(i)] = 1;
    prob.sample_of[size_t(i)] = i;
    prob.p[size_t(n + i)] = epsilon + y[size_t(i)];
    prob.y[size_t(n + i)] = -1;
    prob.sample_of[size_t(n + i)] = i;
  }

  auto provider = make_provider(X, kernel, opts);
  SmoResult r = smo_solve(prob, *provider, opts);

  SvrModel m;
  m.kernel = kernel;
  m.epsilon = epsilon;
  m.bias = r.bias;
  std::vector<int> sv;
  std::vector<double> coef;
  for (int i = 0; i < n; ++i) {
    double b = r.beta[size_t(i)] - r.beta[size_t(n + i)];
    if (b != 0.0) {
      sv.push_back(i);
      coef.push_back(b);
    }
  }
  m.support_vectors = X.take_rows(sv);
  m.coef = std::move(coef);

  if (stats) {
    stats->iterations = r.iterations;
    stats->dual_objective = r.objective;
    stats->kkt_gap = r.kkt_gap;
    stats->objective_trace = r.trace;
    stats->alpha = r.beta;
  }
  return m;
}

// --- Grid search ------------------------------------------------------------

GridSpec GridSpec::paper_grid(int n_features) {
  if (n_features < 1) raise(Errc::invalid_argument, "n_features must be positive");
  GridSpec g;
  g.gammas = {std::pow(2.0, -13), std::pow(2.0, -11), std::pow(2.0, -9),
              std::pow(2.0, -7), std::pow(2.0, -5), std::pow(2.0, -3)};
  g.gammas.push_back(1.0 / double(n_features));
  std::sort(g.gammas.begin(), g.gammas.end());
  return g;
}

std::vector<GridPoint> enumerate_grid(const GridSpec& grid) {
  std::vector<GridPoint> out;
  for (KernelKind k : grid.kernels) {
    if (k == KernelKind::linear) {
      for (double c : grid.costs) out.push_back({KernelSpec{KernelKind::linear, 0.0}, c});
    } else {
      for (double g : grid.gammas)
        for (double c : grid.costs) out.push_back({KernelSpec{KernelKind::rbf, g}, c});
    }
  }
  return out;
}

namespace {

/// Shared per-split geometry so 32 configs do not recompute O(n^2 d) work:
/// the linear Gram and squared distances of the fit rows, plus the cross
/// blocks against the validation rows.
struct SplitGeometry {
  Mat fit_gram;      // nf x nf dot products
  Mat fit_sqdist;    // nf x nf squared distances
  Mat cross_gram;    // nv x nf
  Mat cross_sqdist;  // nv x nf
};

SplitGeometry make_geometry(const Mat& fit, const Mat& val) {
  SplitGeometry g;
  const int nf = fit.rows, nv = val.rows, d = fit.cols;
  std::vector<double> fit_sq(size_t(nf)), val_sq(size_t(nv));
  for (int i = 0; i < nf; ++i) fit_sq[size_t(i)] = dot(fit.row(i), fit.row(i), d);
  for (int i = 0; i < nv; ++i) val_sq[size_t(i)] = dot(val.row(i), val.row(i), d);
  g.fit_gram = Mat(nf, nf);
  g.fit_sqdist = Mat(nf, nf);
  for (int i = 0; i < nf; ++i) {
    for (int j = 0; j <= i; ++j) {
      double dp = dot(fit.row(i), fit.row(j), d);
      double d2 = std::max(0.0, fit_sq[size_t(i)] + fit_sq[size_t(j)] - 2.0 * dp);
      g.fit_gram.at(i, j) = g.fit_gram.at(j, i) = dp;
      g.fit_sqdist.at(i, j) = g.fit_sqdist.at(j, i) = d2;
    }
  }
  g.cross_gram = Mat(nv, nf);
  g.cross_sqdist = Mat(nv, nf);
  for (int i = 0; i < nv; ++i) {
    for (int j = 0; j < nf; ++j) {
      double dp = dot(val.row(i), fit.row(j), d);
      g.cross_gram.at(i, j) = dp;
      g.cross_sqdist.at(i, j) =
          std::max(0.0, val_sq[size_t(i)] + fit_sq[size_t(j)] - 2.0 * dp);
    }
  }
  return g;
}

Mat config_gram(const SplitGeometry& g, const KernelSpec& k) {
  if (k.kind == KernelKind::linear) return g.fit_gram;
  Mat out = g.fit_sqdist;
  for (double& v : out.v) v = std::exp(-k.gamma * v);
  return out;
}

Mat config_cross(const SplitGeometry& g, const KernelSpec& k) {
  if (k.kind == KernelKind::linear) return g.cross_gram;
  Mat out = g.cross_sqdist;
  for (double& v : out.v) v = std::exp(-k.gamma * v);
  return out;
}

/// SMO on a precomputed Gram; returns beta and bias (classification form).
SmoResult solve_precomputed(const Mat& gram, const std::vector<double>& p,
                            const std::vector<signed char>& yv, const std::vector<int>& sample_of,
                            double C, const SmoOptions& opts) {
  SmoProblem prob;
  prob.p = p;
  prob.y = yv;
  prob.sample_of = sample_of;
  prob.C = C;
  DenseKernel kernel{gram};
  return smo_solve(prob, kernel, opts);
}

template <class Score>
GridSearchReport grid_search_impl(int n_rows, const GridSpec& grid, const SelectionPlan& plan,
                                  const GridSearchOptions& opts, const Score& score_config) {
  GridSearchReport rep;
  rep.configs = enumerate_grid(grid);
  if (rep.configs.empty()) raise(Errc::invalid_argument, "empty grid");
  if (plan.splits.empty()) raise(Errc::invalid_argument, "empty selection plan");
  for (const auto& s : plan.splits) {
    if (s.fit.empty() || s.val.empty())
      raise(Errc::invalid_argument, "degenerate selection split");
    for (int i : s.fit)
      if (i < 0 || i >= n_rows) raise(Errc::invalid_argument, "selection index out of range");
    for (int i : s.val)
      if (i < 0 || i >= n_rows) raise(Errc::invalid_argument, "selection index out of range");
  }

  rep.scores.assign(rep.configs.size(), 0.0);
  parallel_for(rep.configs.size(), opts.threads,
               [&](size_t c) { rep.scores[c] = score_config(rep.configs[c]); });

  rep.best_index = 0;
  for (size_t c = 1; c < rep.configs.size(); ++c)
    if (rep.scores[c] > rep.scores[size_t(rep.best_index)]) rep.best_index = int(c);
  return rep;
}

}  // namespace

GridSearchReport grid_search_classify(const Mat& X, const std::vector<int>& labels,
                                      const GridSpec& grid, const SelectionPlan& plan,
                                      const GridSearchOptions& opts, SvcModel* refit) {
  if (int(labels.size()) != X.rows) raise(Errc::shape_mismatch, "labels vs rows");

  // class list (sorted) shared by every split
  std::vector<int> classes = labels;
  std::sort(classes.begin(), classes.end());
  classes.erase(std::unique(classes.begin(), classes.end()), classes.end());
  if (classes.size() < 2) raise(Errc::single_class, "need at least two classes");
  const int k = int(classes.size());

  // Per split and class pair: geometry of the pairwise-restricted rows.
  struct PairBlock {
    SplitGeometry geom;
    std::vector<signed char> y;  // over fit rows of this pair
    std::vector<int> val_rows;   // validation rows (indices into the split's val list)
    std::vector<int> sample_of;
  };
  struct SplitBlocks {
    std::vector<PairBlock> pairs;  // (i,j) in canonical order
    std::vector<int> val_truth;    // labels of the split's validation rows
  };
  std::vector<SplitBlocks> split_blocks;
  split_blocks.reserve(plan.splits.size());
  for (const auto& split : plan.splits) {
    SplitBlocks sb;
    Mat val = X.take_rows(split.val);
    for (int v : split.val) sb.val_truth.push_back(labels[size_t(v)]);
    for (int i = 0; i < k; ++i) {
      for (int j = i + 1; j < k; ++j) {
        PairBlock pb;
        std::vector<int> fit_rows;
        for (int r : split.fit) {
          if (labels[size_t(r)] == classes[size_t(i)]) {
            fit_rows.push_back(r);
            pb.y.push_back(1);
          } else if (labels[size_t(r)] == classes[size_t(j)]) {
            fit_rows.push_back(r);
            pb.y.push_back(-1);
          }
        }
        Mat fit = X.take_rows(fit_rows);
        pb.geom = make_geometry(fit, val);
        pb.sample_of.resize(pb.y.size());
        for (size_t s = 0; s < pb.y.size(); ++s) pb.sample_of[s] = int(s);
        sb.pairs.push_back(std::move(pb));
      }
    }
    split_blocks.push_back(std::move(sb));
  }

  auto score_config = [&](const GridPoint& gp) -> double {
    double total = 0.0;
    for (const auto& sb : split_blocks) {
      const int nv = int(sb.val_truth.size());
      std::vector<int> votes(size_t(nv) * size_t(k), 0);
      size_t pair_idx = 0;
      for (int i = 0; i < k; ++i) {
        for (int j = i + 1; j < k; ++j, ++pair_idx) {
          const PairBlock& pb = sb.pairs[pair_idx];
          if (pb.y.empty()) continue;
          bool has_pos = false, has_neg = false;
          for (signed char c : pb.y) (c > 0 ? has_pos : has_neg) = true;
          if (!has_pos || !has_neg) continue;  // pair absent in this fit portion
          std::vector<double> p(pb.y.size(), -1.0);
          Mat gram = config_gram(pb.geom, gp.kernel);
          SmoResult r = solve_precomputed(gram, p, pb.y, pb.sample_of, gp.C, opts.smo);
          Mat cross = config_cross(pb.geom, gp.kernel);
          for (int v = 0; v < nv; ++v) {
            double f = r.bias;
            const double* krow = cross.row(v);
            for (size_t s = 0; s < pb.y.size(); ++s)
              f += r.beta[s] * double(pb.y[s]) * krow[s];
            ++votes[size_t(v) * size_t(k) + size_t(f >= 0.0 ? i : j)];
          }
        }
      }
      int correct = 0;
      for (int v = 0; v < nv; ++v) {
        int best = 0;
        const int* vv = votes.data() + size_t(v) * size_t(k);
        for (int c = 1; c < k; ++c)
          if (vv[c] > vv[best]) best = c;
        if (classes[size_t(best)] == sb.val_truth[size_t(v)]) ++correct;
      }
      total += double(correct) / double(nv);
    }
    return total / double(split_blocks.size());
  };

  GridSearchReport rep = grid_search_impl(X.rows, grid, plan, opts, score_config);
  if (refit) {
    const GridPoint& best = rep.configs[size_t(rep.best_index)];
    *refit = svc_train(X, labels, best.C, best.kernel, opts.smo);
  }
  return rep;
}

GridSearchReport grid_search_regress(const Mat& X, const std::vector<double>& targets,
                                     const GridSpec& grid, const SelectionPlan& plan,
                                     const GridSearchOptions& opts, SvrModel* refit) {
  if (int(targets.size()) != X.rows) raise(Errc::shape_mismatch, "targets vs rows");

  struct SplitGeom {
    SplitGeometry geom;
    std::vector<double> fit_y, val_y;
    std::vector<signed char> yv;
    std::vector<int> sample_of;
  };
  std::vector<SplitGeom> geoms;
  geoms.reserve(plan.splits.size());
  for (const auto& split : plan.splits) {
    SplitGeom sg;
    Mat fit = X.take_rows(split.fit);
    Mat val = X.take_rows(split.val);
    for (int r : split.fit) sg.fit_y.push_back(targets[size_t(r)]);
    for (int r : split.val) sg.val_y.push_back(targets[size_t(r)]);
    sg.geom = make_geometry(fit, val);
    const int nf = fit.rows;
    sg.yv.resize(size_t(2 * nf));
    sg.sample_of.resize(size_t(2 * nf));
    for (int i = 0; i < nf; ++i) {
      sg.yv[size_t(i)] = 1;
      sg.sample_of[size_t(i)] = i;
      sg.yv[size_t(nf + i)] = -1;
      sg.sample_of[size_t(nf + i)] = i;
    }
    geoms.push_back(std::move(sg));
  }

  auto score_config = [&](const GridPoint& gp) -> double {
    double total = 0.0;
    for (const auto& sg : geoms) {
      const int nf = int(sg.fit_y.size());
      std::vector<double> p(size_t(2 * nf));
      for (int i = 0; i < nf; ++i) {
        p[size_t(i)] = opts.svr_epsilon - sg.fit_y[size_t(i)];
        p[size_t(nf + i)] = opts.svr_epsilon + sg.fit_y[size_t(i)];
      }
      Mat gram = config_gram(sg.geom, gp.kernel);
      SmoResult r = solve_precomputed(gram, p, sg.yv, sg.sample_of, gp.C, opts.smo);
      Mat cross = config_cross(sg.geom, gp.kernel);
      std::vector<double> pred(sg.val_y.size());
      for (size_t v = 0; v < sg.val_y.size(); ++v) {
        double f = r.bias;
        const double* krow = cross.row(int(v));
        for (int s = 0; s < nf; ++s) f += (r.beta[size_t(s)] - r.beta[size_t(nf + s)]) * krow[s];
        pred[v] = f;
      }
      double ss_tot = 0.0, mean = 0.0;
      for (double t : sg.val_y) mean += t;
      mean /= double(sg.val_y.size());
      for (double t : sg.val_y) ss_tot += (t - mean) * (t - mean);
      if (ss_tot <= 0.0) {
        total += -kInf;  // constant validation targets cannot rank configs
        continue;
      }
      total += r_squared(pred, sg.val_y);
    }
    return total / double(geoms.size());
  };

  GridSearchReport rep = grid_search_impl(X.rows, grid, plan, opts, score_config);
  if (refit) {
    const GridPoint& best = rep.configs[size_t(rep.best_index)];
    *refit = svr_train(X, targets, best.C, opts.svr_epsilon, best.kernel, opts.smo);
  }
  return rep;
}

}  // namespace cnf
