#include "cnf/eval.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "cnf/rng.hpp"

namespace cnf {

// --- Fold plans -------------------------------------------------------------

FoldPlan stratified_kfold(const std::vector<int>& labels, int k, uint32_t seed) {
  const int n = int(labels.size());
  if (k < 2) raise(Errc::invalid_argument, "k must be >= 2");
  if (k > n) raise(Errc::invalid_argument, "k exceeds sample count");

  FoldPlan plan;
  plan.k = k;
  plan.kind = FoldPlan::Kind::stratified;
  plan.seed = seed;
  plan.assignment.assign(size_t(n), -1);

  std::vector<int> classes = labels;
  std::sort(classes.begin(), classes.end());
  classes.erase(std::unique(classes.begin(), classes.end()), classes.end());

  std::mt19937 gen(seed);
  std::vector<long> fold_total(size_t(k), 0);
  for (int cls : classes) {
    std::vector<int> idx;
    for (int i = 0; i < n; ++i)
      if (labels[size_t(i)] == cls) idx.push_back(i);
    if (int(idx.size()) < k) {
      plan.warnings.push_back("class " + std::to_string(cls) + " has " +
                              std::to_string(idx.size()) + " samples (< k); folds degrade");
    }
    deterministic_shuffle(idx, gen);

    const int base = int(idx.size()) / k;
    const int rem = int(idx.size()) % k;
    // extras go to the folds that are currently smallest (ties: lowest id)
    std::vector<int> order(size_t(k));
    std::iota(order.begin(), order.end(), 0);
    std::stable_sort(order.begin(), order.end(),
                     [&](int a, int b) { return fold_total[size_t(a)] < fold_total[size_t(b)]; });
    std::vector<int> count(size_t(k), base);
    for (int e = 0; e < rem; ++e) ++count[size_t(order[size_t(e)])];

    size_t next = 0;
    for (int f = 0; f < k; ++f) {
      for (int c = 0; c < count[size_t(f)]; ++c) plan.assignment[size_t(idx[next++])] = f;
      fold_total[size_t(f)] += count[size_t(f)];
    }
  }
  return plan;
}

FoldPlan grouped_kfold(const std::vector<int>& groups, int k, uint32_t seed) {
  const int n = int(groups.size());
  if (k < 2) raise(Errc::invalid_argument, "k must be >= 2");

  // distinct groups in first-appearance order
  std::vector<int> ids;
  std::vector<int> sizes;
  std::vector<int> group_pos(size_t(n));
  {
    std::map<int, int> seen;
    for (int i = 0; i < n; ++i) {
      auto it = seen.find(groups[size_t(i)]);
      if (it == seen.end()) {
        seen.emplace(groups[size_t(i)], int(ids.size()));
        group_pos[size_t(i)] = int(ids.size());
        ids.push_back(groups[size_t(i)]);
        sizes.push_back(1);
      } else {
        group_pos[size_t(i)] = it->second;
        ++sizes[size_t(it->second)];
      }
    }
  }
  if (int(ids.size()) < k) raise(Errc::invalid_argument, "fewer distinct groups than folds");

  std::vector<int> order(ids.size());
  std::iota(order.begin(), order.end(), 0);
  std::mt19937 gen(seed);
  deterministic_shuffle(order, gen);
  std::stable_sort(order.begin(), order.end(),
                   [&](int a, int b) { return sizes[size_t(a)] > sizes[size_t(b)]; });

  std::vector<long> fold_total(size_t(k), 0);
  std::vector<int> fold_of_group(ids.size(), -1);
  for (int g : order) {
    int best = 0;
    for (int f = 1; f < k; ++f)
      if (fold_total[size_t(f)] < fold_total[size_t(best)]) best = f;
    fold_of_group[size_t(g)] = best;
    fold_total[size_t(best)] += sizes[size_t(g)];
  }

  FoldPlan plan;
  plan.k = k;
  plan.kind = FoldPlan::Kind::grouped;
  plan.seed = seed;
  plan.assignment.resize(size_t(n));
  for (int i = 0; i < n; ++i) plan.assignment[size_t(i)] = fold_of_group[size_t(group_pos[size_t(i)])];
  return plan;
}

FoldPlan predefined_split(const std::vector<int>& split) {
  int counts[3] = {0, 0, 0};
  for (int v : split) {
    if (v < 0 || v > 2) raise(Errc::invalid_argument, "split codes must be 0/1/2");
    ++counts[v];
  }
  if (counts[kSplitTrain] == 0 || counts[kSplitTest] == 0)
    raise(Errc::invalid_argument, "predefined split needs nonempty train and test");
  FoldPlan plan;
  plan.k = 1;
  plan.kind = FoldPlan::Kind::predefined;
  plan.assignment = split;
  return plan;
}

// --- Standardization ---------------------------------------------------------

Standardizer standardize_fit(const Mat& X) {
  if (X.rows < 1) raise(Errc::empty_input, "cannot fit standardizer on empty data");
  Standardizer s;
  s.mean.assign(size_t(X.cols), 0.0);
  s.stdev.assign(size_t(X.cols), 1.0);
  for (int c = 0; c < X.cols; ++c) {
    double m = 0.0;
    for (int r = 0; r < X.rows; ++r) m += X.at(r, c);
    m /= X.rows;
    double sq = 0.0;
    for (int r = 0; r < X.rows; ++r) {
      double d = X.at(r, c) - m;
      sq += d * d;
    }
    double sd = std::sqrt(sq / X.rows);
    s.mean[size_t(c)] = m;
    s.stdev[size_t(c)] = sd > 0.0 ? sd : 1.0;  // zero-variance guard
  }
  s.fitted = true;
  return s;
}

Mat standardize_apply(const Standardizer& s, const Mat& X) {
  if (!s.fitted) raise(Errc::not_fitted, "standardizer applied before fit");
  if (int(s.mean.size()) != X.cols) raise(Errc::shape_mismatch, "standardizer dims");
  Mat out(X.rows, X.cols);
  for (int r = 0; r < X.rows; ++r)
    for (int c = 0; c < X.cols; ++c)
      out.at(r, c) = (X.at(r, c) - s.mean[size_t(c)]) / s.stdev[size_t(c)];
  return out;
}

// --- Metrics ------------------------------------------------------------------

double accuracy(std::span<const int> pred, std::span<const int> truth) {
  if (pred.size() != truth.size()) raise(Errc::shape_mismatch, "pred vs truth length");
  if (pred.empty()) raise(Errc::empty_input, "no predictions");
  size_t correct = 0;
  for (size_t i = 0; i < pred.size(); ++i)
    if (pred[i] == truth[i]) ++correct;
  return double(correct) / double(pred.size());
}

std::map<int, double> per_class_accuracy(std::span<const int> pred, std::span<const int> truth) {
  if (pred.size() != truth.size()) raise(Errc::shape_mismatch, "pred vs truth length");
  std::map<int, std::pair<long, long>> tally;  // class -> (correct, total)
  for (size_t i = 0; i < pred.size(); ++i) {
    auto& t = tally[truth[i]];
    ++t.second;
    if (pred[i] == truth[i]) ++t.first;
  }
  std::map<int, double> out;
  for (auto& [cls, t] : tally) out[cls] = double(t.first) / double(t.second);
  return out;
}

double r_squared(std::span<const double> pred, std::span<const double> truth) {
  if (pred.size() != truth.size()) raise(Errc::shape_mismatch, "pred vs truth length");
  if (pred.size() < 2) raise(Errc::invalid_argument, "r^2 needs n >= 2");
  double mean = 0.0;
  for (double t : truth) mean += t;
  mean /= double(truth.size());
  double ss_res = 0.0, ss_tot = 0.0;
  for (size_t i = 0; i < truth.size(); ++i) {
    ss_res += (truth[i] - pred[i]) * (truth[i] - pred[i]);
    ss_tot += (truth[i] - mean) * (truth[i] - mean);
  }
  if (ss_tot <= 0.0) raise(Errc::invalid_argument, "r^2 undefined for constant truth");
  return 1.0 - ss_res / ss_tot;
}

double auc_roc(std::span<const double> scores, std::span<const int> truth) {
  if (scores.size() != truth.size()) raise(Errc::shape_mismatch, "scores vs truth length");
  size_t n = scores.size();
  size_t n_pos = 0;
  for (int t : truth) {
    if (t != 0 && t != 1) raise(Errc::invalid_argument, "truth must be 0/1");
    n_pos += size_t(t);
  }
  size_t n_neg = n - n_pos;
  if (n_pos == 0 || n_neg == 0) raise(Errc::single_class, "AUC needs both classes");

  std::vector<size_t> order(n);
  std::iota(order.begin(), order.end(), size_t(0));
  std::stable_sort(order.begin(), order.end(),
                   [&](size_t a, size_t b) { return scores[a] < scores[b]; });

  // midranks over ties
  double rank_pos_sum = 0.0;
  size_t i = 0;
  while (i < n) {
    size_t j = i;
    while (j + 1 < n && scores[order[j + 1]] == scores[order[i]]) ++j;
    double midrank = 0.5 * (double(i + 1) + double(j + 1));
    for (size_t t = i; t <= j; ++t)
      if (truth[order[t]] == 1) rank_pos_sum += midrank;
    i = j + 1;
  }
  return (rank_pos_sum - double(n_pos) * double(n_pos + 1) / 2.0) /
         (double(n_pos) * double(n_neg));
}

double auc_roc_macro(const Mat& scores, const Mat& truth01) {
  if (scores.rows != truth01.rows || scores.cols != truth01.cols)
    raise(Errc::shape_mismatch, "scores vs truth shape");
  double sum = 0.0;
  int valid = 0;
  for (int c = 0; c < scores.cols; ++c) {
    std::vector<double> s(size_t(scores.rows));
    std::vector<int> t(size_t(scores.rows));
    bool pos = false, neg = false;
    for (int r = 0; r < scores.rows; ++r) {
      s[size_t(r)] = scores.at(r, c);
      t[size_t(r)] = truth01.at(r, c) > 0.5 ? 1 : 0;
      (t[size_t(r)] ? pos : neg) = true;
    }
    if (!pos || !neg) continue;
    sum += auc_roc(s, t);
    ++valid;
  }
  if (valid == 0) raise(Errc::single_class, "no tag column has both classes");
  return sum / double(valid);
}

// --- Cross-validation ----------------------------------------------------------

namespace {

struct FoldSplit {
  std::vector<int> train_rows;
  std::vector<int> test_rows;
  std::vector<int> validation_positions;  // within train_rows (predefined only)
};

std::vector<FoldSplit> make_splits(const FoldPlan& plan, int n) {
  if (int(plan.assignment.size()) != n) raise(Errc::shape_mismatch, "plan does not cover dataset");
  std::vector<FoldSplit> splits;
  if (plan.kind == FoldPlan::Kind::predefined) {
    FoldSplit s;
    for (int i = 0; i < n; ++i) {
      int a = plan.assignment[size_t(i)];
      if (a == kSplitTest) {
        s.test_rows.push_back(i);
      } else {
        if (a == kSplitValid) s.validation_positions.push_back(int(s.train_rows.size()));
        s.train_rows.push_back(i);
      }
    }
    if (s.train_rows.empty() || s.test_rows.empty())
      raise(Errc::invalid_argument, "predefined split needs nonempty train and test");
    splits.push_back(std::move(s));
    return splits;
  }
  splits.resize(size_t(plan.k));
  for (int i = 0; i < n; ++i) {
    int f = plan.assignment[size_t(i)];
    if (f < 0 || f >= plan.k) raise(Errc::invalid_argument, "fold index out of range");
    for (int g = 0; g < plan.k; ++g) {
      if (g == f) splits[size_t(g)].test_rows.push_back(i);
      else splits[size_t(g)].train_rows.push_back(i);
    }
  }
  for (auto& s : splits)
    if (s.test_rows.empty() || s.train_rows.empty())
      raise(Errc::invalid_argument, "fold with empty train or test portion");
  return splits;
}

template <class Target, class ScoreFn>
CvResult cross_validate_impl(const Mat& X, const std::vector<Target>& y, const FoldPlan& plan,
                             bool standardize, const char* metric, const ScoreFn& score_fold,
                             CvResult& result) {
  if (int(y.size()) != X.rows) raise(Errc::shape_mismatch, "targets vs rows");
  auto splits = make_splits(plan, X.rows);

  result.metric = metric;
  double weighted = 0.0;
  long total = 0;
  for (size_t f = 0; f < splits.size(); ++f) {
    const auto& split = splits[f];
    Mat X_train = X.take_rows(split.train_rows);
    Mat X_test = X.take_rows(split.test_rows);
    std::vector<Target> y_train, y_test;
    for (int i : split.train_rows) y_train.push_back(y[size_t(i)]);
    for (int i : split.test_rows) y_test.push_back(y[size_t(i)]);

    // Fitted on the training portion only; the held-out rows are transformed
    // with the training statistics.
    if (standardize) {
      Standardizer s = standardize_fit(X_train);
      X_train = standardize_apply(s, X_train);
      X_test = standardize_apply(s, X_test);
    }

    TrainContext ctx;
    ctx.validation_rows = split.validation_positions;
    ctx.fold = int(f);
    ctx.seed = mix_seed(plan.seed, uint32_t(7000 + f));

    double score = score_fold(X_train, y_train, X_test, y_test, ctx, result);
    result.fold_scores.push_back(score);
    result.fold_sizes.push_back(int(split.test_rows.size()));
    weighted += score * double(split.test_rows.size());
    total += long(split.test_rows.size());
  }
  result.aggregate = weighted / double(total);
  return result;
}

}  // namespace

CvResult cross_validate_classify(const Mat& X, const std::vector<int>& y, const FoldPlan& plan,
                                 const ClassifierFactory& factory, bool standardize) {
  CvResult result;
  auto score_fold = [&](const Mat& X_train, const std::vector<int>& y_train, const Mat& X_test,
                        const std::vector<int>& y_test, const TrainContext& ctx,
                        CvResult& res) -> double {
    std::unique_ptr<Classifier> model = factory(X_train, y_train, ctx);
    std::vector<int> pred(y_test.size());
    for (size_t i = 0; i < y_test.size(); ++i)
      pred[i] = model->predict({X_test.row(int(i)), size_t(X_test.cols)});
    res.fold_model_desc.push_back(model->describe());
    res.pooled_pred.insert(res.pooled_pred.end(), pred.begin(), pred.end());
    res.pooled_truth.insert(res.pooled_truth.end(), y_test.begin(), y_test.end());
    return accuracy(pred, y_test);
  };
  return cross_validate_impl(X, y, plan, standardize, "accuracy", score_fold, result);
}

CvResult cross_validate_regress(const Mat& X, const std::vector<double>& y, const FoldPlan& plan,
                                const RegressorFactory& factory, bool standardize) {
  CvResult result;
  auto score_fold = [&](const Mat& X_train, const std::vector<double>& y_train, const Mat& X_test,
                        const std::vector<double>& y_test, const TrainContext& ctx,
                        CvResult& res) -> double {
    std::unique_ptr<Regressor> model = factory(X_train, y_train, ctx);
    std::vector<double> pred(y_test.size());
    for (size_t i = 0; i < y_test.size(); ++i)
      pred[i] = model->predict({X_test.row(int(i)), size_t(X_test.cols)});
    res.fold_model_desc.push_back(model->describe());
    return r_squared(pred, y_test);
  };
  return cross_validate_impl(X, y, plan, standardize, "r2", score_fold, result);
}

}  // namespace cnf
