#pragma once

#include <cstdint>
#include <functional>
#include <map>
#include <memory>
#include <span>
#include <string>
#include <vector>

#include "cnf/mat.hpp"

namespace cnf {

// ---------------------------------------------------------------------------
// Fold plans
// ---------------------------------------------------------------------------

/// Predefined-split partition codes (`assignment` values for Kind::predefined).
inline constexpr int kSplitTrain = 0;
inline constexpr int kSplitValid = 1;
inline constexpr int kSplitTest = 2;

struct FoldPlan {
  enum class Kind { stratified, grouped, predefined };

  int k = 0;
  Kind kind = Kind::stratified;
  /// Per-sample fold index; for predefined plans the partition code above.
  std::vector<int> assignment;
  uint32_t seed = 0;
  std::vector<std::string> warnings;
};

/// Deterministic stratified k-fold: per-fold class counts stay within +-1 of
/// the proportional share. Classes smaller than k are allowed but produce a
/// warning entry. Errors: k < 2, k > n.
FoldPlan stratified_kfold(const std::vector<int>& labels, int k, uint32_t seed);

/// Groups are assigned whole to folds, largest group first onto the currently
/// smallest fold. Errors: fewer distinct groups than folds.
FoldPlan grouped_kfold(const std::vector<int>& groups, int k, uint32_t seed);

/// Passthrough of a declared train/valid/test assignment (codes 0/1/2).
/// Errors: out-of-range codes, or empty train/test partitions.
FoldPlan predefined_split(const std::vector<int>& split);

// ---------------------------------------------------------------------------
// Standardization
// ---------------------------------------------------------------------------

struct Standardizer {
  std::vector<double> mean;
  std::vector<double> stdev;  // zero-variance dims replaced by 1
  bool fitted = false;
};

Standardizer standardize_fit(const Mat& X);
/// (x - mean) / stdev per dimension; constant training dims pass through
/// centered. Errors: not_fitted, shape_mismatch.
Mat standardize_apply(const Standardizer& s, const Mat& X);

// ---------------------------------------------------------------------------
// Metrics
// ---------------------------------------------------------------------------

double accuracy(std::span<const int> pred, std::span<const int> truth);

/// Fraction correct among the samples of each class present in truth.
std::map<int, double> per_class_accuracy(std::span<const int> pred, std::span<const int> truth);

/// 1 - SS_res / SS_tot. Errors: n < 2, constant truth.
double r_squared(std::span<const double> pred, std::span<const double> truth);

/// Probability that a random positive outranks a random negative, ties
/// counted 1/2 (midrank formulation). truth is 0/1; both classes required.
double auc_roc(std::span<const double> scores, std::span<const int> truth);

/// Mean of per-column AUCs over the columns where both classes occur.
/// Errors: no valid column.
double auc_roc_macro(const Mat& scores, const Mat& truth01);

// ---------------------------------------------------------------------------
// Cross-validation
// ---------------------------------------------------------------------------

struct Classifier {
  virtual ~Classifier() = default;
  virtual int predict(std::span<const double> x) const = 0;
  /// "kernel,gamma,C" fragment for result tables; empty if not applicable.
  virtual std::string describe() const { return ",,"; }
};

struct Regressor {
  virtual ~Regressor() = default;
  virtual double predict(std::span<const double> x) const = 0;
  virtual std::string describe() const { return ",,"; }
};

/// Everything a model factory may use besides the training rows themselves.
/// For predefined plans, validation_rows lists the positions (within the
/// passed training matrix) reserved for hyperparameter validation; otherwise
/// it is empty and the factory runs its own inner cross-validation.
struct TrainContext {
  std::vector<int> validation_rows;
  uint32_t seed = 0;
  int fold = 0;
};

using ClassifierFactory = std::function<std::unique_ptr<Classifier>(
    const Mat& X_train, const std::vector<int>& y_train, const TrainContext& ctx)>;
using RegressorFactory = std::function<std::unique_ptr<Regressor>(
    const Mat& X_train, const std::vector<double>& y_train, const TrainContext& ctx)>;

struct CvResult {
  std::string metric;  // "accuracy" or "r2"
  std::vector<double> fold_scores;
  std::vector<int> fold_sizes;
  std::vector<std::string> fold_model_desc;
  double aggregate = 0.0;  // mean weighted by fold size
  // classification only: held-out predictions pooled over folds
  std::vector<int> pooled_pred, pooled_truth;
};

/// For every fold: fit the standardizer and the factory's model on the
/// training portion only, evaluate on the held-out portion. Transforms never
/// see held-out rows, by construction.
CvResult cross_validate_classify(const Mat& X, const std::vector<int>& y, const FoldPlan& plan,
                                 const ClassifierFactory& factory, bool standardize = true);
CvResult cross_validate_regress(const Mat& X, const std::vector<double>& y, const FoldPlan& plan,
                                const RegressorFactory& factory, bool standardize = true);

}  // namespace cnf
