#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "cnf/dsp.hpp"
#include "cnf/manifest.hpp"
#include "cnf/nn.hpp"

namespace cnf {

/// One evaluation run: dataset manifest, model source, strategy list,
/// cross-validation plan and grid overrides. JSON-serializable; the resolved
/// form is written into the output directory for provenance.
struct ExperimentConfig {
  std::string manifest;
  std::string weights;                  // CNF1 path; empty -> random model
  std::optional<uint32_t> random_seed;  // used when weights is empty
  std::vector<std::string> strategies = {"all31"};
  bool baseline_mfcc = true;
  bool baseline_combo_mfcc = true;
  std::string cv_kind = "stratified";  // stratified | grouped | predefined
  int cv_k = 10;
  uint32_t seed = 0;  // experiment seed; fold/selection seeds derive from it
  int inner_k = 3;    // inner selection folds for the grid search
  bool standardize = true;
  double svr_epsilon = 0.1;
  std::optional<std::vector<double>> grid_costs;
  std::optional<std::vector<double>> grid_gammas;  // rbf bandwidths override
  std::optional<std::vector<std::string>> grid_kernels;
  std::string features_csv;  // optional precomputed features (skips audio)
  std::string output_dir = "out";
  int threads = 0;  // 0 = hardware concurrency
};

ExperimentConfig load_experiment_config(const std::string& json_path);
std::string experiment_config_to_json(const ExperimentConfig& cfg);

/// Per-strategy cross-validated scores (one block per metric).
struct StrategyResult {
  std::string strategy;  // combo name, "mfcc" or "12345+mfcc"
  std::string source;    // trained | random | mfcc | combo+mfcc
  std::string metric;    // accuracy | r2_arousal | r2_valence
  std::vector<double> fold_scores;
  std::vector<int> fold_sizes;
  std::vector<std::string> fold_params;  // "kernel,gamma,C" per fold
  double mean = 0.0;
};

/// Per-clip transfer features for one model (plus the MFCC baseline).
struct ExtractedFeatures {
  std::vector<std::string> clip_ids;             // successfully decoded clips
  std::vector<int> row_of_clip;                  // manifest row per entry
  std::vector<std::vector<std::vector<double>>> layer_vectors;  // clip x layer x 32
  std::vector<std::vector<double>> mfcc_vectors;                // clip x 120 (optional)
  std::vector<std::pair<std::string, std::string>> failures;    // clip_id, error
  std::string model_source;  // "trained" | "random"
  std::string model_id;
};

/// Decode + frontend + forward for every manifest clip on a bounded worker
/// pool; bit-identical to sequential execution. Decode failures are recorded
/// and skipped.
ExtractedFeatures extract_features(const std::vector<std::string>& clip_ids,
                                   const std::vector<std::string>& paths,
                                   const ModelState& model, const std::string& model_source,
                                   const std::string& model_id, bool want_mfcc, int threads,
                                   const DspConfig& dsp = {});

// Command implementations backing the CLI. Each returns a process exit code
// (0 = success, 2 = completed with skipped clips).

struct TrainSourceArgs {
  std::string manifest;
  std::string out_weights;
  std::string loss_csv;  // defaults to <out_weights>.loss.csv when empty
  ArchitectureSpec spec = ArchitectureSpec::paper_fig1();
  int epochs = 5;
  int batch_size = 8;
  double lr = 1e-3;
  uint32_t seed = 0;
  int threads = 0;
};
int run_train_source(const TrainSourceArgs& args);

struct InitRandomArgs {
  std::string out_weights;
  ArchitectureSpec spec = ArchitectureSpec::paper_fig1();
  uint32_t seed = 0;
};
int run_init_random(const InitRandomArgs& args);

struct ExtractArgs {
  std::string manifest;
  std::string weights;                  // CNF1 path; empty -> random model
  std::optional<uint32_t> random_seed;  // used when weights is empty
  std::vector<std::string> strategies = {"all31"};
  bool mfcc = true;
  std::string out_csv;
  int threads = 0;
};
int run_extract(const ExtractArgs& args);

int run_evaluate(const ExperimentConfig& cfg);

}  // namespace cnf
