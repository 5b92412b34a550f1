// convfeat: audio transfer-feature workbench.
//
//   train-source   train the tagging network on a manifest of clips
//   init-random    write an untrained He-normal model
//   extract        per-clip layer-combination features to CSV
//   evaluate       cross-validated SVM evaluation of feature strategies
//   report         SVG bar chart + markdown summary from a results CSV

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <sstream>

#include <CLI11.hpp>

#include "cnf/errors.hpp"
#include "cnf/experiment.hpp"
#include "cnf/report.hpp"
#include "cnf/weights.hpp"

namespace {

cnf::ArchitectureSpec spec_from_options(const std::string& preset, const std::string& spec_json) {
  if (!spec_json.empty()) {
    std::ifstream in(spec_json);
    if (!in) cnf::raise(cnf::Errc::file_not_found, spec_json);
    std::ostringstream ss;
    ss << in.rdbuf();
    return cnf::arch_spec_from_json(ss.str());
  }
  if (preset != "paper-fig1")
    cnf::raise(cnf::Errc::invalid_argument, "unknown spec preset '" + preset + "'");
  return cnf::ArchitectureSpec::paper_fig1();
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"convfeat: convnet transfer features for audio classification"};
  app.require_subcommand(1);

  // train-source
  auto* train = app.add_subcommand("train-source", "train the source tagging network");
  cnf::TrainSourceArgs train_args;
  std::string train_preset = "paper-fig1", train_spec_json;
  train->add_option("--manifest", train_args.manifest, "tagging manifest (clip_id,path,tags)")
      ->required();
  train->add_option("--out", train_args.out_weights, "output CNF1 weight file")->required();
  train->add_option("--loss-out", train_args.loss_csv, "loss trace CSV (epoch,mean_loss)");
  train->add_option("--epochs", train_args.epochs, "training epochs");
  train->add_option("--batch-size", train_args.batch_size, "mini-batch size (>= 2)");
  train->add_option("--lr", train_args.lr, "ADAM learning rate");
  train->add_option("--seed", train_args.seed, "training seed");
  train->add_option("--threads", train_args.threads, "frontend worker threads (0 = auto)");
  train->add_option("--spec", train_preset, "architecture preset (paper-fig1)");
  train->add_option("--spec-json", train_spec_json, "architecture spec JSON file");

  // init-random
  auto* init = app.add_subcommand("init-random", "write an untrained He-normal model");
  cnf::InitRandomArgs init_args;
  std::string init_preset = "paper-fig1", init_spec_json;
  init->add_option("--out", init_args.out_weights, "output CNF1 weight file")->required();
  init->add_option("--seed", init_args.seed, "initialization seed");
  init->add_option("--spec", init_preset, "architecture preset (paper-fig1)");
  init->add_option("--spec-json", init_spec_json, "architecture spec JSON file");

  // extract
  auto* extract = app.add_subcommand("extract", "extract features for every manifest clip");
  cnf::ExtractArgs extract_args;
  uint32_t extract_seed = 0;
  extract->add_option("--manifest", extract_args.manifest, "dataset manifest")->required();
  extract->add_option("--weights", extract_args.weights, "CNF1 weight file");
  extract->add_option("--random-seed", extract_seed, "use a random model with this seed");
  extract->add_option("--strategies", extract_args.strategies,
                      "combo names or 'all31' (space separated)");
  extract->add_flag("!--no-mfcc", extract_args.mfcc, "skip the MFCC baseline rows");
  extract->add_option("--out", extract_args.out_csv, "output feature CSV")->required();
  extract->add_option("--threads", extract_args.threads, "worker threads (0 = auto)");

  // evaluate
  auto* evaluate = app.add_subcommand("evaluate", "cross-validated evaluation of strategies");
  std::string eval_config_path;
  uint32_t eval_seed = 0;
  uint32_t eval_random_seed = 0;
  std::string eval_manifest, eval_weights, eval_outdir, eval_cv_kind, eval_features;
  std::vector<std::string> eval_strategies;
  int eval_k = -1, eval_threads = -1;
  evaluate->add_option("--config", eval_config_path, "experiment config JSON");
  evaluate->add_option("--manifest", eval_manifest, "dataset manifest (override)");
  evaluate->add_option("--weights", eval_weights, "CNF1 weight file (override)");
  evaluate->add_option("--random-seed", eval_random_seed, "random model seed (override)");
  evaluate->add_option("--strategies", eval_strategies, "strategy list (override)");
  evaluate->add_option("--cv-kind", eval_cv_kind, "stratified | grouped | predefined");
  evaluate->add_option("--k", eval_k, "fold count (override)");
  evaluate->add_option("--seed", eval_seed, "experiment seed (override)");
  evaluate->add_option("--features", eval_features, "precomputed feature CSV");
  evaluate->add_option("--output-dir", eval_outdir, "output directory (override)");
  evaluate->add_option("--threads", eval_threads, "worker threads (0 = auto)");

  // report
  auto* report = app.add_subcommand("report", "render results.csv as SVG + markdown");
  std::string report_results, report_svg, report_md;
  report->add_option("--results", report_results, "results CSV from evaluate")->required();
  report->add_option("--out-svg", report_svg, "output SVG path")->required();
  report->add_option("--out-md", report_md, "output markdown path")->required();

  CLI11_PARSE(app, argc, argv);

  try {
    if (*train) {
      train_args.spec = spec_from_options(train_preset, train_spec_json);
      return cnf::run_train_source(train_args);
    }
    if (*init) {
      init_args.spec = spec_from_options(init_preset, init_spec_json);
      return cnf::run_init_random(init_args);
    }
    if (*extract) {
      if (extract->count("--random-seed")) extract_args.random_seed = extract_seed;
      return cnf::run_extract(extract_args);
    }
    if (*evaluate) {
      cnf::ExperimentConfig cfg = eval_config_path.empty()
                                      ? cnf::ExperimentConfig{}
                                      : cnf::load_experiment_config(eval_config_path);
      if (!eval_manifest.empty()) cfg.manifest = eval_manifest;
      if (!eval_weights.empty()) cfg.weights = eval_weights;
      if (evaluate->count("--random-seed")) cfg.random_seed = eval_random_seed;
      if (!eval_strategies.empty()) cfg.strategies = eval_strategies;
      if (!eval_cv_kind.empty()) cfg.cv_kind = eval_cv_kind;
      if (eval_k > 0) cfg.cv_k = eval_k;
      if (evaluate->count("--seed")) cfg.seed = eval_seed;
      if (!eval_features.empty()) cfg.features_csv = eval_features;
      if (!eval_outdir.empty()) cfg.output_dir = eval_outdir;
      if (eval_threads >= 0) cfg.threads = eval_threads;
      return cnf::run_evaluate(cfg);
    }
    if (*report) {
      return cnf::run_report(report_results, report_svg, report_md);
    }
  } catch (const cnf::Error& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return 1;
  } catch (const std::exception& e) {
    std::fprintf(stderr, "internal error: %s\n", e.what());
    return 1;
  }
  return 0;
}
