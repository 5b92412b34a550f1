#include "cnf/experiment.hpp"

#include <algorithm>
#include <filesystem>
#include <fstream>
#include <map>
#include <set>

#include <json.hpp>

#include "cnf/csv.hpp"
#include "cnf/eval.hpp"
#include "cnf/features.hpp"
#include "cnf/parallel.hpp"
#include "cnf/strfmt.hpp"
#include "cnf/svm.hpp"
#include "cnf/weights.hpp"

namespace cnf {

namespace {

namespace fs = std::filesystem;
using nlohmann::json;

// --- config -----------------------------------------------------------------

ExperimentConfig config_from_json(const json& j) {
  ExperimentConfig c;
  c.manifest = j.value("manifest", std::string());
  c.weights = j.value("weights", std::string());
  if (j.contains("random_seed") && !j["random_seed"].is_null())
    c.random_seed = j["random_seed"].get<uint32_t>();
  if (j.contains("strategies")) c.strategies = j["strategies"].get<std::vector<std::string>>();
  if (j.contains("baselines")) {
    c.baseline_mfcc = j["baselines"].value("mfcc", true);
    c.baseline_combo_mfcc = j["baselines"].value("combo_mfcc", true);
  }
  if (j.contains("cv")) {
    c.cv_kind = j["cv"].value("kind", std::string("stratified"));
    c.cv_k = j["cv"].value("k", 10);
  }
  c.seed = j.value("seed", 0u);
  c.inner_k = j.value("inner_k", 3);
  c.standardize = j.value("standardize", true);
  c.svr_epsilon = j.value("svr_epsilon", 0.1);
  if (j.contains("grid")) {
    const auto& g = j["grid"];
    if (g.contains("costs")) c.grid_costs = g["costs"].get<std::vector<double>>();
    if (g.contains("gammas")) c.grid_gammas = g["gammas"].get<std::vector<double>>();
    if (g.contains("kernels")) c.grid_kernels = g["kernels"].get<std::vector<std::string>>();
  }
  c.features_csv = j.value("features", std::string());
  c.output_dir = j.value("output_dir", std::string("out"));
  c.threads = j.value("threads", 0);
  return c;
}

json config_to_json(const ExperimentConfig& c) {
  json j;
  j["manifest"] = c.manifest;
  j["weights"] = c.weights;
  if (c.random_seed) j["random_seed"] = *c.random_seed;
  else j["random_seed"] = nullptr;
  j["strategies"] = c.strategies;
  j["baselines"] = {{"mfcc", c.baseline_mfcc}, {"combo_mfcc", c.baseline_combo_mfcc}};
  j["cv"] = {{"kind", c.cv_kind}, {"k", c.cv_k}};
  j["seed"] = c.seed;
  j["inner_k"] = c.inner_k;
  j["standardize"] = c.standardize;
  j["svr_epsilon"] = c.svr_epsilon;
  json g = json::object();
  if (c.grid_costs) g["costs"] = *c.grid_costs;
  if (c.grid_gammas) g["gammas"] = *c.grid_gammas;
  if (c.grid_kernels) g["kernels"] = *c.grid_kernels;
  j["grid"] = g;
  j["features"] = c.features_csv;
  j["output_dir"] = c.output_dir;
  j["threads"] = c.threads;
  return j;
}

// --- model loading ----------------------------------------------------------

ModelState resolve_model(const std::string& weights, std::optional<uint32_t> random_seed,
                         std::string& source_out, std::string& id_out) {
  if (!weights.empty()) {
    ModelMeta meta;
    ModelState m = load_model(weights, &meta);
    source_out = meta.source == "random" ? "random" : "trained";
    id_out = fs::path(weights).filename().string();
    return m;
  }
  uint32_t seed = random_seed.value_or(0);
  source_out = "random";
  id_out = "random-seed-" + std::to_string(seed);
  return he_normal_init<float>(ArchitectureSpec::paper_fig1(), seed);
}

// --- strategies -------------------------------------------------------------

std::vector<std::string> resolve_strategies(const std::vector<std::string>& requested) {
  std::vector<std::string> out;
  for (const auto& s : requested) {
    if (s == "all31") {
      for (const auto& c : all_combos()) out.push_back(combo_name(c));
    } else {
      parse_combo(s);  // validates
      out.push_back(s);
    }
  }
  return out;
}

// --- grid-search factories ----------------------------------------------------

GridSpec build_grid(const ExperimentConfig& cfg, int n_features) {
  GridSpec g = GridSpec::paper_grid(n_features);
  if (cfg.grid_costs) g.costs = *cfg.grid_costs;
  if (cfg.grid_gammas) {
    g.gammas = *cfg.grid_gammas;
    std::sort(g.gammas.begin(), g.gammas.end());
  }
  if (cfg.grid_kernels) {
    g.kernels.clear();
    for (const auto& k : *cfg.grid_kernels) {
      if (k == "linear") g.kernels.push_back(KernelKind::linear);
      else if (k == "rbf") g.kernels.push_back(KernelKind::rbf);
      else raise(Errc::invalid_argument, "unknown kernel '" + k + "'");
    }
  }
  return g;
}

std::string describe_config(const GridPoint& gp) {
  std::string gamma = gp.kernel.kind == KernelKind::rbf ? fmt_g(gp.kernel.gamma) : "";
  return std::string(kernel_kind_name(gp.kernel.kind)) + "," + gamma + "," + fmt_g(gp.C);
}

SelectionPlan selection_from_ctx(const TrainContext& ctx, int n_rows,
                                 const std::vector<int>* labels, int inner_k) {
  SelectionPlan plan;
  if (!ctx.validation_rows.empty()) {
    // predefined holdout: fit on the rest, validate on the declared rows
    std::vector<char> is_val(size_t(n_rows), 0);
    for (int v : ctx.validation_rows) is_val[size_t(v)] = 1;
    SelectionSplit s;
    for (int i = 0; i < n_rows; ++i) (is_val[size_t(i)] ? s.val : s.fit).push_back(i);
    plan.splits.push_back(std::move(s));
    return plan;
  }
  int k = std::max(2, std::min(inner_k, n_rows));
  FoldPlan inner = labels ? stratified_kfold(*labels, k, ctx.seed)
                          : stratified_kfold(std::vector<int>(size_t(n_rows), 0), k, ctx.seed);
  for (int f = 0; f < k; ++f) {
    SelectionSplit s;
    for (int i = 0; i < n_rows; ++i)
      (inner.assignment[size_t(i)] == f ? s.val : s.fit).push_back(i);
    plan.splits.push_back(std::move(s));
  }
  return plan;
}

struct SvcGridClassifier : Classifier {
  SvcModel model;
  std::string desc;
  int predict(std::span<const double> x) const override { return model.predict(x); }
  std::string describe() const override { return desc; }
};

struct SvrGridRegressor : Regressor {
  SvrModel model;
  std::string desc;
  double predict(std::span<const double> x) const override { return model.predict(x); }
  std::string describe() const override { return desc; }
};

ClassifierFactory make_svc_factory(const GridSpec& grid, const GridSearchOptions& opts,
                                   int inner_k) {
  return [grid, opts, inner_k](const Mat& X, const std::vector<int>& y,
                               const TrainContext& ctx) -> std::unique_ptr<Classifier> {
    SelectionPlan plan = selection_from_ctx(ctx, X.rows, &y, inner_k);
    auto out = std::make_unique<SvcGridClassifier>();
    GridSearchReport rep = grid_search_classify(X, y, grid, plan, opts, &out->model);
    out->desc = describe_config(rep.configs[size_t(rep.best_index)]);
    return out;
  };
}

RegressorFactory make_svr_factory(const GridSpec& grid, const GridSearchOptions& opts,
                                  int inner_k) {
  return [grid, opts, inner_k](const Mat& X, const std::vector<double>& y,
                               const TrainContext& ctx) -> std::unique_ptr<Regressor> {
    SelectionPlan plan = selection_from_ctx(ctx, X.rows, nullptr, inner_k);
    auto out = std::make_unique<SvrGridRegressor>();
    GridSearchReport rep = grid_search_regress(X, y, grid, plan, opts, &out->model);
    out->desc = describe_config(rep.configs[size_t(rep.best_index)]);
    return out;
  };
}

// --- feature table ------------------------------------------------------------

/// Feature matrix provider for the evaluate command: either freshly
/// extracted or read back from a feature CSV.
struct FeatureTable {
  std::vector<std::string> clip_ids;
  std::vector<int> manifest_rows;
  std::vector<std::vector<std::vector<double>>> layer_vectors;  // clip x layer x ch
  std::vector<std::vector<double>> mfcc_vectors;
  std::string model_source = "trained";
  std::string model_id;
  std::vector<std::pair<std::string, std::string>> failures;

  Mat strategy_matrix(const std::string& strategy) const {
    const size_t n = clip_ids.size();
    if (strategy == "mfcc") {
      if (mfcc_vectors.empty()) raise(Errc::invalid_argument, "MFCC features not extracted");
      Mat X(int(n), int(mfcc_vectors[0].size()));
      for (size_t i = 0; i < n; ++i)
        for (size_t c = 0; c < mfcc_vectors[i].size(); ++c) X.at(int(i), int(c)) = mfcc_vectors[i][c];
      return X;
    }
    bool with_mfcc = false;
    std::string combo_part = strategy;
    if (auto pos = strategy.find("+mfcc"); pos != std::string::npos) {
      with_mfcc = true;
      combo_part = strategy.substr(0, pos);
    }
    LayerCombo combo = parse_combo(combo_part);
    size_t dim = 0;
    {
      LayerFeatures lf;
      lf.per_layer = layer_vectors.at(0);
      dim = combine(lf, combo).values.size();
    }
    if (with_mfcc) dim += mfcc_vectors.at(0).size();
    Mat X(int(n), int(dim));
    for (size_t i = 0; i < n; ++i) {
      LayerFeatures lf;
      lf.per_layer = layer_vectors[i];
      ConvnetFeature f = combine(lf, combo, model_source, model_id);
      std::vector<double> v =
          with_mfcc ? concat_mfcc(f, mfcc_vectors[i]) : std::move(f.values);
      for (size_t c = 0; c < v.size(); ++c) X.at(int(i), int(c)) = v[c];
    }
    return X;
  }
};

FeatureTable table_from_extraction(ExtractedFeatures&& ex) {
  FeatureTable t;
  t.clip_ids = std::move(ex.clip_ids);
  t.manifest_rows = std::move(ex.row_of_clip);
  t.layer_vectors = std::move(ex.layer_vectors);
  t.mfcc_vectors = std::move(ex.mfcc_vectors);
  t.model_source = ex.model_source;
  t.model_id = ex.model_id;
  t.failures = std::move(ex.failures);
  return t;
}

/// Rebuild per-layer vectors from an extract CSV (rows: clip_id, combo,
/// source, v0...). Only single-layer rows and "mfcc" rows are needed.
FeatureTable table_from_csv(const std::string& path, const Manifest& manifest) {
  auto rows = csv::read_file(path);
  if (rows.size() < 2) raise(Errc::parse_error, path + ": empty feature csv");
  std::map<std::string, std::map<std::string, std::vector<double>>> by_clip;  // clip -> combo -> v
  std::string source = "trained", model_id;
  for (size_t r = 1; r < rows.size(); ++r) {
    const auto& row = rows[r];
    if (row.size() < 4) raise(Errc::parse_error, path + ": short row");
    std::vector<double> v;
    for (size_t c = 3; c < row.size(); ++c) {
      if (row[c].empty()) break;  // ragged tail of shorter feature rows
      v.push_back(std::stod(row[c]));
    }
    if (row[1] != "mfcc") {
      source = row[2];
    }
    by_clip[row[0]][row[1]] = std::move(v);
  }

  FeatureTable t;
  t.model_source = source;
  t.model_id = fs::path(path).filename().string();
  for (size_t i = 0; i < manifest.size(); ++i) {
    auto it = by_clip.find(manifest.clip_ids[i]);
    if (it == by_clip.end())
      raise(Errc::parse_error, "clip " + manifest.clip_ids[i] + " missing from " + path);
    std::vector<std::vector<double>> layers;
    for (int l = 1; l <= 5; ++l) {
      auto lit = it->second.find(std::string(1, char('0' + l)));
      if (lit == it->second.end())
        raise(Errc::parse_error, "clip " + manifest.clip_ids[i] + " lacks layer " +
                                     std::to_string(l) + " features in " + path);
      layers.push_back(lit->second);
    }
    t.layer_vectors.push_back(std::move(layers));
    if (auto mit = it->second.find("mfcc"); mit != it->second.end())
      t.mfcc_vectors.push_back(mit->second);
    t.clip_ids.push_back(manifest.clip_ids[i]);
    t.manifest_rows.push_back(int(i));
  }
  if (!t.mfcc_vectors.empty() && t.mfcc_vectors.size() != t.clip_ids.size())
    raise(Errc::parse_error, path + ": mfcc rows cover only part of the clips");
  return t;
}

// --- results writing ----------------------------------------------------------

/// The reported per-strategy mean is the plain mean of the fold scores, so a
/// reader of results.csv can recompute it exactly from the fold rows.
double plain_mean(const std::vector<double>& v) {
  double s = 0.0;
  for (double x : v) s += x;
  return v.empty() ? 0.0 : s / double(v.size());
}

void write_text_file(const std::string& path, const std::string& content) {
  std::ofstream out(path, std::ios::binary);
  if (!out) raise(Errc::io, "cannot write " + path);
  out << content;
  if (!out) raise(Errc::io, "write failed: " + path);
}

std::string results_csv_text(const std::vector<StrategyResult>& results) {
  std::string text = "strategy,source,fold,metric,score,kernel,gamma,C\n";
  for (const auto& r : results) {
    for (size_t f = 0; f < r.fold_scores.size(); ++f) {
      text += csv::join_row({r.strategy, r.source, std::to_string(f), r.metric,
                             fmt_f(r.fold_scores[f], 6)}) +
              "," + r.fold_params[f] + "\n";
    }
    text += csv::join_row({r.strategy, r.source, "mean", r.metric, fmt_f(r.mean, 6)}) + ",,,\n";
  }
  return text;
}

}  // namespace

// --- public config API --------------------------------------------------------

ExperimentConfig load_experiment_config(const std::string& json_path) {
  if (!fs::exists(json_path)) raise(Errc::file_not_found, json_path);
  std::ifstream in(json_path);
  json j;
  try {
    in >> j;
  } catch (const json::exception& e) {
    raise(Errc::parse_error, json_path + ": " + e.what());
  }
  return config_from_json(j);
}

std::string experiment_config_to_json(const ExperimentConfig& cfg) {
  return config_to_json(cfg).dump(2) + "\n";
}

// --- extraction -----------------------------------------------------------------

ExtractedFeatures extract_features(const std::vector<std::string>& clip_ids,
                                   const std::vector<std::string>& paths,
                                   const ModelState& model, const std::string& model_source,
                                   const std::string& model_id, bool want_mfcc, int threads,
                                   const DspConfig& dsp) {
  struct ClipOut {
    bool ok = false;
    std::string error;
    std::vector<std::vector<double>> layers;
    std::vector<double> mfcc;
  };
  std::vector<ClipOut> per_clip(clip_ids.size());

  parallel_for(clip_ids.size(), threads, [&](size_t i) {
    ClipOut& out = per_clip[i];
    try {
      AudioClip clip = load_wav(paths[i]);
      MelSpectrogram mel = melspectrogram(clip, dsp);
      LayerFeatures lf = extract_layer_features(model, mel);
      out.layers = std::move(lf.per_layer);
      if (want_mfcc) out.mfcc = mfcc_feature_vector_of_melspec(mel, dsp);
      out.ok = true;
    } catch (const Error& e) {
      out.error = e.what();
    }
  });

  ExtractedFeatures ex;
  ex.model_source = model_source;
  ex.model_id = model_id;
  for (size_t i = 0; i < clip_ids.size(); ++i) {
    if (!per_clip[i].ok) {
      ex.failures.emplace_back(clip_ids[i], per_clip[i].error);
      continue;
    }
    ex.clip_ids.push_back(clip_ids[i]);
    ex.row_of_clip.push_back(int(i));
    ex.layer_vectors.push_back(std::move(per_clip[i].layers));
    if (want_mfcc) ex.mfcc_vectors.push_back(std::move(per_clip[i].mfcc));
  }
  return ex;
}

// --- commands -------------------------------------------------------------------

int run_init_random(const InitRandomArgs& args) {
  ModelState m = he_normal_init<float>(args.spec, args.seed);
  ModelMeta meta;
  meta.source = "random";
  meta.seed = args.seed;
  save_model(m, args.out_weights, meta);
  std::printf("wrote %s (source=random, seed=%u)\n", args.out_weights.c_str(), args.seed);
  return 0;
}

int run_train_source(const TrainSourceArgs& args) {
  TaggingManifest manifest = load_tagging_manifest(args.manifest);
  ArchitectureSpec spec = args.spec;
  spec.n_outputs = int(manifest.tag_names.size());

  // frontends in parallel, training single-threaded over the optimizer state
  std::vector<Tensor> inputs(manifest.size());
  parallel_for(manifest.size(), args.threads, [&](size_t i) {
    AudioClip clip = load_wav(manifest.paths[i]);
    inputs[i] = input_from_melspec(melspectrogram(clip));
  });
  Mat targets(int(manifest.size()), spec.n_outputs);
  for (size_t i = 0; i < manifest.size(); ++i)
    for (int t = 0; t < spec.n_outputs; ++t)
      targets.at(int(i), t) = double(manifest.tag_multihot[i][size_t(t)]);

  ModelState model = he_normal_init<float>(spec, args.seed);
  TrainConfig tc;
  tc.epochs = args.epochs;
  tc.batch_size = args.batch_size;
  tc.adam.lr = args.lr;
  tc.seed = args.seed;
  std::vector<double> trace = train_source(model, inputs, targets, tc);

  nlohmann::json extra;
  extra["epochs"] = args.epochs;
  extra["batch_size"] = args.batch_size;
  extra["lr"] = args.lr;
  extra["final_loss"] = trace.back();
  extra["tags"] = manifest.tag_names;
  ModelMeta meta;
  meta.source = "trained";
  meta.seed = args.seed;
  meta.extra_json = extra.dump();
  save_model(model, args.out_weights, meta);

  std::string loss_path =
      args.loss_csv.empty() ? args.out_weights + ".loss.csv" : args.loss_csv;
  std::string text = "epoch,mean_loss\n";
  for (size_t e = 0; e < trace.size(); ++e)
    text += std::to_string(e) + "," + fmt_g(trace[e]) + "\n";
  write_text_file(loss_path, text);

  for (size_t e = 0; e < trace.size(); ++e)
    std::printf("epoch %zu: mean BCE %.6f\n", e, trace[e]);
  std::printf("wrote %s and %s\n", args.out_weights.c_str(), loss_path.c_str());
  return 0;
}

int run_extract(const ExtractArgs& args) {
  Manifest manifest = load_manifest(args.manifest);
  std::string source, model_id;
  ModelState model = resolve_model(args.weights, args.random_seed, source, model_id);
  std::vector<std::string> strategies = resolve_strategies(args.strategies);

  ExtractedFeatures ex = extract_features(manifest.clip_ids, manifest.paths, model, source,
                                          model_id, args.mfcc, args.threads);

  size_t max_dim = 0;
  std::vector<LayerCombo> combos;
  for (const auto& s : strategies) {
    combos.push_back(parse_combo(s));
    max_dim = std::max(max_dim, combos.back().layers.size() * size_t(model.spec.channels));
  }
  if (args.mfcc) max_dim = std::max<size_t>(max_dim, 120);

  std::string text = "clip_id,combo,source";
  for (size_t i = 0; i < max_dim; ++i) text += ",v" + std::to_string(i);
  text += "\n";
  auto append_row = [&](const std::string& clip, const std::string& combo,
                        const std::string& src, const std::vector<double>& v) {
    std::string row = clip + "," + combo + "," + src;
    for (size_t i = 0; i < max_dim; ++i) row += i < v.size() ? "," + fmt_g(v[i]) : ",";
    text += row + "\n";
  };
  for (size_t i = 0; i < ex.clip_ids.size(); ++i) {
    LayerFeatures lf;
    lf.per_layer = ex.layer_vectors[i];
    for (size_t s = 0; s < strategies.size(); ++s) {
      ConvnetFeature f = combine(lf, combos[s], source, model_id);
      append_row(ex.clip_ids[i], strategies[s], source, f.values);
    }
    if (args.mfcc) append_row(ex.clip_ids[i], "mfcc", "mfcc", ex.mfcc_vectors[i]);
  }
  write_text_file(args.out_csv, text);

  for (const auto& [clip, err] : ex.failures)
    std::fprintf(stderr, "skipped %s: %s\n", clip.c_str(), err.c_str());
  std::printf("wrote %s (%zu clips, %zu skipped)\n", args.out_csv.c_str(), ex.clip_ids.size(),
              ex.failures.size());
  return ex.failures.empty() ? 0 : 2;
}

int run_evaluate(const ExperimentConfig& cfg) {
  Manifest manifest = load_manifest(cfg.manifest);
  fs::create_directories(cfg.output_dir);
  write_text_file((fs::path(cfg.output_dir) / "resolved_config.json").string(),
                  experiment_config_to_json(cfg));

  std::vector<std::string> strategies = resolve_strategies(cfg.strategies);
  const bool want_mfcc = cfg.baseline_mfcc || cfg.baseline_combo_mfcc;

  FeatureTable table;
  if (!cfg.features_csv.empty()) {
    table = table_from_csv(cfg.features_csv, manifest);
  } else {
    std::string source, model_id;
    ModelState model = resolve_model(cfg.weights, cfg.random_seed, source, model_id);
    table = table_from_extraction(extract_features(manifest.clip_ids, manifest.paths, model,
                                                   source, model_id, want_mfcc, cfg.threads));
  }
  for (const auto& [clip, err] : table.failures)
    std::fprintf(stderr, "skipped %s: %s\n", clip.c_str(), err.c_str());
  if (table.clip_ids.empty()) raise(Errc::empty_input, "no clip could be decoded");

  // fold plan over the successfully decoded clips
  const std::vector<int>& keep = table.manifest_rows;
  FoldPlan plan;
  if (cfg.cv_kind == "stratified") {
    std::vector<int> labels;
    if (manifest.regression) {
      labels.assign(keep.size(), 0);  // degenerates to a balanced random k-fold
    } else {
      for (int r : keep) labels.push_back(manifest.label_ids[size_t(r)]);
    }
    plan = stratified_kfold(labels, cfg.cv_k, mix_seed(cfg.seed, 1));
  } else if (cfg.cv_kind == "grouped") {
    if (!manifest.has_group) raise(Errc::invalid_argument, "grouped cv needs a group column");
    std::vector<int> groups;
    for (int r : keep) groups.push_back(manifest.group_ids[size_t(r)]);
    plan = grouped_kfold(groups, cfg.cv_k, mix_seed(cfg.seed, 1));
  } else if (cfg.cv_kind == "predefined") {
    if (!manifest.has_split) raise(Errc::invalid_argument, "predefined cv needs a split column");
    std::vector<int> split;
    for (int r : keep) split.push_back(manifest.split[size_t(r)]);
    plan = predefined_split(split);
  } else {
    raise(Errc::invalid_argument, "unknown cv kind '" + cfg.cv_kind + "'");
  }
  plan.seed = mix_seed(cfg.seed, 2);
  for (const auto& w : plan.warnings) std::fprintf(stderr, "warning: %s\n", w.c_str());

  // evaluation jobs: every strategy plus enabled baselines
  struct Job {
    std::string strategy;
    std::string source;
  };
  std::vector<Job> jobs;
  for (const auto& s : strategies) jobs.push_back({s, table.model_source});
  if (cfg.baseline_combo_mfcc) jobs.push_back({"12345+mfcc", "combo+mfcc"});
  if (cfg.baseline_mfcc) jobs.push_back({"mfcc", "mfcc"});

  GridSearchOptions gopts;
  gopts.svr_epsilon = cfg.svr_epsilon;
  gopts.threads = cfg.threads;

  std::vector<StrategyResult> results;
  std::string per_class_text = "strategy,source,class,accuracy,n\n";

  for (const auto& job : jobs) {
    Mat X = table.strategy_matrix(job.strategy);
    GridSpec grid = build_grid(cfg, X.cols);

    if (manifest.regression) {
      for (int target = 0; target < 2; ++target) {
        std::vector<double> y;
        for (int r : keep)
          y.push_back(target == 0 ? manifest.target1[size_t(r)] : manifest.target2[size_t(r)]);
        CvResult cv = cross_validate_regress(X, y, plan, make_svr_factory(grid, gopts, cfg.inner_k),
                                             cfg.standardize);
        StrategyResult sr;
        sr.strategy = job.strategy;
        sr.source = job.source;
        sr.metric = target == 0 ? "r2_arousal" : "r2_valence";
        sr.fold_scores = cv.fold_scores;
        sr.fold_sizes = cv.fold_sizes;
        sr.fold_params = cv.fold_model_desc;
        sr.mean = plain_mean(cv.fold_scores);
        results.push_back(std::move(sr));
      }
    } else {
      std::vector<int> y;
      for (int r : keep) y.push_back(manifest.label_ids[size_t(r)]);
      CvResult cv = cross_validate_classify(X, y, plan, make_svc_factory(grid, gopts, cfg.inner_k),
                                            cfg.standardize);
      StrategyResult sr;
      sr.strategy = job.strategy;
      sr.source = job.source;
      sr.metric = "accuracy";
      sr.fold_scores = cv.fold_scores;
      sr.fold_sizes = cv.fold_sizes;
      sr.fold_params = cv.fold_model_desc;
      sr.mean = plain_mean(cv.fold_scores);
      results.push_back(std::move(sr));

      std::vector<int> counts(manifest.class_names.size(), 0);
      for (int t : cv.pooled_truth) ++counts[size_t(t)];
      for (const auto& [cls, acc] : per_class_accuracy(cv.pooled_pred, cv.pooled_truth)) {
        per_class_text += csv::join_row({job.strategy, job.source,
                                         manifest.class_names[size_t(cls)], fmt_f(acc, 6),
                                         std::to_string(counts[size_t(cls)])}) +
                          "\n";
      }
    }
    std::printf("%-12s %-11s done\n", job.strategy.c_str(), job.source.c_str());
  }

  write_text_file((fs::path(cfg.output_dir) / "results.csv").string(), results_csv_text(results));
  if (!manifest.regression)
    write_text_file((fs::path(cfg.output_dir) / "per_class.csv").string(), per_class_text);

  // ranked summary (per metric, best first)
  std::string summary = "# Evaluation summary\n\n";
  summary += "- manifest: " + cfg.manifest + "\n";
  summary += "- model: " + table.model_id + " (" + table.model_source + ")\n";
  summary += "- cv: " + cfg.cv_kind + ", k=" + std::to_string(cfg.cv_k) +
             ", seed=" + std::to_string(cfg.seed) + "\n";
  summary += "- standardize: " + std::string(cfg.standardize ? "on" : "off") + "\n";
  summary += "- skipped clips: " + std::to_string(table.failures.size()) + "\n\n";
  std::set<std::string> metrics;
  for (const auto& r : results) metrics.insert(r.metric);
  for (const auto& metric : metrics) {
    std::vector<const StrategyResult*> block;
    for (const auto& r : results)
      if (r.metric == metric) block.push_back(&r);
    std::stable_sort(block.begin(), block.end(),
                     [](const StrategyResult* a, const StrategyResult* b) { return a->mean > b->mean; });
    summary += "## " + metric + "\n\n| rank | strategy | source | mean |\n|---|---|---|---|\n";
    for (size_t i = 0; i < block.size(); ++i) {
      summary += "| " + std::to_string(i + 1) + " | " + block[i]->strategy + " | " +
                 block[i]->source + " | " + fmt_f(block[i]->mean, 4) + " |\n";
    }
    summary += "\n";
  }
  write_text_file((fs::path(cfg.output_dir) / "summary.md").string(), summary);

  return table.failures.empty() ? 0 : 2;
}

}  // namespace cnf
