#include "cnf/features.hpp"

#include <cmath>

namespace cnf {

namespace {

void emit_combos(int size, int next, std::vector<int>& cur, std::vector<LayerCombo>& out) {
  if (int(cur.size()) == size) {
    out.push_back(LayerCombo{cur});
    return;
  }
  for (int l = next; l <= 5; ++l) {
    cur.push_back(l);
    emit_combos(size, l + 1, cur, out);
    cur.pop_back();
  }
}

}  // namespace

std::vector<LayerCombo> all_combos() {
  // subsets of {1..5} grouped by size, lexicographic within a size
  std::vector<LayerCombo> out;
  std::vector<int> cur;
  for (int size = 1; size <= 5; ++size) emit_combos(size, 1, cur, out);
  return out;
}

std::string combo_name(const LayerCombo& c) {
  std::string s;
  for (int l : c.layers) s += char('0' + l);
  return s;
}

LayerCombo parse_combo(const std::string& name) {
  if (name.empty()) raise(Errc::parse_error, "empty combo name");
  LayerCombo c;
  int prev = 0;
  for (char ch : name) {
    if (ch < '1' || ch > '5') raise(Errc::parse_error, "combo digit out of range: " + name);
    int l = ch - '0';
    if (l <= prev) raise(Errc::parse_error, "combo digits must strictly increase: " + name);
    c.layers.push_back(l);
    prev = l;
  }
  return c;
}

LayerFeatures extract_layer_features(const ModelState& model, const MelSpectrogram& mel) {
  ModelState inference = model;  // cheap relative to the forward pass
  inference.mode = Mode::inference;
  Tensor input = input_from_melspec(mel);
  ForwardResultT<float> r = forward_all(inference, input);

  LayerFeatures lf;
  lf.per_layer.reserve(r.layer_maps.size());
  for (const auto& map : r.layer_maps) {
    std::vector<float> pooled = global_average_pool(map);
    lf.per_layer.emplace_back(pooled.begin(), pooled.end());
  }
  return lf;
}

ConvnetFeature combine(const LayerFeatures& lf, const LayerCombo& c, const std::string& source,
                       const std::string& model_id) {
  if (c.layers.empty()) raise(Errc::invalid_argument, "empty combo");
  ConvnetFeature f;
  f.combo = c;
  f.source = source;
  f.model_id = model_id;
  for (int l : c.layers) {
    if (l < 1 || l > int(lf.per_layer.size()))
      raise(Errc::invalid_argument, "combo layer " + std::to_string(l) + " not available");
    const auto& v = lf.per_layer[size_t(l) - 1];
    f.values.insert(f.values.end(), v.begin(), v.end());
  }
  return f;
}

std::vector<double> concat_mfcc(const ConvnetFeature& f, const std::vector<double>& mfcc_vec) {
  std::vector<double> out = f.values;
  out.insert(out.end(), mfcc_vec.begin(), mfcc_vec.end());
  return out;
}

Tensor input_from_melspec(const MelSpectrogram& mel) {
  const int h = mel.db.rows, w = mel.db.cols;
  double mean = 0.0;
  for (double v : mel.db.v) mean += v;
  mean /= double(mel.db.v.size());
  double sq = 0.0;
  for (double v : mel.db.v) {
    double d = v - mean;
    sq += d * d;
  }
  double std = std::sqrt(sq / double(mel.db.v.size()));
  if (std < 1e-12) std = 1.0;  // constant input (e.g. silence) maps to zeros

  Tensor t(1, 1, h, w);
  for (int y = 0; y < h; ++y)
    for (int x = 0; x < w; ++x) t.at(0, 0, y, x) = float((mel.db.at(y, x) - mean) / std);
  return t;
}

}  // namespace cnf
