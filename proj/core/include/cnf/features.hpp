#pragma once

#include <string>
#include <vector>

#include "cnf/dsp.hpp"
#include "cnf/nn.hpp"

namespace cnf {

/// A nonempty, strictly increasing subset of layers {1..5}, e.g. {1,3,5}.
struct LayerCombo {
  std::vector<int> layers;
};

/// All 31 nonempty subsets of {1..5}, ordered by size then lexicographically:
/// {1}, {2}, ..., {5}, {1,2}, {1,3}, ..., {1,2,3,4,5}.
std::vector<LayerCombo> all_combos();

/// "135" for {1,3,5}.
std::string combo_name(const LayerCombo& c);

/// Inverse of combo_name. Errors (parse_error): empty, non-digit characters,
/// digits outside 1..5, non-increasing digits.
LayerCombo parse_combo(const std::string& name);

/// Per-layer transfer vectors: the global average of each post-pool map,
/// 32 values per layer (the 1x1 fifth-layer map passes through unchanged).
/// Inference mode, regardless of the model's current mode.
struct LayerFeatures {
  std::vector<std::vector<double>> per_layer;  // n_layers x channels
};

LayerFeatures extract_layer_features(const ModelState& model, const MelSpectrogram& mel);

/// Concatenated transfer feature with provenance.
struct ConvnetFeature {
  std::vector<double> values;  // 32 * |combo.layers|
  LayerCombo combo;
  std::string source;    // "trained" | "random"
  std::string model_id;  // provenance of the producing model
};

ConvnetFeature combine(const LayerFeatures& lf, const LayerCombo& c,
                       const std::string& source = "", const std::string& model_id = "");

/// [convnet values || 120 MFCC values].
std::vector<double> concat_mfcc(const ConvnetFeature& f, const std::vector<double>& mfcc_vec);

/// Standardize a mel-spectrogram to zero mean / unit variance over all
/// entries and wrap it as a 1 x 1 x n_mels x n_frames network input. Applied
/// identically at training and transfer time. An all-constant matrix maps
/// to all zeros.
Tensor input_from_melspec(const MelSpectrogram& mel);

}  // namespace cnf
