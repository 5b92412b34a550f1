#pragma once

#include <string>
#include <vector>

namespace cnf {

/// Target-task dataset manifest. CSV schema:
///   clip_id,path,label[,target2][,group][,split]
/// `label` is the class for classification; with a `target2` column present
/// the task is 2-target regression and (label, target2) are parsed as
/// (arousal, valence). `group` activates grouped folds, `split` (values
/// train/valid/test) activates the predefined plan. Paths are resolved
/// relative to the manifest's directory.
struct Manifest {
  std::vector<std::string> clip_ids;
  std::vector<std::string> paths;

  bool regression = false;
  std::vector<std::string> labels;   // classification label strings
  std::vector<int> label_ids;        // index into class_names
  std::vector<std::string> class_names;
  std::vector<double> target1, target2;  // regression targets

  bool has_group = false;
  std::vector<int> group_ids;

  bool has_split = false;
  std::vector<int> split;  // kSplitTrain / kSplitValid / kSplitTest

  size_t size() const { return clip_ids.size(); }
};

Manifest load_manifest(const std::string& path);

/// Source-task (tagging) manifest. CSV schema: clip_id,path,tags with tags
/// separated by ';'. The tag vocabulary is the sorted set of all tags.
struct TaggingManifest {
  std::vector<std::string> clip_ids;
  std::vector<std::string> paths;
  std::vector<std::string> tag_names;          // sorted vocabulary
  std::vector<std::vector<int>> tag_multihot;  // per clip, |tag_names| entries of 0/1

  size_t size() const { return clip_ids.size(); }
};

TaggingManifest load_tagging_manifest(const std::string& path);

}  // namespace cnf
