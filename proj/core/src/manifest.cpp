#include "cnf/manifest.hpp"

#include <algorithm>
#include <filesystem>
#include <map>
#include <set>

#include "cnf/csv.hpp"
#include "cnf/errors.hpp"
#include "cnf/eval.hpp"

namespace cnf {

namespace {

std::string resolve_path(const std::string& manifest_path, const std::string& entry) {
  std::filesystem::path p(entry);
  if (p.is_absolute()) return entry;
  return (std::filesystem::path(manifest_path).parent_path() / p).string();
}

int find_column(const std::vector<std::string>& header, const std::string& name) {
  for (size_t i = 0; i < header.size(); ++i)
    if (header[i] == name) return int(i);
  return -1;
}

double parse_double(const std::string& s, const std::string& what) {
  try {
    size_t used = 0;
    double v = std::stod(s, &used);
    if (used != s.size()) raise(Errc::parse_error, what + ": bad number '" + s + "'");
    return v;
  } catch (const std::invalid_argument&) {
    raise(Errc::parse_error, what + ": bad number '" + s + "'");
  } catch (const std::out_of_range&) {
    raise(Errc::parse_error, what + ": number out of range '" + s + "'");
  }
}

}  // namespace

Manifest load_manifest(const std::string& path) {
  auto rows = csv::read_file(path);
  if (rows.size() < 2) raise(Errc::parse_error, path + ": manifest needs a header and rows");
  const auto& header = rows[0];
  int c_id = find_column(header, "clip_id");
  int c_path = find_column(header, "path");
  int c_label = find_column(header, "label");
  int c_target2 = find_column(header, "target2");
  int c_group = find_column(header, "group");
  int c_split = find_column(header, "split");
  if (c_id < 0 || c_path < 0 || c_label < 0)
    raise(Errc::parse_error, path + ": header must contain clip_id,path,label");

  Manifest m;
  m.regression = c_target2 >= 0;
  m.has_group = c_group >= 0;
  m.has_split = c_split >= 0;

  std::map<std::string, int> group_map;
  for (size_t r = 1; r < rows.size(); ++r) {
    const auto& row = rows[r];
    if (row.size() != header.size())
      raise(Errc::parse_error, path + ": row " + std::to_string(r) + " has " +
                                   std::to_string(row.size()) + " fields, header has " +
                                   std::to_string(header.size()));
    m.clip_ids.push_back(row[size_t(c_id)]);
    m.paths.push_back(resolve_path(path, row[size_t(c_path)]));
    if (m.regression) {
      m.target1.push_back(parse_double(row[size_t(c_label)], "label"));
      m.target2.push_back(parse_double(row[size_t(c_target2)], "target2"));
    } else {
      m.labels.push_back(row[size_t(c_label)]);
    }
    if (m.has_group) {
      const std::string& g = row[size_t(c_group)];
      auto [it, inserted] = group_map.emplace(g, int(group_map.size()));
      m.group_ids.push_back(it->second);
    }
    if (m.has_split) {
      const std::string& s = row[size_t(c_split)];
      if (s == "train") m.split.push_back(kSplitTrain);
      else if (s == "valid") m.split.push_back(kSplitValid);
      else if (s == "test") m.split.push_back(kSplitTest);
      else
        raise(Errc::parse_error,
              path + ": split value '" + s + "' (accepted: train, valid, test)");
    }
  }

  if (!m.regression) {
    std::set<std::string> classes(m.labels.begin(), m.labels.end());
    m.class_names.assign(classes.begin(), classes.end());
    for (const auto& l : m.labels) {
      int id = int(std::lower_bound(m.class_names.begin(), m.class_names.end(), l) -
                   m.class_names.begin());
      m.label_ids.push_back(id);
    }
  }
  return m;
}

TaggingManifest load_tagging_manifest(const std::string& path) {
  auto rows = csv::read_file(path);
  if (rows.size() < 2) raise(Errc::parse_error, path + ": manifest needs a header and rows");
  const auto& header = rows[0];
  int c_id = find_column(header, "clip_id");
  int c_path = find_column(header, "path");
  int c_tags = find_column(header, "tags");
  if (c_id < 0 || c_path < 0 || c_tags < 0)
    raise(Errc::parse_error, path + ": header must contain clip_id,path,tags");

  TaggingManifest m;
  std::vector<std::vector<std::string>> per_clip_tags;
  std::set<std::string> vocab;
  for (size_t r = 1; r < rows.size(); ++r) {
    const auto& row = rows[r];
    if (row.size() != header.size())
      raise(Errc::parse_error, path + ": row " + std::to_string(r) + " field count");
    m.clip_ids.push_back(row[size_t(c_id)]);
    m.paths.push_back(resolve_path(path, row[size_t(c_path)]));
    std::vector<std::string> tags;
    const std::string& field = row[size_t(c_tags)];
    size_t start = 0;
    while (start <= field.size()) {
      size_t end = field.find(';', start);
      if (end == std::string::npos) end = field.size();
      std::string tag = field.substr(start, end - start);
      if (!tag.empty()) {
        tags.push_back(tag);
        vocab.insert(tag);
      }
      start = end + 1;
    }
    per_clip_tags.push_back(std::move(tags));
  }
  m.tag_names.assign(vocab.begin(), vocab.end());
  if (m.tag_names.empty()) raise(Errc::parse_error, path + ": no tags in manifest");
  for (const auto& tags : per_clip_tags) {
    std::vector<int> hot(m.tag_names.size(), 0);
    for (const auto& t : tags) {
      size_t k = size_t(std::lower_bound(m.tag_names.begin(), m.tag_names.end(), t) -
                        m.tag_names.begin());
      hot[k] = 1;
    }
    m.tag_multihot.push_back(std::move(hot));
  }
  return m;
}

}  // namespace cnf
