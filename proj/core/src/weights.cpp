#include "cnf/weights.hpp"

#include <array>
#include <cstring>
#include <filesystem>
#include <fstream>

#include <json.hpp>

namespace cnf {

namespace {

constexpr char kMagic[4] = {'C', 'N', 'F', '1'};
constexpr uint16_t kVersion = 1;

std::array<uint32_t, 256> make_crc_table() {
  std::array<uint32_t, 256> t{};
  for (uint32_t i = 0; i < 256; ++i) {
    uint32_t c = i;
    for (int k = 0; k < 8; ++k) c = (c & 1) ? 0xEDB88320u ^ (c >> 1) : c >> 1;
    t[i] = c;
  }
  return t;
}

void put_u16(std::vector<uint8_t>& out, uint16_t v) {
  out.push_back(uint8_t(v));
  out.push_back(uint8_t(v >> 8));
}
void put_u32(std::vector<uint8_t>& out, uint32_t v) {
  out.push_back(uint8_t(v));
  out.push_back(uint8_t(v >> 8));
  out.push_back(uint8_t(v >> 16));
  out.push_back(uint8_t(v >> 24));
}

struct Reader {
  const std::vector<uint8_t>& b;
  size_t pos = 0;
  void need(size_t n) const {
    if (pos + n > b.size()) raise(Errc::record_mismatch, "container truncated mid-record");
  }
  uint16_t u16() {
    need(2);
    uint16_t v = uint16_t(b[pos]) | uint16_t(b[pos + 1]) << 8;
    pos += 2;
    return v;
  }
  uint32_t u32() {
    need(4);
    uint32_t v = uint32_t(b[pos]) | uint32_t(b[pos + 1]) << 8 | uint32_t(b[pos + 2]) << 16 |
                 uint32_t(b[pos + 3]) << 24;
    pos += 4;
    return v;
  }
  uint8_t u8() {
    need(1);
    return b[pos++];
  }
  std::string str(size_t n) {
    need(n);
    std::string s(reinterpret_cast<const char*>(b.data() + pos), n);
    pos += n;
    return s;
  }
};

/// Canonical (name, shape) list for a spec; mirrors model_state_tensors.
std::vector<std::pair<std::string, std::vector<uint32_t>>> expected_records(
    const ArchitectureSpec& spec) {
  std::vector<std::pair<std::string, std::vector<uint32_t>>> out;
  for (int l = 0; l < spec.n_layers; ++l) {
    uint32_t oc = uint32_t(spec.channels);
    uint32_t ic = uint32_t(l == 0 ? spec.input_channels : spec.channels);
    std::string p = "layer" + std::to_string(l + 1) + ".";
    out.push_back({p + "conv_w", {oc, ic, uint32_t(spec.kernel_h), uint32_t(spec.kernel_w)}});
    out.push_back({p + "conv_b", {oc}});
    out.push_back({p + "bn_gamma", {oc}});
    out.push_back({p + "bn_beta", {oc}});
    out.push_back({p + "bn_running_mean", {oc}});
    out.push_back({p + "bn_running_var", {oc}});
  }
  out.push_back({"head.w", {uint32_t(spec.n_outputs), uint32_t(spec.channels)}});
  out.push_back({"head.b", {uint32_t(spec.n_outputs)}});
  return out;
}

std::vector<std::vector<float>*> model_tensor_slots(ModelState& m) {
  std::vector<std::vector<float>*> out;
  for (auto& lp : m.layers) {
    out.push_back(&lp.conv_w.data);
    out.push_back(&lp.conv_b);
    out.push_back(&lp.bn_gamma);
    out.push_back(&lp.bn_beta);
    out.push_back(&lp.bn_running_mean);
    out.push_back(&lp.bn_running_var);
  }
  out.push_back(&m.head_w);
  out.push_back(&m.head_b);
  return out;
}

}  // namespace

uint32_t crc32_ieee(const uint8_t* data, size_t n, uint32_t crc) {
  static const std::array<uint32_t, 256> table = make_crc_table();
  uint32_t c = crc ^ 0xFFFFFFFFu;
  for (size_t i = 0; i < n; ++i) c = table[(c ^ data[i]) & 0xFFu] ^ (c >> 8);
  return c ^ 0xFFFFFFFFu;
}

std::vector<uint8_t> encode_container(const WeightContainer& c) {
  std::vector<uint8_t> out;
  out.insert(out.end(), kMagic, kMagic + 4);
  put_u16(out, kVersion);
  put_u32(out, uint32_t(c.metadata_json.size()));
  out.insert(out.end(), c.metadata_json.begin(), c.metadata_json.end());
  put_u32(out, uint32_t(c.records.size()));
  for (const auto& r : c.records) {
    if (r.name.size() > 0xFFFF) raise(Errc::invalid_argument, "record name too long");
    size_t count = 1;
    for (uint32_t e : r.shape) count *= e;
    if (count != r.data.size()) raise(Errc::shape_mismatch, "record payload vs shape: " + r.name);
    put_u16(out, uint16_t(r.name.size()));
    out.insert(out.end(), r.name.begin(), r.name.end());
    out.push_back(0);  // dtype f32
    out.push_back(uint8_t(r.shape.size()));
    for (uint32_t e : r.shape) put_u32(out, e);
    for (float f : r.data) {
      uint32_t u;
      std::memcpy(&u, &f, 4);
      put_u32(out, u);
    }
  }
  put_u32(out, crc32_ieee(out.data(), out.size()));
  return out;
}

WeightContainer decode_container(const std::vector<uint8_t>& bytes) {
  if (bytes.size() < 4 || std::memcmp(bytes.data(), kMagic, 4) != 0)
    raise(Errc::bad_magic, "not a CNF1 file");
  if (bytes.size() < 14) raise(Errc::checksum_mismatch, "file shorter than minimal container");
  Reader r{bytes};
  r.pos = 4;
  uint16_t version = r.u16();
  if (version != kVersion) raise(Errc::bad_version, "version " + std::to_string(version));
  uint32_t stored = uint32_t(bytes[bytes.size() - 4]) | uint32_t(bytes[bytes.size() - 3]) << 8 |
                    uint32_t(bytes[bytes.size() - 2]) << 16 | uint32_t(bytes[bytes.size() - 1]) << 24;
  if (crc32_ieee(bytes.data(), bytes.size() - 4) != stored)
    raise(Errc::checksum_mismatch, "CRC-32 check failed");

  WeightContainer c;
  uint32_t meta_len = r.u32();
  c.metadata_json = r.str(meta_len);
  uint32_t n_records = r.u32();
  c.records.reserve(n_records);
  for (uint32_t i = 0; i < n_records; ++i) {
    TensorRecord rec;
    uint16_t name_len = r.u16();
    rec.name = r.str(name_len);
    uint8_t dtype = r.u8();
    if (dtype != 0) raise(Errc::record_mismatch, "unknown dtype in " + rec.name);
    uint8_t ndim = r.u8();
    size_t count = 1;
    for (uint8_t d = 0; d < ndim; ++d) {
      rec.shape.push_back(r.u32());
      count *= rec.shape.back();
    }
    rec.data.resize(count);
    r.need(count * 4);
    for (size_t k = 0; k < count; ++k) {
      uint32_t u = uint32_t(bytes[r.pos]) | uint32_t(bytes[r.pos + 1]) << 8 |
                   uint32_t(bytes[r.pos + 2]) << 16 | uint32_t(bytes[r.pos + 3]) << 24;
      r.pos += 4;
      float f;
      std::memcpy(&f, &u, 4);
      rec.data[k] = f;
    }
    c.records.push_back(std::move(rec));
  }
  if (r.pos != bytes.size() - 4)
    raise(Errc::record_mismatch, "trailing bytes after last record");
  return c;
}

void save_container(const std::string& path, const WeightContainer& c) {
  std::vector<uint8_t> bytes = encode_container(c);
  std::ofstream out(path, std::ios::binary);
  if (!out) raise(Errc::io, "cannot write " + path);
  out.write(reinterpret_cast<const char*>(bytes.data()), std::streamsize(bytes.size()));
  if (!out) raise(Errc::io, "write failed: " + path);
}

WeightContainer load_container(const std::string& path) {
  if (!std::filesystem::exists(path)) raise(Errc::file_not_found, path);
  std::ifstream in(path, std::ios::binary);
  if (!in) raise(Errc::io, "cannot open " + path);
  std::vector<uint8_t> bytes((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
  return decode_container(bytes);
}

std::string arch_spec_to_json(const ArchitectureSpec& spec) {
  nlohmann::json j;
  j["n_layers"] = spec.n_layers;
  j["channels"] = spec.channels;
  j["kernel"] = {spec.kernel_h, spec.kernel_w};
  auto pools = nlohmann::json::array();
  for (auto [ph, pw] : spec.pool_schedule) pools.push_back({ph, pw});
  j["pool_schedule"] = pools;
  j["input_shape"] = {spec.input_channels, spec.input_h, spec.input_w};
  j["n_outputs"] = spec.n_outputs;
  return j.dump();
}

ArchitectureSpec arch_spec_from_json(const std::string& json_text) {
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(json_text);
  } catch (const nlohmann::json::exception& e) {
    raise(Errc::parse_error, std::string("spec json: ") + e.what());
  }
  ArchitectureSpec spec;
  try {
    if (j.contains("n_layers")) spec.n_layers = j["n_layers"].get<int>();
    if (j.contains("channels")) spec.channels = j["channels"].get<int>();
    if (j.contains("kernel")) {
      spec.kernel_h = j["kernel"][0].get<int>();
      spec.kernel_w = j["kernel"][1].get<int>();
    }
    if (j.contains("pool_schedule")) {
      spec.pool_schedule.clear();
      for (const auto& p : j["pool_schedule"])
        spec.pool_schedule.emplace_back(p[0].get<int>(), p[1].get<int>());
    }
    if (j.contains("input_shape")) {
      spec.input_channels = j["input_shape"][0].get<int>();
      spec.input_h = j["input_shape"][1].get<int>();
      spec.input_w = j["input_shape"][2].get<int>();
    }
    if (j.contains("n_outputs")) spec.n_outputs = j["n_outputs"].get<int>();
  } catch (const nlohmann::json::exception& e) {
    raise(Errc::parse_error, std::string("spec json fields: ") + e.what());
  }
  spec.validate();
  return spec;
}

void save_model(const ModelState& model, const std::string& path, const ModelMeta& meta) {
  nlohmann::json j;
  j["format"] = "cnf1-model";
  j["spec"] = nlohmann::json::parse(arch_spec_to_json(model.spec));
  j["source"] = meta.source;
  j["seed"] = meta.seed;
  j["extra"] = nlohmann::json::parse(meta.extra_json);

  WeightContainer c;
  c.metadata_json = j.dump();
  auto expected = expected_records(model.spec);
  auto slots = model_tensor_slots(const_cast<ModelState&>(model));
  for (size_t i = 0; i < expected.size(); ++i) {
    TensorRecord rec;
    rec.name = expected[i].first;
    rec.shape = expected[i].second;
    rec.data = *slots[i];
    c.records.push_back(std::move(rec));
  }
  save_container(path, c);
}

ModelState load_model(const std::string& path, ModelMeta* meta_out) {
  WeightContainer c = load_container(path);
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(c.metadata_json);
  } catch (const nlohmann::json::exception& e) {
    raise(Errc::record_mismatch, std::string("metadata json: ") + e.what());
  }
  if (!j.contains("spec")) raise(Errc::record_mismatch, "metadata lacks architecture spec");
  ArchitectureSpec spec = arch_spec_from_json(j["spec"].dump());

  auto expected = expected_records(spec);
  if (c.records.size() != expected.size()) {
    raise(Errc::record_mismatch, "record count " + std::to_string(c.records.size()) +
                                     ", expected " + std::to_string(expected.size()));
  }
  ModelState m = make_model<float>(spec);
  auto slots = model_tensor_slots(m);
  for (size_t i = 0; i < expected.size(); ++i) {
    const auto& rec = c.records[i];
    if (rec.name != expected[i].first)
      raise(Errc::record_mismatch, "record " + rec.name + ", expected " + expected[i].first);
    if (rec.shape != expected[i].second)
      raise(Errc::record_mismatch, "shape mismatch in " + rec.name);
    *slots[i] = rec.data;
  }
  if (meta_out) {
    meta_out->source = j.value("source", std::string("unspecified"));
    meta_out->seed = j.value("seed", uint64_t(0));
    meta_out->extra_json = j.contains("extra") ? j["extra"].dump() : "{}";
  }
  return m;
}

}  // namespace cnf
