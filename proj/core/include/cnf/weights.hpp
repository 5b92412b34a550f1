#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "cnf/nn.hpp"

namespace cnf {

// CNF1 container, all integers little-endian:
//
//   offset 0   magic "CNF1" (4 ASCII bytes)
//   offset 4   version        u16 (currently 1)
//   offset 6   metadata_len   u32
//   offset 10  metadata       UTF-8 JSON, metadata_len bytes
//   then       record_count   u32
//   per record:
//              name_len  u16
//              name      UTF-8, name_len bytes
//              dtype     u8  (0 = f32)
//              ndim      u8
//              extents   ndim x u32
//              payload   product(extents) x 4 bytes, IEEE-754 f32 LE
//   end        crc32     u32, IEEE CRC-32 of every preceding byte
//
// See docs/cnf1_format.md for an annotated hex dump.

struct TensorRecord {
  std::string name;
  std::vector<uint32_t> shape;
  std::vector<float> data;
};

struct WeightContainer {
  std::string metadata_json;
  std::vector<TensorRecord> records;
};

/// IEEE CRC-32 (reflected 0xEDB88320), chainable.
uint32_t crc32_ieee(const uint8_t* data, size_t n, uint32_t crc = 0);

/// Serialize a container to its canonical byte string.
std::vector<uint8_t> encode_container(const WeightContainer& c);

/// Parse bytes; validates magic, version and checksum (in that order).
/// Errors: bad_magic, bad_version, checksum_mismatch, record_mismatch.
WeightContainer decode_container(const std::vector<uint8_t>& bytes);

void save_container(const std::string& path, const WeightContainer& c);
WeightContainer load_container(const std::string& path);

/// Model file provenance, stored in the metadata JSON next to the
/// architecture spec.
struct ModelMeta {
  std::string source = "unspecified";  // "trained" | "random" | ...
  uint64_t seed = 0;
  std::string extra_json = "{}";  // free-form provenance (training config etc.)
};

std::string arch_spec_to_json(const ArchitectureSpec& spec);
ArchitectureSpec arch_spec_from_json(const std::string& json_text);

/// Save a full model in canonical record order (per layer: conv_w, conv_b,
/// bn_gamma, bn_beta, bn_running_mean, bn_running_var; then head.w, head.b).
/// Two saves of the same state produce byte-identical files.
void save_model(const ModelState& model, const std::string& path, const ModelMeta& meta = {});

/// Load and validate a model file: magic, version, checksum, then records
/// against the spec declared in the metadata (missing, extra or wrongly
/// shaped records raise record_mismatch).
ModelState load_model(const std::string& path, ModelMeta* meta_out = nullptr);

}  // namespace cnf
