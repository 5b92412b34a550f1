#pragma once

#include <stdexcept>
#include <string>

namespace cnf {

/// Error categories. Tests match on these, so the mapping from failure to
/// category is part of the contract of every operation that throws.
enum class Errc {
  io,                  // open/read/write failure
  file_not_found,      // path does not exist
  malformed_wav,       // RIFF/WAVE structure is broken or truncated
  unsupported_codec,   // valid WAV but not PCM16 / float32
  invalid_argument,    // precondition violation on a parameter
  shape_mismatch,      // tensor/matrix dimensions disagree
  empty_input,         // operation needs at least one element
  bad_magic,           // weight file does not start with CNF1
  bad_version,         // weight file version unknown
  checksum_mismatch,   // weight file CRC-32 check failed
  record_mismatch,     // weight file records disagree with declared spec
  single_class,        // classifier training needs two classes
  non_finite,          // NaN/Inf in inputs where finite values are required
  no_convergence,      // solver hit its iteration cap
  not_fitted,          // transform applied before fit
  parse_error,         // CSV/JSON/combo-name syntax error
};

const char* errc_name(Errc c);

class Error : public std::runtime_error {
 public:
  Error(Errc kind, const std::string& msg);
  Errc kind() const { return kind_; }

 private:
  Errc kind_;
};

[[noreturn]] void raise(Errc kind, const std::string& msg);

}  // namespace cnf
