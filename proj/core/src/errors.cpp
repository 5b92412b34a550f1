#include "cnf/errors.hpp"

namespace cnf {

const char* errc_name(Errc c) {
  switch (c) {
    case Errc::io: return "io";
    case Errc::file_not_found: return "file_not_found";
    case Errc::malformed_wav: return "malformed_wav";
    case Errc::unsupported_codec: return "unsupported_codec";
    case Errc::invalid_argument: return "invalid_argument";
    case Errc::shape_mismatch: return "shape_mismatch";
    case Errc::empty_input: return "empty_input";
    case Errc::bad_magic: return "bad_magic";
    case Errc::bad_version: return "bad_version";
    case Errc::checksum_mismatch: return "checksum_mismatch";
    case Errc::record_mismatch: return "record_mismatch";
    case Errc::single_class: return "single_class";
    case Errc::non_finite: return "non_finite";
    case Errc::no_convergence: return "no_convergence";
    case Errc::not_fitted: return "not_fitted";
    case Errc::parse_error: return "parse_error";
  }
  return "unknown";
}

Error::Error(Errc kind, const std::string& msg)
    : std::runtime_error(std::string(errc_name(kind)) + ": " + msg), kind_(kind) {}

void raise(Errc kind, const std::string& msg) { throw Error(kind, msg); }

}  // namespace cnf
