#pragma once

#include <cstdint>
#include <stdexcept>
#include <string>
#include <string_view>

namespace gafnet {

enum class Errc {
  input_too_short,
  shape_mismatch,
  invalid_band,
  unsupported_format,
  degenerate_reference,
  empty_mask,
  azimuth_unavailable,
  noise_source_too_short,
  degenerate_mix,
  invalid_argument,
  io_error,
  config_mismatch,
  format_error,
  invariant_violation,
};

inline std::string_view errc_name(Errc code) {
  switch (code) {
    case Errc::input_too_short: return "InputTooShort";
    case Errc::shape_mismatch: return "ShapeMismatch";
    case Errc::invalid_band: return "InvalidBand";
    case Errc::unsupported_format: return "UnsupportedFormat";
    case Errc::degenerate_reference: return "DegenerateReference";
    case Errc::empty_mask: return "EmptyMask";
    case Errc::azimuth_unavailable: return "AzimuthUnavailable";
    case Errc::noise_source_too_short: return "NoiseSourceTooShort";
    case Errc::degenerate_mix: return "DegenerateMix";
    case Errc::invalid_argument: return "InvalidArgument";
    case Errc::io_error: return "IoError";
    case Errc::config_mismatch: return "ConfigMismatch";
    case Errc::format_error: return "FormatError";
    case Errc::invariant_violation: return "InvariantViolation";
  }
  return "Unknown";
}

// Process exit code for the CLI: 2 input error, 3 format error, 4 internal invariant violation.
inline int exit_code_for(Errc code) {
  switch (code) {
    case Errc::config_mismatch:
    case Errc::format_error:
      return 3;
    case Errc::invariant_violation:
      return 4;
    default:
      return 2;
  }
}

class Error : public std::runtime_error {
 public:
  Error(Errc code, const std::string& what)
      : std::runtime_error(std::string(errc_name(code)) + ": " + what), code_(code) {}

  Errc code() const noexcept { return code_; }

 private:
  Errc code_;
};

// Corrupt or truncated binary file; carries the byte offset at which parsing failed.
class FormatError : public Error {
 public:
  FormatError(std::uint64_t offset, const std::string& what)
      : Error(Errc::format_error, what + " (at byte offset " + std::to_string(offset) + ")"),
        offset_(offset) {}

  std::uint64_t offset() const noexcept { return offset_; }

 private:
  std::uint64_t offset_;
};

[[noreturn]] inline void fail(Errc code, const std::string& what) { throw Error(code, what); }

inline void require(bool condition, Errc code, const std::string& what) {
  if (!condition) fail(code, what);
}

}  // namespace gafnet
