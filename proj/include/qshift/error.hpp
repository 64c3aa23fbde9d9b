#pragma once

#include <stdexcept>
#include <string>

namespace qshift {

enum class ErrorKind {
  invalid_parameter,
  invalid_circuit,
  invalid_input,
  capability_exceeded,
  missing_record,
  io,
  schema_version,
  singular_matrix,
  undefined_r_squared,
  missing_calibration,
  missing_alpha,
  empty_report,
  degenerate_fit,
  bad_config,
};

inline const char* to_string(ErrorKind kind) {
  switch (kind) {
    case ErrorKind::invalid_parameter: return "invalid parameter";
    case ErrorKind::invalid_circuit: return "invalid circuit";
    case ErrorKind::invalid_input: return "invalid input";
    case ErrorKind::capability_exceeded: return "capability exceeded";
    case ErrorKind::missing_record: return "missing record";
    case ErrorKind::io: return "i/o failure";
    case ErrorKind::schema_version: return "schema version mismatch";
    case ErrorKind::singular_matrix: return "singular matrix";
    case ErrorKind::undefined_r_squared: return "undefined R^2";
    case ErrorKind::missing_calibration: return "missing calibration";
    case ErrorKind::missing_alpha: return "missing alpha";
    case ErrorKind::empty_report: return "empty report";
    case ErrorKind::degenerate_fit: return "degenerate fit";
    case ErrorKind::bad_config: return "bad config";
  }
  return "unknown";
}

class Error : public std::runtime_error {
 public:
  Error(ErrorKind kind, const std::string& what)
      : std::runtime_error(std::string(to_string(kind)) + ": " + what), kind_(kind) {}

  ErrorKind kind() const noexcept { return kind_; }

 private:
  ErrorKind kind_;
};

}  // namespace qshift
