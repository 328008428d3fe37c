#pragma once

#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

namespace styleshift {

/// Base exception. `code` is a short machine-parsable identifier such as
/// "manifest.malformed" that the CLI prints verbatim.
class Error : public std::runtime_error {
 public:
  Error(std::string code, const std::string& message)
      : std::runtime_error(message), code_(std::move(code)) {}

  const std::string& code() const { return code_; }

 private:
  std::string code_;
};

/// An error that aggregates per-record diagnostics (manifests, pairing
/// tables). what() lists every diagnostic, one per line.
class RecordError : public Error {
 public:
  RecordError(std::string code, std::vector<std::string> diagnostics);

  const std::vector<std::string>& diagnostics() const { return diagnostics_; }

 private:
  std::vector<std::string> diagnostics_;
};

}  // namespace styleshift
