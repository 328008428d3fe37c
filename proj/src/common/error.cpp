#include "styleshift/error.hpp"

namespace styleshift {

namespace {
std::string join_lines(const std::vector<std::string>& lines) {
  std::string out;
  for (const auto& line : lines) {
    if (!out.empty()) out += '\n';
    out += line;
  }
  return out;
}
}  // namespace

RecordError::RecordError(std::string code, std::vector<std::string> diagnostics)
    : Error(std::move(code), join_lines(diagnostics)),
      diagnostics_(std::move(diagnostics)) {}

}  // namespace styleshift
