#pragma once

#include <cstddef>
#include <cstdint>
#include <iosfwd>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "condense/engine.hpp"
#include "condense/solvability.hpp"

namespace condense::cli {

inline constexpr std::string_view kToolVersion = "0.1.0";
inline constexpr int kSchemaVersion = 1;

enum ExitCode : int { kOk = 0, kValidation = 2, kIo = 3, kRuntime = 4, kCap = 5 };

struct Diagnostic {
  std::size_t line = 0;  // 1-based; 0 when no position applies
  std::string message;
  std::string str() const;
};

struct CapacitySpec {
  std::string target = "identity";
  std::uint32_t alphabet = 2;
  std::size_t max_k = 1;
  std::size_t max_l = 1;
  solvability::SearchMode mode = solvability::SearchMode::General;
  double cap = 1e7;
};

// A scenario file after schema and graph validation. scenario.application
// is only meaningful when has_application is set.
struct ScenarioFile {
  engine::Scenario scenario;
  bool has_application = false;
  std::optional<std::string> output;
  std::optional<CapacitySpec> capacity;
};

struct ParseResult {
  std::optional<ScenarioFile> file;
  std::vector<Diagnostic> diagnostics;
};

// Parses and validates a YAML scenario. Unknown keys, wrong types, bad
// values and graph errors all become line-addressed diagnostics.
ParseResult parse_scenario(std::string_view text);

// Canonical, replayable echo of a resolved scenario: explicit topology,
// every key spelled out, plus tool_version and the effective seed.
std::string manifest_yaml(const ScenarioFile& file);

// Entry point of the condense tool; args exclude the program name.
int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

}  // namespace condense::cli
