#pragma once

#include <cstdint>
#include <map>
#include <string>
#include <vector>

namespace ctdr {

/// Flat dotted-key config: one `key=value` per line, `#` comments, blank
/// lines ignored. Keys and values are trimmed.
struct ParsedConfig {
  std::map<std::string, std::string> values;

  bool has(const std::string& key) const { return values.count(key) > 0; }
};

ParsedConfig parse_config_text(const std::string& text);
ParsedConfig parse_config_file(const std::string& path);

/// 64-bit digest of the canonicalized config (sorted `key=value` lines), so
/// whitespace and key order do not change it.
std::uint64_t config_digest(const ParsedConfig& config);

/// Written to manifest.json next to every command's outputs. The wall time is
/// the only field that varies between identical runs.
struct RunManifest {
  std::string command;
  std::uint64_t config_digest = 0;
  std::string tool_version;
  std::uint64_t master_seed = 0;
  double wall_time_seconds = 0.0;
  std::vector<std::string> outputs;
};

/// Entry point used by the binary and by tests; `args` excludes argv[0].
/// Exit codes: 0 success, 2 config error, 3 scenario or internal error.
/// Errors are printed to stderr with the prefix `CTDR-E<code>:`.
int run_cli(const std::vector<std::string>& args);

}  // namespace ctdr
