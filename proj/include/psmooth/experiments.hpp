#pragma once

#include "psmooth/core.hpp"

#include <json.hpp>

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

namespace psmooth {

inline constexpr int kSchemaVersion = 1;
inline constexpr const char* kPsmoothVersion = "0.1.0";
/// Random CPLQ trial t of check-partly-smooth uses RandomStream(seed, t, kCplqInstanceTag).
inline constexpr std::uint32_t kCplqInstanceTag = 0x63706c71u;

/// One in-config check: `value` compared against `threshold` with `op`.
struct Assertion {
  std::string name;
  bool passed = false;
  double value = 0.0;
  double threshold = 0.0;
  std::string op;  // "<=", ">=", "==", "in"
  std::string detail;
};

struct RunOverrides {
  std::optional<std::uint64_t> seed;
  std::optional<int> jobs;
  std::optional<std::filesystem::path> out_dir;
};

struct ExperimentResult {
  int exit_code = 0;  // 0 all assertions pass, 1 otherwise
  nlohmann::json summary;
  std::vector<Assertion> assertions;
  std::vector<std::filesystem::path> files;
};

/// Validates a config, fills in defaults and applies overrides. Unknown keys
/// and out-of-range values raise ConfigInvalid. Idempotent.
nlohmann::json normalize_config(const nlohmann::json& config, const RunOverrides& overrides = {});

/// Runs a config, writing CSV data files and summary.json into the output
/// directory. Library errors during the run become failed assertions.
ExperimentResult run_experiment(const nlohmann::json& config, const RunOverrides& overrides = {});

nlohmann::json load_config(const std::filesystem::path& path);

/// Subcommands understood by run_experiment.
const std::vector<std::string>& subcommands();

/// RFC 4180 field quoting.
std::string csv_field(const std::string& s);
/// %.17g, with inf, -inf and nan spelled out.
std::string format_double(double x);

}  // namespace psmooth
