// Resolved run configuration: per-subcommand defaults, overlaid by a JSON
// config file, overlaid by command-line flags.

#ifndef RESRL_TOOLS_RUN_CONFIG_HPP_
#define RESRL_TOOLS_RUN_CONFIG_HPP_

#include <stdexcept>
#include <string>

#include <json.hpp>

#include "resrl/gating_config.hpp"
#include "resrl/report.hpp"
#include "resrl/toy/train.hpp"

namespace resrl::cli {

using Json = nlohmann::ordered_json;

/// Bad config file, unknown key, wrong value type or invalid flag value.
class ConfigError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// {seed, output_dir, [gating], <command>} with every key at its default.
/// output_dir defaults to $RESRL_OUTPUT_DIR, else ".".
Json default_config(const std::string& command);

/// Overlays `file` onto `base`. Every section and key of the file must
/// exist in base with a compatible type. Sections the command does not use
/// are checked against their own defaults and then dropped.
void merge_config(Json& base, const Json& file);

/// Sets base[section][key] (or base[key] for an empty section) from a flag
/// string, typed by the existing value.
void set_from_string(Json& base, const std::string& section, const std::string& key,
                     const std::string& value);

GatingConfig gating_from(const Json& cfg);
toy::ToyConfig toy_from(const Json& cfg);
TheoryReportOptions verify_from(const Json& cfg);
BenchOptions bench_options_from(const Json& cfg);

}  // namespace resrl::cli

#endif  // RESRL_TOOLS_RUN_CONFIG_HPP_
