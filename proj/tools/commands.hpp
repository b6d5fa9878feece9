#pragma once

#include <stdexcept>

#include <json.hpp>

namespace vstar::cli {

/// Configuration and argument problems; mapped to exit code 2.
struct UsageError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

// Each subcommand runs from a resolved canonical JSON config; the CLI layer
// builds that config from flags and an optional --config file, replay feeds
// back the config recorded in a manifest. Unknown keys are rejected.

int run_generate_data(const nlohmann::json& cfg);
int run_train(const nlohmann::json& cfg);
int run_sample(const nlohmann::json& cfg);
int run_nurse(const nlohmann::json& cfg);
int run_ablate(const nlohmann::json& cfg);
int run_extract(const nlohmann::json& cfg);
int run_analyze(const nlohmann::json& cfg);
int run_noise_opt(const nlohmann::json& cfg);
int run_synopsis(const nlohmann::json& cfg);
int run_replay(const nlohmann::json& cfg);

/// Maps a subcommand name to its runner; empty result for unknown names.
using CommandFn = int (*)(const nlohmann::json&);
CommandFn find_command(const std::string& name);

}  // namespace vstar::cli
