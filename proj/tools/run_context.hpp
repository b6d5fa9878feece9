#pragma once

#include <cstdint>
#include <filesystem>
#include <fstream>
#include <string>
#include <vector>

#include <json.hpp>

namespace vstar::cli {

inline constexpr const char* kToolVersion = "0.1.0";

// Exit codes shared by every subcommand.
inline constexpr int kExitOk = 0;
inline constexpr int kExitUsage = 2;
inline constexpr int kExitRuntime = 3;

/// FNV-1a 64-bit over a file's bytes; manifests use it to pin inputs.
std::uint64_t hash_file(const std::filesystem::path& path);

std::string hash_hex(std::uint64_t h);

/// Collects what a run consumed and produced; written once as manifest.json.
/// Timestamps live only here, keeping every other output byte-deterministic.
class RunContext {
public:
    RunContext(std::string subcommand, const std::filesystem::path& out_dir);

    void set_config(nlohmann::json resolved) { config_ = std::move(resolved); }
    void add_input(const std::string& role, const std::filesystem::path& path);
    void add_output(const std::filesystem::path& path);

    /// Registers every regular file under out_dir (minus the manifest).
    void add_outputs_under(const std::filesystem::path& dir);

    void write();

    const std::filesystem::path& out_dir() const { return out_dir_; }

private:
    std::string subcommand_;
    std::filesystem::path out_dir_;
    nlohmann::json config_;
    nlohmann::json inputs_ = nlohmann::json::array();
    std::vector<std::string> outputs_;
    std::string started_at_;
};

}  // namespace vstar::cli
