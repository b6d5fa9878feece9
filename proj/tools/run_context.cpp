#include "run_context.hpp"

#include <algorithm>
#include <chrono>
#include <stdexcept>

namespace vstar::cli {

std::uint64_t hash_file(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw std::runtime_error("cannot hash missing file: " + path.string());
    std::uint64_t h = 0xCBF29CE484222325ULL;
    char buf[4096];
    while (in.read(buf, sizeof(buf)) || in.gcount() > 0) {
        for (std::streamsize i = 0; i < in.gcount(); ++i) {
            h ^= static_cast<unsigned char>(buf[i]);
            h *= 0x100000001B3ULL;
        }
        if (!in) break;
    }
    return h;
}

std::string hash_hex(std::uint64_t h) {
    char buf[17];
    std::snprintf(buf, sizeof(buf), "%016llx", static_cast<unsigned long long>(h));
    return buf;
}

RunContext::RunContext(std::string subcommand, const std::filesystem::path& out_dir)
    : subcommand_(std::move(subcommand)), out_dir_(out_dir) {
    std::filesystem::create_directories(out_dir_);
    auto now = std::chrono::system_clock::now();
    auto secs = std::chrono::duration_cast<std::chrono::seconds>(now.time_since_epoch()).count();
    started_at_ = std::to_string(secs);
}

void RunContext::add_input(const std::string& role, const std::filesystem::path& path) {
    nlohmann::json entry;
    entry["role"] = role;
    entry["path"] = path.string();
    if (std::filesystem::is_directory(path)) {
        std::vector<std::filesystem::path> files;
        for (const auto& e : std::filesystem::recursive_directory_iterator(path))
            if (e.is_regular_file()) files.push_back(e.path());
        std::sort(files.begin(), files.end());
        std::uint64_t h = 0xCBF29CE484222325ULL;
        for (const auto& f : files) {
            std::uint64_t fh = hash_file(f);
            h ^= fh;
            h *= 0x100000001B3ULL;
        }
        entry["hash"] = hash_hex(h);
        entry["files"] = files.size();
    } else {
        entry["hash"] = hash_hex(hash_file(path));
    }
    inputs_.push_back(std::move(entry));
}

void RunContext::add_output(const std::filesystem::path& path) {
    outputs_.push_back(std::filesystem::relative(path, out_dir_).string());
}

void RunContext::add_outputs_under(const std::filesystem::path& dir) {
    std::vector<std::string> found;
    for (const auto& e : std::filesystem::recursive_directory_iterator(dir))
        if (e.is_regular_file() && e.path().filename() != "manifest.json")
            found.push_back(std::filesystem::relative(e.path(), out_dir_).string());
    std::sort(found.begin(), found.end());
    for (auto& f : found)
        if (std::find(outputs_.begin(), outputs_.end(), f) == outputs_.end())
            outputs_.push_back(std::move(f));
}

void RunContext::write() {
    nlohmann::json j;
    j["tool"] = "vstar";
    j["version"] = kToolVersion;
    j["subcommand"] = subcommand_;
    j["started_at_unix"] = started_at_;
    j["config"] = config_;
    j["inputs"] = inputs_;
    nlohmann::json outs = nlohmann::json::array();
    std::sort(outputs_.begin(), outputs_.end());
    for (const auto& o : outputs_) {
        nlohmann::json e;
        e["path"] = o;
        e["hash"] = hash_hex(hash_file(out_dir_ / o));
        outs.push_back(std::move(e));
    }
    j["outputs"] = outs;
    std::ofstream out(out_dir_ / "manifest.json", std::ios::trunc);
    if (!out) throw std::runtime_error("cannot write manifest.json in " + out_dir_.string());
    out << j.dump(2) << "\n";
}

}  // namespace vstar::cli
