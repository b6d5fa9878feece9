#pragma once

#include <optional>
#include <string>

#include "vstar/vsp.hpp"

namespace vstar {

/// Instruction sent to the LLM, with {PROMPT} substituted by the user prompt.
extern const char* const kSynopsisInstructionTemplate;

std::string render_synopsis_instruction(const std::string& prompt);

struct SynopsisClientConfig {
    std::string endpoint;       // full URL; empty = not configured
    std::string api_key;        // bearer token, may be empty
    std::string model = "gpt-4";
    std::optional<std::string> fixture_path;  // JSON {"stages": [...]}; bypasses the network
    bool fallback_to_single_stage = true;
    int timeout_seconds = 30;

    /// Reads endpoint/api key from VSTAR_LLM_ENDPOINT / VSTAR_LLM_API_KEY.
    static SynopsisClientConfig from_env();
};

class SynopsisError : public std::runtime_error {
public:
    enum class Kind { not_configured, network, unparseable, empty_stages };
    SynopsisError(Kind kind, const std::string& msg) : std::runtime_error(msg), kind_(kind) {}
    Kind kind() const { return kind_; }

private:
    Kind kind_;
};

/// Splits a prompt into staged sub-prompts via a fixture file or a
/// chat-completion endpoint. Numbered, bulleted or bare-line responses are
/// accepted. On failure, falls back to a single-stage synopsis of the
/// original prompt when enabled, otherwise throws a SynopsisError.
Synopsis request_synopsis(const std::string& prompt, const SynopsisClientConfig& config);

/// Stage-list extraction from raw LLM output; exposed for tests.
std::vector<std::string> parse_stage_lines(const std::string& content);

}  // namespace vstar
